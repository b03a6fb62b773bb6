import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avsum.errors import ShapeError, ValidationError
from avsum.evalkit import (
    DatasetReport,
    VideoScore,
    delta_f1,
    face_recall,
    importance_to_keyshots,
    knapsack,
    multi_rater_f1,
    precision_recall_f1,
    render_table,
    score_video,
    top_l_scores,
)
from avsum.evalkit.plots import plot_delta_curves, plot_kld_bars, plot_scatter


def prf_oracle(s, s_hat):
    tp = sum(1 for a, b in zip(s, s_hat) if a and b)
    fp = sum(1 for a, b in zip(s, s_hat) if b and not a)
    fn = sum(1 for a, b in zip(s, s_hat) if a and not b)
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return p, r, (2 * p * r / (p + r) if p + r else 0.0)


# ---------------------------------------------------------------- metrics

def test_prf_example():
    assert precision_recall_f1([1, 1, 0, 0], [1, 0, 1, 0]) == (0.5, 0.5, 0.5)


def test_prf_conventions():
    assert precision_recall_f1([1, 0, 1], [0, 0, 0]) == (0.0, 0.0, 0.0)
    assert precision_recall_f1([0, 0, 0], [1, 0, 0]) == (0.0, 0.0, 0.0)
    assert precision_recall_f1([1, 1], [1, 1]) == (1.0, 1.0, 1.0)
    with pytest.raises(ShapeError):
        precision_recall_f1([1, 0], [1])


def test_face_recall_example():
    # three summary frames, two are faces, one of those selected
    assert face_recall([1, 1, 1, 0], [1, 0, 0, 1], [1, 1, 0, 1]) == pytest.approx(1 / 3)


def test_face_recall_bounded_by_recall():
    rng = np.random.default_rng(0)
    for _ in range(200):
        s, sh, d = (rng.integers(0, 2, 30) for _ in range(3))
        if s.sum() == 0:
            continue
        assert face_recall(s, sh, d) <= precision_recall_f1(s, sh)[1] + 1e-15
        assert face_recall(s, sh, np.ones(30)) == precision_recall_f1(s, sh)[1]


def test_face_recall_empty_truth():
    assert face_recall([0, 0], [1, 1], [1, 1]) == 0.0


@settings(max_examples=300)
@given(bits=st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=60))
def test_prf_matches_oracle(bits):
    s = [int(a) for a, _ in bits]
    sh = [int(b) for _, b in bits]
    got = precision_recall_f1(s, sh)
    want = prf_oracle(s, sh)
    assert all(abs(a - b) <= 1e-12 for a, b in zip(got, want))
    assert all(0 <= v <= 1 for v in got)
    assert precision_recall_f1(sh, s)[2] == pytest.approx(got[2], abs=1e-15)


def test_multi_rater_mean_and_max():
    s_hat = [1, 1, 0, 0]
    raters = [[1, 1, 0, 0], [0, 0, 1, 1]]
    assert multi_rater_f1(s_hat, raters, "mean") == 0.5
    assert multi_rater_f1(s_hat, raters, "max") == 1.0
    with pytest.raises(ValidationError):
        multi_rater_f1(s_hat, raters, "median")
    with pytest.raises(ValidationError):
        multi_rater_f1(s_hat, [])


# ---------------------------------------------------------------- knapsack

def knapsack_oracle(values, weights, capacity):
    """Enumerate every subset; exact value ties go to the earliest-item subset."""
    best, best_key = None, None
    n = len(values)
    for mask in itertools.product([1, 0], repeat=n):  # lexicographically greatest first
        w = sum(wi for wi, m in zip(weights, mask) if m)
        if w > capacity:
            continue
        v = sum((Fraction(vi) for vi, m in zip(values, mask) if m), Fraction(0))
        if best is None or v > best:
            best, best_key = v, mask
    return [i for i, m in enumerate(best_key) if m]


def test_knapsack_example():
    assert knapsack([0.9, 0.8, 0.2, 0.1], [4, 4, 4, 4], 8) == [0, 1]


def test_knapsack_tie_prefers_earlier():
    assert knapsack([0.5, 0.5, 0.5], [2, 2, 2], 2) == [0]
    assert knapsack([0.3, 0.2, 0.5], [1, 1, 2], 2) == [0, 1]


def test_knapsack_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(60):
        n = int(rng.integers(1, 10))
        values = rng.random(n).round(int(rng.integers(1, 4))).tolist()
        weights = rng.integers(1, 8, n).tolist()
        cap = int(rng.integers(0, sum(weights) + 1))
        assert knapsack(values, weights, cap) == knapsack_oracle(values, weights, cap)


def test_keyshots_budget_and_whole_shots():
    rng = np.random.default_rng(1)
    imp = rng.random(100)
    bounds = [0, 10, 25, 40, 70, 100]
    out = importance_to_keyshots(imp, bounds, 0.15)
    assert out.sum() <= 15
    for a, b in zip(bounds, bounds[1:]):
        assert len(set(out[a:b].tolist())) == 1


def test_keyshots_example():
    imp = np.r_[np.full(4, 0.9), np.full(4, 0.8), np.full(4, 0.2), np.full(4, 0.1)]
    out = importance_to_keyshots(imp, [0, 4, 8, 12, 16], 0.5)
    np.testing.assert_array_equal(out, [1] * 8 + [0] * 8)


def test_keyshots_validation():
    with pytest.raises(ValidationError):
        importance_to_keyshots(np.ones(10), [0, 5, 9], 0.15)
    with pytest.raises(ValidationError):
        importance_to_keyshots(np.ones(10), [0, 5, 10], 0.0)


# ---------------------------------------------------------------- reports

def _report(f1s, faces, model="m", crit="MaxF1"):
    vids = [VideoScore(f"v{i:02d}", f, f, f, f / 2, n) for i, (f, n) in enumerate(zip(f1s, faces))]
    return DatasetReport(vids, model, crit)


def test_score_video():
    v = score_video("x", [1, 1, 0, 0], [1, 0, 1, 0], [1, 0, 0, 0])
    assert (v.precision, v.recall, v.f1, v.face_recall, v.face_frames) == (0.5, 0.5, 0.5, 0.5, 1)
    assert not v.empty_truth


def test_delta_f1_example():
    d = delta_f1(_report([0.6], [3]), _report([0.5], [3]))
    assert d.per_video["v00"] == pytest.approx(0.2)
    assert d.curve == [pytest.approx(0.2)]


def test_delta_f1_curve_is_prefix_sum_in_face_order():
    mine = _report([0.6, 0.3, 0.9, 0.5], [1, 5, 3, 0])
    base = _report([0.5, 0.6, 0.3, 0.0], [1, 5, 3, 0])
    d = delta_f1(mine, base)
    assert d.order == ["v01", "v02", "v00"]
    assert d.excluded == ["v03"]
    gains = [d.per_video[i] for i in d.order]
    np.testing.assert_allclose(d.curve, np.cumsum(gains))
    with pytest.raises(ValidationError):
        delta_f1(mine, _report([0.5], [1]))


def test_top_l():
    rep = _report([0.1, 0.2, 0.3, 0.4], [4, 3, 2, 1])
    assert top_l_scores(rep, 2) == (pytest.approx(0.15), pytest.approx(0.075))
    assert top_l_scores(rep, 4)[0] == pytest.approx(rep.f1)
    with pytest.raises(ValidationError):
        top_l_scores(rep, 5)


def test_report_json_round_trip():
    rep = _report([0.1, 0.7], [2, 1])
    again = DatasetReport.from_dict(json.loads(rep.to_json(top_l=1)))
    assert again.to_json() == rep.to_json()
    assert json.loads(rep.to_json(1))["F1_1"] == 0.1


def test_duplicate_ids_rejected():
    v = VideoScore("a", 0, 0, 0, 0, 0)
    with pytest.raises(ValidationError):
        DatasetReport([v, v])


def test_render_table():
    rows = {"SUM-FCN": {"MaxF1": _report([0.5, 0.5], [1, 2])},
            "AVSUM-GRU": {"MaxF1": _report([0.6, 0.4], [1, 2]), "MaxR": _report([0.2, 0.4], [1, 2])}}
    text = render_table(rows, top_l=1)
    lines = text.splitlines()
    assert "F1_1" in lines[0] and "MaxR" in lines[0]
    assert lines[2].startswith("SUM-FCN") and "50.00" in lines[2] and lines[2].count("-") >= 4
    assert "40.00" in lines[3]


def test_plots_write_png(tmp_path):
    rep, base = _report([0.6, 0.4], [1, 2]), _report([0.5, 0.5], [1, 2], model="SUM-FCN")
    plot_delta_curves({"m": delta_f1(rep, base)}, tmp_path / "d.png")
    plot_scatter(rep, base, tmp_path / "s.png", top_l=1)
    plot_kld_bars(np.arange(6, dtype=float), ["a", "b", "c", "d", "e", "f"], tmp_path / "k.png")
    for name in ("d.png", "s.png", "k.png"):
        assert (tmp_path / name).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
