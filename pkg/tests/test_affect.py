import math

import numpy as np
import pytest

from avsum.affect import (
    AffectTrack,
    dimension_labels,
    extract_affect,
    fuse,
    kl_divergence,
    kld_face_analysis,
    load_affect,
    save_affect,
    smoothed_histograms,
)
from avsum.cer import CerNet
from avsum.data import FeatureSequence
from avsum.errors import ShapeError, ValidationError
from avsum.nn.layers import seeded


def _models(dim, hidden=10, seeds=(0, 1)):
    out = []
    for s in seeds:
        with seeded(s):
            out.append(CerNet(dim, hidden=hidden).eval())
    return out


def test_extract_shapes():
    seq = FeatureSequence("v", np.random.default_rng(0).standard_normal((320, 12)))
    a, v = _models(12)
    t = extract_affect(seq, a, v)
    assert t.attributes.shape == (320, 2) and t.embeddings.shape == (320, 20)


def test_extract_column_order():
    seq = FeatureSequence("v", np.random.default_rng(0).standard_normal((40, 6)))
    a, v = _models(6, hidden=3)
    t = extract_affect(seq, a, v)
    g_a, y_a = a.infer(seq)
    g_v, y_v = v.infer(seq)
    np.testing.assert_array_equal(t.attributes[:, 0], y_a)
    np.testing.assert_array_equal(t.attributes[:, 1], y_v)
    np.testing.assert_array_equal(t.embeddings[:, :3], g_a)
    np.testing.assert_array_equal(t.embeddings[:, 3:], g_v)


def test_identical_models_give_equal_halves():
    seq = FeatureSequence("v", np.random.default_rng(1).standard_normal((30, 5)))
    a, _ = _models(5)
    t = extract_affect(seq, a, a)
    np.testing.assert_array_equal(t.embeddings[:, :10], t.embeddings[:, 10:])


def test_extract_deterministic(tmp_path):
    seq = FeatureSequence("v", np.random.default_rng(2).standard_normal((50, 5)))
    a, v = _models(5)
    save_affect(extract_affect(seq, a, v), tmp_path / "x")
    save_affect(extract_affect(seq, a, v), tmp_path / "y")
    for name in ("v.av.avsf", "v.gru.avsf", "v.affect.json"):
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()


def test_extract_dim_mismatch():
    a, v = _models(5)
    with pytest.raises(ShapeError):
        extract_affect(FeatureSequence("v", np.zeros((10, 6))), a, v)


def test_affect_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    t = AffectTrack("v", rng.standard_normal((9, 2)), rng.standard_normal((9, 8)), ("a.ckpt:1", "v.ckpt:2"))
    save_affect(t, tmp_path)
    back = load_affect(tmp_path, "v")
    assert back.attributes.tobytes() == t.attributes.tobytes()
    assert back.embeddings.tobytes() == t.embeddings.tobytes()
    assert back.provenance == t.provenance


def test_missing_track_message(tmp_path):
    with pytest.raises(ValidationError, match="extract-affect"):
        load_affect(tmp_path, "nope")


@pytest.mark.parametrize("kind,width", [("GRU", 1044), ("AV", 1026)])
def test_fuse_widths(kind, width):
    rng = np.random.default_rng(0)
    seq = FeatureSequence("v", rng.standard_normal((320, 1024)))
    t = AffectTrack("v", rng.standard_normal((320, 2)), rng.standard_normal((320, 20)))
    x = fuse(seq, t, kind)
    assert x.shape == (320, width)
    # slicing recovers both blocks bit-exactly
    assert x[:, :1024].tobytes() == seq.data.tobytes()
    block = t.embeddings if kind == "GRU" else t.attributes
    assert np.ascontiguousarray(x[:, 1024:]).tobytes() == block.tobytes()


def test_fuse_zero_affect():
    rng = np.random.default_rng(0)
    seq = FeatureSequence("v", rng.standard_normal((10, 4)))
    t = AffectTrack("v", np.zeros((10, 2)), np.zeros((10, 6)))
    x = fuse(seq, t, "GRU")
    assert np.all(x[:, 4:] == 0)
    np.testing.assert_array_equal(x[:, :4], seq.data)


def test_fuse_length_mismatch():
    seq = FeatureSequence("v", np.zeros((10, 4)))
    with pytest.raises(ShapeError):
        fuse(seq, AffectTrack("v", np.zeros((9, 2)), np.zeros((9, 4))), "AV")


# ---------------------------------------------------------------- KLD

def test_kld_closed_form():
    p = np.array([0.4, 0.3, 0.2, 0.1])
    q = p[::-1].copy()
    expect = sum(a * math.log(a / b) for a, b in zip(p, q))
    assert kl_divergence(p, q) == pytest.approx(expect, abs=1e-15)


def test_kld_identical_samples_zero():
    rng = np.random.default_rng(0)
    n = 400
    x = rng.standard_normal((n, 2 + 8))
    tracks = [AffectTrack("a", x[:, :2], x[:, 2:]), AffectTrack("b", x[:, :2], x[:, 2:])]
    faces = [np.ones(n, dtype=int), np.zeros(n, dtype=int)]
    kld = kld_face_analysis(tracks, faces)
    assert kld.shape == (10,)
    assert np.all(np.abs(kld) <= 1e-9)


def test_kld_output_length_and_labels():
    rng = np.random.default_rng(1)
    t = AffectTrack("a", rng.standard_normal((500, 2)), rng.standard_normal((500, 20)))
    face = (rng.random(500) < 0.5).astype(int)
    kld = kld_face_analysis([t], [face])
    assert len(kld) == 22 == len(dimension_labels(10))
    assert np.all(kld >= 0)
    assert dimension_labels(2) == ["f_A", "f_V", "g_A1", "g_A2", "g_V1", "g_V2"]


def test_kld_detects_shifted_dimension():
    rng = np.random.default_rng(2)
    n = 2000
    face = (rng.random(n) < 0.5).astype(int)
    emb = rng.standard_normal((n, 4))
    emb[:, 1] += 2.0 * face
    kld = kld_face_analysis([AffectTrack("a", rng.standard_normal((n, 2)), emb)], [face])
    assert np.argmax(kld) == 3


def test_kld_requires_both_classes():
    t = AffectTrack("a", np.zeros((100, 2)), np.zeros((100, 4)))
    with pytest.raises(ValidationError):
        kld_face_analysis([t], [np.ones(100)])
    with pytest.raises(ValidationError):
        kld_face_analysis([t], [np.r_[np.ones(10), np.zeros(90)]])


def test_smoothed_histograms_normalised():
    rng = np.random.default_rng(3)
    p, q = smoothed_histograms(rng.standard_normal(100), rng.standard_normal(300) + 1)
    assert len(p) == 32 and p.sum() == pytest.approx(1.0) and q.sum() == pytest.approx(1.0)
    assert np.all(p > 0) and np.all(q > 0)
