"""Registry of gradient checks: every operator plus every full model at
reduced size (N=32, D=16, G=4, H=2), each checked at several seeds.

Each entry builds a scalar float64 function of its inputs and parameters
from a seed. Models are reduced with a weighted-BCE (summarizers) or CCC
(emotion model) loss so the whole path from input to loss is covered.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import torch

from avsum.cer import CerNet, ccc_loss
from avsum.errors import ValidationError
from avsum.nn import ops
from avsum.nn.gradcheck import GradcheckReport, corrupt_gradient, gradcheck
from avsum.nn.layers import seeded
from avsum.summarizers.loss import weighted_bce
from avsum.summarizers.models import VARIANTS, build_summarizer, reduced_spec

N, D, G, H = 32, 16, 4, 2

Case = tuple[Callable[[], torch.Tensor], dict[str, torch.Tensor]]


def _randn(*shape):
    return torch.randn(*shape, dtype=torch.float64)


def _proj(y):
    """Fixed random linear read-out so every output entry gets a distinct weight."""
    r = _randn(*y.shape)
    return lambda out: (out * r).sum()


def _dense():
    x, w, b = _randn(5, 7, 6), _randn(6, 3), _randn(3)
    read = _proj(ops.dense(x, w, b))
    return lambda: read(ops.dense(x, w, b)), {"x": x, "w": w, "b": b}


def _conv1d():
    x, w, b = _randn(2, 12, 4), _randn(5, 4, 3), _randn(5)
    read = _proj(ops.conv1d(x, w, b))
    return lambda: read(ops.conv1d(x, w, b)), {"x": x, "w": w, "b": b}


def _maxpool():
    x = _randn(2, 20, 3)
    read = _proj(ops.maxpool_time(x, 4))
    return lambda: read(ops.maxpool_time(x, 4)), {"x": x}


def _deconv():
    x, w, b = _randn(2, 5, 3), _randn(3, 4, 4), _randn(4)
    read = _proj(ops.deconv1d_time(x, w, 4, b))
    return lambda: read(ops.deconv1d_time(x, w, 4, b)), {"x": x, "w": w, "b": b}


def _gru():
    x = _randn(2, 6, 3)
    w_ih, w_hh = 0.5 * _randn(3 * G, 3), 0.5 * _randn(3 * G, G)
    b_ih, b_hh = 0.1 * _randn(3 * G), 0.1 * _randn(3 * G)
    t = {"x": x, "w_ih": w_ih, "w_hh": w_hh, "b_ih": b_ih, "b_hh": b_hh}
    read = _proj(ops.gru_forward(**t)[0])
    return lambda: read(ops.gru_forward(**t)[0]), t


def _softmax():
    x = _randn(4, 6)
    read = _proj(ops.softmax(x))
    return lambda: read(ops.softmax(x)), {"x": x}


def _mha():
    m, s = 6, 8
    x = _randn(m, s)
    t = {
        "x": x,
        "wq": _randn(H, s, s // H) / s ** 0.5,
        "wk": _randn(H, s, s // H) / s ** 0.5,
        "wv": _randn(H, s, s // H) / s ** 0.5,
        "wo": torch.eye(m, dtype=torch.float64) + 0.1 * _randn(m, m),
    }

    def f():
        w = ops.AttentionWeights(t["wq"], t["wk"], t["wv"], t["wo"])
        return ops.mha(t["x"], t["x"], t["x"], w, float(m))

    read = _proj(f())
    return lambda: read(f()), t


def _ccc_loss():
    y, y_hat = _randn(40), _randn(40)
    return lambda: ccc_loss(y, y_hat), {"y_hat": y_hat}


def _weighted_bce():
    z = (torch.rand(3, 30, dtype=torch.float64) < 0.3).to(torch.float64)
    z[:, 0], z[:, 1] = 1.0, 0.0
    logit = _randn(3, 30)
    return lambda: weighted_bce(z, torch.sigmoid(logit)), {"logit": logit}


def _cer_net():
    model = CerNet(D, 20, filters=4, kernel=3, pooled=5, hidden=G).double()
    w, y = _randn(6, D, 20), _randn(6)
    params = dict(model.named_parameters())
    t = {"windows": w, **params}
    return lambda: ccc_loss(y, model(t["windows"])[1]), t


def _summarizer(variant):
    def build():
        spec = reduced_spec(variant, n_frames=N, visual_dim=D, hidden=G, heads=H)
        model = build_summarizer(spec, int(torch.randint(0, 2 ** 31 - 1, ()).item())).double()
        x = _randn(2, N, spec.in_width)
        side = None
        if spec.affect_kind is not None:
            side = x[..., spec.visual_dim:] if spec.affect_kind == "GRU" else _randn(2, N, spec.affect_dim)
        z = (torch.rand(2, N, dtype=torch.float64) < 0.3).to(torch.float64)
        z[:, 0], z[:, 1] = 1.0, 0.0
        if spec.variant == "ta-avsum":
            # move wo off the identity so the check does not sit on a special point
            with torch.no_grad():
                model.attention.wo.add_(0.1 * _randn(*model.attention.wo.shape))
        t = {"x": x, **dict(model.named_parameters())}
        if side is not None and spec.affect_kind == "AV":
            t["side"] = side

        def f():
            s = t["x"][..., spec.visual_dim:] if spec.affect_kind == "GRU" else t.get("side")
            return weighted_bce(z, torch.softmax(model(t["x"], s), dim=-1)[..., 1])

        return f, t
    return build


OPERATORS: dict[str, Callable[[], Case]] = {
    "dense": _dense,
    "conv1d": _conv1d,
    "maxpool": _maxpool,
    "deconv": _deconv,
    "gru": _gru,
    "softmax": _softmax,
    "mha": _mha,
    "ccc_loss": _ccc_loss,
    "weighted_bce": _weighted_bce,
}
MODELS: dict[str, Callable[[], Case]] = {"cer-net": _cer_net, **{v: _summarizer(v) for v in VARIANTS}}
REGISTRY = {**OPERATORS, **MODELS}


@dataclass
class GradcheckRun:
    reports: list[GradcheckReport]
    seconds: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def to_dict(self):
        # timing stays out so the report is reproducible byte for byte
        return {"passed": self.passed, "reports": [r.to_dict() for r in self.reports]}


def resolve(ops_arg: str) -> list[str]:
    if ops_arg == "all":
        return list(REGISTRY)
    names = [n.strip() for n in ops_arg.split(",") if n.strip()]
    unknown = [n for n in names if n not in REGISTRY]
    if unknown or not names:
        raise ValidationError(f"unknown gradcheck target(s) {unknown}; choose from {sorted(REGISTRY)} or 'all'")
    return names


def run_gradchecks(names: list[str], seed: int = 0, n_seeds: int = 3, tol: float = 1e-4,
                   inject_fault: bool = False) -> GradcheckRun:
    """Check each named entry at seeds ``seed .. seed + n_seeds - 1``.

    ``inject_fault`` routes every function's output through an identity
    whose backward pass is off by 1 %, which every check must catch.
    """
    start = time.perf_counter()
    reports = []
    for name in names:
        for s in range(seed, seed + n_seeds):
            with seeded(s):
                fn, tensors = REGISTRY[name]()
            if inject_fault:
                fn = (lambda inner: lambda: corrupt_gradient(inner()))(fn)
            reports.append(gradcheck(fn, tensors, tol=tol, name=name, seed=s))
    return GradcheckRun(reports, time.perf_counter() - start)
