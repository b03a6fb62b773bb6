from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from avsum.data.formats import CorpusManifest
from avsum.errors import ValidationError


@dataclass
class Fold:
    name: str
    train: list[str]
    test: list[str]
    val: list[str] = field(default_factory=list)

    def to_dict(self):
        return {"name": self.name, "train": self.train, "val": self.val, "test": self.test}


@dataclass
class FoldPlan:
    strategy: str
    folds: list[Fold]

    def to_dict(self):
        return {"strategy": self.strategy, "folds": [f.to_dict() for f in self.folds]}

    @classmethod
    def from_dict(cls, obj):
        return cls(obj["strategy"], [Fold(f["name"], f["train"], f["test"], f.get("val", [])) for f in obj["folds"]])


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def ratio_split(ids: list[str], ratios=(0.8, 0.1, 0.1), seed: int = 0) -> Fold:
    """Seeded shuffle, then validation/test sizes rounded, remainder to training.

    18 ids at 80/10/10 give 14/2/2.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    n = len(ids)
    n_val = _round_half_up(ratios[1] * n)
    n_test = _round_half_up(ratios[2] * n)
    if n_val + n_test > n:
        raise ValidationError(f"cannot split {n} items with ratios {ratios}")
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [ids[i] for i in order]
    val = shuffled[:n_val]
    test = shuffled[n_val:n_val + n_test]
    train = shuffled[n_val + n_test:]
    return Fold("split", train, test, val)


def make_folds(
    manifest: CorpusManifest,
    strategy: str = "logo",
    *,
    ratios=(0.8, 0.1, 0.1),
    seed: int = 0,
    test_size: int | None = None,
) -> FoldPlan:
    """Cross-validation plan over the manifest's videos.

    ``logo``: one fold per group label (sorted), test set = that group.
    With ``test_size`` set, folds instead take consecutive chunks of that
    size from a seeded shuffle.
    ``ratio``: a single train/val/test fold, see :func:`ratio_split`.
    """
    ids = manifest.ids
    if strategy == "ratio":
        return FoldPlan("ratio", [ratio_split(ids, ratios, seed)])
    if strategy != "logo":
        raise ValidationError(f"unknown fold strategy {strategy!r}")
    if test_size is not None:
        if not 1 <= test_size < len(ids):
            raise ValidationError(f"test_size must be in [1, {len(ids) - 1}]")
        order = np.random.default_rng(seed).permutation(len(ids))
        shuffled = [ids[i] for i in order]
        folds = []
        for k, start in enumerate(range(0, len(ids), test_size)):
            test = shuffled[start:start + test_size]
            folds.append(Fold(f"fold{k:02d}", [i for i in ids if i not in test], test))
        return FoldPlan("logo-fixed", folds)
    groups = manifest.groups()
    labels = sorted(set(groups.values()))
    if len(labels) < 2:
        raise ValidationError("leave-one-group-out needs at least two groups")
    folds = []
    for g in labels:
        test = [i for i in ids if groups[i] == g]
        train = [i for i in ids if groups[i] != g]
        folds.append(Fold(f"group-{g}", train, test))
    return FoldPlan("logo", folds)
