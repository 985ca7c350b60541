"""Per-frame class likelihoods and their Bayesian integration along a track.

A pluggable synthetic classifier draws a reported class from a
size-dependent confusion model; the resulting likelihood vectors are fused
over time in log space, which stabilizes the species estimate far beyond
single-frame accuracy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateLikelihood
from .rng import stream

CLASS_NAMES = ("Kite", "Bird", "Aircraft", "Other")
KITE, BIRD, AIRCRAFT, OTHER = range(4)
N_CLASSES = 4

EPS_FLOOR = 1e-6


def class_index(name: str) -> int:
    try:
        return CLASS_NAMES.index(name)
    except ValueError:
        raise ValueError(f"unknown class {name!r}, expected one of {CLASS_NAMES}") from None


@dataclass(frozen=True, eq=False)
class ClassPosterior:
    """Probability vector over CLASS_NAMES; components floored at EPS_FLOOR."""

    p: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.p, dtype=np.float64)
        if arr.shape != (N_CLASSES,):
            raise ValueError(f"posterior must have {N_CLASSES} components")
        # renormalizing after the floor can dip components a hair below it
        if abs(float(arr.sum()) - 1.0) > 1e-12 or np.any(arr < EPS_FLOOR * 0.999):
            raise ValueError("posterior must sum to 1 with components >= EPS_FLOOR")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "p", arr)

    @staticmethod
    def uniform() -> "ClassPosterior":
        return ClassPosterior(np.full(N_CLASSES, 1.0 / N_CLASSES))

    @staticmethod
    def from_unnormalized(w: np.ndarray) -> "ClassPosterior":
        w = np.asarray(w, dtype=np.float64)
        w = w / w.sum()
        w = np.maximum(w, EPS_FLOOR)
        return ClassPosterior(w / w.sum())

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.p))

    def __getitem__(self, i: int) -> float:
        return float(self.p[i])


@dataclass(frozen=True)
class ConfusionModel:
    """Row-stochastic confusion matrices at two apparent-size anchors.

    Rows are true classes, columns reported classes. The effective matrix at
    size d interpolates linearly between the far matrix (d <= d_far) and the
    near matrix (d >= d_near); near must be at least as accurate as far on
    the diagonal.
    """

    near: np.ndarray
    far: np.ndarray
    d_near: float
    d_far: float

    def __post_init__(self):
        near = np.asarray(self.near, dtype=np.float64)
        far = np.asarray(self.far, dtype=np.float64)
        for name, m in (("near", near), ("far", far)):
            if m.shape != (N_CLASSES, N_CLASSES):
                raise ValueError(f"{name} matrix must be {N_CLASSES}x{N_CLASSES}")
            if np.any(m < 0) or not np.allclose(m.sum(axis=1), 1.0, atol=1e-9):
                raise ValueError(f"{name} matrix rows must be non-negative and sum to 1")
        if np.any(np.diag(near) < np.diag(far) - 1e-12):
            raise ValueError("near diagonal must dominate far diagonal")
        if not self.d_near > self.d_far:
            raise ValueError("d_near must exceed d_far")
        near = near.copy()
        far = far.copy()
        near.flags.writeable = False
        far.flags.writeable = False
        object.__setattr__(self, "near", near)
        object.__setattr__(self, "far", far)

    def effective(self, diag_px: float) -> np.ndarray:
        """Confusion matrix at apparent size diag_px (clamped to the anchors)."""
        w = (diag_px - self.d_far) / (self.d_near - self.d_far)
        w = min(1.0, max(0.0, w))
        return self.far + w * (self.near - self.far)


def symmetric_confusion(accuracy: float) -> np.ndarray:
    """Matrix with a constant diagonal and errors spread evenly off-diagonal."""
    off = (1.0 - accuracy) / (N_CLASSES - 1)
    m = np.full((N_CLASSES, N_CLASSES), off)
    np.fill_diagonal(m, accuracy)
    return m


def default_confusion_model() -> ConfusionModel:
    return ConfusionModel(
        near=symmetric_confusion(0.982),
        far=symmetric_confusion(0.70),
        d_near=14.0,
        d_far=2.0,
    )


def confusion_model_from_json(text: str) -> ConfusionModel:
    obj = json.loads(text)
    return ConfusionModel(
        near=np.asarray(obj["near"], dtype=np.float64),
        far=np.asarray(obj["far"], dtype=np.float64),
        d_near=float(obj["d_near"]),
        d_far=float(obj["d_far"]),
    )


def load_confusion_model(path: str | Path) -> ConfusionModel:
    return confusion_model_from_json(Path(path).read_text())


def synthetic_classify(
    true_class: int,
    diag_px: float,
    model: ConfusionModel,
    seed: int,
    frame_key: tuple,
    hard: bool = False,
) -> tuple[int, np.ndarray]:
    """One synthetic per-frame classification.

    Samples the reported class from the effective confusion row of the true
    class, then returns (reported, likelihood) where likelihood[i] is the
    probability that class i would have produced this report. With
    hard=True the likelihood is a one-hot vector on the reported class
    instead (label fusion rather than score fusion).

    Deterministic for a fixed (seed, frame_key).
    """
    if diag_px <= 0:
        raise ValueError("diag_px must be > 0")
    eff = model.effective(diag_px)
    row = eff[true_class]
    u = stream(seed, "classify", *frame_key).uniform()
    reported = int(np.searchsorted(np.cumsum(row), u, side="right"))
    reported = min(reported, N_CLASSES - 1)
    if hard:
        likelihood = np.zeros(N_CLASSES)
        likelihood[reported] = 1.0
    else:
        likelihood = eff[:, reported].copy()
    return reported, likelihood


def bayes_update(
    posterior: ClassPosterior, likelihood: np.ndarray, beta: float = 1.0
) -> ClassPosterior:
    """Multiply the posterior by the likelihood (tempered by beta) in log space.

    Components are floored at EPS_FLOOR after renormalization so no class is
    ever locked out irreversibly.
    """
    lik = np.asarray(likelihood, dtype=np.float64)
    if lik.shape != (N_CLASSES,):
        raise ValueError(f"likelihood must have {N_CLASSES} components")
    if np.all(lik <= 0):
        raise DegenerateLikelihood("likelihood has no positive component")
    with np.errstate(divide="ignore"):
        lp = np.log(posterior.p) + beta * np.log(np.maximum(lik, 0.0))
    lp -= lp.max()
    w = np.exp(lp)
    return ClassPosterior.from_unnormalized(w)


def time_to_confidence(
    series: list[tuple[float, ClassPosterior]],
    true_class: int,
    threshold: float,
    t_confirm: float | None = None,
) -> float | None:
    """Seconds from confirmation until the true-class posterior first reaches
    threshold; None when it never does.

    series is the (t, posterior) history in time order; t_confirm defaults to
    the first timestamp.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    if not series:
        return None
    t0 = series[0][0] if t_confirm is None else t_confirm
    for t, post in series:
        if t < t0:
            continue
        if post[true_class] >= threshold:
            return t - t0
    return None
