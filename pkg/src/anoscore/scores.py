"""Anomaly scores: two-sample KS statistics over (complexity, vulnerability).

The model-level score is a two-sample Kolmogorov-Smirnov statistic between
the anomaly-vector clouds of a reference set and a generated set: 0 when the
empirical distributions coincide, 1 when they are completely separated.  The
2D variant follows Fasano & Franceschini: anchors at the sample points, four
quadrant orientations per anchor, the two sample-wise maxima combined.  The
per-image score is the plain vulnerability/complexity ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .types import InputError, NumericError

CombineMode = str  # "average" | "max"
ScoreMode = str    # "2d" | "complexity_1d" | "vulnerability_1d"

SCORE_MODES = ("2d", "complexity_1d", "vulnerability_1d")
COMBINE_MODES = ("average", "max")

# AS-i is undefined below this complexity (reachable only with pathological
# models whose features do not move under the noise walk).
MIN_COMPLEXITY = 1e-12


@dataclass(frozen=True)
class MeasureRecord:
    """Per-image measurement: the anomaly vector plus its provenance."""

    image_id: str
    complexity: float
    vulnerability: float
    model_id: str
    params_hash: str
    seed: int

    def __post_init__(self):
        if not (0.0 <= self.complexity <= math.pi):
            raise InputError(
                f"record {self.image_id!r}: complexity {self.complexity} outside [0, pi]")
        if not (self.vulnerability >= 0.0 and math.isfinite(self.vulnerability)):
            raise InputError(
                f"record {self.image_id!r}: vulnerability {self.vulnerability} invalid")


@dataclass(frozen=True)
class ScoreResult:
    """An anomaly score in [0, 1] with its mode and sample sizes."""

    value: float
    mode: ScoreMode
    n_real: int
    n_generated: int
    combine: CombineMode = "average"


def _as_sample_2d(sample, name: str) -> np.ndarray:
    pts = np.asarray(sample, dtype=np.float64)
    if pts.size == 0:
        raise InputError(f"{name} sample is empty")
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InputError(f"{name} sample must be a list of (x, y) pairs, got shape {pts.shape}")
    bad = np.flatnonzero(~np.isfinite(pts).all(axis=1))
    if bad.size:
        raise InputError(f"{name} sample has a non-finite coordinate at index {bad[0]}")
    return pts


def _as_sample_1d(sample, name: str) -> np.ndarray:
    v = np.asarray(sample, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise InputError(f"{name} sample is empty")
    bad = np.flatnonzero(~np.isfinite(v))
    if bad.size:
        raise InputError(f"{name} sample has a non-finite value at index {bad[0]}")
    return v


def _quadrant_fractions(anchors: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Fractions of `pts` in the quadrants around each anchor, (m, 16).

    Each of the four orientations (lower-left, upper-left, lower-right,
    upper-right) is counted under both tie conventions per coordinate
    (boundary points in or out), so the per-anchor maximum realizes the
    supremum of the quadrant fraction over corner positions at and
    immediately around the anchor.  Both samples are always counted with the
    same convention, which keeps identical samples at exactly zero.
    """
    x, y = pts[:, 0], pts[:, 1]
    ax = anchors[:, 0][:, None]
    ay = anchors[:, 1][:, None]
    xle, xlt = x <= ax, x < ax
    yle, ylt = y <= ay, y < ay
    j1 = (xle & yle).sum(axis=1)
    j2 = (xle & ylt).sum(axis=1)
    j3 = (xlt & yle).sum(axis=1)
    j4 = (xlt & ylt).sum(axis=1)
    m1, m2 = xle.sum(axis=1), xlt.sum(axis=1)
    k1, k2 = yle.sum(axis=1), ylt.sum(axis=1)
    n = pts.shape[0]
    counts = np.stack([
        j1, j2, j3, j4,                                          # lower-left
        m1 - j1, m1 - j2, m2 - j3, m2 - j4,                      # upper-left
        k1 - j1, k2 - j2, k1 - j3, k2 - j4,                      # lower-right
        n - m1 - k1 + j1, n - m1 - k2 + j2,                      # upper-right
        n - m2 - k1 + j3, n - m2 - k2 + j4,
    ], axis=1)
    return counts / n


def _max_anchor_diff(anchors: np.ndarray, a: np.ndarray, b: np.ndarray,
                     chunk: int = 512) -> float:
    best = 0.0
    for lo in range(0, anchors.shape[0], chunk):
        block = anchors[lo:lo + chunk]
        diff = np.abs(_quadrant_fractions(block, a) - _quadrant_fractions(block, b))
        best = max(best, float(diff.max()))
    return best


def ks2d(sample_a, sample_b, combine: CombineMode = "average") -> float:
    """Two-sample 2D KS statistic (Fasano-Franceschini style) in [0, 1].

    D1 is the maximum quadrant-fraction difference over anchors from
    sample_a, D2 the same over sample_b; `combine` selects (D1 + D2) / 2
    (default) or max(D1, D2).
    """
    a = _as_sample_2d(sample_a, "first")
    b = _as_sample_2d(sample_b, "second")
    if combine not in COMBINE_MODES:
        raise InputError(f"combine must be one of {COMBINE_MODES}, got {combine!r}")
    d1 = _max_anchor_diff(a, a, b)
    d2 = _max_anchor_diff(b, a, b)
    return (d1 + d2) / 2.0 if combine == "average" else max(d1, d2)


def ks1d(sample_a, sample_b) -> float:
    """Classical two-sample KS statistic: sup ECDF difference, in [0, 1]."""
    a = np.sort(_as_sample_1d(sample_a, "first"))
    b = np.sort(_as_sample_1d(sample_b, "second"))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(fa - fb).max())


def _check_comparable(real: list[MeasureRecord], generated: list[MeasureRecord]) -> None:
    if not real or not generated:
        raise InputError("both record lists must be nonempty")
    hashes = {r.params_hash for r in real} | {r.params_hash for r in generated}
    models = {r.model_id for r in real} | {r.model_id for r in generated}
    if len(hashes) != 1:
        raise InputError(f"incomparable measurements: params_hash values {sorted(hashes)}")
    if len(models) != 1:
        raise InputError(f"incomparable measurements: model_id values {sorted(models)}")


def anomaly_score(real: list[MeasureRecord], generated: list[MeasureRecord],
                  mode: ScoreMode = "2d", combine: CombineMode = "average") -> ScoreResult:
    """Anomaly score between a reference set and a generated set.

    mode "2d" compares the joint (complexity, vulnerability) clouds; the 1D
    modes compare a single coordinate with the classical KS statistic.
    """
    _check_comparable(real, generated)
    if mode == "2d":
        va = [(r.complexity, r.vulnerability) for r in real]
        vb = [(r.complexity, r.vulnerability) for r in generated]
        value = ks2d(va, vb, combine=combine)
    elif mode == "complexity_1d":
        value = ks1d([r.complexity for r in real], [r.complexity for r in generated])
    elif mode == "vulnerability_1d":
        value = ks1d([r.vulnerability for r in real], [r.vulnerability for r in generated])
    else:
        raise InputError(f"mode must be one of {SCORE_MODES}, got {mode!r}")
    return ScoreResult(value=value, mode=mode, n_real=len(real),
                       n_generated=len(generated), combine=combine)


def asi(record: MeasureRecord) -> float:
    """Per-image anomaly score: vulnerability divided by complexity."""
    if record.complexity <= MIN_COMPLEXITY:
        raise NumericError(
            f"record {record.image_id!r}: degenerate complexity {record.complexity}")
    return record.vulnerability / record.complexity


def mean_asi(records: list[MeasureRecord]) -> float:
    """Arithmetic mean of the per-image scores."""
    if not records:
        raise InputError("record list is empty")
    return float(np.mean([asi(r) for r in records]))
