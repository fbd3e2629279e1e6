"""Complexity: mean angular deviation of feature steps along a linear noise walk.

A single unit-norm Gaussian direction is scaled by k*epsilon and added to the
image for k = 0..K, the feature of every waypoint is extracted, and the angle
between successive feature deltas is averaged.  An exactly affine feature map
yields collinear features and therefore zero complexity; curvature of the
representation space shows up as a positive mean angle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import sample_unit_direction
from .types import FeatureModel, ImageTensor, InputError, NumericError, clip01

# Feature deltas shorter than this contribute no usable angle and are skipped.
DEGENERATE_DELTA_NORM = 1e-12


@dataclass(frozen=True)
class TrajectoryConfig:
    """Noise-walk parameters: per-step magnitude epsilon and total steps K."""

    epsilon: float = 0.01
    K: int = 10

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise InputError(f"epsilon must be > 0, got {self.epsilon}")
        if self.K < 2:
            raise InputError(f"K must be >= 2 (at least one angle), got {self.K}")


@dataclass(frozen=True)
class TrajectoryResult:
    """Complexity value plus the per-step angles behind it.

    `per_step_angles` has K-1 entries; skipped terms (either adjacent feature
    delta shorter than DEGENERATE_DELTA_NORM) are stored as NaN and excluded
    from the mean.  When every term is skipped the complexity is 0.
    """

    complexity: float
    per_step_angles: np.ndarray
    skipped_terms: int


def complexity(model: FeatureModel, x: ImageTensor, cfg: TrajectoryConfig,
               seed_material: bytes) -> TrajectoryResult:
    """Mean angle between successive feature-space steps of the noise walk.

    The walk is x_k = clip(x + k * epsilon * N) for one direction N drawn
    from `seed_material`; pixel clipping keeps waypoints valid images and is
    inactive whenever the walk stays inside [0, 1].
    """
    direction = sample_unit_direction(seed_material, x.pixels.shape)
    step = cfg.epsilon * direction.values

    deltas = []
    previous = None
    for k in range(cfg.K + 1):
        waypoint = ImageTensor(id=x.id, pixels=clip01(x.pixels + k * step))
        try:
            feat = model.forward(waypoint).values
        except NumericError as exc:
            raise NumericError(f"image {x.id!r}, walk step {k}: {exc}") from exc
        if previous is not None:
            deltas.append(feat - previous)
        previous = feat

    angles = np.full(cfg.K - 1, np.nan)
    skipped = 0
    for k in range(cfg.K - 1):
        a, b = deltas[k], deltas[k + 1]
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na < DEGENERATE_DELTA_NORM or nb < DEGENERATE_DELTA_NORM:
            skipped += 1
            continue
        cosine = np.clip(float(np.dot(a, b)) / (na * nb), -1.0, 1.0)
        angles[k] = np.arccos(cosine)

    kept = angles[~np.isnan(angles)]
    value = float(kept.mean()) if kept.size else 0.0
    return TrajectoryResult(complexity=value, per_step_angles=angles, skipped_terms=skipped)
