"""Vulnerability: feature displacement under a feature-space PGD attack.

Instead of maximizing a classification loss, the attack ascends the L2
distance between the current feature and the unperturbed image's feature:
each step takes the input-gradient of that distance, rescales it to a fixed
L2 step size, applies it, and clips back to the valid pixel range.  The
vulnerability value is the feature distance reached by the final iterate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import sample_unit_direction
from .types import FeatureModel, ImageTensor, InputError, NumericError, clip01

# Gradients with L2 norm below this cannot be normalized; the attack stops.
ZERO_GRADIENT_NORM = 1e-20


@dataclass(frozen=True)
class AttackConfig:
    """Attack parameters: step size alpha, random offset delta, steps J.

    `mask`, when given, is a binary array of pixel shape; only entries equal
    to 1 are attackable.  The initial delta offset and every gradient step
    are masked, so unmasked pixels never change.
    """

    alpha: float = 0.01
    delta: float = 1e-6
    J: int = 10
    mask: np.ndarray | None = None

    def __post_init__(self):
        if not (self.alpha > 0):
            raise InputError(f"alpha must be > 0, got {self.alpha}")
        if self.delta < 0:
            raise InputError(f"delta must be >= 0, got {self.delta}")
        if self.J < 1:
            raise InputError(f"J must be >= 1, got {self.J}")
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=np.float64)
            if not np.isin(m, (0.0, 1.0)).all():
                raise InputError("mask must be binary (entries 0 or 1)")
            if m.sum() < 1:
                raise InputError("mask must select at least one pixel")
            object.__setattr__(self, "mask", m)

    def validated_for(self, pixel_shape: tuple[int, ...]) -> None:
        if self.mask is not None and self.mask.shape != tuple(pixel_shape):
            raise InputError(
                f"mask shape {self.mask.shape} does not match pixels {tuple(pixel_shape)}"
            )


@dataclass(frozen=True)
class AttackResult:
    """Final feature displacement plus the distance after each attack step.

    `per_step_distance` has one entry per completed step (J entries unless
    the attack terminated early on a vanishing gradient).
    """

    vulnerability: float
    per_step_distance: np.ndarray
    terminated_early: bool


def vulnerability(model: FeatureModel, x: ImageTensor, cfg: AttackConfig,
                  seed_material: bytes) -> AttackResult:
    """Run the feature-space attack on `x` and measure the displacement."""
    cfg.validated_for(x.pixels.shape)
    reference = model.forward(x)

    offset = cfg.delta * sample_unit_direction(seed_material, x.pixels.shape).values
    if cfg.mask is not None:
        offset = offset * cfg.mask
    current = clip01(x.pixels + offset)

    distances = []
    terminated = False
    for j in range(cfg.J):
        grad = model.loss_gradient(reference, ImageTensor(id=x.id, pixels=current))
        if not np.isfinite(grad).all():
            raise NumericError(f"image {x.id!r}, attack step {j}: non-finite gradient")
        if cfg.mask is not None:
            grad = grad * cfg.mask
        norm = np.linalg.norm(grad)
        if norm < ZERO_GRADIENT_NORM:
            terminated = True
            break
        current = clip01(current + cfg.alpha * grad / norm)
        moved = model.forward(ImageTensor(id=x.id, pixels=current))
        distances.append(float(np.linalg.norm(moved.values - reference.values)))

    if distances:
        value = distances[-1]
    else:
        # No step completed: the displacement is whatever the delta offset caused.
        final = model.forward(ImageTensor(id=x.id, pixels=current))
        value = float(np.linalg.norm(final.values - reference.values))
    return AttackResult(vulnerability=value,
                        per_step_distance=np.asarray(distances, dtype=np.float64),
                        terminated_early=terminated)
