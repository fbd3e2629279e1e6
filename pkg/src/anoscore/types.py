"""Core data types shared by every measurement stage."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np


class InputError(ValueError):
    """Invalid caller-supplied input (bad shapes, empty samples, broken files)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite or degenerate values."""


@dataclass(frozen=True)
class ImageTensor:
    """An H x W x C image in canonical float pixel space [0, 1].

    `id` is a stable identifier (typically the path relative to the dataset
    root) and must be unique within a dataset: all per-image randomness is
    derived from it.
    """

    id: str
    pixels: np.ndarray

    def __post_init__(self):
        if not self.id:
            raise InputError("image id must be non-empty")
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or min(px.shape) < 1:
            raise InputError(f"image {self.id!r}: pixels must be H x W x C, got shape {px.shape}")
        if not np.isfinite(px).all():
            raise InputError(f"image {self.id!r}: non-finite pixel values")
        if px.min() < 0.0 or px.max() > 1.0:
            raise InputError(f"image {self.id!r}: pixel values outside [0, 1]")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.pixels.shape

    def with_pixels(self, pixels: np.ndarray, suffix: str = "") -> "ImageTensor":
        """Copy carrying the same id (plus an optional suffix) with new pixels."""
        return ImageTensor(id=self.id + suffix, pixels=pixels)


@dataclass(frozen=True)
class FeatureVector:
    """A 1-D feature embedding produced by a FeatureModel."""

    values: np.ndarray
    model_id: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise InputError(f"feature values must be 1-D, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise NumericError(f"model {self.model_id!r} produced non-finite features")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class RandomDirection:
    """A unit-L2-norm direction matching an image's pixel shape."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        n = float(np.linalg.norm(v))
        if abs(n - 1.0) > 1e-9:
            raise NumericError(f"direction norm {n} deviates from 1 by more than 1e-9")
        object.__setattr__(self, "values", v)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


class FeatureModel(ABC):
    """Deterministic differentiable map from images to feature vectors.

    Implementations must be deterministic (same input, bit-identical output)
    and safe for concurrent read-only use; callers never mutate a model after
    construction.  The scalar loss whose input-gradient `loss_gradient`
    returns is the L2 distance between `forward(probe)` and a fixed reference
    feature vector.
    """

    model_id: str
    feature_dim: int

    @abstractmethod
    def forward(self, x: ImageTensor) -> FeatureVector:
        """Extract the feature vector of `x`."""

    @abstractmethod
    def loss_gradient(self, reference: FeatureVector, probe: ImageTensor) -> np.ndarray:
        """Gradient of ||forward(probe) - reference||_2 w.r.t. probe pixels.

        Returns an array with the probe's pixel shape.  At the (measure-zero)
        point where the features coincide exactly the gradient is defined as
        zero.
        """


def clip01(pixels: np.ndarray) -> np.ndarray:
    """Clip a pixel array to the canonical [0, 1] range."""
    return np.clip(pixels, 0.0, 1.0)
