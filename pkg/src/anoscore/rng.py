"""Seeded randomness keyed by strings rather than a global sequential stream.

Every random draw in the toolkit is a pure function of a `seed material`
byte string, itself derived from (global_seed, image_id, purpose).  A
counter-based Philox generator keyed by a hash of the material makes results
independent of processing order and worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .types import InputError, NumericError, RandomDirection


def seed_material(global_seed: int, image_id: str, purpose: str) -> bytes:
    """Derive the per-image, per-purpose seed material byte string."""
    return f"{global_seed}\x1f{image_id}\x1f{purpose}".encode("utf-8")


def generator_for(material: bytes, stream: int = 0) -> np.random.Generator:
    """Philox generator keyed by a SHA-256 digest of `material`.

    `stream` selects an independent substream for the same material (used to
    resample degenerate draws and to split per-trial randomness).
    """
    digest = hashlib.sha256(material).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    counter = np.concatenate(
        [np.frombuffer(digest[16:32], dtype=np.uint64),
         np.array([stream & 0xFFFFFFFFFFFFFFFF, 0], dtype=np.uint64)]
    )
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def sample_unit_direction(material: bytes, shape: tuple[int, ...]) -> RandomDirection:
    """Draw a Gaussian direction of the given shape, normalized to unit L2 norm.

    The all-zero draw (probability ~0) is resampled with an incremented
    substream counter.
    """
    if not shape or any(s < 1 for s in shape):
        raise InputError(f"direction shape must be nonempty and positive, got {shape}")
    for stream in range(64):
        raw = generator_for(material, stream=stream).standard_normal(shape)
        norm = np.linalg.norm(raw)
        if norm > 0.0:
            return RandomDirection(values=raw / norm)
    raise NumericError("64 consecutive all-zero Gaussian draws")  # pragma: no cover
