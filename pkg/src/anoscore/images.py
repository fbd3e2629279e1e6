"""Image ingestion and the procedural texture corpus for hermetic benchmarks.

Files are decoded with Pillow and mapped from 8-bit integers to the
canonical [0, 1] float space by /255.  The procedural generator produces
seeded gradient-plus-shape textures so the corruption benchmark needs no
dataset download.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .rng import generator_for
from .types import ImageTensor, InputError, clip01

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def load_image(path, image_id: str) -> ImageTensor:
    """Decode one PNG/JPEG file into the canonical float space."""
    try:
        with Image.open(path) as im:
            rgb = im.convert("RGB")
            pixels = np.asarray(rgb, dtype=np.float64) / 255.0
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read image {path}: {exc}") from exc
    return ImageTensor(id=image_id, pixels=pixels)


def list_image_files(directory) -> list[tuple[str, Path]]:
    """(image_id, path) pairs for every image file under `directory`, sorted by id."""
    root = Path(directory)
    if not root.is_dir():
        raise InputError(f"image directory {root} does not exist")
    pairs = []
    for path in root.rglob("*"):
        if path.is_file() and path.suffix.lower() in IMAGE_SUFFIXES:
            pairs.append((path.relative_to(root).as_posix(), path))
    if not pairs:
        raise InputError(f"no images (png/jpeg) found under {root}")
    return sorted(pairs, key=lambda p: p[0])


def save_image(x: ImageTensor, path) -> None:
    """Write an image back to disk as 8-bit PNG."""
    data = (clip01(x.pixels) * 255.0).round().astype(np.uint8)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(data).save(path)


def _smoothstep(d: np.ndarray, edge: float, soft: float) -> np.ndarray:
    t = np.clip((edge - d) / soft + 0.5, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def make_texture_image(image_id: str, material: bytes, shape=(16, 16, 3)) -> ImageTensor:
    """One seeded procedural texture: a color gradient plus a few soft shapes.

    Pixels stay inside [0.15, 0.85] so small noise walks and attack steps do
    not run into the clipping boundary.
    """
    h, w, c = shape
    rng = generator_for(material)
    ii, jj = np.meshgrid(np.linspace(0, 1, h), np.linspace(0, 1, w), indexing="ij")

    theta = rng.uniform(0, 2 * np.pi)
    ramp = (np.cos(theta) * ii + np.sin(theta) * jj)
    ramp = (ramp - ramp.min()) / max(ramp.max() - ramp.min(), 1e-9)
    color_a = rng.uniform(0.2, 0.8, size=c)
    color_b = rng.uniform(0.2, 0.8, size=c)
    img = ramp[:, :, None] * color_a + (1.0 - ramp[:, :, None]) * color_b

    for _ in range(int(rng.integers(2, 4))):
        cx, cy = rng.uniform(0.15, 0.85, size=2)
        shade = rng.uniform(0.2, 0.8, size=c)
        if rng.uniform() < 0.5:
            radius = rng.uniform(0.12, 0.3)
            d = np.sqrt((ii - cx) ** 2 + (jj - cy) ** 2)
            alpha = _smoothstep(d, radius, 0.08)
        else:
            half_h, half_w = rng.uniform(0.1, 0.28, size=2)
            d = np.maximum(np.abs(ii - cx) - half_h, np.abs(jj - cy) - half_w)
            alpha = _smoothstep(d, 0.0, 0.08)
        img = img * (1.0 - 0.8 * alpha[:, :, None]) + shade * 0.8 * alpha[:, :, None]

    return ImageTensor(id=image_id, pixels=0.15 + 0.7 * np.clip(img, 0.0, 1.0))


def box_blur(pixels: np.ndarray) -> np.ndarray:
    """3x3 mean filter with edge replication."""
    padded = np.pad(pixels, ((1, 1), (1, 1), (0, 0)), mode="edge")
    h, w, _ = pixels.shape
    acc = np.zeros_like(pixels)
    for di in range(3):
        for dj in range(3):
            acc += padded[di:di + h, dj:dj + w]
    return acc / 9.0


def corrupt_image(x: ImageTensor, level: float, material: bytes,
                  noise_sigma: float = 0.02, flat_pull: float = 0.3) -> ImageTensor:
    """Wash out structure: fade toward a flat mid-anchored color, blur, add noise.

    Rising levels blend the image toward its per-channel mean pulled by
    `flat_pull` toward mid-gray, mix in a double box blur, and add seeded
    Gaussian noise scaled by `level * noise_sigma`.  Level 0 returns the
    pixels untouched.
    """
    if level < 0:
        raise InputError(f"corruption level must be >= 0, got {level}")
    if level == 0:
        return ImageTensor(id=x.id, pixels=x.pixels.copy())
    rng = generator_for(material)
    mean = x.pixels.mean(axis=(0, 1), keepdims=True)
    target = 0.5 + flat_pull * (mean - 0.5)
    faded = (1.0 - level) * x.pixels + level * target
    mixed = (1.0 - level) * faded + level * box_blur(box_blur(faded))
    noisy = mixed + level * noise_sigma * rng.standard_normal(x.pixels.shape)
    return ImageTensor(id=x.id, pixels=clip01(noisy))
