"""Per-super-pixel contribution analysis for the feature-space attack.

An image is partitioned into super-pixels (SLIC-style k-means over color and
position), random subsets of super-pixels are attacked through the mask
channel of the attack config, and the resulting feature displacements are
regressed on the selection indicators.  The regression coefficients rank how
much each region contributes to feature change; rendered red = high, blue =
low.
"""

from __future__ import annotations

import dataclasses
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .rng import generator_for
from .types import FeatureModel, ImageTensor, InputError
from .vulnerability import AttackConfig, vulnerability


@dataclass(frozen=True)
class Segmentation:
    """A total partition of the pixel grid into 4-connected super-pixels."""

    labels: np.ndarray  # H x W ints in [0, S)
    S: int


@dataclass(frozen=True)
class AttributionMap:
    """Least-squares contribution coefficients for one image's super-pixels."""

    coefficients: np.ndarray  # (S,)
    intercept: float
    trials: int
    design: np.ndarray        # trials x S binary selection indicators
    responses: np.ndarray     # (trials,) feature displacements
    degenerate: bool = False


def _grid_shape(n_segments: int, h: int, w: int) -> tuple[int, int]:
    """Rows/cols of initial cluster centers whose product best matches n_segments."""
    best = None
    for rows in range(1, n_segments + 1):
        cols = max(1, round(n_segments / rows))
        count = rows * cols
        # prefer counts close to the target, then cells close to square
        aspect_penalty = abs((h / rows) - (w / cols)) / max(h, w)
        key = (abs(count - n_segments), aspect_penalty)
        if best is None or key < best[0]:
            best = (key, rows, cols)
    return best[1], best[2]


def _connected_components(labels: np.ndarray):
    """4-connected components of a label map: component map plus pixel lists."""
    h, w = labels.shape
    comp = np.full((h, w), -1, dtype=np.int64)
    members: list[list[tuple[int, int]]] = []
    for i in range(h):
        for j in range(w):
            if comp[i, j] >= 0:
                continue
            original = labels[i, j]
            cid = len(members)
            stack = [(i, j)]
            comp[i, j] = cid
            pixels = [(i, j)]
            while stack:
                a, b = stack.pop()
                for ni, nj in ((a + 1, b), (a - 1, b), (a, b + 1), (a, b - 1)):
                    if 0 <= ni < h and 0 <= nj < w and comp[ni, nj] < 0 \
                            and labels[ni, nj] == original:
                        comp[ni, nj] = cid
                        pixels.append((ni, nj))
                        stack.append((ni, nj))
            members.append(pixels)
    return comp, members


def _merge_small_components(comp: np.ndarray, members, min_size: int) -> np.ndarray:
    """Merge components below min_size into their most-adjacent neighbor."""
    h, w = comp.shape
    alive = {cid: set(px) for cid, px in enumerate(members)}
    while len(alive) > 1:
        small = sorted(cid for cid, px in alive.items() if len(px) < min_size)
        if not small:
            break
        cid = min(small, key=lambda c: (len(alive[c]), c))
        contact: dict[int, int] = {}
        for (a, b) in alive[cid]:
            for ni, nj in ((a + 1, b), (a - 1, b), (a, b + 1), (a, b - 1)):
                if 0 <= ni < h and 0 <= nj < w:
                    other = int(comp[ni, nj])
                    if other != cid:
                        contact[other] = contact.get(other, 0) + 1
        target = max(contact, key=lambda c: (contact[c], -c))
        for (a, b) in alive[cid]:
            comp[a, b] = target
        alive[target] |= alive.pop(cid)
    return comp


def segment(x: ImageTensor, n_segments: int, compactness: float = 0.8,
            n_iter: int = 10) -> Segmentation:
    """SLIC-style super-pixel segmentation of `x`.

    K-means over concatenated (color, position) features with the spatial
    term scaled by compactness/S, initialized on a regular grid, followed by
    4-connectivity enforcement.  The achieved segment count can deviate from
    `n_segments` by the grid rounding and by dust-merging, normally well
    within +-30%.
    """
    h, w, _ = x.pixels.shape
    if n_segments < 2:
        raise InputError(f"n_segments must be >= 2, got {n_segments}")
    if n_segments > h * w:
        raise InputError(f"image {h}x{w} too small for {n_segments} segments")

    rows, cols = _grid_shape(n_segments, h, w)
    step = max(np.sqrt(h * w / (rows * cols)), 1.0)
    # pixel-center coordinates: a pixel grid 0..n-1 spans [-0.5, n-0.5]
    ci = (np.arange(rows) + 0.5) * h / rows - 0.5
    cj = (np.arange(cols) + 0.5) * w / cols - 0.5
    centers_pos = np.array([(a, b) for a in ci for b in cj])          # (S0, 2)
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    color = x.pixels
    centers_col = np.array([
        color[min(int(a), h - 1), min(int(b), w - 1)] for a, b in centers_pos
    ])

    spatial_weight = (compactness / step) ** 2
    labels = np.zeros((h, w), dtype=np.int64)
    for _ in range(n_iter):
        best_dist = np.full((h, w), np.inf)
        window = int(np.ceil(2 * step))
        for idx, ((a, b), col) in enumerate(zip(centers_pos, centers_col)):
            i0, i1 = max(int(a) - window, 0), min(int(a) + window + 1, h)
            j0, j1 = max(int(b) - window, 0), min(int(b) + window + 1, w)
            d_col = ((color[i0:i1, j0:j1] - col) ** 2).sum(axis=2)
            d_pos = (ii[i0:i1, j0:j1] - a) ** 2 + (jj[i0:i1, j0:j1] - b) ** 2
            dist = d_col + spatial_weight * d_pos
            patch = best_dist[i0:i1, j0:j1]
            closer = dist < patch
            patch[closer] = dist[closer]
            labels[i0:i1, j0:j1][closer] = idx
        if np.isinf(best_dist).any():  # pragma: no cover - windows always cover
            far = np.argwhere(np.isinf(best_dist))
            for a, b in far:
                d = ((centers_pos - (a, b)) ** 2).sum(axis=1)
                labels[a, b] = int(np.argmin(d))
        for idx in range(len(centers_pos)):
            sel = labels == idx
            if sel.any():
                centers_pos[idx] = (ii[sel].mean(), jj[sel].mean())
                centers_col[idx] = color[sel].mean(axis=0)

    comp, members = _connected_components(labels)
    min_size = max(1, (h * w) // (n_segments * 4))
    comp = _merge_small_components(comp, members, min_size)
    _, flat = np.unique(comp, return_inverse=True)
    ordered = flat.reshape(h, w)
    # renumber in row-major first-appearance order for stable ids
    remap = {}
    final = np.empty((h, w), dtype=np.int64)
    for i in range(h):
        for j in range(w):
            v = int(ordered[i, j])
            if v not in remap:
                remap[v] = len(remap)
            final[i, j] = remap[v]
    return Segmentation(labels=final, S=len(remap))


def mask_for_segments(seg: Segmentation, selected, channels: int) -> np.ndarray:
    """Binary pixel mask (H x W x C) covering the selected super-pixels."""
    chosen = np.isin(seg.labels, np.asarray(list(selected), dtype=np.int64))
    return np.repeat(chosen[:, :, None], channels, axis=2).astype(np.float64)


def fit_attribution(design: np.ndarray, responses: np.ndarray):
    """Least-squares fit responses ~ design @ W + b.

    Returns (coefficients, intercept, degenerate).  The solution is the
    minimum-norm one when the system is underdetermined; responses that are
    all identical cannot attribute anything and yield zero coefficients with
    the degenerate flag set.
    """
    if np.all(responses == responses[0]):
        return np.zeros(design.shape[1]), float(responses[0]), True
    system = np.hstack([design, np.ones((design.shape[0], 1))])
    theta, *_ = np.linalg.lstsq(system, responses, rcond=None)
    return theta[:-1], float(theta[-1]), False


def attribute(model: FeatureModel, x: ImageTensor, seg: Segmentation,
              cfg: AttackConfig, trials: int, min_sel: int, max_sel: int,
              seed_material: bytes, response_fn=None) -> AttributionMap:
    """Regress masked-attack feature displacement on super-pixel selections.

    Each trial selects a uniformly-sized random subset of super-pixels,
    attacks only those regions, and records the displacement; the linear fit
    responses = design @ coefficients + intercept is solved by least squares
    (minimum-norm when underdetermined).  `response_fn(selected, mask,
    material) -> float` replaces the masked attack as the response generator
    when given (synthetic validation, offline refits).
    """
    if trials < 1:
        raise InputError(f"trials must be >= 1, got {trials}")
    if not (1 <= min_sel <= max_sel <= seg.S):
        raise InputError(
            f"need 1 <= min_sel <= max_sel <= {seg.S}, got [{min_sel}, {max_sel}]")
    if trials < seg.S + 1:
        warnings.warn(
            f"{trials} trials with {seg.S} super-pixels is underdetermined; "
            "coefficients are the minimum-norm solution", stacklevel=2)
    if response_fn is None:
        def response_fn(selected, mask, material):
            trial_cfg = dataclasses.replace(cfg, mask=mask)
            return vulnerability(model, x, trial_cfg, material).vulnerability

    design = np.zeros((trials, seg.S), dtype=np.float64)
    responses = np.zeros(trials, dtype=np.float64)
    for t in range(trials):
        rng = generator_for(seed_material, stream=1 + t)
        size = int(rng.integers(min_sel, max_sel + 1))
        chosen = np.sort(rng.choice(seg.S, size=size, replace=False))
        design[t, chosen] = 1.0
        mask = mask_for_segments(seg, chosen, x.channels)
        trial_material = seed_material + f"\x1ftrial{t}".encode("utf-8")
        responses[t] = response_fn(chosen, mask, trial_material)

    coefficients, intercept, degenerate = fit_attribution(design, responses)
    return AttributionMap(coefficients=coefficients, intercept=intercept,
                          trials=trials, design=design, responses=responses,
                          degenerate=degenerate)


def _diverging_rgb(levels: np.ndarray) -> np.ndarray:
    """Blue -> white -> red map for levels in [0, 1]."""
    lo = np.clip(2.0 * levels, 0.0, 1.0)[..., None]          # blue to white
    hi = np.clip(2.0 * levels - 1.0, 0.0, 1.0)[..., None]    # white to red
    blue = np.array([0.20, 0.30, 0.90])
    white = np.array([1.0, 1.0, 1.0])
    red = np.array([0.90, 0.15, 0.10])
    return (blue * (1 - lo) + white * lo) * (1 - hi) + red * hi


def render_overlay(x: ImageTensor, seg: Segmentation, amap: AttributionMap) -> np.ndarray:
    """Coefficient overlay as an H x W x 3 array: red = high contribution."""
    coeffs = amap.coefficients
    spread = float(coeffs.max() - coeffs.min())
    if amap.degenerate or spread == 0.0:
        levels = np.full(seg.S, 0.5)
    else:
        levels = (coeffs - coeffs.min()) / spread
    level_map = levels[seg.labels]
    heat = _diverging_rgb(level_map)
    gray = x.pixels.mean(axis=2, keepdims=True)
    out = 0.45 * np.repeat(gray, 3, axis=2) + 0.55 * heat
    # darken super-pixel boundaries so regions stay readable
    edges = np.zeros(seg.labels.shape, dtype=bool)
    edges[:-1, :] |= seg.labels[:-1, :] != seg.labels[1:, :]
    edges[:, :-1] |= seg.labels[:, :-1] != seg.labels[:, 1:]
    out[edges] *= 0.35
    return np.clip(out, 0.0, 1.0)


def write_attribution_outputs(out_dir, stem: str, x: ImageTensor, seg: Segmentation,
                              amap: AttributionMap, seed_label: str) -> dict:
    """Write the JSON sidecar and PNG overlay; returns the sidecar paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sidecar = {
        "image_id": x.id,
        "seed": seed_label,
        "n_segments": seg.S,
        "trials": amap.trials,
        "coefficients": amap.coefficients.tolist(),
        "intercept": amap.intercept,
        "design": amap.design.astype(int).tolist(),
        "responses": amap.responses.tolist(),
        "degenerate": amap.degenerate,
    }
    json_path = out / f"{stem}.attribution.json"
    json_path.write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
    overlay = (render_overlay(x, seg, amap) * 255.0).round().astype(np.uint8)
    png_path = out / f"{stem}.overlay.png"
    Image.fromarray(overlay).save(png_path)
    return {"json": str(json_path), "png": str(png_path)}
