"""Feature models: deterministic toy backbones and the external-model adapter.

The toy models are desk-scale stand-ins for pretrained vision backbones.
They are seeded, frozen, and carry exact analytic input-gradients so that
measurement code can be validated against finite differences.  Real
backbones attach through the same FeatureModel interface via the
out-of-process adapter (see SubprocessFeatureModel / adapter_stub).
"""

from __future__ import annotations

import json
import subprocess
from pathlib import Path

import numpy as np

from .rng import generator_for
from .types import FeatureModel, FeatureVector, ImageTensor, InputError, NumericError


def _weights_rng(kind: str, seed: int, input_shape, feature_dim: int) -> np.random.Generator:
    shape_tag = "x".join(str(int(s)) for s in input_shape)
    material = f"model\x1f{kind}\x1f{seed}\x1f{shape_tag}\x1f{feature_dim}".encode("utf-8")
    return generator_for(material)


def _check_probe(model: FeatureModel, x: ImageTensor) -> None:
    if tuple(x.pixels.shape) != tuple(model.input_shape):
        raise InputError(
            f"model {model.model_id!r} expects input shape {tuple(model.input_shape)}, "
            f"image {x.id!r} has {x.pixels.shape}"
        )


def _unit_residual(features: np.ndarray, reference: np.ndarray, model_id: str) -> np.ndarray:
    """Direction of increase of ||features - reference||, zero at coincidence."""
    diff = features - reference
    norm = np.linalg.norm(diff)
    if not np.isfinite(norm):
        raise NumericError(f"model {model_id!r}: non-finite feature distance")
    if norm == 0.0:
        return np.zeros_like(diff)
    return diff / norm


class AffineFeatureModel(FeatureModel):
    """M(x) = A @ flatten(x) + b with seeded standard-normal weights.

    Affine maps send collinear inputs to collinear features, which makes this
    model the exact zero-curvature reference for trajectory measurements.
    """

    def __init__(self, seed: int, input_shape, feature_dim: int):
        if feature_dim < 2:
            raise InputError(f"feature_dim must be >= 2, got {feature_dim}")
        self.input_shape = tuple(int(s) for s in input_shape)
        self.feature_dim = int(feature_dim)
        self.seed = int(seed)
        n = int(np.prod(self.input_shape))
        rng = _weights_rng("affine", seed, self.input_shape, feature_dim)
        self.A = rng.standard_normal((self.feature_dim, n))
        self.b = rng.standard_normal(self.feature_dim)
        h, w, c = self.input_shape
        self.model_id = f"affine-s{seed}-{h}x{w}x{c}-d{feature_dim}"

    def forward(self, x: ImageTensor) -> FeatureVector:
        _check_probe(self, x)
        values = self.A @ x.pixels.reshape(-1) + self.b
        return FeatureVector(values=values, model_id=self.model_id)

    def loss_gradient(self, reference: FeatureVector, probe: ImageTensor) -> np.ndarray:
        _check_probe(self, probe)
        f = self.A @ probe.pixels.reshape(-1) + self.b
        u = _unit_residual(f, reference.values, self.model_id)
        return (self.A.T @ u).reshape(self.input_shape)


def _extract_patches(x: np.ndarray) -> np.ndarray:
    """3x3 same-padded patches of an (H, W, C) array as (H, W, 9*C)."""
    h, w, c = x.shape
    padded = np.zeros((h + 2, w + 2, c), dtype=x.dtype)
    padded[1:-1, 1:-1] = x
    patches = np.empty((h, w, 9 * c), dtype=x.dtype)
    k = 0
    for di in range(3):
        for dj in range(3):
            patches[:, :, k * c:(k + 1) * c] = padded[di:di + h, dj:dj + w]
            k += 1
    return patches


def _scatter_patches(dpatches: np.ndarray, shape) -> np.ndarray:
    """Adjoint of _extract_patches: accumulate patch gradients back to pixels."""
    h, w, c = shape
    dpadded = np.zeros((h + 2, w + 2, c), dtype=dpatches.dtype)
    k = 0
    for di in range(3):
        for dj in range(3):
            dpadded[di:di + h, dj:dj + w] += dpatches[:, :, k * c:(k + 1) * c]
            k += 1
    return dpadded[1:-1, 1:-1]


class ToyConvFeatureModel(FeatureModel):
    """Two 3x3 convolution stages with tanh, then a linear head.

    Weights are seeded and frozen; forward and the input-gradient of the
    feature-distance loss are exact (backpropagation written out by hand, no
    autodiff dependency).
    """

    HIDDEN1 = 6
    HIDDEN2 = 4
    GAIN = 1.5

    def __init__(self, seed: int, input_shape, feature_dim: int):
        if feature_dim < 2:
            raise InputError(f"feature_dim must be >= 2, got {feature_dim}")
        self.input_shape = tuple(int(s) for s in input_shape)
        h, w, c = self.input_shape
        self.feature_dim = int(feature_dim)
        self.seed = int(seed)
        rng = _weights_rng("toy_nonlinear", seed, self.input_shape, feature_dim)
        c1, c2 = self.HIDDEN1, self.HIDDEN2
        self.w1 = rng.standard_normal((9 * c, c1)) * (self.GAIN / np.sqrt(9 * c))
        self.b1 = rng.standard_normal(c1) * 0.1
        self.w2 = rng.standard_normal((9 * c1, c2)) * (self.GAIN / np.sqrt(9 * c1))
        self.b2 = rng.standard_normal(c2) * 0.1
        n_flat = h * w * c2
        self.wh = rng.standard_normal((n_flat, self.feature_dim)) / np.sqrt(n_flat)
        self.bh = rng.standard_normal(self.feature_dim) * 0.1
        self.model_id = f"toynl-s{seed}-{h}x{w}x{c}-d{feature_dim}"

    def _forward_acts(self, pixels: np.ndarray):
        z0 = 2.0 * pixels - 1.0
        a1 = np.tanh(_extract_patches(z0) @ self.w1 + self.b1)
        a2 = np.tanh(_extract_patches(a1) @ self.w2 + self.b2)
        f = a2.reshape(-1) @ self.wh + self.bh
        return f, a1, a2

    def forward(self, x: ImageTensor) -> FeatureVector:
        _check_probe(self, x)
        f, _, _ = self._forward_acts(x.pixels)
        return FeatureVector(values=f, model_id=self.model_id)

    def loss_gradient(self, reference: FeatureVector, probe: ImageTensor) -> np.ndarray:
        _check_probe(self, probe)
        f, a1, a2 = self._forward_acts(probe.pixels)
        u = _unit_residual(f, reference.values, self.model_id)
        da2 = (self.wh @ u).reshape(a2.shape)
        dz2 = da2 * (1.0 - a2 * a2)
        da1 = _scatter_patches(dz2 @ self.w2.T, a1.shape)
        dz1 = da1 * (1.0 - a1 * a1)
        dz0 = _scatter_patches(dz1 @ self.w1.T, probe.pixels.shape)
        return 2.0 * dz0


def make_toy_affine_model(seed: int, input_shape, feature_dim: int) -> AffineFeatureModel:
    return AffineFeatureModel(seed, input_shape, feature_dim)


def make_toy_nonlinear_model(seed: int, input_shape, feature_dim: int) -> ToyConvFeatureModel:
    return ToyConvFeatureModel(seed, input_shape, feature_dim)


class SubprocessFeatureModel(FeatureModel):
    """Adapter that drives an external model process over line-delimited JSON.

    Protocol (one JSON object per line on the child's stdin/stdout):

        -> {"op": "describe"}
        <- {"model_id": str, "feature_dim": int, "input_shape": [H, W, C]}
        -> {"op": "forward", "shape": [H, W, C], "pixels": [flat row-major]}
        <- {"values": [float, ...]}
        -> {"op": "loss_gradient", "shape": [...], "pixels": [...],
            "reference": [float, ...]}
        <- {"gradient": [flat row-major]}

    Any response carrying an "error" key aborts the measurement.  The child
    owns its own input scale and normalization; pixels cross the boundary in
    the canonical [0, 1] float convention.
    """

    def __init__(self, command: list[str], model_id: str | None = None):
        if not command:
            raise InputError("adapter command must be non-empty")
        self.command = list(command)
        self._proc = subprocess.Popen(
            self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True
        )
        info = self._request({"op": "describe"})
        self.model_id = model_id or str(info["model_id"])
        self.feature_dim = int(info["feature_dim"])
        self.input_shape = tuple(int(s) for s in info["input_shape"])

    def _request(self, payload: dict) -> dict:
        self._proc.stdin.write(json.dumps(payload) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise NumericError(f"adapter {self.command[0]!r} closed its output stream")
        reply = json.loads(line)
        if "error" in reply:
            raise NumericError(f"adapter {self.command[0]!r} failed: {reply['error']}")
        return reply

    def forward(self, x: ImageTensor) -> FeatureVector:
        _check_probe(self, x)
        reply = self._request(
            {"op": "forward", "shape": list(x.pixels.shape),
             "pixels": x.pixels.reshape(-1).tolist()}
        )
        return FeatureVector(values=np.asarray(reply["values"], dtype=np.float64),
                             model_id=self.model_id)

    def loss_gradient(self, reference: FeatureVector, probe: ImageTensor) -> np.ndarray:
        _check_probe(self, probe)
        reply = self._request(
            {"op": "loss_gradient", "shape": list(probe.pixels.shape),
             "pixels": probe.pixels.reshape(-1).tolist(),
             "reference": reference.values.tolist()}
        )
        grad = np.asarray(reply["gradient"], dtype=np.float64).reshape(probe.pixels.shape)
        if not np.isfinite(grad).all():
            raise NumericError(f"adapter {self.model_id!r} returned a non-finite gradient")
        return grad

    def close(self):
        if self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)

    def __del__(self):  # best-effort cleanup
        try:
            self.close()
        except Exception:
            pass


MODEL_KINDS = ("affine", "toy_nonlinear", "external_adapter")


def build_model(config: dict) -> FeatureModel:
    """Construct a FeatureModel from a config mapping.

    Expected keys: kind (affine | toy_nonlinear | external_adapter); for toy
    kinds: seed, input_shape, feature_dim; for external_adapter: command and
    optionally model_id.
    """
    kind = config.get("kind")
    if kind == "affine":
        return AffineFeatureModel(config["seed"], config["input_shape"], config["feature_dim"])
    if kind == "toy_nonlinear":
        return ToyConvFeatureModel(config["seed"], config["input_shape"], config["feature_dim"])
    if kind == "external_adapter":
        return SubprocessFeatureModel(config["command"], model_id=config.get("model_id"))
    raise InputError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def load_model_config(path) -> dict:
    """Read a JSON model config file."""
    p = Path(path)
    try:
        config = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read model config {p}: {exc}") from exc
    if not isinstance(config, dict):
        raise InputError(f"model config {p} must be a JSON object")
    return config
