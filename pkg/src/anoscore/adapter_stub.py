"""Reference child process for the external-model adapter protocol.

Serves one of the in-repo toy models over stdin/stdout, e.g.:

    python -m anoscore.adapter_stub --kind affine --seed 7 \
        --input-shape 8,8,3 --feature-dim 16

Real deployments replace this with a process wrapping a pretrained backbone;
the wire format is documented on SubprocessFeatureModel.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .models import build_model
from .types import FeatureVector, ImageTensor


def serve_model(model, lines_in, out) -> None:
    """Answer protocol requests read from `lines_in`, writing JSON to `out`."""
    for line in lines_in:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            op = req["op"]
            if op == "describe":
                reply = {
                    "model_id": model.model_id,
                    "feature_dim": model.feature_dim,
                    "input_shape": list(model.input_shape),
                }
            elif op == "forward":
                x = _image_from(req)
                reply = {"values": model.forward(x).values.tolist()}
            elif op == "loss_gradient":
                x = _image_from(req)
                ref = FeatureVector(values=np.asarray(req["reference"], dtype=np.float64),
                                    model_id=model.model_id)
                reply = {"gradient": model.loss_gradient(ref, x).reshape(-1).tolist()}
            else:
                reply = {"error": f"unknown op {op!r}"}
        except Exception as exc:  # report instead of dying mid-protocol
            reply = {"error": f"{type(exc).__name__}: {exc}"}
        out.write(json.dumps(reply) + "\n")
        out.flush()


def _image_from(req: dict) -> ImageTensor:
    shape = tuple(int(s) for s in req["shape"])
    pixels = np.asarray(req["pixels"], dtype=np.float64).reshape(shape)
    return ImageTensor(id="adapter-probe", pixels=pixels)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--kind", choices=["affine", "toy_nonlinear"], default="affine")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--input-shape", default="8,8,3",
                        help="comma-separated H,W,C")
    parser.add_argument("--feature-dim", type=int, default=16)
    args = parser.parse_args(argv)
    shape = tuple(int(s) for s in args.input_shape.split(","))
    model = build_model({"kind": args.kind, "seed": args.seed,
                         "input_shape": shape, "feature_dim": args.feature_dim})
    serve_model(model, sys.stdin, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
