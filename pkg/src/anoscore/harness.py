"""Measurement orchestration: datasets in, deterministic measure files out.

Measure files are JSON Lines: a header object binding the parameter hash,
model id, seed and tool version, then one record per image sorted by
image_id.  Records are pure functions of (global_seed, image_id, params,
model), so reruns and different worker counts produce byte-identical files.
A content-addressed cache (keyed by params hash, model id, seed and image
digest) skips images that were already measured.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .complexity import TrajectoryConfig, complexity
from .images import list_image_files, load_image
from .models import build_model
from .rng import seed_material
from .scores import MeasureRecord
from .types import ImageTensor, InputError
from .vulnerability import AttackConfig, vulnerability

CACHE_ENV_VAR = "ANOSCORE_CACHE_DIR"
PIXEL_CONVENTION = "float01"


def params_hash(trajectory: TrajectoryConfig, attack: AttackConfig) -> str:
    """Stable digest of every measurement-affecting parameter."""
    payload = {
        "epsilon": trajectory.epsilon,
        "K": trajectory.K,
        "alpha": attack.alpha,
        "delta": attack.delta,
        "J": attack.J,
        "pixel_convention": PIXEL_CONVENTION,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class RunConfig:
    """Everything one measurement run depends on."""

    global_seed: int
    model_config: dict
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    real_dir: str | None = None
    generated_dir: str | None = None
    out_dir: str = "anoscore-out"
    ks_combination: str = "average"
    workers: int = 1

    @property
    def params_hash(self) -> str:
        return params_hash(self.trajectory, self.attack)


def measure_image(model, x: ImageTensor, trajectory: TrajectoryConfig,
                  attack: AttackConfig, global_seed: int, phash: str) -> MeasureRecord:
    """Complexity and vulnerability of one image under per-image seeds."""
    c = complexity(model, x, trajectory,
                   seed_material(global_seed, x.id, "complexity"))
    v = vulnerability(model, x, attack,
                      seed_material(global_seed, x.id, "vulnerability"))
    return MeasureRecord(image_id=x.id, complexity=c.complexity,
                         vulnerability=v.vulnerability, model_id=model.model_id,
                         params_hash=phash, seed=global_seed)


def measure_images(images: list[ImageTensor], model, trajectory: TrajectoryConfig,
                   attack: AttackConfig, global_seed: int) -> list[MeasureRecord]:
    """In-memory measurement of a list of images, sorted by image_id."""
    phash = params_hash(trajectory, attack)
    records = [measure_image(model, x, trajectory, attack, global_seed, phash)
               for x in images]
    return sorted(records, key=lambda r: r.image_id)


# --- per-process worker state -------------------------------------------------

_WORKER_MODELS: dict[str, object] = {}


def _worker_model(model_config_json: str):
    model = _WORKER_MODELS.get(model_config_json)
    if model is None:
        model = build_model(json.loads(model_config_json))
        _WORKER_MODELS[model_config_json] = model
    return model


def _record_to_dict(r: MeasureRecord) -> dict:
    return {
        "image_id": r.image_id,
        "complexity": r.complexity,
        "vulnerability": r.vulnerability,
        "model_id": r.model_id,
        "params_hash": r.params_hash,
        "seed": r.seed,
    }


def _cache_path(cache_dir: str, key: str) -> Path:
    return Path(cache_dir) / key[:2] / f"{key}.json"


def _measure_one_file(task: dict) -> dict:
    """Measure (or load from cache) a single image file.  Runs in a worker."""
    image_id = task["image_id"]
    try:
        raw = Path(task["path"]).read_bytes()
    except OSError as exc:
        return {"skip": {"image_id": image_id, "reason": str(exc)}}

    cache_dir = task["cache_dir"]
    key = None
    if cache_dir:
        digest = hashlib.sha256(raw).hexdigest()
        key = hashlib.sha256(
            "\x1f".join([task["params_hash"], task["model_id"],
                         str(task["global_seed"]), image_id, digest]).encode("utf-8")
        ).hexdigest()
        cached = _cache_path(cache_dir, key)
        if cached.is_file():
            try:
                return {"record": json.loads(cached.read_text(encoding="utf-8")),
                        "cached": True}
            except (OSError, json.JSONDecodeError):
                pass  # unreadable cache entry: fall through and recompute

    try:
        x = load_image(task["path"], image_id)
        model = _worker_model(task["model_config_json"])
        trajectory = TrajectoryConfig(epsilon=task["epsilon"], K=task["K"])
        attack = AttackConfig(alpha=task["alpha"], delta=task["delta"], J=task["J"])
        record = measure_image(model, x, trajectory, attack,
                               task["global_seed"], task["params_hash"])
    except Exception as exc:
        return {"skip": {"image_id": image_id, "reason": f"{type(exc).__name__}: {exc}"}}

    payload = _record_to_dict(record)
    if key is not None:
        path = _cache_path(cache_dir, key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")
        tmp.replace(path)
    return {"record": payload, "cached": False}


def measure_directory(images_dir, cfg: RunConfig, cache_dir: str | None = None) -> dict:
    """Measure every image under a directory.

    Returns {"records": [dict, ...] sorted by image_id, "skips": [...],
    "cached": int, "computed": int}.  The model id is resolved once up front
    so cache keys never require a model rebuild.
    """
    if cache_dir is None:
        cache_dir = os.environ.get(CACHE_ENV_VAR, "")
    model = build_model(cfg.model_config)
    phash = cfg.params_hash
    tasks = [
        {
            "image_id": image_id,
            "path": str(path),
            "model_config_json": json.dumps(cfg.model_config, sort_keys=True),
            "model_id": model.model_id,
            "epsilon": cfg.trajectory.epsilon,
            "K": cfg.trajectory.K,
            "alpha": cfg.attack.alpha,
            "delta": cfg.attack.delta,
            "J": cfg.attack.J,
            "global_seed": cfg.global_seed,
            "params_hash": phash,
            "cache_dir": cache_dir,
        }
        for image_id, path in list_image_files(images_dir)
    ]

    if cfg.workers <= 1:
        results = [_measure_one_file(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_measure_one_file, tasks))

    records = sorted((r["record"] for r in results if "record" in r),
                     key=lambda d: d["image_id"])
    skips = sorted((r["skip"] for r in results if "skip" in r),
                   key=lambda d: d["image_id"])
    return {
        "records": records,
        "skips": skips,
        "cached": sum(1 for r in results if r.get("cached")),
        "computed": sum(1 for r in results if "record" in r and not r.get("cached")),
        "model_id": model.model_id,
        "params_hash": phash,
    }


def write_measure_file(path, result: dict, cfg: RunConfig, dataset_name: str,
                       source_dir: str | None = None) -> None:
    """Serialize a measure_directory result as canonical JSON Lines."""
    header = {
        "kind": "anoscore-measures",
        "tool_version": __version__,
        "dataset": dataset_name,
        "model_id": result["model_id"],
        "params_hash": result["params_hash"],
        "global_seed": cfg.global_seed,
        "params": {
            "epsilon": cfg.trajectory.epsilon,
            "K": cfg.trajectory.K,
            "alpha": cfg.attack.alpha,
            "delta": cfg.attack.delta,
            "J": cfg.attack.J,
            "pixel_convention": PIXEL_CONVENTION,
        },
        "n_records": len(result["records"]),
        "skips": result["skips"],
        "source_dir": source_dir,
    }
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    lines += [json.dumps(r, sort_keys=True, separators=(",", ":"))
              for r in result["records"]]
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_measure_file(path) -> tuple[dict, list[MeasureRecord]]:
    """Parse a measure file back into its header and records."""
    p = Path(path)
    try:
        lines = p.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read measure file {p}: {exc}") from exc
    if not lines:
        raise InputError(f"measure file {p} is empty")
    header = json.loads(lines[0])
    if header.get("kind") != "anoscore-measures":
        raise InputError(f"{p} is not a measure file")
    records = []
    for line in lines[1:]:
        if not line.strip():
            continue
        d = json.loads(line)
        records.append(MeasureRecord(
            image_id=d["image_id"], complexity=d["complexity"],
            vulnerability=d["vulnerability"], model_id=d["model_id"],
            params_hash=d["params_hash"], seed=d["seed"]))
    return header, records


def measure_dataset(cfg: RunConfig, which: str, cache_dir: str | None = None) -> Path:
    """Measure the configured real or generated directory; returns the file path.

    Raises InputError when any image had to be skipped (the file still
    records the skips for inspection).
    """
    if which not in ("real", "generated"):
        raise InputError(f"which must be 'real' or 'generated', got {which!r}")
    directory = cfg.real_dir if which == "real" else cfg.generated_dir
    if not directory:
        raise InputError(f"no {which} directory configured")
    result = measure_directory(directory, cfg, cache_dir=cache_dir)
    out_path = Path(cfg.out_dir) / f"{which}.measures.jsonl"
    write_measure_file(out_path, result, cfg, dataset_name=Path(directory).name,
                       source_dir=str(directory))
    if result["skips"]:
        raise InputError(
            f"{len(result['skips'])} image(s) skipped while measuring {directory}; "
            f"see {out_path}")
    return out_path
