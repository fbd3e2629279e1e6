import dataclasses
import json

import pytest

from anoscore.complexity import TrajectoryConfig
from anoscore.harness import (
    RunConfig,
    measure_dataset,
    measure_directory,
    measure_images,
    params_hash,
    read_measure_file,
    write_measure_file,
)
from anoscore.images import make_texture_image, save_image
from anoscore.models import make_toy_nonlinear_model
from anoscore.types import InputError
from anoscore.vulnerability import AttackConfig

MODEL_CONFIG = {"kind": "toy_nonlinear", "seed": 5, "input_shape": [8, 8, 3],
                "feature_dim": 8}


def _write_images(directory, n=6, shape=(8, 8, 3)):
    for i in range(n):
        x = make_texture_image(f"im{i:02d}.png", f"tex{i}".encode(), shape)
        save_image(x, directory / x.id)


def _config(tmp_path, **kw):
    defaults = dict(global_seed=3, model_config=MODEL_CONFIG,
                    trajectory=TrajectoryConfig(epsilon=0.01, K=4),
                    attack=AttackConfig(J=4), out_dir=str(tmp_path / "out"))
    defaults.update(kw)
    return RunConfig(**defaults)


class TestParamsHash:
    def test_binds_measurement_parameters(self):
        base = params_hash(TrajectoryConfig(), AttackConfig())
        assert params_hash(TrajectoryConfig(), AttackConfig()) == base
        assert params_hash(TrajectoryConfig(epsilon=0.005), AttackConfig()) != base
        assert params_hash(TrajectoryConfig(K=5), AttackConfig()) != base
        assert params_hash(TrajectoryConfig(), AttackConfig(alpha=0.02)) != base
        assert params_hash(TrajectoryConfig(), AttackConfig(delta=0.0)) != base
        assert params_hash(TrajectoryConfig(), AttackConfig(J=5)) != base


class TestMeasureImages:
    def test_sorted_and_deterministic(self):
        model = make_toy_nonlinear_model(1, (8, 8, 3), 8)
        images = [make_texture_image(f"b{i}", f"s{i}".encode(), (8, 8, 3))
                  for i in (3, 1, 2)]
        r1 = measure_images(images, model, TrajectoryConfig(K=3), AttackConfig(J=3), 0)
        r2 = measure_images(list(reversed(images)), model, TrajectoryConfig(K=3),
                            AttackConfig(J=3), 0)
        assert [r.image_id for r in r1] == sorted(r.image_id for r in r1)
        assert r1 == r2  # processing order does not matter


class TestMeasureDirectory:
    def test_rerun_is_byte_identical(self, tmp_path):
        images = tmp_path / "imgs"
        images.mkdir()
        _write_images(images)
        cfg = _config(tmp_path)
        out1 = tmp_path / "a.jsonl"
        out2 = tmp_path / "b.jsonl"
        for out in (out1, out2):
            result = measure_directory(images, cfg)
            write_measure_file(out, result, cfg, dataset_name="imgs")
        assert out1.read_bytes() == out2.read_bytes()

    def test_worker_counts_agree(self, tmp_path):
        images = tmp_path / "imgs"
        images.mkdir()
        _write_images(images, n=8)
        serial = measure_directory(images, _config(tmp_path, workers=1))
        parallel = measure_directory(images, _config(tmp_path, workers=4))
        assert serial["records"] == parallel["records"]

    def test_unreadable_image_recorded_as_skip(self, tmp_path):
        images = tmp_path / "imgs"
        images.mkdir()
        _write_images(images, n=3)
        (images / "broken.png").write_bytes(b"not a png at all")
        result = measure_directory(images, _config(tmp_path))
        assert len(result["records"]) == 3
        assert len(result["skips"]) == 1
        assert result["skips"][0]["image_id"] == "broken.png"
        assert result["skips"][0]["reason"]

    def test_empty_directory_is_an_error(self, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        with pytest.raises(InputError, match="no images"):
            measure_directory(empty, _config(tmp_path))

    def test_cache_reused_only_on_full_match(self, tmp_path):
        images = tmp_path / "imgs"
        images.mkdir()
        _write_images(images, n=4)
        cache = str(tmp_path / "cache")
        cfg = _config(tmp_path)

        first = measure_directory(images, cfg, cache_dir=cache)
        assert first["computed"] == 4 and first["cached"] == 0
        again = measure_directory(images, cfg, cache_dir=cache)
        assert again["computed"] == 0 and again["cached"] == 4
        assert again["records"] == first["records"]

        # different measurement params -> full recompute
        other_params = dataclasses.replace(cfg, attack=AttackConfig(J=5))
        r = measure_directory(images, other_params, cache_dir=cache)
        assert r["computed"] == 4 and r["cached"] == 0

        # different model -> full recompute
        other_model = dataclasses.replace(
            cfg, model_config={**MODEL_CONFIG, "seed": 6})
        r = measure_directory(images, other_model, cache_dir=cache)
        assert r["computed"] == 4 and r["cached"] == 0

        # different global seed -> full recompute
        other_seed = dataclasses.replace(cfg, global_seed=99)
        r = measure_directory(images, other_seed, cache_dir=cache)
        assert r["computed"] == 4 and r["cached"] == 0

        # touched image content -> that image recomputed, the rest cached
        x = make_texture_image("im00.png", b"different-content", (8, 8, 3))
        save_image(x, images / "im00.png")
        r = measure_directory(images, cfg, cache_dir=cache)
        assert r["computed"] == 1 and r["cached"] == 3


class TestMeasureFileRoundTrip:
    def test_header_and_records_survive(self, tmp_path):
        images = tmp_path / "imgs"
        images.mkdir()
        _write_images(images, n=3)
        cfg = _config(tmp_path)
        result = measure_directory(images, cfg)
        path = tmp_path / "m.jsonl"
        write_measure_file(path, result, cfg, dataset_name="demo",
                           source_dir=str(images))
        header, records = read_measure_file(path)
        assert header["dataset"] == "demo"
        assert header["params_hash"] == cfg.params_hash
        assert header["n_records"] == 3
        assert header["params"]["pixel_convention"] == "float01"
        assert [r.image_id for r in records] == [d["image_id"] for d in result["records"]]
        got = [{k: getattr(r, k) for k in ("image_id", "complexity", "vulnerability",
                                           "model_id", "params_hash", "seed")}
               for r in records]
        assert got == result["records"]

    def test_reject_non_measure_file(self, tmp_path):
        path = tmp_path / "junk.jsonl"
        path.write_text(json.dumps({"kind": "other"}) + "\n")
        with pytest.raises(InputError):
            read_measure_file(path)


class TestMeasureDataset:
    def test_writes_file_and_raises_on_skips(self, tmp_path):
        images = tmp_path / "real"
        images.mkdir()
        _write_images(images, n=3)
        cfg = _config(tmp_path, real_dir=str(images))
        out = measure_dataset(cfg, "real")
        assert out.is_file()
        header, records = read_measure_file(out)
        assert len(records) == 3

        (images / "broken.png").write_bytes(b"nope")
        with pytest.raises(InputError, match="skipped"):
            measure_dataset(cfg, "real")

        with pytest.raises(InputError):
            measure_dataset(cfg, "generated")  # not configured
        with pytest.raises(InputError):
            measure_dataset(cfg, "other")
