import json

import pytest

from anoscore.corruption import CorruptionBenchConfig, corruption_benchmark
from anoscore.types import InputError


class TestCorruptionBenchmark:
    def test_level_zero_equivalent_sets_score_zero(self):
        # a "corruption" that copies the images must give AS exactly 0
        cfg = CorruptionBenchConfig(global_seed=1, n_images=8, image_shape=(8, 8, 3),
                                    feature_dim=8)
        from anoscore.harness import measure_images
        from anoscore.images import corrupt_image, make_texture_image
        from anoscore.models import build_model
        from anoscore.rng import seed_material
        from anoscore.scores import anomaly_score

        model = build_model({"kind": "toy_nonlinear", "seed": 1,
                             "input_shape": [8, 8, 3], "feature_dim": 8})
        clean = [make_texture_image(f"t{i}", seed_material(1, f"t{i}", "texture"),
                                    (8, 8, 3)) for i in range(8)]
        copies = [corrupt_image(x, 0.0, seed_material(1, x.id, "c")) for x in clean]
        a = measure_images(clean, model, cfg.trajectory, cfg.attack, 1)
        b = measure_images(copies, model, cfg.trajectory, cfg.attack, 1)
        assert anomaly_score(a, b).value == 0.0

    def test_report_shape_and_verdicts(self, tmp_path):
        cfg = CorruptionBenchConfig(global_seed=0, n_images=24,
                                    out_dir=str(tmp_path))
        report = corruption_benchmark(cfg)
        assert report["levels"] == [0.3, 0.6, 1.0]
        assert len(report["anomaly_scores"]) == 3
        assert all(0.0 <= s <= 1.0 for s in report["anomaly_scores"])
        assert report["strictly_increasing"] is True
        assert report["vulnerability_one_tailed_p"] < 0.01
        assert report["mean_asi_one_tailed_p"] < 0.05
        assert report["spearman_level_vs_mean_asi"] == 1.0

        on_disk = json.loads((tmp_path / "corruption_report.json").read_text())
        assert on_disk["anomaly_scores"] == report["anomaly_scores"]
        md = (tmp_path / "corruption_report.md").read_text()
        assert "strictly increasing" in md

    def test_deterministic(self):
        cfg = CorruptionBenchConfig(global_seed=4, n_images=6,
                                    image_shape=(8, 8, 3), feature_dim=8)
        r1 = corruption_benchmark(cfg, levels=(0.5, 1.0))
        r2 = corruption_benchmark(cfg, levels=(0.5, 1.0))
        assert r1["anomaly_scores"] == r2["anomaly_scores"]
        assert r1["per_level"] == r2["per_level"]

    def test_level_validation(self):
        cfg = CorruptionBenchConfig(n_images=4, image_shape=(8, 8, 3))
        with pytest.raises(InputError):
            corruption_benchmark(cfg, levels=(0.5, 0.25))
        with pytest.raises(InputError):
            corruption_benchmark(cfg, levels=(-0.5, 1.0))
        with pytest.raises(InputError):
            corruption_benchmark(cfg, levels=())
