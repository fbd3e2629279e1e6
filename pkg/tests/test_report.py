import json

import numpy as np
import pytest

from anoscore.complexity import TrajectoryConfig
from anoscore.harness import (
    RunConfig,
    measure_directory,
    read_measure_file,
    write_measure_file,
)
from anoscore.images import make_texture_image, save_image
from anoscore.report import dataset_summary, load_human_csv, write_report
from anoscore.scores import asi
from anoscore.types import InputError
from anoscore.vulnerability import AttackConfig

MODEL_CONFIG = {"kind": "toy_nonlinear", "seed": 2, "input_shape": [8, 8, 3],
                "feature_dim": 8}


def _measure_file(tmp_path, name, seed_tag, n=6, cfg_kw=None):
    images = tmp_path / name
    images.mkdir()
    for i in range(n):
        x = make_texture_image(f"im{i:02d}.png", f"{seed_tag}-{i}".encode(), (8, 8, 3))
        save_image(x, images / x.id)
    cfg = RunConfig(global_seed=1, model_config=MODEL_CONFIG,
                    trajectory=TrajectoryConfig(K=3), attack=AttackConfig(J=3),
                    **(cfg_kw or {}))
    result = measure_directory(images, cfg)
    path = tmp_path / f"{name}.measures.jsonl"
    write_measure_file(path, result, cfg, dataset_name=name, source_dir=str(images))
    return path


def _score_file(tmp_path, name, value, generated, mode="2d", phash=None):
    payload = {
        "kind": "anoscore-score", "tool_version": "0.1.0", "value": value,
        "mode": mode, "combine": "average", "n_real": 6, "n_generated": 6,
        "params_hash": phash, "model_id": "m", "real": "ref", "generated": generated,
    }
    path = tmp_path / f"{name}.score.json"
    path.write_text(json.dumps(payload))
    return path


class TestReport:
    def test_round_trip_summary_matches_recomputation(self, tmp_path):
        m1 = _measure_file(tmp_path, "ref", "a")
        m2 = _measure_file(tmp_path, "gen", "b")
        out = tmp_path / "report"
        write_report([], [m1, m2], out)
        summary = json.loads((out / "summary.json").read_text())

        for path in (m1, m2):
            header, records = read_measure_file(path)
            want = dataset_summary(header, records)
            got = next(s for s in summary["datasets"] if s["dataset"] == want["dataset"])
            assert got == want
            # and the summary numbers are exactly recomputable from records
            assert got["mean_complexity"] == float(np.mean([r.complexity for r in records]))
            assert got["mean_asi"] == float(np.mean([asi(r) for r in records]))
        assert (out / "summary.md").is_file()
        assert (out / "cdf_complexity.png").is_file()
        assert (out / "cdf_vulnerability.png").is_file()

    def test_gallery_emitted_when_sources_resolve(self, tmp_path):
        m1 = _measure_file(tmp_path, "ref", "a")
        out = tmp_path / "report"
        summary = write_report([], [m1], out)
        assert any(p.startswith("asi_gallery") for p in summary["plots"])

    def test_anti_monotone_human_scores_srcc_minus_one(self, tmp_path):
        phash = "h1"
        scores = [_score_file(tmp_path, f"s{i}", value, f"gen{i}", phash=phash)
                  for i, value in enumerate([0.9, 0.6, 0.3])]
        csv_path = tmp_path / "human.csv"
        csv_path.write_text(
            "name,human_error_rate\ngen0,0.1\ngen1,0.2\ngen2,0.3\n")
        out = tmp_path / "report"
        summary = write_report(scores, [], out, human_csv=csv_path)
        corr = summary["correlations"]["2d"]["as_vs_human_error_rate"]
        assert corr["srcc"] == -1.0
        assert corr["pcc"] == pytest.approx(-1.0, abs=1e-12)
        assert any(p.startswith("as_vs_human") for p in summary["plots"])

    def test_baseline_columns_correlated_against_human(self, tmp_path):
        phash = "h2"
        scores = [_score_file(tmp_path, f"s{i}", v, f"g{i}", phash=phash)
                  for i, v in enumerate([0.2, 0.5, 0.8, 0.9])]
        csv_path = tmp_path / "human.csv"
        csv_path.write_text(
            "name,human_error_rate,fid\n"
            "g0,0.9,12.0\ng1,0.7,20.0\ng2,0.2,28.0\ng3,0.1,31.0\n")
        summary = write_report(scores, [], tmp_path / "r", human_csv=csv_path)
        entry = summary["correlations"]["2d"]
        assert entry["as_vs_human_error_rate"]["srcc"] == -1.0
        assert entry["fid_vs_human_error_rate"]["srcc"] == -1.0

    def test_degenerate_identical_inputs(self, tmp_path):
        # identical real/generated measurements: AS 0 everywhere, correlations null
        phash = "h3"
        scores = [_score_file(tmp_path, f"s{i}", 0.0, f"g{i}", phash=phash)
                  for i in range(3)]
        csv_path = tmp_path / "human.csv"
        csv_path.write_text("name,human_error_rate\ng0,0.1\ng1,0.2\ng2,0.3\n")
        summary = write_report(scores, [], tmp_path / "r", human_csv=csv_path)
        assert summary["correlations"]["2d"]["as_vs_human_error_rate"] is None

    def test_params_hash_mismatch_rejected(self, tmp_path):
        s1 = _score_file(tmp_path, "s1", 0.5, "g1", phash="aaa")
        s2 = _score_file(tmp_path, "s2", 0.6, "g2", phash="bbb")
        with pytest.raises(InputError, match="params_hash"):
            write_report([s1, s2], [], tmp_path / "r")

    def test_nothing_to_report(self, tmp_path):
        with pytest.raises(InputError):
            write_report([], [], tmp_path / "r")

    def test_human_csv_validation(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("dataset,value\nx,1\n")
        with pytest.raises(InputError, match="name"):
            load_human_csv(bad)
        nonnum = tmp_path / "nn.csv"
        nonnum.write_text("name,human_error_rate\na,high\n")
        with pytest.raises(InputError):
            load_human_csv(nonnum)
