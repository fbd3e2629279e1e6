"""Acceptance gate: every release criterion, one pass/fail line per criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see the verdict lines.
Paper-scale expectations that need real pretrained backbones are documented
in the README, not asserted here; these checks are the hermetic equivalents.
"""

import time

import numpy as np
import pytest

from anoscore.attribution import attribute, segment
from anoscore.complexity import TrajectoryConfig, complexity
from anoscore.corruption import CorruptionBenchConfig, corruption_benchmark
from anoscore.harness import RunConfig, measure_directory, write_measure_file
from anoscore.images import make_texture_image, save_image
from anoscore.models import make_toy_affine_model, make_toy_nonlinear_model
from anoscore.rng import sample_unit_direction, seed_material
from anoscore.scores import MeasureRecord, anomaly_score, ks1d, ks2d
from anoscore.stats import (
    minmax_normalize,
    pearson,
    spearman,
    welch_ttest,
)
from anoscore.types import ImageTensor
from anoscore.vulnerability import AttackConfig, vulnerability

from oracles import (
    attack_oracle_affine,
    finite_difference_gradient,
    ks1d_oracle,
    ks2d_oracle,
    pearson_oracle,
    spearman_oracle,
    welch_oracle,
)

SHAPE = (8, 8, 3)
N_SWEEP_SEEDS = 20


def verdict(number: int, description: str, passed: bool, detail: str = "") -> None:
    tag = "PASS" if passed else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{tag}] criterion {number:2d}: {description}{suffix}")


@pytest.fixture(scope="module")
def corruption_sweep():
    """Shared 20-seed corruption benchmark sweep for criteria 6 and 7."""
    started = time.time()
    reports = []
    for seed in range(N_SWEEP_SEEDS):
        cfg = CorruptionBenchConfig(global_seed=seed)
        reports.append(corruption_benchmark(cfg))
    return reports, time.time() - started


def test_criterion_01_affine_zero_complexity():
    started = time.time()
    rng = np.random.default_rng(101)
    cfg = TrajectoryConfig()
    models = [make_toy_affine_model(seed, SHAPE, 8) for seed in range(5)]
    worst = 0.0
    for i in range(100):
        x = ImageTensor(id=f"affine{i}", pixels=rng.uniform(0.3, 0.7, SHAPE))
        for model in models:
            res = complexity(model, x, cfg, seed_material(0, x.id, "complexity"))
            worst = max(worst, res.complexity)
    elapsed = time.time() - started
    passed = worst < 1e-6 and elapsed < 60.0
    verdict(1, "affine models give complexity < 1e-6 on 100x5 cases", passed,
            f"worst {worst:.2e}, {elapsed:.1f}s")
    assert worst < 1e-6
    assert elapsed < 60.0


def test_criterion_02_attack_oracle_equivalence():
    rng = np.random.default_rng(102)
    worst = 0.0
    for case in range(50):
        x = ImageTensor(id=f"atk{case}", pixels=rng.uniform(0.3, 0.7, SHAPE))
        cfg = AttackConfig(alpha=float(rng.uniform(0.005, 0.05)),
                           delta=1e-6, J=int(rng.integers(3, 11)))
        material = seed_material(case, x.id, "vulnerability")
        model = make_toy_affine_model(case, SHAPE, 6)
        got = vulnerability(model, x, cfg, material).vulnerability
        direction = sample_unit_direction(material, SHAPE).values
        want, _, _, _ = attack_oracle_affine(model.A, model.b, x.pixels,
                                             cfg.alpha, cfg.delta, cfg.J, direction)
        worst = max(worst, abs(got - want) / max(abs(want), 1e-300))
    passed = worst < 1e-10
    verdict(2, "attack engine matches the literal update-rule oracle", passed,
            f"worst rel err {worst:.2e} over 50 cases")
    assert worst < 1e-10


def test_criterion_03_gradient_check():
    rng = np.random.default_rng(103)
    model = make_toy_nonlinear_model(7, SHAPE, 8)
    worst = 0.0
    for i in range(20):
        x = ImageTensor(id=f"probe{i}", pixels=rng.uniform(0.3, 0.7, SHAPE))
        ref = model.forward(ImageTensor(id=f"ref{i}",
                                        pixels=rng.uniform(0.3, 0.7, SHAPE)))
        analytic = model.loss_gradient(ref, x)

        def loss(pixels):
            f = model.forward(ImageTensor(id="fd", pixels=pixels)).values
            return float(np.linalg.norm(f - ref.values))

        fd = finite_difference_gradient(loss, x.pixels, h=1e-4)
        worst = max(worst, float(np.linalg.norm(analytic - fd)
                                 / np.linalg.norm(analytic)))
    passed = worst < 1e-4
    verdict(3, "analytic gradients match finite differences on 20 probes", passed,
            f"worst rel err {worst:.2e}")
    assert worst < 1e-4


def test_criterion_04_ks_oracle_equivalence():
    rng = np.random.default_rng(104)
    exact_1d = exact_2d = 0
    for _ in range(200):
        na, nb = rng.integers(2, 65, size=2)
        a1 = rng.normal(size=na)
        b1 = rng.normal(loc=rng.uniform(-1, 1), size=nb)
        exact_1d += ks1d(a1, b1) == ks1d_oracle(a1, b1)
        a2 = rng.normal(size=(na, 2))
        b2 = rng.normal(loc=rng.uniform(-1, 1), size=(nb, 2))
        exact_2d += ks2d(a2, b2) == ks2d_oracle(a2, b2)
    pts = rng.normal(size=(13, 2))
    identity_zero = ks2d(pts, pts.copy()) == 0.0
    separated_one = ks2d([(0.0, 0.0), (0.1, 0.1)],
                         [(10.0, 10.0), (11.0, 11.0)]) == 1.0
    passed = (exact_1d == 200 and exact_2d == 200 and identity_zero and separated_one)
    verdict(4, "ks1d/ks2d equal brute-force oracles exactly on 200 pairs", passed,
            f"1d {exact_1d}/200, 2d {exact_2d}/200, "
            f"identity->0 {identity_zero}, separated->1 {separated_one}")
    assert exact_1d == 200 and exact_2d == 200
    assert identity_zero and separated_one


def test_criterion_05_as_bounds_and_symmetry():
    rng = np.random.default_rng(105)
    in_bounds = symmetric = 0
    for pair in range(100):
        phash = f"p{pair}"
        na, nb = rng.integers(5, 51, size=2)

        def records(tag, n):
            return [MeasureRecord(image_id=f"{tag}{k}",
                                  complexity=float(rng.uniform(0.001, 1.5)),
                                  vulnerability=float(rng.uniform(0.0, 40.0)),
                                  model_id="m", params_hash=phash, seed=0)
                    for k in range(n)]

        real, fake = records("r", na), records("g", nb)
        forward = anomaly_score(real, fake).value
        backward = anomaly_score(fake, real).value
        in_bounds += 0.0 <= forward <= 1.0
        symmetric += forward == backward
    passed = in_bounds == 100 and symmetric == 100
    verdict(5, "anomaly score within [0,1] and bit-exactly symmetric", passed,
            f"bounds {in_bounds}/100, symmetry {symmetric}/100")
    assert in_bounds == 100 and symmetric == 100


def test_criterion_06_corruption_monotonicity(corruption_sweep):
    reports, elapsed = corruption_sweep
    increasing = sum(r["strictly_increasing"] for r in reports)
    significant = sum(r["vulnerability_one_tailed_p"] < 0.01 for r in reports)
    passed = (increasing >= 0.9 * N_SWEEP_SEEDS
              and significant >= 0.9 * N_SWEEP_SEEDS
              and elapsed < 600.0)
    verdict(6, "AS rises strictly with corruption; top-level vulnerability "
               "significant", passed,
            f"increasing {increasing}/{N_SWEEP_SEEDS}, p<0.01 in "
            f"{significant}/{N_SWEEP_SEEDS}, sweep {elapsed:.0f}s")
    assert increasing >= 0.9 * N_SWEEP_SEEDS
    assert significant >= 0.9 * N_SWEEP_SEEDS
    assert elapsed < 600.0


def test_criterion_07_asi_ordering(corruption_sweep):
    reports, _ = corruption_sweep
    significant = sum(r["mean_asi_one_tailed_p"] < 0.01 for r in reports)
    spearmans = [r["spearman_level_vs_mean_asi"] for r in reports]
    mean_spearman = float(np.mean(spearmans))
    passed = significant >= 0.9 * N_SWEEP_SEEDS and mean_spearman >= 0.8
    verdict(7, "per-image AS-i orders corruption levels", passed,
            f"p<0.01 in {significant}/{N_SWEEP_SEEDS}, "
            f"mean per-seed spearman {mean_spearman:.3f}")
    assert significant >= 0.9 * N_SWEEP_SEEDS
    assert mean_spearman >= 0.8


def test_criterion_08_attribution_recovery_and_segmentation():
    rng = np.random.default_rng(108)
    x = ImageTensor(id="planted", pixels=rng.uniform(0, 1, (18, 18, 3)))
    seg = segment(x, 10)
    planted = rng.uniform(0.5, 4.0, seg.S)

    def response_fn(selected, mask, material):
        return float(planted[selected].sum() + 1.25)

    amap = attribute(None, x, seg, AttackConfig(), trials=3 * seg.S,
                     min_sel=3, max_sel=6,
                     seed_material=seed_material(0, x.id, "attribution"),
                     response_fn=response_fn)
    coeff_err = float(np.abs(amap.coefficients - planted).max())

    partitions_ok = 0
    for i in range(50):
        img = ImageTensor(id=f"s{i}", pixels=rng.uniform(0, 1, (16, 16, 3)))
        s = segment(img, int(rng.integers(4, 14)))
        labels = np.unique(s.labels)
        total = (labels.min() == 0 and labels.max() == s.S - 1
                 and len(labels) == s.S)
        connected_all = all(_connected(s.labels, v) for v in labels)
        partitions_ok += total and connected_all
    passed = coeff_err < 1e-8 and partitions_ok == 50
    verdict(8, "planted attribution weights recovered; segmentations are "
               "connected partitions", passed,
            f"coeff err {coeff_err:.2e}, partitions {partitions_ok}/50")
    assert coeff_err < 1e-8
    assert partitions_ok == 50


def _connected(labels, value):
    positions = {tuple(p) for p in np.argwhere(labels == value)}
    start = next(iter(positions))
    seen = {start}
    stack = [start]
    while stack:
        i, j = stack.pop()
        for n in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
            if n in positions and n not in seen:
                seen.add(n)
                stack.append(n)
    return seen == positions


def test_criterion_09_statistics_oracles():
    a = [0.5, 1.2, 3.1, 2.2, 0.9, 1.5, 2.8]
    b = [2.9, 3.3, 4.1, 2.5, 3.8]
    res = welch_ttest(a, b, tail="two_tailed")
    t_want, df_want = welch_oracle(a, b)
    # p reference computed once with mpmath at 40 digits
    welch_ok = (abs(res.t_statistic - t_want) < 1e-10
                and abs(res.degrees_of_freedom - df_want) < 1e-10
                and abs(res.p_value - 0.007410706527814838233) < 1e-10)

    xs = [0.2, 1.7, -0.4, 3.3, 2.2, -1.1, 0.0, 5.4]
    ys = [1.0, 2.9, -0.2, 2.8, 4.1, -2.0, 0.3, 6.0]
    pearson_ok = abs(pearson(xs, ys) - pearson_oracle(xs, ys)) < 1e-10
    ties_x = [1.0, 2.0, 2.0, 3.0, 3.0, 4.0]
    ties_y = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0]
    spearman_ok = abs(spearman(ties_x, ties_y)
                      - spearman_oracle(ties_x, ties_y)) < 1e-10

    normalized = minmax_normalize([4.4, -1.0, 0.3, 9.9, 2.2])
    minmax_ok = min(normalized) == 0.0 and max(normalized) == 1.0

    passed = welch_ok and pearson_ok and spearman_ok and minmax_ok
    verdict(9, "statistics match high-precision direct-formula oracles", passed,
            f"welch {welch_ok}, pearson {pearson_ok}, spearman {spearman_ok}, "
            f"minmax {minmax_ok}")
    assert welch_ok and pearson_ok and spearman_ok and minmax_ok


def test_criterion_10_reproducibility(tmp_path):
    images = tmp_path / "imgs"
    images.mkdir()
    for i in range(64):
        x = make_texture_image(f"im{i:03d}.png", f"repro{i}".encode(), SHAPE)
        save_image(x, images / x.id)
    model_config = {"kind": "toy_nonlinear", "seed": 1, "input_shape": list(SHAPE),
                    "feature_dim": 8}

    def run(workers, out_name):
        cfg = RunConfig(global_seed=11, model_config=model_config, workers=workers)
        result = measure_directory(images, cfg)
        out = tmp_path / out_name
        write_measure_file(out, result, cfg, dataset_name="imgs")
        return out.read_bytes()

    serial_1 = run(1, "serial1.jsonl")
    serial_2 = run(1, "serial2.jsonl")
    parallel = run(8, "parallel.jsonl")
    rerun_identical = serial_1 == serial_2
    workers_identical = serial_1 == parallel
    passed = rerun_identical and workers_identical
    verdict(10, "measure files byte-identical across reruns and 1 vs 8 workers",
            passed, f"rerun {rerun_identical}, workers {workers_identical}")
    assert rerun_identical
    assert workers_identical
