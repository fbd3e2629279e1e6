"""Report emission: CDF plots, score-vs-human scatter, tables, JSON summary.

Scores and measures enter as the files written by the CLI; human evaluation
and external baseline numbers (FID and friends) enter as CSV columns keyed
by dataset name.  They are ingested for correlation reporting only, never
computed here.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import __version__
from .harness import read_measure_file
from .scores import asi
from .stats import pearson, spearman
from .types import InputError

HUMAN_COLUMN = "human_error_rate"


def load_score_file(path) -> dict:
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read score file {p}: {exc}") from exc
    if data.get("kind") != "anoscore-score":
        raise InputError(f"{p} is not a score file")
    return data


def load_human_csv(path) -> list[dict]:
    """Rows keyed by dataset name; non-name columns parsed as floats."""
    p = Path(path)
    rows = []
    try:
        with p.open(newline="", encoding="utf-8") as fh:
            for raw in csv.DictReader(fh):
                if "name" not in raw:
                    raise InputError(f"{p}: CSV needs a 'name' column")
                row = {"name": raw["name"]}
                for key, value in raw.items():
                    if key == "name" or value is None or value == "":
                        continue
                    try:
                        row[key] = float(value)
                    except ValueError as exc:
                        raise InputError(f"{p}: non-numeric value {value!r} in column "
                                         f"{key!r}") from exc
                rows.append(row)
    except OSError as exc:
        raise InputError(f"cannot read CSV {p}: {exc}") from exc
    if not rows:
        raise InputError(f"{p}: CSV has no data rows")
    return rows


def dataset_summary(header: dict, records) -> dict:
    """Aggregate one measure file into its summary statistics."""
    cs = np.array([r.complexity for r in records])
    vs = np.array([r.vulnerability for r in records])
    return {
        "dataset": header.get("dataset"),
        "model_id": header.get("model_id"),
        "params_hash": header.get("params_hash"),
        "n_images": len(records),
        "mean_complexity": float(cs.mean()),
        "std_complexity": float(cs.std(ddof=1)) if len(records) > 1 else 0.0,
        "mean_vulnerability": float(vs.mean()),
        "std_vulnerability": float(vs.std(ddof=1)) if len(records) > 1 else 0.0,
        "mean_asi": float(np.mean([asi(r) for r in records])),
    }


def _safe_corr(xs, ys) -> dict | None:
    try:
        return {"pcc": pearson(xs, ys), "srcc": spearman(xs, ys), "n": len(xs)}
    except InputError:
        return None  # degenerate column (zero variance or too few points)


def _correlations(scores: list[dict], human_rows: list[dict]) -> dict:
    """Per-mode correlations of AS (and baseline columns) with the human column."""
    by_name = {row["name"]: row for row in human_rows}
    out: dict = {}
    modes = sorted({s["mode"] for s in scores})
    for mode in modes:
        joined = [(s["value"], by_name[s["generated"]])
                  for s in scores if s["mode"] == mode and s["generated"] in by_name]
        if len(joined) < 2:
            continue
        entry: dict = {"n": len(joined)}
        columns = sorted({k for _, row in joined for k in row if k != "name"})
        for column in columns:
            pairs = [(v, row[column]) for v, row in joined if column in row]
            if len(pairs) >= 2:
                entry[f"as_vs_{column}"] = _safe_corr([p[0] for p in pairs],
                                                      [p[1] for p in pairs])
        if HUMAN_COLUMN in columns:
            for column in columns:
                if column == HUMAN_COLUMN:
                    continue
                pairs = [(row[column], row[HUMAN_COLUMN]) for _, row in joined
                         if column in row and HUMAN_COLUMN in row]
                if len(pairs) >= 2:
                    entry[f"{column}_vs_{HUMAN_COLUMN}"] = _safe_corr(
                        [p[0] for p in pairs], [p[1] for p in pairs])
        out[mode] = entry
    return out


def _plot_cdfs(summaries: list[dict], measure_data, out_dir: Path) -> list[str]:
    written = []
    for measure, label in (("complexity", "complexity"),
                           ("vulnerability", "vulnerability")):
        fig, ax = plt.subplots(figsize=(5, 4))
        for header, records in measure_data:
            values = np.sort([getattr(r, measure) for r in records])
            ecdf = np.arange(1, len(values) + 1) / len(values)
            ax.step(values, ecdf, where="post", label=header.get("dataset"))
        ax.set_xlabel(label)
        ax.set_ylabel("CDF")
        ax.set_ylim(0, 1.02)
        ax.legend(fontsize=8)
        fig.tight_layout()
        name = f"cdf_{measure}.png"
        fig.savefig(out_dir / name, dpi=120)
        plt.close(fig)
        written.append(name)
    return written


def _plot_scores_vs_human(scores: list[dict], human_rows: list[dict],
                          correlations: dict, out_dir: Path) -> list[str]:
    by_name = {row["name"]: row for row in human_rows}
    written = []
    for mode in sorted({s["mode"] for s in scores}):
        pts = [(s["value"], by_name[s["generated"]].get(HUMAN_COLUMN), s["generated"])
               for s in scores if s["mode"] == mode and s["generated"] in by_name]
        pts = [(v, h, n) for v, h, n in pts if h is not None]
        if len(pts) < 2:
            continue
        fig, ax = plt.subplots(figsize=(5, 4))
        xs = [p[1] for p in pts]
        ys = [p[0] for p in pts]
        ax.scatter(xs, ys)
        for v, h, n in pts:
            ax.annotate(n, (h, v), fontsize=6, xytext=(2, 2),
                        textcoords="offset points")
        corr = correlations.get(mode, {}).get(f"as_vs_{HUMAN_COLUMN}")
        title = f"AS ({mode}) vs human error rate"
        if corr:
            title += f"\nPCC={corr['pcc']:.3f}  SRCC={corr['srcc']:.3f}"
        ax.set_title(title, fontsize=9)
        ax.set_xlabel("human error rate")
        ax.set_ylabel("anomaly score")
        fig.tight_layout()
        name = f"as_vs_human_{mode}.png"
        fig.savefig(out_dir / name, dpi=120)
        plt.close(fig)
        written.append(name)
    return written


def _plot_asi_gallery(header: dict, records, out_dir: Path, per_side: int = 4) -> str | None:
    """Grid of the lowest- and highest-AS-i images when sources are resolvable."""
    source = header.get("source_dir")
    if not source or not Path(source).is_dir():
        return None
    from .images import load_image  # local import: only needed for galleries

    ranked = sorted(records, key=asi)
    chosen = ranked[:per_side] + ranked[-per_side:]
    resolvable = [r for r in chosen if (Path(source) / r.image_id).is_file()]
    if not resolvable:
        return None
    fig, axes = plt.subplots(2, per_side, figsize=(2 * per_side, 4.4))
    for ax in axes.ravel():
        ax.axis("off")
    for idx, record in enumerate(resolvable[:2 * per_side]):
        ax = axes.ravel()[idx]
        x = load_image(Path(source) / record.image_id, record.image_id)
        ax.imshow(x.pixels)
        ax.set_title(f"AS-i={asi(record):.1f}", fontsize=7)
    fig.suptitle(f"{header.get('dataset')}: lowest (top) / highest (bottom) AS-i",
                 fontsize=9)
    fig.tight_layout()
    name = f"asi_gallery_{header.get('dataset')}.png"
    fig.savefig(out_dir / name, dpi=120)
    plt.close(fig)
    return name


def _markdown_summary(summary: dict) -> str:
    lines = ["# anoscore report", ""]
    lines += [f"- tool version: {summary['tool_version']}",
              f"- params hash: `{summary['params_hash']}`", ""]
    lines += ["## Datasets", "",
              "| dataset | n | complexity (mean ± std) | vulnerability (mean ± std) | mean AS-i |",
              "|---|---|---|---|---|"]
    for s in summary["datasets"]:
        lines.append(
            "| {dataset} | {n_images} | {mean_complexity:.6f} ± {std_complexity:.6f} "
            "| {mean_vulnerability:.6f} ± {std_vulnerability:.6f} | {mean_asi:.3f} |"
            .format(**s))
    if summary["scores"]:
        lines += ["", "## Anomaly scores", "",
                  "| real | generated | mode | combine | AS | n_real | n_gen |",
                  "|---|---|---|---|---|---|---|"]
        for s in summary["scores"]:
            lines.append(
                "| {real} | {generated} | {mode} | {combine} | {value:.6f} "
                "| {n_real} | {n_generated} |".format(**s))
    if summary["correlations"]:
        lines += ["", "## Correlations", ""]
        for mode, entry in summary["correlations"].items():
            lines.append(f"### mode {mode} (n={entry['n']})")
            lines.append("")
            lines.append("| pair | PCC | SRCC |")
            lines.append("|---|---|---|")
            for key, corr in entry.items():
                if key == "n" or corr is None:
                    continue
                lines.append(f"| {key} | {corr['pcc']:.4f} | {corr['srcc']:.4f} |")
            lines.append("")
    return "\n".join(lines) + "\n"


def write_report(score_paths, measure_paths, out_dir, human_csv=None) -> dict:
    """Build the report directory from score and measure files.

    Every input must share one params_hash; a mismatch means the artifacts
    are not comparable and is a hard error.
    """
    scores = [load_score_file(p) for p in score_paths]
    measure_data = [read_measure_file(p) for p in measure_paths]
    if not scores and not measure_data:
        raise InputError("nothing to report: no score or measure files")

    hashes = {s["params_hash"] for s in scores}
    hashes |= {h.get("params_hash") for h, _ in measure_data}
    if len(hashes) > 1:
        raise InputError(f"mismatched params_hash across inputs: {sorted(hashes)}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summaries = [dataset_summary(h, r) for h, r in measure_data]
    human_rows = load_human_csv(human_csv) if human_csv else []
    correlations = _correlations(scores, human_rows) if human_rows else {}

    plots = []
    if measure_data:
        plots += _plot_cdfs(summaries, measure_data, out)
        for header, records in measure_data:
            gallery = _plot_asi_gallery(header, records, out)
            if gallery:
                plots.append(gallery)
    if scores and human_rows:
        plots += _plot_scores_vs_human(scores, human_rows, correlations, out)

    summary = {
        "kind": "anoscore-report",
        "tool_version": __version__,
        "params_hash": next(iter(hashes)) if hashes else None,
        "datasets": summaries,
        "scores": scores,
        "correlations": correlations,
        "plots": plots,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    (out / "summary.md").write_text(_markdown_summary(summary), encoding="utf-8")
    return summary
