"""Report emission: stable JSON, aligned text tables, rank-curve CSV and figures."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import REFERENCE_TOP_K, EvalReport  # noqa: E402


def _fmt6(obj):
    if isinstance(obj, float):
        return float(f"{obj:.6g}")
    if isinstance(obj, dict):
        return {k: _fmt6(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_fmt6(v) for v in obj]
    return obj


def to_json(obj) -> str:
    """Key order as given, floats at 6 significant digits."""
    return json.dumps(_fmt6(obj), indent=2)


def table(rows: list[list], header: list[str]) -> str:
    cells = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def report_text(report: EvalReport, name: str = "") -> str:
    ks = sorted(report.topk)
    rows = [[name or "model"] + [f"{report.topk[k]:.2f}" for k in ks]]
    for ref, vals in REFERENCE_TOP_K.items():
        ref_vals = dict(zip((1, 5, 10), vals))
        rows.append([f"{ref} (published, ETH Food-101)"] + [f"{ref_vals[k]:.2f}" if k in ref_vals else "-" for k in ks])
    out = [table(rows, ["model"] + [f"top-{k}" for k in ks]), ""]
    out.append(table([[r, f"{a:.2f}"] for r, a in enumerate(report.rank_accuracy, 1)], ["rank", "accuracy"]))
    out.append(f"\n{report.count} samples")
    return "\n".join(out)


def write_curve_csv(path, curve: list[float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "accuracy"])
        for r, a in enumerate(curve, 1):
            w.writerow([r, f"{a:.2f}"])


def plot_rank_curves(path, curves: dict[str, list[float]], title: str = "") -> Path:
    """Accuracy (%) against rank for one or more models, saved to ``path``."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name, curve in curves.items():
        ranks = range(1, len(curve) + 1)
        ax.plot(ranks, curve, marker="o", markersize=3, label=name)
    ax.set_xlabel("rank")
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 100)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
