"""Render summary tables and figures from experiment CSV outputs.

Reads metrics.csv (and weights.csv when present) from an output directory,
prints compact tables, and writes PNG figures next to the CSVs.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path: Path) -> list[dict]:
    with open(path) as fh:
        return list(csv.DictReader(fh))


def _summary_rows(rows: list[dict]) -> list[dict]:
    return [r for r in rows if r["policy"].startswith(("best:", "tola:"))]


def render(out: Path) -> int:
    metrics_path = out / "metrics.csv"
    if not metrics_path.exists():
        print(f"no metrics.csv under {out}")
        return 1
    rows = _read_csv(metrics_path)
    summary = _summary_rows(rows)

    print(f"{'x1':>5} {'x2':>3} {'policy':>28} {'alpha':>9} {'rho':>9} {'mu':>8}")
    for r in summary:
        rho = f"{float(r['rho']):8.2%}" if r["rho"] else "        "
        mu = f"{float(r['mu']):7.2%}" if r["mu"] else "       "
        print(f"{r['x1']:>5} {r['x2']:>3} {r['policy']:>28} "
              f"{float(r['alpha']):9.4f} {rho} {mu}")

    _plot_rho(summary, out)
    weights_path = out / "weights.csv"
    if weights_path.exists():
        _plot_weights(_read_csv(weights_path), out)
    return 0


def _plot_rho(summary: list[dict], out: Path) -> None:
    by_bench: dict[str, list] = defaultdict(list)
    for r in summary:
        if r["rho"]:
            key = r["policy"].split(":", 1)[1].split(",")[0]
            by_bench[key].append((int(r["x1"]), int(r["x2"]),
                                  float(r["rho"])))
    if not by_bench:
        return
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / len(by_bench)
    labels = sorted({(x1, x2) for vals in by_bench.values()
                     for x1, x2, _ in vals})
    for i, (bench, vals) in enumerate(sorted(by_bench.items())):
        pos = {k: j for j, k in enumerate(labels)}
        xs = [pos[(x1, x2)] + i * width for x1, x2, _ in vals]
        ax.bar(xs, [v for _, _, v in vals], width=width, label=bench)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels([f"x1={a}\nx2={b}" for a, b in labels], fontsize=8)
    ax.set_ylabel("cost improvement rho")
    ax.axhline(0.0, color="k", lw=0.5)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "rho.png", dpi=130)
    plt.close(fig)


def _plot_weights(rows: list[dict], out: Path) -> None:
    seeds = sorted({r["seed"] for r in rows})
    rows = [r for r in rows if r["seed"] == seeds[0]]
    by_policy: dict[int, list] = defaultdict(list)
    for r in rows:
        by_policy[int(r["policy_index"])].append(
            (int(r["update"]), float(r["weight"])))
    fig, ax = plt.subplots(figsize=(7, 4))
    finals = sorted(by_policy.items(), key=lambda kv: -kv[1][-1][1])
    for p, series in finals[:6]:
        series.sort()
        ax.plot([k for k, _ in series], [w for _, w in series],
                label=f"policy {p}", lw=1)
    for p, series in finals[6:]:
        series.sort()
        ax.plot([k for k, _ in series], [w for _, w in series],
                color="0.8", lw=0.5, zorder=0)
    ax.set_xlabel("weight update")
    ax.set_ylabel("policy weight")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "weights.png", dpi=130)
    plt.close(fig)
