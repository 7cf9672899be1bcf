"""Figures rendered from benchmark rows.

matplotlib is imported lazily so the solver itself does not need it.
"""

from __future__ import annotations

import os
from collections import defaultdict
from typing import Iterable

from .bench import BenchmarkRow

_STYLE = {"okp": "-", "enumerate": "--"}


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _series(rows: Iterable[BenchmarkRow], field: str):
    """{(variant, branch_mode, algorithm, k): sorted [(H, field)]}"""
    out = defaultdict(list)
    for r in rows:
        out[(r.variant, r.branch_mode, r.algorithm, r.k)].append((r.H, getattr(r, field)))
    return {key: sorted(pts) for key, pts in out.items()}


def value_figure(rows: list[BenchmarkRow], problem: str):
    """Optimal value against horizon, one line per branch budget."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    merged = defaultdict(dict)
    for r in rows:
        if r.problem == problem:
            # both algorithms report the same value; either may be missing
            merged[(r.variant, r.branch_mode, r.k)][r.H] = r.value
    for variant, mode, k in sorted(merged):
        H = sorted(merged[(variant, mode, k)])
        ax.plot(H, [merged[(variant, mode, k)][h] for h in H], marker="o", ms=3,
                color=f"C{k % 10}", label=f"k={k} ({variant}/{mode})")
    ax.set_xlabel("horizon H")
    ax.set_ylabel("expected value at start belief")
    ax.set_title(problem)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def runtime_figure(rows: list[BenchmarkRow], problem: str):
    """Wall-clock seconds against horizon on a log axis, per algorithm and k."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    series = _series([r for r in rows if r.problem == problem], "seconds")
    for (variant, mode, algorithm, k), pts in sorted(series.items()):
        H, s = zip(*pts)
        s = [max(x, 1e-6) for x in s]
        ax.plot(H, s, _STYLE.get(algorithm, ":"), marker="o", ms=3, color=f"C{k % 10}",
                label=f"{algorithm} k={k} ({variant}/{mode})")
    ax.set_yscale("log")
    ax.set_xlabel("horizon H")
    ax.set_ylabel("seconds")
    ax.set_title(problem)
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    return fig


def render(rows: list[BenchmarkRow], out_dir: str, prefix: str = "", fmt: str = "png") -> list[str]:
    """Write value and runtime figures for each problem in ``rows``.

    Returns the written paths.
    """
    plt = _pyplot()
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for problem in sorted({r.problem for r in rows}):
        for kind, build in (("value", value_figure), ("runtime", runtime_figure)):
            fig = build(rows, problem)
            path = os.path.join(out_dir, f"{prefix}{problem}_{kind}.{fmt}")
            fig.savefig(path, dpi=120)
            plt.close(fig)
            paths.append(path)
    return paths
