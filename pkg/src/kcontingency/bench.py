"""Benchmark sweeps over (k, H) grids with one CSV row per run."""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import asdict, dataclass, fields
from typing import Callable, Iterable, Sequence

from .enumerator import DEFAULT_NODE_CAP, ResourceLimitExceeded, enumerate_optimal
from .model import PomdpModel
from .solver import SolveConfig, solve, value_at

log = logging.getLogger(__name__)

ALGORITHMS = ("okp", "enumerate")


@dataclass
class BenchmarkRow:
    problem: str
    variant: str
    branch_mode: str
    k: int
    H: int
    algorithm: str
    value: float
    seconds: float
    alpha_vectors: int | None = None
    enum_nodes: int | None = None

    def key(self):
        return (self.problem, self.variant, self.branch_mode, self.k, self.H)


CSV_HEADER = [f.name for f in fields(BenchmarkRow)]


def run_cell(model: PomdpModel, problem: str, config: SolveConfig, algorithm: str,
             x0=None, node_cap: int = DEFAULT_NODE_CAP) -> BenchmarkRow:
    if algorithm == "okp":
        policy = solve(model, config)
        return BenchmarkRow(problem, config.variant, config.branch_mode, config.k, config.horizon,
                            "okp", value_at(policy, x0), policy.seconds,
                            alpha_vectors=policy.total_vectors)
    if algorithm == "enumerate":
        _, value, stats = enumerate_optimal(model, config, x0, node_cap)
        return BenchmarkRow(problem, config.variant, config.branch_mode, config.k, config.horizon,
                            "enumerate", value, stats.seconds, enum_nodes=stats.nodes)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def sweep(model: PomdpModel, problem: str, ks: Iterable[int], horizons: Iterable[int],
          variant: str = "balanced", branch_mode: str = "full",
          algorithms: Sequence[str] = ALGORITHMS, coupled: bool = False,
          discount: float | None = None, x0=None, node_cap: int = DEFAULT_NODE_CAP,
          on_row: Callable[[BenchmarkRow], None] | None = None) -> list[BenchmarkRow]:
    """Run every (k, H) cell in grid order. Cells refused by the enumerator's
    resource guard are logged and skipped."""
    rows = []
    for k in ks:
        for H in horizons:
            config = SolveConfig(H, k, variant, branch_mode, coupled, discount)
            for algorithm in algorithms:
                try:
                    row = run_cell(model, problem, config, algorithm, x0, node_cap)
                except ResourceLimitExceeded as exc:
                    log.warning("skipping %s k=%d H=%d: %s", algorithm, k, H, exc)
                    continue
                rows.append(row)
                if on_row is not None:
                    on_row(row)
    return rows


def disagreements(rows: Iterable[BenchmarkRow], tol: float = 1e-9) -> list[tuple]:
    """Keys where the two algorithms report values further apart than ``tol``."""
    by_key: dict = {}
    for r in rows:
        by_key.setdefault(r.key(), {})[r.algorithm] = r.value
    return [(key, vals) for key, vals in by_key.items()
            if len(vals) == 2 and abs(vals["okp"] - vals["enumerate"]) > tol]


class CsvAppender:
    """Appends rows, writing the header when the file is new or empty."""

    def __init__(self, path):
        self.path = path

    def __call__(self, row: BenchmarkRow) -> None:
        new = not os.path.exists(self.path) or os.path.getsize(self.path) == 0
        with open(self.path, "a", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=CSV_HEADER)
            if new:
                writer.writeheader()
            writer.writerow(_format_row(row))


def _format_row(row: BenchmarkRow) -> dict:
    d = asdict(row)
    d["value"] = f"{row.value:.9f}"
    d["seconds"] = f"{row.seconds:.6f}"
    for name in ("alpha_vectors", "enum_nodes"):
        if d[name] is None:
            d[name] = ""
    return d


def write_rows(path, rows: Iterable[BenchmarkRow]) -> None:
    append = CsvAppender(path)
    for r in rows:
        append(r)


def read_rows(path) -> list[BenchmarkRow]:
    out = []
    with open(path, newline="") as f:
        for d in csv.DictReader(f):
            out.append(BenchmarkRow(
                d["problem"], d["variant"], d["branch_mode"], int(d["k"]), int(d["H"]),
                d["algorithm"], float(d["value"]), float(d["seconds"]),
                int(d["alpha_vectors"]) if d["alpha_vectors"] else None,
                int(d["enum_nodes"]) if d["enum_nodes"] else None))
    return out


def parse_int_list(text: str) -> list[int]:
    """``"0,1,3-5"`` -> ``[0, 1, 3, 4, 5]``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError(f"empty integer list {text!r}")
    return out


def is_finite(row: BenchmarkRow) -> bool:
    return math.isfinite(row.value)
