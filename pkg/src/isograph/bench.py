"""Runtime scaling studies for the feature extraction component.

Points are measured on the per-window reference path
(``forward_layer_windows``), so the curves reflect the per-window
algorithmic cost — factorial permutation enumeration for the brute matcher
against cubic eigendecomposition for the fast one — rather than bulk-array
engineering.  Absolute times are hardware noise; only the growth shapes
and the brute/fast crossover are meaningful, which is why every record is
the median of at least three repetitions.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import GraphInstance
from .errors import CapacityError
from .features import LayerConfig, forward_layer_windows
from .linalg import MAX_BRUTE_K

CSV_HEADER = "mode,k,c,n,seconds,reps"

_DEFAULT_GRAPH_COUNT = 3
_DEFAULT_EDGE_PROB = 0.15


@dataclass
class BenchRecord:
    mode: str
    k: int
    c: int
    n: int
    wall_time_seconds: float
    repetitions: int


def _random_graphs(n: int, count: int, rng: np.random.Generator) -> list[GraphInstance]:
    graphs = []
    for _ in range(count):
        upper = np.triu(rng.random((n, n)) < _DEFAULT_EDGE_PROB, 1).astype(float)
        graphs.append(GraphInstance(upper + upper.T, 1))
    return graphs


def _resolve_graphs(source, rng: np.random.Generator) -> list[GraphInstance]:
    if isinstance(source, (int, np.integer)):
        return _random_graphs(int(source), _DEFAULT_GRAPH_COUNT, rng)
    graphs = list(source)
    if not graphs:
        raise ValueError("no graphs to benchmark")
    return graphs


def _measure(graphs, kernels, config: LayerConfig, reps: int, threads: int = 1) -> float:
    """Median wall time of one full feature-extraction pass over ``graphs``."""
    times = []
    for _ in range(reps):
        start = time.perf_counter()
        for g in graphs:
            forward_layer_windows(g.adjacency, kernels, config, threads=threads)
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def _record(graphs, k: int, c: int, mode: str, reps: int, rng, threads: int) -> BenchRecord:
    kernels = rng.random((c, k, k))
    config = LayerConfig(size_k=k, channels_c=c, mode=mode)
    seconds = _measure(graphs, kernels, config, reps, threads)
    return BenchRecord(mode, k, c, graphs[0].node_count, seconds, reps)


def time_vs_k(source, k_range: Sequence[int], c: int = 1, mode: str = "brute",
              reps: int = 3, seed: int = 0, threads: int = 1) -> list[BenchRecord]:
    """Wall time per kernel size; over-capacity points are skipped with a warning.

    ``threads`` defaults to 1 so curves reflect algorithmic cost, not core
    count; raise it only for separate scalability measurements.
    """
    if reps < 3:
        raise ValueError(f"need at least 3 repetitions, got {reps}")
    rng = np.random.default_rng(seed)
    graphs = _resolve_graphs(source, rng)
    records = []
    for k in k_range:
        if mode == "brute" and k > MAX_BRUTE_K:
            warnings.warn(f"skipping k={k}: beyond brute capacity {MAX_BRUTE_K}")
            continue
        try:
            records.append(_record(graphs, k, c, mode, reps, rng, threads))
        except CapacityError as exc:
            warnings.warn(f"skipping k={k}: {exc}")
    return records


def time_vs_c(source, c_range: Sequence[int], k: int = 3, mode: str = "brute",
              reps: int = 3, seed: int = 0, threads: int = 1) -> list[BenchRecord]:
    if reps < 3:
        raise ValueError(f"need at least 3 repetitions, got {reps}")
    rng = np.random.default_rng(seed)
    graphs = _resolve_graphs(source, rng)
    return [_record(graphs, k, c, mode, reps, rng, threads) for c in c_range]


def brute_vs_fast(n: int, k_range: Sequence[int], c: int = 1,
                  reps: int = 3, seed: int = 0, threads: int = 1) -> list[BenchRecord]:
    """Paired brute/fast timings on identical graphs and kernels per k."""
    if reps < 3:
        raise ValueError(f"need at least 3 repetitions, got {reps}")
    rng = np.random.default_rng(seed)
    graphs = _random_graphs(n, _DEFAULT_GRAPH_COUNT, rng)
    records = []
    for k in k_range:
        if not 2 <= k <= MAX_BRUTE_K:
            raise ValueError(f"k_range must lie within [2, {MAX_BRUTE_K}], got k={k}")
        kernels = rng.random((c, k, k))
        for mode in ("brute", "fast"):
            config = LayerConfig(size_k=k, channels_c=c, mode=mode)
            seconds = _measure(graphs, kernels, config, reps, threads)
            records.append(BenchRecord(mode, k, c, n, seconds, reps))
    return records


def linear_fit_r2(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares line plus coefficient of determination."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(xs, ys, 1)
    fitted = slope * xs + intercept
    ss_res = float(((ys - fitted) ** 2).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def write_csv(records: Sequence[BenchRecord], path) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in records:
            fh.write(f"{r.mode},{r.k},{r.c},{r.n},{r.wall_time_seconds:.9f},{r.repetitions}\n")
