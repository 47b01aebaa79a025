"""Worker-pool execution and the strong-scaling harness.

The pool is a fixed-size set of forked processes consuming cube-level
work units; the Phase-1 model fit and the final merge stay
single-threaded.  Correctness precedes performance: scaling timings are
only reported after the outputs at every worker count are verified
identical to the single-worker run.
"""
from __future__ import annotations

import multiprocessing as mp
import time
from dataclasses import dataclass

import numpy as np

from .grid import GridDataset, RunConfig

_work_fn = None


def _trampoline(item):
    return _work_fn(item)


def parallel_map(fn, items: list, workers: int) -> list:
    """Ordered map over items using a pool of forked worker processes.

    With one worker (or one item) the map runs in-process.  Results are
    identical either way because each work unit derives its own random
    stream and touches no shared mutable state.
    """
    global _work_fn
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    _work_fn = fn
    try:
        ctx = mp.get_context("fork")
        chunksize = max(1, len(items) // (4 * workers))
        with ctx.Pool(processes=workers) as pool:
            return pool.map(_trampoline, items, chunksize=chunksize)
    finally:
        _work_fn = None


class OutputMismatchError(RuntimeError):
    """Parallel run produced output differing from the serial reference."""


@dataclass
class ScalingResult:
    workers: list[int]
    wall_seconds: list[float]
    speedup: list[float]
    efficiency: list[float]
    knee_workers: int | None = None

    def rows(self) -> list[tuple[int, float, float, float]]:
        return list(zip(self.workers, self.wall_seconds, self.speedup, self.efficiency))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("workers,wall_seconds,speedup,efficiency\n")
            for w, t, s, e in self.rows():
                fh.write(f"{w},{t:.6f},{s:.6f},{e:.6f}\n")


def detect_knee(
    rows: list[tuple[int, float, float, float]], threshold: float = 0.5
) -> int | None:
    """Smallest worker count whose efficiency falls strictly below the
    threshold; None if efficiency never collapses."""
    if len(rows) < 3:
        raise ValueError(f"need at least 3 rows to detect a knee, got {len(rows)}")
    for workers, _wall, _speedup, efficiency in sorted(rows):
        if efficiency < threshold:
            return workers
    return None


def run_scaling_study(
    config: RunConfig,
    dataset: GridDataset,
    worker_counts: list[int],
    repeats: int = 3,
    knee_threshold: float = 0.5,
) -> ScalingResult:
    """Time the full pipeline at each worker count (minimum of repeats).

    Speedup and efficiency are computed against the 1-worker minimum.
    Any cross-worker-count output mismatch is a hard failure.
    """
    from .samplers import run_pipeline

    if 1 not in worker_counts:
        raise ValueError("worker_counts must include 1")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    counts = sorted(set(int(w) for w in worker_counts))

    reference_digest = None
    minima: dict[int, float] = {}
    for workers in counts:
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            result = run_pipeline(config, dataset, workers=workers)
            best = min(best, time.perf_counter() - t0)
            digest = result.content_digest()
            if reference_digest is None:
                reference_digest = digest
            elif digest != reference_digest:
                raise OutputMismatchError(
                    f"output at {workers} workers differs from the 1-worker reference"
                )
        minima[workers] = best

    t1 = minima[1]
    speedup = [t1 / minima[w] for w in counts]
    efficiency = [s / w for s, w in zip(speedup, counts)]
    result = ScalingResult(
        workers=counts,
        wall_seconds=[minima[w] for w in counts],
        speedup=speedup,
        efficiency=efficiency,
    )
    if len(counts) >= 3:
        result.knee_workers = detect_knee(result.rows(), knee_threshold)
    return result
