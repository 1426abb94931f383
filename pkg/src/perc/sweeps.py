"""Grid sweeps over ``(lattice, n, p)`` cells with disjoint per-cell streams.

Cell ``c`` draws replicate ``i`` from stream ``(c << 32) | i`` of the master
seed.  Cells run on worker threads and are written in cell order, and each
cell reduces its samples in fixed chunks, so output does not depend on the
worker count.  A wall-clock cap stops a cell at a chunk boundary and flags it
incomplete.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, NamedTuple, Sequence

from .config import SeedSpec
from .lattice import LatticeSpec, parse_kind
from .observables import (Estimate, Exceeded, chi_f_estimate, correlation_length_L, dual_crossing_probability,
                          free_energy_estimate, kappa_estimate, kappa_matching_estimate, pi_n,
                          crossing_probability, scan_schedule, schedule_gap)
from .parallel import CHUNK, tree_merge, worker_count

CELL_SHIFT = 32


class Cell(NamedTuple):
    observable: str
    lattice: str
    n: int
    p: float


class CellResult(NamedTuple):
    cell: Cell
    index: int
    value: float
    stderr: float
    samples: int
    stream: int
    incomplete: bool


def _pi(spec, p, count, seed):
    return pi_n(LatticeSpec(spec.kind, 2 * spec.n), spec.n, p, count, seed)


def _lemma3(spec, p, count, seed):
    from .arms import lemma3_estimator
    return lemma3_estimator(spec, p, count, seed)


CHUNKED: dict[str, Callable] = {
    "kappa": kappa_estimate,
    "matching": kappa_matching_estimate,
    "chi_f": chi_f_estimate,
    "free_energy": free_energy_estimate,
    "sigma": lambda spec, p, count, seed: crossing_probability(spec, p, None, samples=count, seed=seed),
    "sigma_star": dual_crossing_probability,
    "pi": _pi,
    "lemma3": _lemma3,
}
OBSERVABLES = tuple(CHUNKED) + ("length",)


def cell_stream(index: int) -> int:
    return index << CELL_SHIFT


def run_cell(cell: Cell, index: int, samples: int, master_seed: int, time_cap: float | None = None,
             length_options: dict | None = None) -> CellResult:
    """Evaluate one cell; ``samples`` is the per-cell budget."""
    if cell.observable not in OBSERVABLES:
        raise ValueError(f"unknown sweep observable {cell.observable!r}; choose from {', '.join(OBSERVABLES)}")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    kind = parse_kind(cell.lattice)
    stream = cell_stream(index)
    seed = SeedSpec(master_seed, stream)
    if cell.observable == "length":
        opts = dict(length_options or {})
        res = correlation_length_L(kind, cell.p, sample_budget=samples, seed=seed, **opts)
        if isinstance(res, Exceeded):
            return CellResult(cell, index, float(res.n_max), 0.0, res.samples_used, stream, True)
        per_n = opts.get("samples_per_n", 4000)
        used = (scan_schedule(opts.get("n_max", 2048)).index(res) + 1) * per_n
        return CellResult(cell, index, float(res), schedule_gap(res), used, stream, False)
    spec = LatticeSpec(kind, cell.n)
    fn = CHUNKED[cell.observable]
    start = time.monotonic()
    parts: list[Estimate] = []
    done = 0
    incomplete = False
    while done < samples:
        count = min(CHUNK, samples - done)
        parts.append(fn(spec, cell.p, count, seed.child(done)))
        done += count
        if time_cap is not None and done < samples and time.monotonic() - start > time_cap:
            incomplete = True
            break
    est = tree_merge(parts, Estimate.merge)
    return CellResult(cell, index, est.mean, est.stderr, est.count, stream, incomplete)


def run_sweep(cells: Sequence[Cell], samples: int, master_seed: int, time_cap: float | None = None,
              workers: int | None = None, length_options: dict | None = None) -> list[CellResult]:
    """All cells, in input order."""
    workers = worker_count() if workers is None else workers
    jobs = list(enumerate(cells))
    if workers <= 1 or len(jobs) <= 1:
        return [run_cell(c, i, samples, master_seed, time_cap, length_options) for i, c in jobs]
    with ThreadPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(lambda j: run_cell(j[1], j[0], samples, master_seed, time_cap, length_options), jobs))


def has_nan(results: Sequence[CellResult]) -> bool:
    return any(math.isnan(r.value) or math.isnan(r.stderr) for r in results)
