"""Parameter sweeps, per-cell statistics, overhead ratios and the constant fit."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import analysis
from .engine import run
from .model import OVERHEAD_FORMS, RunTrace, SimConfig, validate
from .rng import derive_seed

logger = logging.getLogger(__name__)

CSV_HEADER = [
    "W",
    "p",
    "lambda",
    "seed",
    "makespan",
    "steals_sent",
    "steals_success",
    "steals_failed",
    "tau",
    "R_until_tau",
    "bound_theorem",
    "overhead_ratio",
]

DEFAULT_BUDGET = 1_000_000


class BudgetExceeded(RuntimeError):
    pass


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    W_values: Sequence[int]
    p_values: Sequence[int]
    lambda_values: Sequence[int]
    replications: int = 100
    base_seed: int = 0
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        for name in ("W_values", "p_values", "lambda_values"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.replications < 1:
            raise ValueError("replications must be ≥ 1")

    @property
    def cells(self) -> list[tuple[int, int, int]]:
        return [(W, p, lam) for W in self.W_values for p in self.p_values for lam in self.lambda_values]

    @property
    def n_runs(self) -> int:
        return len(self.cells) * self.replications

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        d = dict(d)
        for alias, name in (("W", "W_values"), ("p", "p_values"), ("lambda", "lambda_values")):
            if alias in d:
                d[name] = d.pop(alias)
        return cls(**d)


def desk_grid(replications: int = 100, base_seed: int = 0) -> SweepSpec:
    return SweepSpec((10**5, 10**6, 10**7), (32, 64, 128, 256), (2, 32, 262), replications, base_seed)


def cell_seed(base_seed: int, W: int, p: int, lam: int, index: int) -> int:
    return derive_seed(base_seed, W, p, lam, index)


@dataclass(frozen=True)
class RunRecord:
    W: int
    p: int
    lam: int
    seed: int
    makespan: int
    steals_sent: int
    steals_success: int
    steals_failed: int
    tau: int
    R_until_tau: int
    bound_theorem: Optional[float]
    overhead_ratio: Optional[float]
    cmax_ok: bool = True
    potential_ok: bool = True

    def csv_row(self) -> list[str]:
        return [
            str(self.W),
            str(self.p),
            str(self.lam),
            str(self.seed),
            str(self.makespan),
            str(self.steals_sent),
            str(self.steals_success),
            str(self.steals_failed),
            str(self.tau),
            str(self.R_until_tau),
            fmt(self.bound_theorem),
            fmt(self.overhead_ratio),
        ]


def fmt(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.6g}"


def overhead_log(W: int, lam: int, form: str) -> float:
    return math.log2(W / lam) if form == "W_over_lambda" else math.log2(W / (2 * lam))


def run_overhead_ratio(W: int, p: int, lam: int, makespan: int, form: str = "W_over_lambda") -> Optional[float]:
    """Steal term of the bound over the measured idle overhead, or ``None``
    when the run was perfectly balanced (or ``p = 1``)."""
    if p < 2 or makespan <= W / p:
        return None
    return (4 * analysis.gamma(p) * lam * overhead_log(W, lam, form) + 3 * lam) / (makespan - W / p)


def simulate_record(config: SimConfig) -> RunRecord:
    return record_from_trace(config, run(config))


def record_from_trace(config: SimConfig, trace: RunTrace) -> RunRecord:
    W, p, lam = config.total_work, config.processors, config.latency
    bound = None
    if p >= 2 and W >= 1:
        bound = W / p + 3 * lam
        if W > 2 * lam:
            bound = analysis.bound_expectation(W, p, lam)
    return RunRecord(
        W,
        p,
        lam,
        config.seed,
        trace.makespan,
        trace.steals_sent,
        trace.steals_success,
        trace.steals_failed,
        trace.tau,
        trace.R_until_tau,
        bound,
        run_overhead_ratio(W, p, lam, trace.makespan, config.overhead_log_arg),
        cmax_ok=analysis.cmax_inequality_holds(trace, W, p, lam),
        potential_ok=not analysis.potential_increases(trace),
    )


@dataclass
class QuartileSummary:
    n: int
    excluded: int
    min: Optional[float]
    q1: Optional[float]
    median: Optional[float]
    q3: Optional[float]
    max: Optional[float]

    @classmethod
    def of(cls, values: Iterable[Optional[float]]) -> "QuartileSummary":
        vals = list(values)
        kept = np.array([v for v in vals if v is not None], dtype=float)
        excluded = len(vals) - len(kept)
        if not len(kept):
            return cls(0, excluded, None, None, None, None, None)
        q1, med, q3 = np.percentile(kept, [25, 50, 75])
        return cls(len(kept), excluded, float(kept.min()), float(q1), float(med), float(q3), float(kept.max()))


@dataclass
class CellStats:
    W: int
    p: int
    lam: int
    makespan_mean: float
    makespan: QuartileSummary
    overhead: QuartileSummary
    steals_sent_mean: float
    steals_success_mean: float
    steals_failed_mean: float
    R_until_tau_mean: float
    records: list[RunRecord] = field(default_factory=list, repr=False)

    @classmethod
    def from_records(cls, W: int, p: int, lam: int, records: list[RunRecord]) -> "CellStats":
        ms = np.array([r.makespan for r in records], dtype=float)
        return cls(
            W,
            p,
            lam,
            float(ms.mean()),
            QuartileSummary.of(ms.tolist()),
            QuartileSummary.of(r.overhead_ratio for r in records),
            float(np.mean([r.steals_sent for r in records])),
            float(np.mean([r.steals_success for r in records])),
            float(np.mean([r.steals_failed for r in records])),
            float(np.mean([r.R_until_tau for r in records])),
            list(records),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("records")
        d["lambda"] = d.pop("lam")
        return d


def overhead_ratio(cell: CellStats, form: str = "W_over_lambda") -> QuartileSummary:
    """Per-run overhead ratios of a cell under ``form``, summarized."""
    if form not in OVERHEAD_FORMS:
        raise ValueError(f"form must be one of {OVERHEAD_FORMS}")
    return QuartileSummary.of(run_overhead_ratio(cell.W, cell.p, cell.lam, r.makespan, form) for r in cell.records)


def fit_constant(cells: Sequence[CellStats]) -> float:
    """Least-squares ``c`` in ``mean_makespan ≈ W/p + c·λ·log2(W/λ)``.

    Only cells with ``p ≥ 2``, a positive log and a positive mean overhead
    take part; at least three distinct ``(W, p, λ)`` are required.
    """
    usable = {}
    for c in cells:
        x = c.lam * math.log2(c.W / c.lam) if c.W > c.lam else 0.0
        y = c.makespan_mean - c.W / c.p
        if c.p >= 2 and x > 0 and y > 0:
            usable.setdefault((c.W, c.p, c.lam), []).append((x, y))
    if len(usable) < 3:
        raise InsufficientData(f"need ≥ 3 distinct cells with idle overhead, got {len(usable)}")
    pairs = [xy for v in usable.values() for xy in v]
    num = sum(x * y for x, y in pairs)
    den = sum(x * x for x, _ in pairs)
    return num / den


def _worker_count(workers: Optional[int]) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get("WS_SIM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_sweep(
    spec: SweepSpec,
    engine: str = "event",
    overhead_form: str = "W_over_lambda",
    workers: Optional[int] = None,
) -> list[CellStats]:
    """Simulate every cell ``spec.replications`` times.

    Replication ``i`` of cell ``(W, p, λ)`` uses seed
    ``base_seed ^ blake2b(W, p, λ, i)``, so results do not depend on the
    worker count or scheduling order.
    """
    if spec.n_runs > spec.budget:
        raise BudgetExceeded(f"{spec.n_runs} runs exceed the budget of {spec.budget}")
    configs = []
    for W, p, lam in spec.cells:
        for i in range(spec.replications):
            configs.append(
                validate(SimConfig(W, p, lam, cell_seed(spec.base_seed, W, p, lam, i), engine, overhead_form))
            )
    n_workers = min(_worker_count(workers), len(configs))
    logger.info("sweep: %d cells x %d reps on %d workers", len(spec.cells), spec.replications, n_workers)
    if n_workers > 1:
        with ProcessPoolExecutor(n_workers) as pool:
            records = list(pool.map(simulate_record, configs, chunksize=max(1, len(configs) // (8 * n_workers))))
    else:
        records = [simulate_record(c) for c in configs]

    cells = []
    reps = spec.replications
    for j, (W, p, lam) in enumerate(spec.cells):
        cells.append(CellStats.from_records(W, p, lam, records[j * reps : (j + 1) * reps]))
    return cells


def write_runs_csv(cells: Sequence[CellStats], fh) -> None:
    out = csv.writer(fh, lineterminator="\n")
    out.writerow(CSV_HEADER)
    for c in cells:
        for r in c.records:
            out.writerow(r.csv_row())


def runs_csv(cells: Sequence[CellStats]) -> str:
    buf = io.StringIO()
    write_runs_csv(cells, buf)
    return buf.getvalue()


def _round6(obj):
    if isinstance(obj, float):
        return float(f"{obj:.6g}")
    if isinstance(obj, dict):
        return {k: _round6(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round6(v) for v in obj]
    return obj


def summary_json(spec: SweepSpec, cells: Sequence[CellStats]) -> str:
    try:
        c = fit_constant(cells)
    except InsufficientData:
        c = None
    doc = {
        "spec": {**asdict(spec), "W_values": list(spec.W_values), "p_values": list(spec.p_values), "lambda_values": list(spec.lambda_values)},
        "fitted_constant": c,
        "cells": [cell.to_dict() for cell in cells],
    }
    return json.dumps(_round6(doc), indent=2, sort_keys=True)
