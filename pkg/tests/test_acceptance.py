"""Acceptance criteria, one test each, at their stated tolerances.

Each test prints a ``[PASS]`` / ``[FAIL]`` line (also collected into the
terminal summary) before asserting, so a red criterion still reports the
measured value.
"""

import itertools
import math

import pytest

from conftest import ACCEPTANCE_LINES
from wslatency.analysis import (
    GAMMA_CAP,
    gamma,
    harvest_snapshots,
    lemma1_probe,
    lemma2_bound_R,
    potential_increases,
)
from wslatency.engine import ReferenceSimulation, run_event, run_reference
from wslatency.experiments import SweepSpec, fit_constant, overhead_ratio, run_sweep
from wslatency.model import SimConfig

pytestmark = pytest.mark.slow

GRID = SweepSpec(
    W_values=(10**5, 10**6),
    p_values=(32, 64, 128, 256),
    lambda_values=(2, 32, 262),
    replications=100,
    base_seed=0,
)

SMALL_W = (0, 1, 2, 3, 5, 10, 37, 100, 1000, 10**4)
SMALL_P = (2, 4, 8)
SMALL_LAM = (1, 2, 5, 17)
SMALL_SEEDS = range(50)


def report(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def grid_cells():
    return run_sweep(GRID, engine="event")


def test_criterion_1_bound_satisfaction(grid_cells):
    runs = [r for c in grid_cells for r in c.records]
    bad = [r for r in runs if not r.makespan <= r.bound_theorem]
    worst = max(r.makespan / r.bound_theorem for r in runs)
    report(1, not bad, f"{len(runs) - len(bad)}/{len(runs)} runs within the bound (max makespan/bound {worst:.4f})")


def test_criterion_2_overhead_ratio(grid_cells):
    medians = {}
    for c in grid_cells:
        if c.lam == 262:
            medians[(c.W, c.p)] = overhead_ratio(c).median
    in_range = all(3.5 <= m <= 6.0 for m in medians.values())
    decreasing = all(
        all(medians[(W, a)] > medians[(W, b)] for a, b in zip(GRID.p_values, GRID.p_values[1:]))
        for W in GRID.W_values
    )
    table = "; ".join(
        f"W={W}: " + ",".join(f"{medians[(W, p)]:.2f}" for p in GRID.p_values) for W in GRID.W_values
    )
    report(2, in_range and decreasing, f"medians by p=32..256 [{table}] in [3.5,6.0]={in_range} decreasing={decreasing}")


def test_criterion_3_fitted_constant(grid_cells):
    c = fit_constant(grid_cells)
    report(3, 3.0 <= c <= 4.6, f"fitted c = {c:.4f}, required in [3.0, 4.6]")


def test_criterion_4_gamma():
    values = [gamma(p) for p in range(2, 513)]
    below = max(values) < 4.03
    increasing = all(a < b for a, b in zip(values, values[1:]))
    gap = abs(gamma(512) - GAMMA_CAP)
    report(
        4,
        below and increasing and gap <= 0.01,
        f"max gamma {max(values):.6f} < 4.03={below}, increasing={increasing}, "
        f"|gamma(512) - cap| = {gap:.6f} (<= 0.01: {gap <= 0.01})",
    )


def test_criterion_5_engine_equivalence():
    total = mismatches = 0
    for W, p, lam in itertools.product(SMALL_W, SMALL_P, SMALL_LAM):
        for seed in SMALL_SEEDS:
            cfg = SimConfig(W, p, lam, seed)
            total += 1
            mismatches += run_event(cfg) != run_reference(cfg)
    report(5, mismatches == 0, f"{mismatches} mismatches over {total} runs")


class _Conservation:
    def __init__(self, W):
        self.W = W
        self.violations = 0
        self.ticks = 0

    def __call__(self, sim):
        self.ticks += 1
        held = sum(pr.w + pr.s for pr in sim.procs)
        self.violations += held + sim.executed != self.W


def test_criterion_6_conservation_and_monotonicity(grid_cells):
    ticks = cons_bad = mono_bad = runs = 0
    for W, p, lam in itertools.product(SMALL_W, SMALL_P, SMALL_LAM):
        for seed in range(5):
            check = _Conservation(W)
            sim = ReferenceSimulation(SimConfig(W, p, lam, seed), observer=check)
            sim.run()
            runs += 1
            ticks += check.ticks
            cons_bad += check.violations
            mono_bad += bool(potential_increases(sim.trace()))
    for W, p, lam in itertools.product(SMALL_W, SMALL_P, SMALL_LAM):
        for seed in SMALL_SEEDS:
            runs += 1
            mono_bad += bool(potential_increases(run_event(SimConfig(W, p, lam, seed))))
    grid_runs = [r for c in grid_cells for r in c.records]
    runs += len(grid_runs)
    mono_bad += sum(not r.potential_ok for r in grid_runs)
    report(
        6,
        cons_bad == 0 and mono_bad == 0,
        f"conservation violations {cons_bad} over {ticks} ticks; phi increases in {mono_bad} of {runs} runs",
    )


PROBE_SOURCES = [(20_000, 8, 5), (20_000, 16, 3), (5_000, 4, 2), (50_000, 32, 10), (3_000, 2, 7)]
PROBE_KS = [1, 2, 3, 5, 8, 20, 50]


def test_criterion_7_lemma1_probe():
    results = []
    for i, (W, p, lam) in enumerate(PROBE_SOURCES):
        sim = ReferenceSimulation(SimConfig(W, p, lam, seed=i))
        for doc in harvest_snapshots(sim, PROBE_KS):
            if doc["t"] == 0:
                continue
            results.append(lemma1_probe(doc, 200, seed=i))
    held = sum(r.holds for r in results)
    worst = max(r.mean_ratio - r.bound for r in results)
    ok = len(results) >= 20 and held == len(results)
    report(7, ok, f"{held}/{len(results)} mid-execution snapshots within 1 - q/4 + 2SE (max mean - bound {worst:+.4f})")


def test_criterion_8_cmax(grid_cells):
    runs = [r for c in grid_cells for r in c.records]
    small = 0
    bad = sum(not r.cmax_ok for r in runs)
    for W, p, lam in itertools.product(SMALL_W, SMALL_P, SMALL_LAM):
        for seed in range(10):
            tr = run_event(SimConfig(W, p, lam, seed))
            small += 1
            bad += not p * tr.makespan <= W + 2 * lam * tr.steals_sent
    report(8, bad == 0, f"p*makespan <= W + 2*lambda*R fails in {bad} of {len(runs) + small} runs")


def test_criterion_9_lemma2(grid_cells):
    ratios = []
    for c in grid_cells:
        ratios.append((c.R_until_tau_mean / lemma2_bound_R(c.W, c.p, c.lam), c))
    worst, cell = max(ratios, key=lambda x: x[0])
    ok = all(r <= 1 for r, _ in ratios)
    report(
        9,
        ok,
        f"mean R_until_tau within 2p*gamma*log2(W/lambda) in {sum(r <= 1 for r, _ in ratios)}/{len(ratios)} cells "
        f"(max ratio {worst:.4f} at W={cell.W}, p={cell.p}, lambda={cell.lam})",
    )
