"""Potential-function instrumentation and the makespan bound.

The bound has the shape ``W/p + 4·λ·γ(p)·log2(W/(2λ)) + 3λ`` where γ(p) is
the worst ratio between the number of steal requests arriving in one
latency-long interval and the guaranteed log-decrease of the potential
``φ = Σ w_i² + 2 s_i²`` over that interval.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
import warnings
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Iterable, Optional

from .engine.common import choose_victim
from .engine.reference import ReferenceSimulation
from .model import MessageKind, RunTrace, balanced_interval
from .rng import RandomStream, derive_seed

GAMMA_CAP = 1.0 / (2.0 - math.log2(3.0 + 1.0 / math.e))
UNIVERSAL_GAMMA = 4.03


class DegenerateBoundWarning(UserWarning):
    """The logarithm in a bound has an argument ≤ 1 and was dropped."""


def _check_p(p: int) -> None:
    if p < 2:
        raise ValueError("p must be ≥ 2")


def q_of_r(r: int, p: int) -> float:
    """Probability that a given processor is targeted by at least one of ``r``
    requests, each sent by another processor to a uniform victim."""
    _check_p(p)
    if not 0 <= r <= p - 1:
        raise ValueError("r must lie in [0, p-1]")
    return 1.0 - ((p - 2) / (p - 1)) ** r


def h_of_r(r: int, p: int) -> float:
    return 1.0 - q_of_r(r, p) / 4.0


def f_of_r(r: int, p: int) -> float:
    """``-log2 h(r)`` written as ``2 - log2(3 + (1 - 1/(p-1))^r)``."""
    _check_p(p)
    return 2.0 - math.log2(3.0 + (1.0 - 1.0 / (p - 1)) ** r)


def g_of_r(r: int, p: int) -> float:
    return r / f_of_r(r, p)


@lru_cache(maxsize=None)
def gamma(p: int) -> float:
    """Exact γ(p): maximum of ``g(r)/p`` over ``r = 1 .. p-1``."""
    _check_p(p)
    return max(g_of_r(r, p) for r in range(1, p)) / p


def _gamma_value(p: int, gamma_value: Optional[float]) -> float:
    return gamma(p) if gamma_value is None else gamma_value


def bound_expectation(W: int, p: int, lam: int, gamma_value: Optional[float] = None) -> float:
    """Upper bound on the expected makespan.

    Pass ``gamma_value=UNIVERSAL_GAMMA`` for the p-independent constant.
    When ``W <= 2λ`` the log term is dropped and a ``DegenerateBoundWarning``
    is issued.
    """
    if W < 1 or lam < 1:
        raise ValueError("W and lambda must be ≥ 1")
    g = _gamma_value(p, gamma_value)
    if W <= 2 * lam:
        warnings.warn(f"log2(W/2λ) ≤ 0 for W={W}, λ={lam}; log term dropped", DegenerateBoundWarning, stacklevel=2)
        return W / p + 3 * lam
    return W / p + 4 * lam * g * math.log2(W / (2 * lam)) + 3 * lam


def bound_tail(W: int, p: int, lam: int, x: float, gamma_value: Optional[float] = None) -> tuple[float, float]:
    """Probability of exceeding the expectation bound by ``x``.

    Returns ``(2^-x, 2^(-x / (p·γ)))``: the first is the form stated with the
    theorem, the second the weaker form its proof actually yields.
    """
    if x < 0:
        raise ValueError("x must be ≥ 0")
    g = _gamma_value(p, gamma_value)
    return 2.0**-x, 2.0 ** (-x / (p * g))


def lemma2_bound_R(W: int, p: int, lam: int, gamma_value: Optional[float] = None) -> float:
    """Bound on the expected number of requests received before every
    processor holds at most 3λ work."""
    if W <= lam:
        warnings.warn(f"log2(W/λ) ≤ 0 for W={W}, λ={lam}; bound is 0", DegenerateBoundWarning, stacklevel=2)
        return 0.0
    return 2 * p * _gamma_value(p, gamma_value) * math.log2(W / lam)


@dataclass(frozen=True)
class BoundReport:
    W: int
    p: int
    lam: int
    gamma: float
    bound_expectation: float
    lemma2_bound_R: float
    tail_scale: float
    overhead_ratio: Optional[float] = None
    degenerate: bool = False

    def bound_tail(self, x: float) -> tuple[float, float]:
        return bound_tail(self.W, self.p, self.lam, x, self.gamma)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["tail"] = {"paper_form": "2^-x", "proof_form": "2^(-x/tail_scale)"}
        return d


def bound_report(W: int, p: int, lam: int, gamma_value: Optional[float] = None, makespan: Optional[float] = None) -> BoundReport:
    g = _gamma_value(p, gamma_value)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        expectation = bound_expectation(W, p, lam, g)
        lemma2 = lemma2_bound_R(W, p, lam, g)
    ratio = None
    if makespan is not None and makespan > W / p:
        ratio = (4 * g * lam * math.log2(W / lam) + 3 * lam) / (makespan - W / p)
    return BoundReport(W, p, lam, g, expectation, lemma2, p * g, ratio, degenerate=bool(caught))


# -- potential series ----------------------------------------------------


@dataclass(frozen=True)
class PotentialSample:
    k: int
    phi: int
    r_k: int


@dataclass(frozen=True)
class PotentialSeries:
    samples: list[PotentialSample]
    tau: int
    R_until_tau: int


def extract_potential_series(trace: RunTrace, latency: int) -> PotentialSeries:
    samples = [PotentialSample(k, phi, r) for k, (phi, r) in enumerate(zip(trace.phi_series, trace.r_series))]
    tau = balanced_interval(trace.max_load_series, latency)
    return PotentialSeries(samples, tau, sum(s.r_k for s in samples[:tau]))


def write_potential_csv(series: PotentialSeries | Iterable[PotentialSample], path) -> None:
    samples = series.samples if isinstance(series, PotentialSeries) else series
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["k", "phi", "r_k"])
        for s in samples:
            out.writerow([s.k, s.phi, s.r_k])


def potential_increases(trace: RunTrace) -> list[int]:
    """Boundary indices ``k`` with ``φ(k+1) > φ(k)``; empty on a sound run."""
    phi = trace.phi_series
    return [k for k in range(len(phi) - 1) if phi[k + 1] > phi[k]]


def cmax_inequality_holds(trace: RunTrace, W: int, p: int, lam: int) -> bool:
    """``p·makespan ≤ W + 2λ·(steal requests)``: every idle tick of every
    processor lies inside the round trip of one of its requests."""
    return p * trace.makespan <= W + 2 * lam * trace.steals_sent


# -- Lemma-1 probe -------------------------------------------------------


@dataclass(frozen=True)
class ProbeResult:
    t: int
    k: int
    r: int
    phi: int
    q: float
    bound: float
    mean_ratio: float
    stderr: float
    ensemble_size: int

    @property
    def holds(self) -> bool:
        return self.mean_ratio <= self.bound + 2 * self.stderr

    def to_dict(self) -> dict:
        d = asdict(self)
        d["holds"] = self.holds
        return d


def lemma1_probe(snapshot: dict, ensemble_size: int, seed: int = 0, redraw_targets: bool = True) -> ProbeResult:
    """Estimate ``E[φ(k+1)/φ(k)]`` from a frozen state at ``t = kλ``.

    Each continuation restores the state, swaps in a fresh random stream
    derived from ``(seed, index)`` and simulates the next λ ticks. With
    ``redraw_targets`` the victims of the requests already in flight are drawn
    again uniformly, so the ensemble averages over the thieves' choices as
    well as over victim elections.
    """
    if ensemble_size < 1:
        raise ValueError("ensemble_size must be ≥ 1")
    base = ReferenceSimulation.from_snapshot(snapshot)
    lam, p = base.lam, base.p
    if base.t % lam:
        raise ValueError(f"snapshot at t={base.t} is not on a λ boundary")
    if base.makespan is not None:
        raise ValueError("snapshot taken after termination")
    phi0 = base.potential()
    if phi0 == 0:
        raise ValueError("snapshot has zero potential")
    r = len(base.pending_requests())
    q = q_of_r(r, p) if p >= 2 else 0.0
    bound = 1.0 - q / 4.0

    ratios = []
    for c in range(ensemble_size):
        sim = ReferenceSimulation.from_snapshot(snapshot)
        sim.rng = RandomStream(derive_seed(seed, "probe", c))
        if redraw_targets:
            _redraw(sim)
        sim.run(until=base.t + lam)
        ratios.append(sim.potential() / phi0)
    mean = statistics.fmean(ratios)
    se = statistics.stdev(ratios) / math.sqrt(len(ratios)) if len(ratios) > 1 else 0.0
    return ProbeResult(base.t, base.t // lam, r, phi0, q, bound, mean, se, ensemble_size)


def _redraw(sim: ReferenceSimulation) -> None:
    for at in sorted(sim.in_flight):
        msgs = sim.in_flight[at]
        for idx, m in enumerate(msgs):
            if m.kind is MessageKind.STEAL_REQUEST:
                dst = choose_victim(sim.rng, m.src, sim.p)
                msgs[idx] = type(m)(m.kind, m.src, dst, m.sent_at, m.arrives_at)
                sim.procs[m.src].outstanding = dst


def harvest_snapshots(sim: ReferenceSimulation, ks: Iterable[int]) -> list[dict]:
    """Advance ``sim`` and snapshot it at each boundary ``k·λ`` reached."""
    docs = []
    for k in sorted(ks):
        sim.run(until=k * sim.lam)
        if sim.makespan is not None:
            break
        docs.append(sim.snapshot())
    return docs


def save_snapshot(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_snapshot(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
