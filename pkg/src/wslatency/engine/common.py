"""Rules shared verbatim by both engines.

Intra-tick phase order, applied identically by both engines at every tick
``t >= 1``:

A. deliver every message arriving at ``t``;
B. every victim with incoming requests answers them: a victim whose transfer
   channel is busy fails them all, otherwise it elects one request uniformly
   (only when there are several) and accepts it if the split leaves the thief
   at least one unit; the accepted victim's unit of execution for tick ``t``
   is folded into the split;
C. every other processor holding work executes one unit;
D. work transfers delivered in A land on their thieves; the victims' channels
   free up;
E. every processor with no work, nothing in transit and no pending request
   sends a steal request to a uniformly chosen other processor.

The run ends at the first tick, checked after D, where no processor holds
work and no transfer is in flight. Random draws happen in B (victims in
increasing id) and E (processors in increasing id), and nowhere else.
"""

from __future__ import annotations

from ..rng import RandomStream


def divide_work(w_before: int, latency: int) -> tuple[int, int]:
    """Split a victim's load at the tick a steal request is served.

    ``w_before`` is the victim's work at the end of the previous tick. One
    unit is executed this tick; the victim keeps the ceiling of half of the
    rest plus ``latency`` so that both sides hold about the same amount once
    the transfer lands. A non-positive transfer means the steal must fail.
    """
    if w_before < 1:
        raise ValueError("w_before must be ≥ 1")
    rest = w_before - 1
    keep = -(-(rest + latency) // 2)
    return keep, rest - keep


def choose_victim(rng: RandomStream, thief: int, p: int) -> int:
    v = rng.randbelow(p - 1)
    return v + 1 if v >= thief else v


def elect(rng: RandomStream, n_requests: int) -> int:
    """Index of the winning request among ``n_requests`` sorted by thief id."""
    return rng.randbelow(n_requests) if n_requests > 1 else 0


def boundary_count(makespan: int, latency: int) -> int:
    """Number of sampled boundaries ``0, λ, ..., ceil(makespan/λ)·λ``."""
    return -(-makespan // latency) + 1
