"""Event-driven engine.

Jumps straight from one interesting tick to the next: a message arrival or a
processor running out of work. Between two such ticks every loaded
processor just executes, so its load is kept implicitly as ``(w, since)``
with ``w(t) = max(0, w - (t - since))``. Boundary samples falling in a gap
are computed in bulk with numpy.

Random draws are consumed in exactly the order of the reference engine, so
both produce identical traces for the same seed.
"""

from __future__ import annotations

import heapq
from collections import defaultdict

import numpy as np

from ..model import (
    FAIL_BUSY,
    FAIL_CONTENTION,
    FAIL_THRESHOLD,
    SUCCESS,
    RunTrace,
    SimConfig,
    StealEvent,
    balanced_interval,
    validate,
)
from ..rng import RandomStream
from .common import choose_victim, divide_work, elect

_REQ, _FAIL, _XFER = 0, 1, 2
_CHUNK = 2048


def run_event(config: SimConfig) -> RunTrace:
    cfg = validate(config)
    W, p, lam = cfg.total_work, cfg.processors, cfg.latency
    if W == 0:
        return RunTrace(0, 0, 0, 0, [0], [0], [0], 0, 0, 0, [])

    rng = RandomStream(cfg.seed)
    wb = [0] * p  # load at tick `since`
    since = [0] * p
    s = [0] * p
    outstanding = [False] * p
    wb[0] = W

    arrivals: dict[int, list[tuple]] = defaultdict(list)
    arrival_times: list[int] = []
    ends: list[tuple[int, int]] = [(W, 0)]
    xfers_in_flight = 0

    steals_sent = steals_success = steals_failed = 0
    events: list[StealEvent] = []
    r_series = [0]
    phi_series: list[int] = []
    max_load_series: list[int] = []

    def send(kind, src, dst, t, amount=0):
        at = t + lam
        if at not in arrivals:
            heapq.heappush(arrival_times, at)
        arrivals[at].append((kind, src, dst, amount))

    def load(i, t):
        w = wb[i] - (t - since[i])
        return w if w > 0 else 0

    def sample_gap(first_k, last_k):
        # boundaries k*lam for first_k <= k <= last_k, no event in between
        w0 = np.asarray(wb, dtype=np.int64)
        since0 = np.asarray(since, dtype=np.int64)
        s_term = 2 * sum(x * x for x in s)
        for lo in range(first_k, last_k + 1, _CHUNK):
            ks = np.arange(lo, min(last_k, lo + _CHUNK - 1) + 1, dtype=np.int64)
            loads = w0[None, :] - (ks[:, None] * lam - since0[None, :])
            np.maximum(loads, 0, out=loads)
            phi_series.extend((np.einsum("ij,ij->i", loads, loads) + s_term).tolist())
            max_load_series.extend(loads.max(axis=1).tolist())

    # tick 0: every empty processor asks for work
    for i in range(1, p):
        outstanding[i] = True
        send(_REQ, i, choose_victim(rng, i, p), 0)
        steals_sent += 1
    phi_series.append(W * W)
    max_load_series.append(W)

    last_t = 0
    makespan = None
    while makespan is None:
        while ends and (wb[ends[0][1]] == 0 or since[ends[0][1]] + wb[ends[0][1]] != ends[0][0]):
            heapq.heappop(ends)
        upcoming = []
        if arrival_times:
            upcoming.append(arrival_times[0])
        if ends:
            upcoming.append(ends[0][0])
        t = min(upcoming)

        # boundaries strictly between the previous event tick and this one
        first_k = last_t // lam + 1
        last_k = (t - 1) // lam
        if first_k <= last_k:
            sample_gap(first_k, last_k)

        candidates = set()
        while ends and ends[0][0] == t:
            _, i = heapq.heappop(ends)
            if wb[i] > 0 and since[i] + wb[i] == t:
                candidates.add(i)

        # A
        msgs = []
        if arrival_times and arrival_times[0] == t:
            heapq.heappop(arrival_times)
            msgs = arrivals.pop(t)
        requests: dict[int, list[int]] = defaultdict(list)
        transfers = []
        for kind, src, dst, amount in msgs:
            if kind == _REQ:
                requests[dst].append(src)
            elif kind == _FAIL:
                outstanding[dst] = False
                candidates.add(dst)
            else:
                transfers.append((dst, src, amount))
        if msgs:
            k = -(-t // lam)
            while len(r_series) <= k:
                r_series.append(0)
            r_series[k] += sum(len(v) for v in requests.values())

        # B
        for victim in sorted(requests):
            thieves = sorted(requests[victim])
            if s[victim] > 0:
                for thief in thieves:
                    steals_failed += 1
                    events.append(StealEvent(t, victim, thief, FAIL_BUSY))
                    send(_FAIL, victim, thief, t)
                continue
            winner = elect(rng, len(thieves))
            for idx, thief in enumerate(thieves):
                if idx != winner:
                    steals_failed += 1
                    events.append(StealEvent(t, victim, thief, FAIL_CONTENTION))
                    send(_FAIL, victim, thief, t)
                    continue
                w_prev = load(victim, t - 1)
                keep, amount = divide_work(w_prev, lam) if w_prev >= 1 else (0, 0)
                if amount < 1:
                    steals_failed += 1
                    events.append(StealEvent(t, victim, thief, FAIL_THRESHOLD))
                    send(_FAIL, victim, thief, t)
                    continue
                wb[victim] = keep
                since[victim] = t
                heapq.heappush(ends, (t + keep, victim))
                s[victim] = amount
                xfers_in_flight += 1
                steals_success += 1
                events.append(StealEvent(t, victim, thief, SUCCESS, amount))
                send(_XFER, victim, thief, t, amount)

        # C is implicit in the (w, since) encoding

        # D
        for thief, victim, amount in sorted(transfers):
            wb[thief] = amount
            since[thief] = t
            heapq.heappush(ends, (t + amount, thief))
            outstanding[thief] = False
            s[victim] = 0
            xfers_in_flight -= 1
            candidates.add(victim)

        if xfers_in_flight == 0 and candidates and all(since[i] + wb[i] <= t for i in range(p)):
            makespan = t
        else:
            # E
            for i in sorted(candidates):
                if not outstanding[i] and s[i] == 0 and load(i, t) == 0:
                    outstanding[i] = True
                    send(_REQ, i, choose_victim(rng, i, p), t)
                    steals_sent += 1

        if t % lam == 0:
            sample_gap(t // lam, t // lam)
        last_t = t

    n = -(-makespan // lam) + 1
    while len(phi_series) < n:
        phi_series.append(0)
        max_load_series.append(0)
    while len(r_series) < n:
        r_series.append(0)
    tau = balanced_interval(max_load_series, lam)
    return RunTrace(
        makespan=makespan,
        steals_sent=steals_sent,
        steals_success=steals_success,
        steals_failed=steals_failed,
        r_series=r_series,
        phi_series=phi_series,
        max_load_series=max_load_series,
        tau=tau,
        R_until_tau=sum(r_series[:tau]),
        executed_total=W,
        steal_events=events,
    )
