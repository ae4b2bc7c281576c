"""Literal unit-time-step engine.

Every tick walks all processors through the phases documented in
:mod:`wslatency.engine.common`. Slow but obviously faithful; it is the oracle
for the event-driven engine and the only engine whose full state can be
snapshotted and resumed.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Callable, Optional

from ..model import (
    FAIL_BUSY,
    FAIL_CONTENTION,
    FAIL_THRESHOLD,
    SUCCESS,
    Message,
    MessageKind,
    ProcessorState,
    RunTrace,
    SimConfig,
    StealEvent,
    balanced_interval,
    validate,
)
from ..rng import RandomStream
from .common import choose_victim, divide_work, elect

SNAPSHOT_VERSION = 1


class ReferenceSimulation:
    """Tick-by-tick simulation state.

    ``observer`` (if given) is called as ``observer(sim)`` at the end of every
    tick, including tick 0.
    """

    def __init__(self, config: SimConfig, observer: Optional[Callable] = None):
        self.config = validate(config)
        self.p = config.processors
        self.lam = config.latency
        self.rng = RandomStream(config.seed)
        self.procs = [ProcessorState() for _ in range(self.p)]
        self.procs[0].w = config.total_work
        self.in_flight: dict[int, list[Message]] = defaultdict(list)
        self.t = 0
        self.executed = 0
        self.steals_sent = 0
        self.steals_success = 0
        self.steals_failed = 0
        self.transfers_in_flight = 0
        self.r_series = [0]
        self.phi_series: list[int] = []
        self.max_load_series: list[int] = []
        self.steal_events: list[StealEvent] = []
        self.makespan: Optional[int] = None
        self.observer = observer
        self._start()

    # -- tick mechanics --------------------------------------------------

    def _start(self) -> None:
        if self._finished():
            self.makespan = 0
        else:
            self._emit_requests()
        self._sample()
        if self.observer:
            self.observer(self)

    def _finished(self) -> bool:
        return self.transfers_in_flight == 0 and all(pr.w == 0 for pr in self.procs)

    def _send(self, kind: MessageKind, src: int, dst: int, amount: int = 0) -> None:
        msg = Message(kind, src, dst, self.t, self.t + self.lam, amount)
        self.in_flight[msg.arrives_at].append(msg)

    def _emit_requests(self) -> None:
        for i, pr in enumerate(self.procs):
            if pr.w == 0 and pr.s == 0 and pr.outstanding is None:
                victim = choose_victim(self.rng, i, self.p)
                pr.outstanding = victim
                self._send(MessageKind.STEAL_REQUEST, i, victim)
                self.steals_sent += 1

    def _fail(self, victim: int, thief: int, outcome: str) -> None:
        self.steals_failed += 1
        self.steal_events.append(StealEvent(self.t, victim, thief, outcome))
        self._send(MessageKind.FAIL_RESPONSE, victim, thief)

    def _sample(self) -> None:
        if self.t % self.lam:
            return
        self.phi_series.append(sum(pr.w * pr.w + 2 * pr.s * pr.s for pr in self.procs))
        self.max_load_series.append(max(pr.w for pr in self.procs))

    def step(self) -> None:
        """Advance one tick."""
        if self.makespan is not None:
            raise RuntimeError("simulation already finished")
        self.t += 1
        t = self.t
        procs = self.procs
        lam = self.lam

        # A
        arrived = self.in_flight.pop(t, [])
        requests: dict[int, list[int]] = defaultdict(list)
        transfers: list[Message] = []
        for msg in arrived:
            if msg.kind is MessageKind.STEAL_REQUEST:
                requests[msg.dst].append(msg.src)
            elif msg.kind is MessageKind.FAIL_RESPONSE:
                procs[msg.dst].outstanding = None
            else:
                transfers.append(msg)
        n_req = sum(len(v) for v in requests.values())
        k = -(-t // lam)
        if k == len(self.r_series):
            self.r_series.append(0)
        self.r_series[k] += n_req

        # B
        served = set()
        for victim in sorted(requests):
            thieves = sorted(requests[victim])
            vp = procs[victim]
            if vp.s > 0:
                for thief in thieves:
                    self._fail(victim, thief, FAIL_BUSY)
                continue
            winner = elect(self.rng, len(thieves))
            for idx, thief in enumerate(thieves):
                if idx != winner:
                    self._fail(victim, thief, FAIL_CONTENTION)
                    continue
                keep, amount = divide_work(vp.w, lam) if vp.w >= 1 else (0, 0)
                if amount < 1:
                    self._fail(victim, thief, FAIL_THRESHOLD)
                    continue
                self.executed += 1
                vp.w = keep
                vp.s = amount
                vp.transfer_until = t + lam
                served.add(victim)
                self.transfers_in_flight += 1
                self.steals_success += 1
                self.steal_events.append(StealEvent(t, victim, thief, SUCCESS, amount))
                self._send(MessageKind.WORK_TRANSFER, victim, thief, amount)

        # C
        for i, pr in enumerate(procs):
            if pr.w > 0 and i not in served:
                pr.w -= 1
                self.executed += 1

        # D
        for msg in sorted(transfers, key=lambda m: m.dst):
            thief = procs[msg.dst]
            thief.w = msg.amount
            thief.outstanding = None
            victim = procs[msg.src]
            victim.s = 0
            victim.transfer_until = None
            self.transfers_in_flight -= 1

        if self._finished():
            self.makespan = t
        else:
            # E
            self._emit_requests()
        self._sample()
        if self.observer:
            self.observer(self)

    def run(self, until: Optional[int] = None) -> None:
        """Step until termination, or until tick ``until`` if given."""
        while self.makespan is None and (until is None or self.t < until):
            self.step()

    # -- results ---------------------------------------------------------

    def trace(self) -> RunTrace:
        if self.makespan is None:
            raise RuntimeError("simulation not finished")
        phi = list(self.phi_series)
        max_load = list(self.max_load_series)
        r = list(self.r_series)
        n = -(-self.makespan // self.lam) + 1
        while len(phi) < n:
            phi.append(0)
            max_load.append(0)
        while len(r) < n:
            r.append(0)
        tau = balanced_interval(max_load, self.lam)
        return RunTrace(
            makespan=self.makespan,
            steals_sent=self.steals_sent,
            steals_success=self.steals_success,
            steals_failed=self.steals_failed,
            r_series=r,
            phi_series=phi,
            max_load_series=max_load,
            tau=tau,
            R_until_tau=sum(r[:tau]),
            executed_total=self.executed,
            steal_events=list(self.steal_events),
        )

    def potential(self) -> int:
        return sum(pr.w * pr.w + 2 * pr.s * pr.s for pr in self.procs)

    def pending_requests(self) -> list[Message]:
        return sorted(
            (m for msgs in self.in_flight.values() for m in msgs if m.kind is MessageKind.STEAL_REQUEST),
            key=lambda m: (m.arrives_at, m.src),
        )

    # -- snapshots -------------------------------------------------------

    def snapshot(self) -> dict:
        """Full state as a JSON-ready document."""
        return {
            "version": SNAPSHOT_VERSION,
            "config": self.config.to_dict(),
            "t": self.t,
            "makespan": self.makespan,
            "processors": [
                {"w": pr.w, "s": pr.s, "transfer_until": pr.transfer_until, "outstanding": pr.outstanding}
                for pr in self.procs
            ],
            "messages": [m.to_dict() for t in sorted(self.in_flight) for m in self.in_flight[t]],
            "rng": self.rng.state(),
            "counters": {
                "executed": self.executed,
                "steals_sent": self.steals_sent,
                "steals_success": self.steals_success,
                "steals_failed": self.steals_failed,
                "transfers_in_flight": self.transfers_in_flight,
            },
            "r_series": list(self.r_series),
            "phi_series": list(self.phi_series),
            "max_load_series": list(self.max_load_series),
            "steal_events": [[e.t, e.victim, e.thief, e.outcome, e.amount] for e in self.steal_events],
        }

    @classmethod
    def from_snapshot(cls, doc: dict, observer: Optional[Callable] = None) -> "ReferenceSimulation":
        if doc.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {doc.get('version')!r}")
        sim = cls.__new__(cls)
        sim.config = validate(SimConfig(**doc["config"]))
        sim.p = sim.config.processors
        sim.lam = sim.config.latency
        sim.rng = RandomStream.from_state(doc["rng"])
        sim.procs = [ProcessorState(**d) for d in doc["processors"]]
        sim.in_flight = defaultdict(list)
        for d in doc["messages"]:
            m = Message.from_dict(d)
            sim.in_flight[m.arrives_at].append(m)
        sim.t = doc["t"]
        sim.makespan = doc["makespan"]
        c = doc["counters"]
        sim.executed = c["executed"]
        sim.steals_sent = c["steals_sent"]
        sim.steals_success = c["steals_success"]
        sim.steals_failed = c["steals_failed"]
        sim.transfers_in_flight = c["transfers_in_flight"]
        sim.r_series = list(doc["r_series"])
        sim.phi_series = list(doc["phi_series"])
        sim.max_load_series = list(doc["max_load_series"])
        sim.steal_events = [StealEvent(*e) for e in doc["steal_events"]]
        sim.observer = observer
        return sim


def run_reference(config: SimConfig) -> RunTrace:
    sim = ReferenceSimulation(config)
    sim.run()
    return sim.trace()
