"""Domain types shared by the engines, the analysis layer and the harness.

Everything is integral: work is counted in unit tasks, time in ticks, and the
latency is the one-way delay of any message in ticks.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

MAX_SEED = 2**64 - 1

ENGINES = ("reference", "event")
OVERHEAD_FORMS = ("W_over_lambda", "W_over_2lambda")


class ConfigError(ValueError):
    """A simulation parameter is outside its legal range.

    ``flag`` names the offending command-line flag when there is one.
    """

    flag = ""

    def __init__(self, message: str, flag: str | None = None):
        super().__init__(message)
        if flag is not None:
            self.flag = flag


class NonPositiveLatency(ConfigError):
    flag = "lambda"


class NonPositiveProcessors(ConfigError):
    flag = "p"


class NegativeWork(ConfigError):
    flag = "W"


@dataclass(frozen=True)
class SimConfig:
    total_work: int
    processors: int
    latency: int
    seed: int = 0
    engine: str = "event"
    overhead_log_arg: str = "W_over_lambda"
    replications: int = 1

    def replication_seed(self, index: int) -> int:
        return self.seed ^ index

    def for_replication(self, index: int) -> "SimConfig":
        return replace(self, seed=self.replication_seed(index), replications=1)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        missing = [n for n in ("total_work", "processors", "latency") if n not in data]
        if missing:
            raise ConfigError(f"missing config keys: {', '.join(missing)}")
        return validate(cls(**data))


_FLAGS = {
    "total_work": "W",
    "processors": "p",
    "latency": "lambda",
    "seed": "seed",
    "replications": "replications",
}


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def validate(config: SimConfig) -> SimConfig:
    """Return ``config`` unchanged, or raise the matching ``ConfigError``."""
    for name in ("total_work", "processors", "latency", "seed", "replications"):
        if not _is_int(getattr(config, name)):
            raise ConfigError(f"{name} must be an integer", _FLAGS[name])
    if config.total_work < 0:
        raise NegativeWork("W must be ≥ 0")
    if config.processors < 1:
        raise NonPositiveProcessors("p must be ≥ 1")
    if config.latency < 1:
        raise NonPositiveLatency("lambda must be ≥ 1")
    if not 0 <= config.seed <= MAX_SEED:
        raise ConfigError("seed must be a 64-bit unsigned integer", "seed")
    if config.engine not in ENGINES:
        raise ConfigError(f"engine must be one of {ENGINES}", "engine")
    if config.overhead_log_arg not in OVERHEAD_FORMS:
        raise ConfigError(f"overhead_log_arg must be one of {OVERHEAD_FORMS}", "overhead-form")
    if config.replications < 1:
        raise ConfigError("replications must be ≥ 1", "replications")
    return config


def load_config(path: str | Path) -> SimConfig:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return SimConfig.from_dict(data)


class Status(enum.Enum):
    WORKING = "Working"
    IDLE_AWAITING_RESPONSE = "IdleAwaitingResponse"
    IDLE_FREE = "IdleFree"
    TRANSFERRING = "Transferring"


@dataclass(slots=True)
class ProcessorState:
    """Mutable per-processor state.

    ``w`` is the local work, ``s`` the work currently travelling from this
    processor to a thief, ``transfer_until`` the tick that transfer lands and
    ``outstanding`` the victim of this processor's pending steal request.
    """

    w: int = 0
    s: int = 0
    transfer_until: Optional[int] = None
    outstanding: Optional[int] = None

    @property
    def status(self) -> Status:
        if self.s > 0:
            return Status.TRANSFERRING
        if self.w > 0:
            return Status.WORKING
        if self.outstanding is not None:
            return Status.IDLE_AWAITING_RESPONSE
        return Status.IDLE_FREE


class MessageKind(enum.Enum):
    STEAL_REQUEST = "StealRequest"
    WORK_TRANSFER = "WorkTransfer"
    FAIL_RESPONSE = "FailResponse"


@dataclass(frozen=True, slots=True)
class Message:
    kind: MessageKind
    src: int
    dst: int
    sent_at: int
    arrives_at: int
    amount: int = 0

    def __post_init__(self):
        if self.kind is MessageKind.WORK_TRANSFER and self.amount < 1:
            raise ValueError("a work transfer carries at least one unit")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "src": self.src,
            "dst": self.dst,
            "sent_at": self.sent_at,
            "arrives_at": self.arrives_at,
            "amount": self.amount,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Message":
        return cls(MessageKind(d["kind"]), d["src"], d["dst"], d["sent_at"], d["arrives_at"], d["amount"])


# outcome labels of a processed steal request
SUCCESS = "success"
FAIL_THRESHOLD = "fail_threshold"
FAIL_BUSY = "fail_busy"
FAIL_CONTENTION = "fail_contention"


@dataclass(frozen=True, slots=True)
class StealEvent:
    t: int
    victim: int
    thief: int
    outcome: str
    amount: int = 0


@dataclass
class RunTrace:
    """Observables of one simulated run.

    ``phi_series[k]``, ``max_load_series[k]`` and ``r_series[k]`` describe the
    boundary ``t = k * latency`` for ``k = 0 .. ceil(makespan / latency)``;
    ``r_series[k]`` counts steal requests arriving in ``((k-1)λ, kλ]``.
    """

    makespan: int
    steals_sent: int
    steals_success: int
    steals_failed: int
    r_series: list[int]
    phi_series: list[int]
    max_load_series: list[int]
    tau: int
    R_until_tau: int
    executed_total: int
    steal_events: list[StealEvent] = field(default_factory=list, repr=False)

    @property
    def steals_answered(self) -> int:
        return self.steals_success + self.steals_failed


def balanced_interval(max_load_series: list[int], latency: int) -> int:
    """First boundary index where no processor holds more than 3λ work."""
    for k, m in enumerate(max_load_series):
        if m <= 3 * latency:
            return k
    raise ValueError("load never drops to 3λ; series is truncated")
