"""Deterministic discrete-event scheduler.

Time is integer milliseconds.  Events with equal time run in insertion
order, and all randomness comes from one seeded numpy stream consumed in
event order, so a (seed, config) pair fully determines a run.
"""

from __future__ import annotations

import enum
import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Union

import numpy as np

SimTime = int


class SchedulingError(RuntimeError):
    """Raised when the scheduler contract is violated (e.g. scheduling into the past)."""


class EventKind(str, enum.Enum):
    PROBE_SEND = "ProbeSend"
    CONNECTION_ARRIVE = "ConnectionArrive"
    INFECTION_COMPLETE = "InfectionComplete"
    RECOVERY_CHECK = "RecoveryCheck"
    NORMAL_TRAFFIC = "NormalTraffic"
    OUTBREAK_DETECTED = "OutbreakDetected"
    QUERY_SEND = "QuerySend"
    REPLY_ARRIVE = "ReplyArrive"


@dataclass
class Event:
    time: SimTime
    kind: EventKind
    host: int
    payload: dict = field(default_factory=dict)

    def to_json(self) -> str:
        body = {"host": self.host, **self.payload}
        return json.dumps(
            {"time_ms": self.time, "kind": self.kind.value, "payload": body},
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_dict(cls, d: dict) -> "Event":
        payload = dict(d["payload"])
        host = payload.pop("host")
        return cls(int(d["time_ms"]), EventKind(d["kind"]), host, payload)


# -- distributions ---------------------------------------------------------


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def validate(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo > self.hi:
            raise ValueError(f"invalid Uniform({self.lo}, {self.hi})")


@dataclass(frozen=True)
class Bernoulli:
    p: float

    def validate(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"Bernoulli probability {self.p} outside [0, 1]")


@dataclass(frozen=True)
class Exponential:
    """Exponential with the given mean (same time unit as the result)."""

    mean: float

    def validate(self) -> None:
        if not self.mean > 0:
            raise ValueError(f"Exponential mean must be positive, got {self.mean}")


@dataclass(frozen=True)
class Geometric:
    """Number of Bernoulli(p) trials up to and including the first success.

    ``p == 0`` yields ``math.inf`` (never succeeds).
    """

    p: float

    def validate(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"Geometric probability {self.p} outside [0, 1]")


DistributionSpec = Union[Uniform, Bernoulli, Exponential, Geometric]


def distribution_from_dict(d: dict) -> DistributionSpec:
    kinds = {"uniform": Uniform, "bernoulli": Bernoulli, "exponential": Exponential, "geometric": Geometric}
    d = dict(d)
    try:
        cls = kinds[d.pop("dist").lower()]
    except KeyError as exc:
        raise ValueError(f"unknown distribution spec {d!r}") from exc
    spec = cls(**d)
    spec.validate()
    return spec


def distribution_to_dict(spec: DistributionSpec) -> dict:
    return {"dist": type(spec).__name__.lower(), **spec.__dict__}


# -- scheduler -------------------------------------------------------------

Handler = Callable[[Event], None]


class Scheduler:
    """Priority-queue event loop ordered by ``(time, insertion sequence)``."""

    def __init__(self, seed: int = 0):
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.now: SimTime = 0
        self._queue: list[tuple[int, int, Event]] = []
        self._seq = 0
        self._handlers: dict[EventKind, Handler] = {}
        self._halted = False
        self.log: list[Event] = []

    def on(self, kind: EventKind, handler: Handler) -> None:
        self._handlers[kind] = handler

    def schedule(self, event: Event) -> None:
        if event.time < self.now:
            raise SchedulingError(
                f"cannot schedule {event.kind.value} at t={event.time} (clock is {self.now})"
            )
        heapq.heappush(self._queue, (event.time, self._seq, event))
        self._seq += 1

    def at(self, time: SimTime, kind: EventKind, host: int, **payload: Any) -> Event:
        ev = Event(int(time), kind, host, payload)
        self.schedule(ev)
        return ev

    def halt(self) -> None:
        """Stop the current ``run_until`` after the event being processed."""
        self._halted = True

    @property
    def pending(self) -> int:
        return len(self._queue)

    def run_until(self, t_end: SimTime) -> list[Event]:
        """Process every event with ``time <= t_end`` and return them in order.

        The clock ends at ``t_end``, or at the halting event's time when a
        handler calls :meth:`halt`.
        """
        if t_end < self.now:
            raise SchedulingError(f"run_until({t_end}) is before the clock ({self.now})")
        processed: list[Event] = []
        self._halted = False
        while self._queue and self._queue[0][0] <= t_end:
            time, _, event = heapq.heappop(self._queue)
            self.now = time
            handler = self._handlers.get(event.kind)
            if handler is not None:
                handler(event)
            processed.append(event)
            if self._halted:
                break
        if not self._halted:
            self.now = t_end
        self.log.extend(processed)
        return processed

    def draw(self, dist: DistributionSpec) -> float | bool:
        """Draw one sample from ``dist`` using the engine's single stream."""
        dist.validate()
        if isinstance(dist, Uniform):
            return float(self.rng.uniform(dist.lo, dist.hi))
        if isinstance(dist, Bernoulli):
            # always consume one variate so the stream is independent of p
            return bool(self.rng.random() < dist.p)
        if isinstance(dist, Exponential):
            return float(self.rng.exponential(dist.mean))
        if isinstance(dist, Geometric):
            if dist.p == 0.0:
                return math.inf
            return int(self.rng.geometric(dist.p))
        raise TypeError(f"unsupported distribution {dist!r}")

    # plumbing used by the worm and traffic models
    def choice_index(self, n: int) -> int:
        return int(self.rng.integers(n))


def rng_draw(scheduler: Scheduler, dist: DistributionSpec) -> float | bool:
    return scheduler.draw(dist)


def write_event_log(events: Iterable[Event], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(ev.to_json())
            fh.write("\n")


def read_event_log(path) -> list[Event]:
    with open(path, encoding="utf-8") as fh:
        return [Event.from_dict(json.loads(line)) for line in fh if line.strip()]
