"""Monitor agents and the distributed trace-back protocol.

Every host runs a :class:`MonitorAgent` that keeps a sliding window of
incoming connection headers.  When the outbreak signal arrives the agent
freezes its window, queries every source in it, and elects a parent from
the replies.  Two election rules are provided:

* :func:`select_parent_origins` - the baseline rule, first "Yes" wins.
* :func:`select_parent_extended` - the causal rule: a candidate qualifies
  only if it opened the connection at or after its own infection time, and
  the earliest qualifying connection wins.

Hosts left without a parent are the reconstructed origins.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .engine import Event, EventKind, SimTime
from .network import Protocol

RULES = ("origins", "extended")


class Mode(str, enum.Enum):
    MONITORING = "monitoring"
    TRACEBACK = "traceback"


@dataclass(frozen=True)
class Reply:
    """Answer to a trace-back query: ``No`` or ``Yes`` with the infection time."""

    t_infect: Optional[SimTime] = None

    @classmethod
    def no(cls) -> "Reply":
        return cls(None)

    @classmethod
    def yes(cls, t_infect: SimTime) -> "Reply":
        return cls(t_infect)

    @property
    def is_yes(self) -> bool:
        return self.t_infect is not None

    def __str__(self) -> str:
        return f"Yes({self.t_infect})" if self.is_yes else "No"


@dataclass(frozen=True)
class WindowEntry:
    src: int
    protocol: Protocol
    t_init: SimTime
    t_arrive: SimTime


@dataclass(frozen=True)
class Candidate:
    """One distinct source from a frozen window, with its reply.

    ``t_conns`` holds every initiation time seen from ``src`` (sorted);
    ``t_conn`` is the earliest of them.
    """

    src: int
    t_conn: SimTime
    reply: Reply
    t_conns: tuple[SimTime, ...] = ()

    def __post_init__(self):
        if not self.t_conns:
            object.__setattr__(self, "t_conns", (self.t_conn,))
        else:
            object.__setattr__(self, "t_conns", tuple(sorted(self.t_conns)))
            object.__setattr__(self, "t_conn", self.t_conns[0])


@dataclass(frozen=True)
class QueryMessage:
    sender: int
    to: int


def qualifying_time(c: Candidate, strict: bool = False) -> Optional[SimTime]:
    """Earliest connection from ``c`` opened after its sender got infected, or None."""
    if not c.reply.is_yes:
        return None
    t_i = c.reply.t_infect
    for t in c.t_conns:
        if t > t_i or (t == t_i and not strict):
            return t
    return None


def select_parent_extended(candidates: Iterable[Candidate], strict: bool = False) -> Optional[int]:
    """Causal parent election.

    Keep candidates that replied Yes and opened a connection at or after
    their infection time (``strict`` demands strictly after); return the one
    whose qualifying connection is earliest, smallest host id on ties.
    """
    best: Optional[tuple[SimTime, int]] = None
    for c in candidates:
        t = qualifying_time(c, strict)
        if t is not None and (best is None or (t, c.src) < best):
            best = (t, c.src)
    return None if best is None else best[1]


def select_parent_origins(candidates: Sequence[Candidate]) -> Optional[int]:
    """Baseline election: the first Yes in window order."""
    for c in candidates:
        if c.reply.is_yes:
            return c.src
    return None


class MonitorAgent:
    """Per-host monitor: sliding window, query/reply state and parent election.

    ``causal_cutoff`` restricts parent election to connections that arrived
    no later than the agent's own infection; with it off, a connection from
    a descendant that reached an origin after the fact can still qualify.
    """

    def __init__(
        self,
        host: int,
        window_size: int = 1000,
        strict: bool = False,
        causal_cutoff: bool = True,
    ):
        if window_size <= 0:
            raise ValueError("window_size must be positive")
        self.host = host
        self.window_size = window_size
        self.strict = strict
        self.causal_cutoff = causal_cutoff
        self.mode = Mode.MONITORING
        self.window: list[WindowEntry] = []
        self.infection_time: Optional[SimTime] = None
        self.frozen_infection: Optional[SimTime] = None
        self.outbreak_time: Optional[SimTime] = None
        self.replies: dict[int, Reply] = {}
        self.awaiting: set[int] = set()
        self.parents: dict[str, Optional[int]] = {}
        self.candidates: list[Candidate] = []
        self.elected = False

    def __repr__(self) -> str:
        return f"MonitorAgent(host={self.host}, mode={self.mode.value}, window={len(self.window)})"

    # -- monitoring --------------------------------------------------------

    def _evict(self, now: SimTime) -> None:
        horizon = now - self.window_size
        if self.window and self.window[0].t_init < horizon:
            self.window = [e for e in self.window if e.t_init >= horizon]

    def record_incoming(self, src: int, protocol: Protocol, t_init: SimTime, now: SimTime) -> bool:
        """Append a header to the window.  Ignored (returns False) once frozen."""
        if self.mode is Mode.TRACEBACK:
            return False
        self.window.append(WindowEntry(src, Protocol(protocol), t_init, now))
        self._evict(now)
        return True

    def notify_infected(self, now: SimTime) -> None:
        # local IDS view of this host; only the first infection counts
        if self.infection_time is None:
            self.infection_time = now

    @property
    def infected(self) -> bool:
        """Whether the host was infected when trace-back started."""
        return self.frozen_infection is not None

    # -- trace-back ----------------------------------------------------------

    def enter_traceback(self, outbreak_time: SimTime) -> list[int]:
        """Freeze the window; return the hosts to query (empty unless infected)."""
        if self.mode is Mode.TRACEBACK:
            return []
        self._evict(outbreak_time)
        self.mode = Mode.TRACEBACK
        self.outbreak_time = outbreak_time
        self.frozen_infection = self.infection_time
        if not self.infected:
            self.elected = True
            return []
        targets = list(dict.fromkeys(e.src for e in self.window))
        self.awaiting = set(targets)
        if not targets:
            self._elect()
        return targets

    def answer_query(self) -> Reply:
        if self.mode is not Mode.TRACEBACK:
            raise RuntimeError(f"host {self.host} queried before the outbreak signal")
        if self.frozen_infection is None:
            return Reply.no()
        return Reply.yes(self.frozen_infection)

    def receive_reply(self, src: int, reply: Reply) -> bool:
        """Store a reply; elect once every query is answered.  Returns True when done."""
        if src not in self.awaiting:
            raise RuntimeError(f"host {self.host} got an unsolicited reply from {src}")
        self.awaiting.discard(src)
        self.replies[src] = reply
        if not self.awaiting:
            self._elect()
        return self.elected

    def build_candidates(self) -> list[Candidate]:
        times: dict[int, list[SimTime]] = {}
        for e in self.window:
            if self.causal_cutoff and e.t_arrive > self.frozen_infection:
                continue
            times.setdefault(e.src, []).append(e.t_init)
        return [
            Candidate(src, min(ts), self.replies[src], tuple(ts)) for src, ts in times.items()
        ]

    def _elect(self) -> None:
        self.candidates = self.build_candidates()
        self.parents = {
            "origins": select_parent_origins(self.candidates),
            "extended": select_parent_extended(self.candidates, self.strict),
        }
        self.elected = True


# -- graphs ------------------------------------------------------------------


@dataclass
class PropagationGraph:
    edges: set[tuple[int, int]] = field(default_factory=set)
    origins: set[int] = field(default_factory=set)
    infected: set[int] = field(default_factory=set)
    infection_times: dict[int, SimTime] = field(default_factory=dict)

    def __post_init__(self):
        self.edges = {(int(p), int(c)) for p, c in self.edges}
        self.origins = {int(o) for o in self.origins}
        self.infected = {int(i) for i in self.infected}
        self.infection_times = {int(k): int(v) for k, v in self.infection_times.items()}

    def validate(self) -> None:
        children = [c for _, c in self.edges]
        if len(children) != len(set(children)):
            raise ValueError("a node has more than one parent")
        if any(p == c for p, c in self.edges):
            raise ValueError("self edge")
        if self.origins != self.infected - set(children):
            raise ValueError("origins must be the infected nodes without a parent")

    def parent_of(self) -> dict[int, int]:
        return {c: p for p, c in self.edges}

    def to_dict(self, **extra) -> dict:
        d = {
            "edges": [{"parent": p, "child": c} for p, c in sorted(self.edges)],
            "origins": sorted(self.origins),
            "infected": sorted(self.infected),
        }
        if self.infection_times:
            d["infection_times"] = {str(k): v for k, v in sorted(self.infection_times.items())}
        d.update(extra)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PropagationGraph":
        return cls(
            {(e["parent"], e["child"]) for e in d["edges"]},
            set(d["origins"]),
            set(d["infected"]),
            {int(k): v for k, v in d.get("infection_times", {}).items()},
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, PropagationGraph):
            return NotImplemented
        return (self.edges, self.origins, self.infected) == (other.edges, other.origins, other.infected)


def assemble_graph(agents: Iterable[MonitorAgent], rule: str = "extended") -> PropagationGraph:
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}")
    g = PropagationGraph()
    for a in agents:
        if not a.infected:
            continue
        if not a.elected:
            raise RuntimeError(f"agent {a.host} has not finished parent election")
        g.infected.add(a.host)
        g.infection_times[a.host] = a.frozen_infection
        parent = a.parents.get(rule)
        if parent is None:
            g.origins.add(a.host)
        else:
            g.edges.add((parent, a.host))
    return g


# -- offline replay -----------------------------------------------------------


def traceback_from_log(
    events: Iterable[Event],
    window_ms: int = 1000,
    strict: bool = False,
    causal_cutoff: bool = True,
) -> dict[str, PropagationGraph]:
    """Run trace-back over a recorded event trace.

    Only agent-visible data is read: connection headers (src, protocol,
    t_init and arrival time), each host's own infection notice, and the
    outbreak signal.  Ground-truth flags in the trace are ignored.  Query
    and reply messages are resolved directly instead of being re-timed.
    """
    agents: dict[int, MonitorAgent] = {}

    def agent(h: int) -> MonitorAgent:
        if h not in agents:
            agents[h] = MonitorAgent(h, window_ms, strict, causal_cutoff)
        return agents[h]

    queries: dict[int, list[int]] = {}
    for ev in events:
        if ev.kind is EventKind.CONNECTION_ARRIVE:
            p = ev.payload
            agent(ev.host).record_incoming(p["src"], p["protocol"], p["t_init"], ev.time)
        elif ev.kind is EventKind.INFECTION_COMPLETE:
            agent(ev.host).notify_infected(ev.time)
        elif ev.kind is EventKind.OUTBREAK_DETECTED:
            queries[ev.host] = agent(ev.host).enter_traceback(ev.time)

    for host, targets in queries.items():
        for src in targets:
            agents[host].receive_reply(src, agent(src).answer_query())

    ordered = [agents[h] for h in sorted(agents)]
    return {rule: assemble_graph(ordered, rule) for rule in RULES}
