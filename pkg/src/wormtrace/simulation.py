"""One simulation run: worm spread, background traffic and the trace-back protocol."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .config import ExperimentConfig
from .engine import Event, EventKind, Scheduler, SimTime
from .network import ConnectionRecord, Network, Protocol, Status, build_network, deliver_connection
from .traceback import MonitorAgent, PropagationGraph, Reply, assemble_graph
from .traffic import schedule_background
from .worms import ScanState, probe_gap, sample_recovery_dwell, select_target

log = logging.getLogger(__name__)


class ProtocolError(RuntimeError):
    """Trace-back did not reach quiescence (some agent is still waiting for replies)."""


@dataclass
class InfectionEdge:
    parent: int
    child: int
    t_infect: SimTime


@dataclass
class SimulationResult:
    events: list[Event]
    ground_truth: PropagationGraph  # infections known when the outbreak signal fired
    final_truth: PropagationGraph  # every infection up to the end of the run
    reconstructions: dict[str, PropagationGraph]
    outbreak_time: SimTime
    outbreak_forced: bool
    end_time: SimTime
    scan_states: dict[int, ScanState] = field(default_factory=dict)

    @property
    def event_counts(self) -> dict[str, int]:
        return dict(sorted(Counter(e.kind.value for e in self.events).items()))


class Simulation:
    def __init__(self, config: ExperimentConfig):
        config.validate()
        self.config = config
        self.worm = config.worm
        self.scheduler = Scheduler(config.seed)
        self.net: Network = build_network(config.topology, self.scheduler.rng)
        self.delay = self.net.link_delay_ms
        self.agents = [
            MonitorAgent(h.id, config.window_ms, config.strict_condition, config.causal_cutoff)
            for h in self.net.hosts
        ]
        self.scan: dict[int, ScanState] = {}
        self.edges: list[InfectionEdge] = []
        self.origin_hosts: list[int] = []
        self.infection_times: dict[int, SimTime] = {}
        self.outbreak_time: Optional[SimTime] = None
        self.outbreak_forced = False
        self.snapshot: Optional[PropagationGraph] = None
        self._elected = 0

        vuln = self.net.vulnerable_ids
        if self.worm.origin_ids is not None:
            origins = sorted(self.worm.origin_ids)
            bad = [o for o in origins if not self.net.hosts[o].vulnerable]
            if bad:
                raise ValueError(f"origins {bad} are not vulnerable")
        else:
            picks = self.scheduler.rng.choice(len(vuln), size=self.worm.origin_count, replace=False)
            origins = sorted(vuln[int(i)] for i in picks)
        self.origins = origins
        n_vuln = len(vuln)
        self.outbreak_threshold = (
            None
            if config.outbreak_fraction is None
            else max(1, math.ceil(config.outbreak_fraction * n_vuln - 1e-9))
        )

        s = self.scheduler
        s.on(EventKind.PROBE_SEND, self._on_probe)
        s.on(EventKind.CONNECTION_ARRIVE, self._on_arrive)
        s.on(EventKind.INFECTION_COMPLETE, self._on_infection)
        s.on(EventKind.RECOVERY_CHECK, self._on_recovery)
        s.on(EventKind.OUTBREAK_DETECTED, self._on_outbreak)
        s.on(EventKind.QUERY_SEND, self._on_query)
        s.on(EventKind.REPLY_ARRIVE, self._on_reply)

        for o in origins:
            s.at(self.worm.origin_time_ms, EventKind.INFECTION_COMPLETE, o, parent=None)
        self.traffic = schedule_background(s, self.net, config.traffic, config.t_end_ms)
        if config.outbreak_time_ms is not None:
            self._broadcast_outbreak(config.outbreak_time_ms)

    # -- worm ----------------------------------------------------------------

    def schedule_scanning(self, host: int) -> None:
        """Start scanning from a freshly infected host."""
        now = self.scheduler.now
        self.scan[host] = ScanState()
        if self.worm.transport is Protocol.UDP:
            self.scheduler.at(now, EventKind.PROBE_SEND, host, release=False)
        else:
            for slot in range(self.worm.concurrent_connections):
                self.scheduler.at(now, EventKind.PROBE_SEND, host, slot=slot, release=False)

    def _on_probe(self, ev: Event) -> None:
        host = self.net.hosts[ev.host]
        st = self.scan[ev.host]
        if ev.payload.get("release"):
            st.in_flight -= 1
        if host.state.status is not Status.INFECTED:
            st.active = False
            ev.payload["stopped"] = True
            return
        now = ev.time
        rng = self.scheduler.rng
        addr = select_target(rng, self.net.address_space, host.address, self.worm)
        dst = self.net.lookup(addr)
        ev.payload.update(target=str(addr), dst=dst)
        st.probes += 1
        if self.worm.transport is Protocol.UDP:
            if dst is not None and dst != ev.host:
                deliver_connection(
                    self.scheduler, self.net, ConnectionRecord(ev.host, dst, Protocol.UDP, now, is_attack=True)
                )
            self.scheduler.at(now + probe_gap(self.scheduler, self.worm), EventKind.PROBE_SEND, ev.host, release=False)
            return

        slot = ev.payload["slot"]
        if dst == ev.host:
            # self-hit: discarded, the slot tries again next ms
            self.scheduler.at(now + 1, EventKind.PROBE_SEND, ev.host, slot=slot, release=False)
            return
        st.in_flight += 1
        st.max_in_flight = max(st.max_in_flight, st.in_flight)
        if dst is None:
            done = now + self.worm.tcp_timeout_ms
        else:
            deliver_connection(
                self.scheduler, self.net, ConnectionRecord(ev.host, dst, Protocol.TCP, now, is_attack=True)
            )
            done = now + 3 * self.delay
        self.scheduler.at(done, EventKind.PROBE_SEND, ev.host, slot=slot, release=True)

    def attempt_infect(self, ev: Event) -> bool:
        """Apply an attack connection to its destination; True on a new infection."""
        dst = self.net.hosts[ev.host]
        if dst.vulnerable and dst.state.status is Status.SUSCEPTIBLE:
            dst.state.infect(ev.time)
            ev.payload["succeeded_infection"] = True
            self.scheduler.at(ev.time, EventKind.INFECTION_COMPLETE, dst.id, parent=ev.payload["src"])
            return True
        return False

    def _on_arrive(self, ev: Event) -> None:
        p = ev.payload
        self.agents[ev.host].record_incoming(p["src"], p["protocol"], p["t_init"], ev.time)
        if p["is_attack"]:
            self.attempt_infect(ev)

    def _on_infection(self, ev: Event) -> None:
        host = self.net.hosts[ev.host]
        parent = ev.payload["parent"]
        now = ev.time
        if parent is None:
            if host.state.status is not Status.SUSCEPTIBLE:
                return
            host.state.infect(now)
            self.origin_hosts.append(ev.host)
        else:
            self.edges.append(InfectionEdge(parent, ev.host, now))
        self.infection_times[ev.host] = now
        self.agents[ev.host].notify_infected(now)
        self.schedule_scanning(ev.host)
        dwell = sample_recovery_dwell(self.scheduler, self.worm.recovery_prob_per_ms)
        if math.isfinite(dwell):
            self.scheduler.at(now + int(dwell), EventKind.RECOVERY_CHECK, ev.host)
        if (
            self.outbreak_threshold is not None
            and self.outbreak_time is None
            and len(self.infection_times) >= self.outbreak_threshold
        ):
            self._broadcast_outbreak(now + self.config.detection_delay_ms)

    def _on_recovery(self, ev: Event) -> None:
        self.net.hosts[ev.host].state.recover(ev.time)

    # -- trace-back ----------------------------------------------------------

    def _broadcast_outbreak(self, t: SimTime) -> None:
        # one event per host, inserted back to back so they run contiguously
        self.outbreak_time = t
        for h in self.net.hosts:
            self.scheduler.at(t, EventKind.OUTBREAK_DETECTED, h.id)

    def _take_snapshot(self) -> PropagationGraph:
        return PropagationGraph(
            {(e.parent, e.child) for e in self.edges},
            set(self.origin_hosts),
            set(self.infection_times),
            dict(self.infection_times),
        )

    def _on_outbreak(self, ev: Event) -> None:
        if self.snapshot is None:
            self.snapshot = self._take_snapshot()
        agent = self.agents[ev.host]
        targets = agent.enter_traceback(ev.time)
        ev.payload["queries"] = len(targets)
        for to in targets:
            self.scheduler.at(ev.time + self.delay, EventKind.QUERY_SEND, to, sender=ev.host)
        if agent.elected:
            self._count_elected()

    def _on_query(self, ev: Event) -> None:
        reply = self.agents[ev.host].answer_query()
        ev.payload["reply"] = reply.t_infect
        self.scheduler.at(
            ev.time + self.delay, EventKind.REPLY_ARRIVE, ev.payload["sender"], src=ev.host, t_infect=reply.t_infect
        )

    def _on_reply(self, ev: Event) -> None:
        if self.agents[ev.host].receive_reply(ev.payload["src"], Reply(ev.payload["t_infect"])):
            self._count_elected()

    def _count_elected(self) -> None:
        self._elected += 1
        if self._elected == len(self.agents):
            self.scheduler.halt()

    @property
    def quiescent(self) -> bool:
        return self._elected == len(self.agents)

    def run(self) -> SimulationResult:
        s = self.scheduler
        s.run_until(self.config.t_end_ms)
        if not self.quiescent:
            if self.outbreak_time is None:
                log.warning("outbreak threshold not reached by t=%d; forcing detection", self.config.t_end_ms)
                self.outbreak_forced = True
                self._broadcast_outbreak(s.now)
            # queries and replies take two link delays
            s.run_until(max(s.now, self.outbreak_time) + 2 * self.delay + 1)
        if not self.quiescent:
            waiting = [a.host for a in self.agents if not a.elected]
            raise ProtocolError(f"agents {waiting[:10]} never finished parent election")
        recon = {rule: assemble_graph(self.agents, rule) for rule in self.config.rules}
        return SimulationResult(
            events=list(s.log),
            ground_truth=self.snapshot,
            final_truth=self._take_snapshot(),
            reconstructions=recon,
            outbreak_time=self.outbreak_time,
            outbreak_forced=self.outbreak_forced,
            end_time=s.now,
            scan_states=self.scan,
        )


def simulate(config: ExperimentConfig) -> SimulationResult:
    return Simulation(config).run()
