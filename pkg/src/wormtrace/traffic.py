"""Background (normal) traffic generation."""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import EventKind, Exponential, Scheduler, SimTime
from .network import ConnectionRecord, Network, Protocol, deliver_connection

SERVICES = ("HTTP", "HTTPS", "DNS", "SSH", "FTP", "Email", "ping")

# service label -> host role that serves it; ping targets anyone
SERVER_ROLE = {
    "HTTP": "http-server",
    "HTTPS": "https-server",
    "DNS": "dns-server",
    "SSH": "ssh-server",
    "FTP": "ftp-server",
    "Email": "mail-server",
}

TRANSPORT = {"DNS": Protocol.UDP, "ping": Protocol.UDP}


@dataclass
class TrafficProfile:
    flow_rate_per_host: float = 10.0  # flows per second
    service_mix: dict[str, float] = field(
        default_factory=lambda: {
            "HTTP": 4.0,
            "HTTPS": 3.0,
            "DNS": 2.0,
            "SSH": 0.5,
            "FTP": 0.5,
            "Email": 1.0,
            "ping": 0.5,
        }
    )
    pair_selection: str = "client-server"

    def validate(self) -> None:
        if self.flow_rate_per_host < 0:
            raise ValueError("flow_rate_per_host must be non-negative")
        unknown = set(self.service_mix) - set(SERVICES)
        if unknown:
            raise ValueError(f"unknown services {sorted(unknown)}")
        weights = list(self.service_mix.values())
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ValueError("service weights must be non-negative with a positive sum")
        if self.pair_selection not in ("uniform", "client-server"):
            raise ValueError(f"unknown pair_selection {self.pair_selection!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "TrafficProfile":
        p = cls(**d)
        p.validate()
        return p

    def to_dict(self) -> dict:
        return {
            "flow_rate_per_host": self.flow_rate_per_host,
            "service_mix": dict(self.service_mix),
            "pair_selection": self.pair_selection,
        }


class BackgroundTraffic:
    """Per-host Poisson flow sources feeding normal connections into the network."""

    def __init__(self, scheduler: Scheduler, net: Network, profile: TrafficProfile):
        profile.validate()
        self.scheduler = scheduler
        self.net = net
        self.profile = profile
        self.t_end: SimTime = 0
        self._services = list(profile.service_mix)
        total = sum(profile.service_mix.values())
        self._cum = []
        acc = 0.0
        for s in self._services:
            acc += profile.service_mix[s] / total
            self._cum.append(acc)
        self._servers = {s: net.hosts_with_service(role) for s, role in SERVER_ROLE.items()}
        self.flows = 0

    def _gap(self) -> int:
        mean_ms = 1000.0 / self.profile.flow_rate_per_host
        return int(round(self.scheduler.draw(Exponential(mean_ms))))

    def schedule(self, t_end: SimTime) -> None:
        """Start one flow source per host; each stops once its next flow would pass ``t_end``."""
        self.t_end = t_end
        if self.profile.flow_rate_per_host == 0:
            return
        now = self.scheduler.now
        for host in self.net.hosts:
            t = now + self._gap()
            if t <= t_end:
                self.scheduler.at(t, EventKind.NORMAL_TRAFFIC, host.id)

    def _pick_service(self) -> str:
        u = self.scheduler.rng.random()
        for s, c in zip(self._services, self._cum):
            if u < c:
                return s
        return self._services[-1]

    def _pick_destination(self, src: int, service: str) -> int:
        rng = self.scheduler.rng
        n = len(self.net)
        if self.profile.pair_selection == "client-server":
            servers = [h for h in self._servers.get(service, ()) if h != src]
            if servers:
                return servers[int(rng.integers(len(servers)))]
        dst = int(rng.integers(n - 1))
        return dst + 1 if dst >= src else dst

    def handle(self, event) -> None:
        if len(self.net) < 2:
            return
        src = event.host
        service = self._pick_service()
        dst = self._pick_destination(src, service)
        conn = ConnectionRecord(
            src, dst, TRANSPORT.get(service, Protocol.TCP), event.time, service=service
        )
        event.payload.update(dst=dst, service=service)
        self.flows += 1
        deliver_connection(self.scheduler, self.net, conn)
        nxt = event.time + self._gap()
        if nxt <= self.t_end:
            self.scheduler.at(nxt, EventKind.NORMAL_TRAFFIC, src)


def schedule_background(scheduler: Scheduler, net: Network, profile: TrafficProfile, t_end: SimTime) -> BackgroundTraffic:
    gen = BackgroundTraffic(scheduler, net, profile)
    scheduler.on(EventKind.NORMAL_TRAFFIC, gen.handle)
    gen.schedule(t_end)
    return gen
