"""Host topology: hierarchical addresses, host state and connection delivery."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .engine import EventKind, Scheduler, SimTime


class Protocol(str, enum.Enum):
    TCP = "TCP"
    UDP = "UDP"


@dataclass(frozen=True, order=True)
class HostAddress:
    class_a: int
    class_b: int
    host: int

    def __post_init__(self):
        if not (0 <= self.class_a <= 255 and 0 <= self.class_b <= 255 and 0 <= self.host <= 65535):
            raise ValueError(f"address component out of range: {self}")

    def same_class_a(self, other: "HostAddress") -> bool:
        return self.class_a == other.class_a

    def same_class_b(self, other: "HostAddress") -> bool:
        return (self.class_a, self.class_b) == (other.class_a, other.class_b)

    def __str__(self) -> str:
        return f"{self.class_a}.{self.class_b}.{self.host}"


class Status(str, enum.Enum):
    SUSCEPTIBLE = "susceptible"
    INFECTED = "infected"
    RECOVERED = "recovered"


@dataclass
class HostState:
    status: Status = Status.SUSCEPTIBLE
    t_infect: Optional[SimTime] = None
    t_recover: Optional[SimTime] = None

    def infect(self, now: SimTime) -> None:
        if self.status is not Status.SUSCEPTIBLE:
            raise ValueError(f"cannot infect a {self.status.value} host")
        self.status = Status.INFECTED
        self.t_infect = now

    def recover(self, now: SimTime) -> None:
        if self.status is not Status.INFECTED:
            raise ValueError(f"cannot recover a {self.status.value} host")
        if now <= self.t_infect:
            raise ValueError("recovery must come strictly after infection")
        self.status = Status.RECOVERED
        self.t_recover = now

    @property
    def ever_infected(self) -> bool:
        return self.status is not Status.SUSCEPTIBLE


@dataclass
class Host:
    id: int
    address: HostAddress
    vulnerable: bool
    service: str
    state: HostState = field(default_factory=HostState)


@dataclass
class ConnectionRecord:
    """One connection as it travels the network.

    ``is_attack`` and ``succeeded_infection`` are ground-truth flags; monitor
    agents only ever see ``src``, ``protocol`` and ``t_init``.
    """

    src: int
    dst: int
    protocol: Protocol
    t_init: SimTime
    is_attack: bool = False
    succeeded_infection: bool = False
    service: str = ""

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError("a connection cannot target its own source")

    def to_payload(self) -> dict:
        return {
            "src": self.src,
            "dst": self.dst,
            "protocol": self.protocol.value,
            "t_init": self.t_init,
            "is_attack": self.is_attack,
            "succeeded_infection": self.succeeded_infection,
            "service": self.service,
        }

    @classmethod
    def from_payload(cls, p: dict) -> "ConnectionRecord":
        return cls(
            src=p["src"],
            dst=p["dst"],
            protocol=Protocol(p["protocol"]),
            t_init=p["t_init"],
            is_attack=p.get("is_attack", False),
            succeeded_infection=p.get("succeeded_infection", False),
            service=p.get("service", ""),
        )


@dataclass(frozen=True)
class AddressSpace:
    """Cartesian product of class A values, class B values and host numbers.

    This is the space a scanning worm draws from; most of it is usually empty.
    """

    class_a: tuple[int, ...]
    class_b: tuple[int, ...]
    host_count: int

    @property
    def size(self) -> int:
        return len(self.class_a) * len(self.class_b) * self.host_count

    def __iter__(self) -> Iterator[HostAddress]:
        for a in self.class_a:
            for b in self.class_b:
                for h in range(self.host_count):
                    yield HostAddress(a, b, h)


@dataclass
class TopologyConfig:
    """Topology description.

    ``services`` maps service labels to host counts; hosts not covered get
    the ``client`` label.  ``vulnerable_count`` hosts are drawn at random
    among those whose service is in ``vulnerable_services``.
    """

    host_count: int = 200
    subnets: list[tuple[int, int]] = field(
        default_factory=lambda: [(10, 0), (10, 1), (11, 0), (11, 1)]
    )
    subnet_capacity: int = 128
    vulnerable_count: int = 30
    services: dict[str, int] = field(default_factory=dict)
    vulnerable_services: Optional[list[str]] = None
    link_delay_ms: int = 1

    def validate(self) -> None:
        if self.host_count < 1:
            raise ValueError("host_count must be positive")
        if not self.subnets:
            raise ValueError("at least one subnet is required")
        if len(set(map(tuple, self.subnets))) != len(self.subnets):
            raise ValueError("duplicate subnet")
        if not 0 <= self.vulnerable_count <= self.host_count:
            raise ValueError(
                f"vulnerable_count {self.vulnerable_count} exceeds host_count {self.host_count}"
            )
        per_subnet = -(-self.host_count // len(self.subnets))
        # host number 0 is reserved as the network address
        if per_subnet > self.subnet_capacity - 1:
            raise ValueError(
                f"{per_subnet} hosts per subnet exceed capacity {self.subnet_capacity}"
            )
        if sum(self.services.values()) > self.host_count:
            raise ValueError("service counts exceed host_count")
        if self.link_delay_ms < 1:
            raise ValueError("link_delay_ms must be at least 1")

    @classmethod
    def from_dict(cls, d: dict) -> "TopologyConfig":
        d = dict(d)
        if "subnets" in d:
            d["subnets"] = [tuple(s) for s in d["subnets"]]
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {
            "host_count": self.host_count,
            "subnets": [list(s) for s in self.subnets],
            "subnet_capacity": self.subnet_capacity,
            "vulnerable_count": self.vulnerable_count,
            "services": dict(self.services),
            "vulnerable_services": self.vulnerable_services,
            "link_delay_ms": self.link_delay_ms,
        }


@dataclass
class Network:
    hosts: list[Host]
    address_space: AddressSpace
    link_delay_ms: int = 1
    _by_address: dict[HostAddress, int] = field(default_factory=dict, repr=False)
    subnets: dict[tuple[int, int], list[int]] = field(default_factory=dict)

    def __post_init__(self):
        for h in self.hosts:
            if h.address in self._by_address:
                raise ValueError(f"duplicate address {h.address}")
            self._by_address[h.address] = h.id
            self.subnets.setdefault((h.address.class_a, h.address.class_b), []).append(h.id)
        if [h.id for h in self.hosts] != list(range(len(self.hosts))):
            raise ValueError("host ids must be dense 0..N-1")

    def __len__(self) -> int:
        return len(self.hosts)

    def lookup(self, address: HostAddress) -> Optional[int]:
        return self._by_address.get(address)

    @property
    def vulnerable_ids(self) -> list[int]:
        return [h.id for h in self.hosts if h.vulnerable]

    def hosts_with_service(self, service: str) -> list[int]:
        return [h.id for h in self.hosts if h.service == service]


def build_network(config: TopologyConfig, rng) -> Network:
    """Lay hosts out round-robin across subnets and pick the vulnerable set.

    ``rng`` is a numpy ``Generator`` (normally the scheduler's stream).
    """
    config.validate()
    n_sub = len(config.subnets)
    labels: list[str] = []
    for service, count in config.services.items():
        labels.extend([service] * count)
    labels.extend(["client"] * (config.host_count - len(labels)))

    hosts = []
    for i in range(config.host_count):
        a, b = config.subnets[i % n_sub]
        hosts.append(Host(i, HostAddress(a, b, 1 + i // n_sub), False, labels[i]))

    if config.vulnerable_services is None:
        eligible = list(range(config.host_count))
    else:
        wanted = set(config.vulnerable_services)
        eligible = [h.id for h in hosts if h.service in wanted]
    if config.vulnerable_count > len(eligible):
        raise ValueError(
            f"only {len(eligible)} hosts run a vulnerable service, "
            f"{config.vulnerable_count} requested"
        )
    chosen = rng.choice(len(eligible), size=config.vulnerable_count, replace=False)
    for idx in sorted(int(c) for c in chosen):
        hosts[eligible[idx]].vulnerable = True

    space = AddressSpace(
        tuple(sorted({a for a, _ in config.subnets})),
        tuple(sorted({b for _, b in config.subnets})),
        config.subnet_capacity,
    )
    return Network(hosts, space, config.link_delay_ms)


def deliver_connection(scheduler: Scheduler, net: Network, conn: ConnectionRecord) -> None:
    """Schedule the arrival of ``conn`` at its destination after the link delay."""
    if not (0 <= conn.src < len(net) and 0 <= conn.dst < len(net)):
        raise ValueError(f"unknown endpoint in {conn}")
    scheduler.at(
        conn.t_init + net.link_delay_ms,
        EventKind.CONNECTION_ARRIVE,
        conn.dst,
        **conn.to_payload(),
    )
