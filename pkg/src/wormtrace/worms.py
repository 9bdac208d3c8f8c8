"""Scanning worm behaviour: target selection, probing cadence, recovery.

The three presets reproduce the Slammer, Code Red I and Code Red II rows
of the benchmark dataset parameters (probing gap, concurrency, scanning
strategy, recovery probability).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import Optional

from .engine import Geometric, Uniform, distribution_from_dict, distribution_to_dict
from .network import AddressSpace, HostAddress, Protocol

RANDOM, CLASS_A, CLASS_B = "random", "class_a", "class_b"


@dataclass(frozen=True)
class LocalPreference:
    p_random: float = 1 / 8
    p_class_a: float = 4 / 8
    p_class_b: float = 3 / 8

    def validate(self) -> None:
        probs = (self.p_random, self.p_class_a, self.p_class_b)
        if any(p < 0 for p in probs) or not math.isclose(sum(probs), 1.0, abs_tol=1e-9):
            raise ValueError(f"local preference probabilities must sum to 1, got {probs}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.p_random, self.p_class_a, self.p_class_b)


@dataclass
class WormConfig:
    name: str
    transport: Protocol
    scan_strategy: Optional[LocalPreference] = None  # None: uniform random
    probe_interval: Optional[Uniform] = None  # UDP only, ms
    concurrent_connections: Optional[int] = None  # TCP only
    recovery_prob_per_ms: float = 1e-4
    origin_ids: Optional[list[int]] = None
    origin_count: int = 1
    origin_time_ms: int = 0
    tcp_timeout_ms: int = 500

    def validate(self) -> None:
        if self.transport is Protocol.UDP:
            if self.probe_interval is None or self.concurrent_connections is not None:
                raise ValueError("UDP worms need probe_interval and no concurrent_connections")
            self.probe_interval.validate()
        else:
            if self.concurrent_connections is None or self.probe_interval is not None:
                raise ValueError("TCP worms need concurrent_connections and no probe_interval")
            if self.concurrent_connections < 1:
                raise ValueError("concurrent_connections must be positive")
        if self.scan_strategy is not None:
            self.scan_strategy.validate()
        if not 0.0 <= self.recovery_prob_per_ms <= 1.0:
            raise ValueError("recovery_prob_per_ms must lie in [0, 1]")
        if self.origin_ids is not None and not self.origin_ids:
            raise ValueError("origin_ids must be non-empty")
        if self.origin_ids is None and self.origin_count < 1:
            raise ValueError("origin_count must be positive")
        if self.origin_time_ms < 0 or self.tcp_timeout_ms < 1:
            raise ValueError("origin_time_ms must be >= 0 and tcp_timeout_ms >= 1")

    @property
    def strategy_name(self) -> str:
        return "uniform" if self.scan_strategy is None else "local_preference"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "transport": self.transport.value,
            "scan_strategy": (
                {"kind": "uniform"}
                if self.scan_strategy is None
                else {"kind": "local_preference", "probs": list(self.scan_strategy.as_tuple())}
            ),
            "probe_interval": (
                None if self.probe_interval is None else distribution_to_dict(self.probe_interval)
            ),
            "concurrent_connections": self.concurrent_connections,
            "recovery_prob_per_ms": self.recovery_prob_per_ms,
            "origin_ids": self.origin_ids,
            "origin_count": self.origin_count,
            "origin_time_ms": self.origin_time_ms,
            "tcp_timeout_ms": self.tcp_timeout_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WormConfig":
        d = dict(d)
        if "preset" in d:
            base = preset(d.pop("preset")).to_dict()
            base.update(d)
            d = base
        d["transport"] = Protocol(d["transport"])
        strat = d.get("scan_strategy") or {"kind": "uniform"}
        if isinstance(strat, str):
            strat = {"kind": strat}
        if strat["kind"] == "uniform":
            d["scan_strategy"] = None
        elif strat["kind"] == "local_preference":
            d["scan_strategy"] = LocalPreference(*strat.get("probs", (1 / 8, 4 / 8, 3 / 8)))
        else:
            raise ValueError(f"unknown scan strategy {strat['kind']!r}")
        if d.get("probe_interval") is not None:
            d["probe_interval"] = distribution_from_dict(d["probe_interval"])
        cfg = cls(**d)
        cfg.validate()
        return cfg


PRESETS: dict[str, WormConfig] = {
    "slammer": WormConfig(
        name="slammer",
        transport=Protocol.UDP,
        probe_interval=Uniform(4, 8),
        recovery_prob_per_ms=1e-4,
    ),
    "codered1": WormConfig(
        name="codered1",
        transport=Protocol.TCP,
        concurrent_connections=23,
        recovery_prob_per_ms=1e-4,
    ),
    "codered2": WormConfig(
        name="codered2",
        transport=Protocol.TCP,
        concurrent_connections=25,
        scan_strategy=LocalPreference(1 / 8, 4 / 8, 3 / 8),
        recovery_prob_per_ms=1e-4,
    ),
}


def preset(name: str) -> WormConfig:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown worm preset {name!r}; choose from {sorted(PRESETS)}") from None


# -- target selection ------------------------------------------------------


def select_target_uniform(rng, space: AddressSpace) -> HostAddress:
    if space.size == 0:
        raise ValueError("empty address space")
    a = space.class_a[int(rng.integers(len(space.class_a)))]
    b = space.class_b[int(rng.integers(len(space.class_b)))]
    return HostAddress(a, b, int(rng.integers(space.host_count)))


def local_pref_branch(rng, probs: LocalPreference) -> str:
    u = rng.random()
    if u < probs.p_random:
        return RANDOM
    if u < probs.p_random + probs.p_class_a:
        return CLASS_A
    return CLASS_B


def select_target_local_pref(
    rng, space: AddressSpace, self_addr: HostAddress, probs: LocalPreference = LocalPreference()
) -> HostAddress:
    """Code Red II style: bias the draw toward the scanner's own class A / B."""
    branch = local_pref_branch(rng, probs)
    if branch == RANDOM:
        return select_target_uniform(rng, space)
    if branch == CLASS_A:
        b = space.class_b[int(rng.integers(len(space.class_b)))]
        return HostAddress(self_addr.class_a, b, int(rng.integers(space.host_count)))
    return HostAddress(self_addr.class_a, self_addr.class_b, int(rng.integers(space.host_count)))


def select_target(rng, space: AddressSpace, self_addr: HostAddress, cfg: WormConfig) -> HostAddress:
    if cfg.scan_strategy is None:
        return select_target_uniform(rng, space)
    return select_target_local_pref(rng, space, self_addr, cfg.scan_strategy)


def sample_recovery_dwell(scheduler, prob_per_ms: float) -> float:
    """Milliseconds from infection to recovery (``inf`` when ``prob_per_ms == 0``).

    Equivalent to a Bernoulli trial every ms after infection.
    """
    return scheduler.draw(Geometric(prob_per_ms))


def probe_gap(scheduler, cfg: WormConfig) -> int:
    return int(round(scheduler.draw(cfg.probe_interval)))


@dataclass
class ScanState:
    """Per-host scanning bookkeeping (TCP slot accounting)."""

    in_flight: int = 0
    max_in_flight: int = 0
    probes: int = 0
    active: bool = True
