"""Independent reference computations used by the tests.

These work straight off the raw event log and deliberately share no code
with the agents, windows or candidate logic in ``wormtrace.traceback``.
"""

from __future__ import annotations

import math

import numpy as np

from wormtrace.config import ExperimentConfig
from wormtrace.engine import Uniform
from wormtrace.network import Protocol, TopologyConfig
from wormtrace.traffic import TrafficProfile
from wormtrace.worms import LocalPreference, WormConfig


def brute_force_parents(events, window_ms, strict=False, causal_cutoff=True):
    """For each host infected at the outbreak, the earliest windowed connection
    from a host that was already infected when it opened that connection."""
    kinds = [e.kind.value for e in events]
    cut = kinds.index("OutbreakDetected")
    t_out = events[cut].time
    before = events[:cut]
    infected = {e.host: e.time for e in before if e.kind.value == "InfectionComplete"}
    arrivals = [
        (e.time, e.payload["src"], e.host, e.payload["t_init"])
        for e in before
        if e.kind.value == "ConnectionArrive"
    ]
    parents = {}
    for h, t_h in infected.items():
        best = None
        for t_arr, src, dst, t_init in arrivals:
            if dst != h or t_init < t_out - window_ms:
                continue
            if causal_cutoff and t_arr > t_h:
                continue
            if src not in infected:
                continue
            ok = t_init > infected[src] if strict else t_init >= infected[src]
            if ok and (best is None or (t_init, src) < best):
                best = (t_init, src)
        parents[h] = None if best is None else best[1]
    return parents


def random_small_config(rng: np.random.Generator) -> ExperimentConfig:
    """A random experiment on at most ten hosts."""
    n = int(rng.integers(2, 11))
    n_sub = int(rng.integers(1, min(4, n) + 1))
    subnets = [(10 + int(i // 2), int(i % 2)) for i in range(n_sub)]
    per = math.ceil(n / n_sub)
    capacity = per + 1 + int(rng.integers(0, 6))
    vuln = int(rng.integers(1, n + 1))
    topo = TopologyConfig(
        host_count=n,
        subnets=subnets,
        subnet_capacity=capacity,
        vulnerable_count=vuln,
        link_delay_ms=int(rng.integers(1, 4)),
    )
    if rng.random() < 0.5:
        lo = float(rng.uniform(1, 10))
        worm = WormConfig("rand-udp", Protocol.UDP, probe_interval=Uniform(lo, lo + float(rng.uniform(0, 20))))
    else:
        worm = WormConfig(
            "rand-tcp",
            Protocol.TCP,
            concurrent_connections=int(rng.integers(1, 6)),
            tcp_timeout_ms=int(rng.integers(5, 200)),
        )
    if rng.random() < 0.5:
        p = rng.dirichlet([1, 1, 1])
        worm.scan_strategy = LocalPreference(float(p[0]), float(p[1]), float(1 - p[0] - p[1]))
    worm.recovery_prob_per_ms = float(rng.choice([0.0, 1e-4, 1e-3, 1e-2]))
    worm.origin_count = int(rng.integers(1, vuln + 1))
    worm.origin_time_ms = int(rng.integers(0, 50))
    traffic = TrafficProfile(
        flow_rate_per_host=float(rng.choice([0.0, 5.0, 50.0, 200.0])),
        pair_selection="uniform",
    )
    cfg = ExperimentConfig(
        topology=topo,
        worm=worm,
        traffic=traffic,
        window_ms=int(rng.choice([5, 50, 200, 1000, 3000])),
        outbreak_fraction=float(rng.uniform(0.2, 1.0)),
        seed=int(rng.integers(0, 2**63)),
        t_end_ms=2000,
        strict_condition=bool(rng.random() < 0.3),
    )
    cfg.validate()
    return cfg
