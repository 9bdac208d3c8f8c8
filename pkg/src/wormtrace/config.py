"""Experiment configuration and the bundled presets.

Config files are JSON documents with ``topology``, ``worm``, ``traffic``
and top-level run settings.  ``worm`` may name a preset
(``{"preset": "codered2"}``) and override individual fields.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .network import TopologyConfig
from .traffic import TrafficProfile
from .worms import PRESETS, WormConfig, preset

# 200 hosts in four subnets; 40 web servers so either worm family finds its targets
BASE_SERVICES = {
    "http-server": 40,
    "https-server": 16,
    "dns-server": 4,
    "ssh-server": 4,
    "ftp-server": 4,
    "mail-server": 4,
}

PRESET_TOPOLOGY = {
    "slammer": {"vulnerable_count": 30, "vulnerable_services": ["http-server", "https-server", "client"]},
    "codered1": {"vulnerable_count": 28, "vulnerable_services": ["http-server"]},
    "codered2": {"vulnerable_count": 28, "vulnerable_services": ["http-server"]},
}

PRESET_DESCRIPTIONS = {
    "slammer": "UDP, uniform random scanning, probe gap Uniform(4 ms, 8 ms), 30 vulnerable hosts",
    "codered1": "TCP, uniform random scanning, 23 concurrent connections, 28 vulnerable HTTP servers",
    "codered2": "TCP, local preference 1/8 random, 4/8 same A, 3/8 same B, 25 concurrent connections, 28 vulnerable HTTP servers",
}


@dataclass
class ExperimentConfig:
    topology: TopologyConfig
    worm: WormConfig
    traffic: TrafficProfile = field(default_factory=TrafficProfile)
    window_ms: int = 1000
    outbreak_fraction: Optional[float] = 0.5
    outbreak_time_ms: Optional[int] = None
    detection_delay_ms: int = 0
    seed: int = 0
    t_end_ms: int = 10_000
    rule: str = "both"
    strict_condition: bool = False
    causal_cutoff: bool = True
    test_plan: int = 0
    experiment: int = 0

    def validate(self) -> None:
        self.topology.validate()
        self.worm.validate()
        self.traffic.validate()
        if self.window_ms <= 0:
            raise ValueError("window_ms must be positive")
        if (self.outbreak_fraction is None) == (self.outbreak_time_ms is None):
            raise ValueError("set exactly one of outbreak_fraction / outbreak_time_ms")
        if self.outbreak_fraction is not None and not 0 < self.outbreak_fraction <= 1:
            raise ValueError("outbreak_fraction must lie in (0, 1]")
        if self.outbreak_time_ms is not None and self.outbreak_time_ms < 0:
            raise ValueError("outbreak_time_ms must be non-negative")
        if self.detection_delay_ms < 0 or self.t_end_ms < 0:
            raise ValueError("negative duration")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.rule not in ("origins", "extended", "both"):
            raise ValueError(f"unknown rule {self.rule!r}")
        if self.worm.origin_ids is not None:
            if any(not 0 <= o < self.topology.host_count for o in self.worm.origin_ids):
                raise ValueError("origin id outside the topology")
        elif self.worm.origin_count > self.topology.vulnerable_count:
            raise ValueError("more origins than vulnerable hosts")

    @property
    def rules(self) -> tuple[str, ...]:
        return ("origins", "extended") if self.rule == "both" else (self.rule,)

    def to_dict(self) -> dict:
        return {
            "topology": self.topology.to_dict(),
            "worm": self.worm.to_dict(),
            "traffic": self.traffic.to_dict(),
            "window_ms": self.window_ms,
            "outbreak_fraction": self.outbreak_fraction,
            "outbreak_time_ms": self.outbreak_time_ms,
            "detection_delay_ms": self.detection_delay_ms,
            "seed": self.seed,
            "t_end_ms": self.t_end_ms,
            "rule": self.rule,
            "strict_condition": self.strict_condition,
            "causal_cutoff": self.causal_cutoff,
            "test_plan": self.test_plan,
            "experiment": self.experiment,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        worm_d = d.pop("worm")
        name = worm_d.get("preset") if isinstance(worm_d, dict) else None
        if isinstance(worm_d, str):
            name, worm_d = worm_d, {"preset": worm_d}
        topo = dict(PRESET_TOPOLOGY.get(name, {}), services=dict(BASE_SERVICES)) if name else {}
        topo.update(d.pop("topology", {}))
        if "outbreak_time_ms" in d and "outbreak_fraction" not in d:
            d["outbreak_fraction"] = None
        cfg = cls(
            topology=TopologyConfig.from_dict(topo),
            worm=WormConfig.from_dict(worm_d),
            traffic=TrafficProfile.from_dict(d.pop("traffic", {})),
            **d,
        )
        cfg.validate()
        return cfg


def experiment_config(name: str, seed: int = 0, origin_count: int = 1, **overrides) -> ExperimentConfig:
    """Build the experiment config for a bundled worm preset."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    worm = preset(name)
    worm.origin_count = origin_count
    topo = TopologyConfig(services=dict(BASE_SERVICES), **PRESET_TOPOLOGY[name])
    cfg = ExperimentConfig(topology=topo, worm=worm, seed=seed)
    for key, value in overrides.items():
        if not hasattr(cfg, key):
            raise TypeError(f"unknown config field {key!r}")
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
