"""Experiment runs, reports and suites."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .config import ExperimentConfig, experiment_config
from .engine import Event, write_event_log
from .evaluation import PathMetrics, compare_paths, export_dot, summarize
from .simulation import SimulationResult, simulate
from .traceback import PropagationGraph

CSV_COLUMNS = (
    "test_plan", "experiment", "seed", "rule", "tp", "fn", "fp", "precision", "recall", "origins_correct",
)

# (preset, origin counts per experiment); codered1 carries the multi-origin runs
TEST_PLANS: tuple[tuple[str, tuple[int, ...]], ...] = (
    ("slammer", (1, 1, 1)),
    ("codered1", (3, 2, 4)),
    ("codered2", (1, 1, 1)),
)


@dataclass
class RunReport:
    config: dict
    ground_truth: PropagationGraph
    reconstructions: dict[str, PropagationGraph]
    metrics: dict[str, PathMetrics]
    event_counts: dict[str, int]
    outbreak_time: int
    outbreak_forced: bool = False
    final_infected: int = 0
    events: list[Event] = field(default_factory=list, repr=False)

    @property
    def flags(self) -> list[str]:
        out = []
        if self.outbreak_forced:
            out.append("outbreak_forced")
        if not self.ground_truth.infected:
            out.append("no_infections")
        if any(m.vacuous for m in self.metrics.values()):
            out.append("vacuous_metrics")
        return out

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "ground_truth": self.ground_truth.to_dict(),
            "reconstructions": {r: g.to_dict(rule=r) for r, g in self.reconstructions.items()},
            "metrics": {r: m.to_dict() for r, m in self.metrics.items()},
            "event_counts": self.event_counts,
            "outbreak_time": self.outbreak_time,
            "outbreak_forced": self.outbreak_forced,
            "final_infected": self.final_infected,
            "flags": self.flags,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(
            config=d["config"],
            ground_truth=PropagationGraph.from_dict(d["ground_truth"]),
            reconstructions={r: PropagationGraph.from_dict(g) for r, g in d["reconstructions"].items()},
            metrics={r: PathMetrics.from_dict(m) for r, m in d["metrics"].items()},
            event_counts=d["event_counts"],
            outbreak_time=d["outbreak_time"],
            outbreak_forced=d.get("outbreak_forced", False),
            final_infected=d.get("final_infected", 0),
        )

    def csv_rows(self) -> list[dict]:
        rows = []
        for rule, m in self.metrics.items():
            rows.append({
                "test_plan": self.config.get("test_plan", 0),
                "experiment": self.config.get("experiment", 0),
                "seed": self.config["seed"],
                "rule": rule,
                "tp": m.tp,
                "fn": m.fn_,
                "fp": m.fp,
                "precision": f"{m.precision:.6f}",
                "recall": f"{m.recall:.6f}",
                "origins_correct": m.origins_correct,
            })
        return rows

    def write(self, out_dir, with_events: bool = True) -> Path:
        """Write trace, graphs, report, metrics CSV and DOT files into ``out_dir``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if with_events and self.events:
            write_event_log(self.events, out / "events.jsonl")
        (out / "ground_truth.json").write_text(
            json.dumps(self.ground_truth.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        (out / "ground_truth.dot").write_text(export_dot(self.ground_truth, name="real"), encoding="utf-8")
        for rule, g in self.reconstructions.items():
            (out / f"reconstruction_{rule}.json").write_text(
                json.dumps(g.to_dict(rule=rule), indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
            (out / f"reconstruction_{rule}.dot").write_text(
                export_dot(g, self.ground_truth, name=rule), encoding="utf-8"
            )
        (out / "report.json").write_text(self.to_json(), encoding="utf-8")
        (out / "metrics.csv").write_text(rows_to_csv(self.csv_rows()), encoding="utf-8")
        return out


def rows_to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def report_from_result(config: ExperimentConfig, res: SimulationResult) -> RunReport:
    return RunReport(
        config=config.to_dict(),
        ground_truth=res.ground_truth,
        reconstructions=res.reconstructions,
        metrics={r: compare_paths(res.ground_truth, g) for r, g in res.reconstructions.items()},
        event_counts=res.event_counts,
        outbreak_time=res.outbreak_time,
        outbreak_forced=res.outbreak_forced,
        final_infected=len(res.final_truth.infected),
        events=res.events,
    )


def run_experiment(config: ExperimentConfig) -> RunReport:
    """Simulate one configuration end to end and score both parent rules."""
    return report_from_result(config, simulate(config))


def test_plan_configs(seeds: Sequence[int] = (1, 2, 3), **overrides) -> list[ExperimentConfig]:
    """Nine configs shaped like the evaluation table: three presets by three experiments."""
    configs = []
    for plan, (name, origin_counts) in enumerate(TEST_PLANS, start=1):
        for exp, (seed, n_orig) in enumerate(zip(seeds, origin_counts), start=1):
            configs.append(
                experiment_config(name, seed=seed, origin_count=n_orig, test_plan=plan, experiment=exp, **overrides)
            )
    return configs


test_plan_configs.__test__ = False  # not a pytest test despite the name


def _run_light(config: ExperimentConfig) -> RunReport:
    report = run_experiment(config)
    report.events = []
    return report


@dataclass
class SuiteResult:
    reports: list[RunReport]
    summary: dict[str, dict]  # per (preset, rule) key

    def rows(self) -> list[dict]:
        return [row for r in self.reports for row in r.csv_rows()]

    def to_csv(self) -> str:
        return rows_to_csv(self.rows())

    def table(self) -> str:
        """Per-run rows followed by one summary line per (preset, rule)."""
        lines = [
            f"{'plan':>4} {'exp':>3} {'seed':>6} {'rule':<9} {'TP':>4} {'FN':>4} {'FP':>4} "
            f"{'prec':>6} {'recall':>6} origins"
        ]
        for row in self.rows():
            lines.append(
                f"{row['test_plan']:>4} {row['experiment']:>3} {row['seed']:>6} {row['rule']:<9} "
                f"{row['tp']:>4} {row['fn']:>4} {row['fp']:>4} {float(row['precision']):>6.3f} "
                f"{float(row['recall']):>6.3f} {'ok' if row['origins_correct'] else 'WRONG'}"
            )
        lines.append("")
        for key, s in self.summary.items():
            lines.append(
                f"{key:<20} runs={s['runs']:<3} precision={s['precision_mean']:.3f}±{s['precision_sd']:.3f} "
                f"recall={s['recall_mean']:.3f}±{s['recall_sd']:.3f} origins={s['origin_success_rate']:.0%}"
            )
        return "\n".join(lines) + "\n"


def run_suite(
    configs: Sequence[ExperimentConfig], repetitions: int = 1, workers: Optional[int] = None
) -> SuiteResult:
    """Run every config ``repetitions`` times (seed, seed+1, ...) and aggregate.

    Runs are independent; ``workers > 1`` spreads them over processes.
    """
    if not configs:
        raise ValueError("run_suite needs at least one config")
    if repetitions < 1:
        raise ValueError("repetitions must be positive")
    jobs = []
    for cfg in configs:
        for rep in range(repetitions):
            c = ExperimentConfig.from_dict(cfg.to_dict()) if rep else cfg
            c.seed = cfg.seed + rep
            jobs.append(c)
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            reports = list(pool.map(_run_light, jobs))
    else:
        reports = [_run_light(c) for c in jobs]

    groups: dict[str, list[PathMetrics]] = {}
    for r in reports:
        for rule, m in r.metrics.items():
            groups.setdefault(f"{r.config['worm']['name']}/{rule}", []).append(m)
            groups.setdefault(f"all/{rule}", []).append(m)
    return SuiteResult(reports, {k: summarize(v) for k, v in groups.items()})
