"""Command line entry point: ``wormtrace <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import PRESET_DESCRIPTIONS, experiment_config, load_config
from .engine import read_event_log
from .evaluation import compare_paths, export_dot
from .experiment import rows_to_csv, run_experiment, run_suite, test_plan_configs
from .traceback import RULES, PropagationGraph, traceback_from_log
from .worms import PRESETS


def _config_from_args(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = experiment_config(args.preset or "slammer")
    if args.seed is not None:
        cfg.seed = args.seed
    if args.window_ms is not None:
        cfg.window_ms = args.window_ms
    if getattr(args, "rule", None):
        cfg.rule = args.rule
    cfg.validate()
    return cfg


def _emit(text: str, out: Path | None, filename: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.mkdir(parents=True, exist_ok=True)
        (out / filename).write_text(text, encoding="utf-8")


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    report = run_experiment(cfg)
    out = Path(args.out or ".")
    report.write(out)
    print(f"wrote {sum(report.event_counts.values())} events and ground truth "
          f"({len(report.ground_truth.infected)} infected) to {out}")
    return 0


def cmd_traceback(args) -> int:
    events = read_event_log(args.events)
    graphs = traceback_from_log(events, window_ms=args.window_ms or 1000, strict=args.strict)
    rules = RULES if args.rule in (None, "both") else (args.rule,)
    out = Path(args.out) if args.out else None
    for rule in rules:
        g = graphs[rule]
        if args.format == "dot":
            _emit(export_dot(g, name=rule), out, f"reconstruction_{rule}.dot")
        else:
            _emit(json.dumps(g.to_dict(rule=rule), indent=2, sort_keys=True) + "\n", out, f"reconstruction_{rule}.json")
    return 0


def _load_graph(path) -> PropagationGraph:
    return PropagationGraph.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def cmd_evaluate(args) -> int:
    real, recon = _load_graph(args.real), _load_graph(args.recon)
    m = compare_paths(real, recon)
    out = Path(args.out) if args.out else None
    if args.format == "csv":
        row = {"test_plan": 0, "experiment": 0, "seed": "", "rule": json.loads(Path(args.recon).read_text()).get("rule", ""),
               "tp": m.tp, "fn": m.fn_, "fp": m.fp, "precision": f"{m.precision:.6f}",
               "recall": f"{m.recall:.6f}", "origins_correct": m.origins_correct}
        _emit(rows_to_csv([row]), out, "metrics.csv")
    elif args.format == "dot":
        _emit(export_dot(recon, real, name="diff"), out, "diff.dot")
    else:
        _emit(json.dumps(m.to_dict(), indent=2, sort_keys=True) + "\n", out, "metrics.json")
    return 0


def cmd_report(args) -> int:
    seeds = args.seeds or [1, 2, 3]
    if args.config or args.preset:
        configs = []
        for seed in seeds:
            cfg = _config_from_args(args)
            cfg.seed = seed
            configs.append(cfg)
        repetitions = 1
    else:
        overrides = {}
        if args.window_ms is not None:
            overrides["window_ms"] = args.window_ms
        if args.rule:
            overrides["rule"] = args.rule
        configs = test_plan_configs(seeds, **overrides)
        repetitions = 1
    suite = run_suite(configs, repetitions, workers=args.workers)
    out = Path(args.out or "report")
    out.mkdir(parents=True, exist_ok=True)
    (out / "suite.csv").write_text(suite.to_csv(), encoding="utf-8")
    (out / "suite.txt").write_text(suite.table(), encoding="utf-8")
    (out / "summary.json").write_text(json.dumps(suite.summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for r in suite.reports:
        tag = f"plan{r.config['test_plan']}_exp{r.config['experiment']}_seed{r.config['seed']}"
        (out / f"{tag}_real.dot").write_text(export_dot(r.ground_truth, name="real"), encoding="utf-8")
        for rule, g in r.reconstructions.items():
            (out / f"{tag}_{rule}.dot").write_text(export_dot(g, r.ground_truth, name=rule), encoding="utf-8")
    sys.stdout.write(suite.table())
    return 0


def cmd_presets(args) -> int:
    for name in PRESETS:
        if args.format == "json":
            print(json.dumps({"name": name, **experiment_config(name).to_dict()}, sort_keys=True))
        else:
            print(f"{name:<10} {PRESET_DESCRIPTIONS[name]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wormtrace", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, rule=True):
        sp.add_argument("--config", help="experiment config (JSON)")
        sp.add_argument("--preset", choices=sorted(PRESETS), help="bundled config when --config is absent")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--window-ms", type=int)
        if rule:
            sp.add_argument("--rule", choices=["origins", "extended", "both"])
        sp.add_argument("--out")

    sp = sub.add_parser("simulate", help="run a simulation; write event trace, ground truth and report")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("traceback", help="reconstruct propagation graphs from an event trace")
    sp.add_argument("events", help="events.jsonl")
    sp.add_argument("--window-ms", type=int)
    sp.add_argument("--rule", choices=["origins", "extended", "both"], default="both")
    sp.add_argument("--strict", action="store_true", help="require connection strictly after infection")
    sp.add_argument("--format", choices=["json", "dot"], default="json")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_traceback)

    sp = sub.add_parser("evaluate", help="score a reconstruction against ground truth")
    sp.add_argument("real")
    sp.add_argument("recon")
    sp.add_argument("--format", choices=["json", "csv", "dot"], default="json")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("report", help="run a suite and write CSV, table and DOT files")
    common(sp)
    sp.add_argument("--seeds", type=int, nargs="+")
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("presets", help="list bundled worm presets")
    sp.add_argument("--format", choices=["text", "json"], default="text")
    sp.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
