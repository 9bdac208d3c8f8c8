"""Scoring reconstructed propagation graphs against ground truth."""

from __future__ import annotations

import statistics
from dataclasses import asdict, dataclass
from typing import Iterable, Optional

from .traceback import PropagationGraph


@dataclass(frozen=True)
class PathMetrics:
    tp: int
    fn_: int
    fp: int
    precision: float
    recall: float
    origins_correct: bool
    vacuous: bool = False  # no edges on either side; precision/recall set to 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fn"] = d.pop("fn_")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PathMetrics":
        d = dict(d)
        d["fn_"] = d.pop("fn")
        return cls(**d)


def ratio(num: int, den: int) -> float:
    return 1.0 if den == 0 else num / den


def compare_paths(real: PropagationGraph, recon: PropagationGraph) -> PathMetrics:
    """Edge-level TP/FN/FP between the real and reconstructed graphs."""
    tp = len(real.edges & recon.edges)
    fn = len(real.edges - recon.edges)
    fp = len(recon.edges - real.edges)
    return PathMetrics(
        tp=tp,
        fn_=fn,
        fp=fp,
        precision=ratio(tp, tp + fp),
        recall=ratio(tp, tp + fn),
        origins_correct=real.origins == recon.origins,
        vacuous=(tp + fn + fp) == 0,
    )


def _node(n: int, labels: Optional[dict]) -> str:
    if labels and n in labels:
        return f'  {n} [label="{labels[n]}"];'
    return f"  {n};"


def export_dot(
    graph: PropagationGraph,
    diff: Optional[PropagationGraph] = None,
    name: str = "propagation",
    labels: Optional[dict[int, str]] = None,
) -> str:
    """Render ``graph`` as a DOT digraph.

    With ``diff`` (the ground truth), edges in both graphs are solid, edges
    only in ``diff`` (missed) are dashed, and edges only in ``graph`` (false
    positives) are red and dotted.  Origins are drawn as double circles.
    """
    lines = [f"digraph {name} {{", "  node [shape=circle];"]
    nodes = set(graph.infected) | {n for e in graph.edges for n in e}
    if diff is not None:
        nodes |= set(diff.infected) | {n for e in diff.edges for n in e}
    for n in sorted(nodes):
        if n in graph.origins:
            lines.append(f"  {n} [shape=doublecircle];")
        else:
            lines.append(_node(n, labels))
    if diff is None:
        for p, c in sorted(graph.edges):
            lines.append(f"  {p} -> {c};")
    else:
        for p, c in sorted(graph.edges | diff.edges):
            if (p, c) in graph.edges and (p, c) in diff.edges:
                lines.append(f"  {p} -> {c} [style=solid];")
            elif (p, c) in diff.edges:
                lines.append(f"  {p} -> {c} [style=dashed];")
            else:
                lines.append(f"  {p} -> {c} [style=dotted, color=red];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def summarize(metrics: Iterable[PathMetrics]) -> dict:
    """Mean and standard deviation of precision/recall plus origin success rate."""
    ms = list(metrics)
    if not ms:
        raise ValueError("no metrics to summarize")
    prec = [m.precision for m in ms]
    rec = [m.recall for m in ms]
    return {
        "runs": len(ms),
        "precision_mean": statistics.fmean(prec),
        "precision_sd": statistics.stdev(prec) if len(ms) > 1 else 0.0,
        "recall_mean": statistics.fmean(rec),
        "recall_sd": statistics.stdev(rec) if len(ms) > 1 else 0.0,
        "origin_success_rate": sum(m.origins_correct for m in ms) / len(ms),
    }
