"""
Key-press F1 scoring, the seeded evaluation protocol and roll reports.
"""
import io
import logging
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from pianoadapt.errors import ContractViolation  # noqa: E402
from pianoadapt.models.env import PianoEnv  # noqa: E402
from pianoadapt.models.rollout import CommandSource, rollout  # noqa: E402
from pianoadapt.schemas.report import EvalSummary, F1Report  # noqa: E402
from pianoadapt.schemas.score import Hand, PianoRoll  # noqa: E402

logger = logging.getLogger(__name__)

CATEGORY_COLORS = {"correct": "#2e7d32", "incorrect": "#c62828", "missed": "#9e9e9e"}


def _ratio(numerator: int, denominator: int, vacuous: bool) -> float:
    if denominator:
        return numerator / denominator
    return 1.0 if vacuous else 0.0


def score_goals(activations: Sequence[Iterable[int]], goals: Sequence[FrozenSet[int]]) -> F1Report:
    """
    Micro-aggregated F1 of sounding keys against goal keys, compared step by step.

    Raises:
        ContractViolation: If the log and the goals differ in length
    """
    if len(activations) != len(goals):
        raise ContractViolation(f"log has {len(activations)} steps but the goals have {len(goals)}")
    correct, incorrect, missed = [], [], []
    for pressed, goal in zip(activations, goals):
        pressed = frozenset(pressed)
        correct.append(sorted(pressed & goal))
        incorrect.append(sorted(pressed - goal))
        missed.append(sorted(goal - pressed))
    tp = sum(map(len, correct))
    fp = sum(map(len, incorrect))
    fn = sum(map(len, missed))
    precision = _ratio(tp, tp + fp, vacuous=fn == 0)
    recall = _ratio(tp, tp + fn, vacuous=fp == 0)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return F1Report(
        precision=precision,
        recall=recall,
        f1=f1,
        true_positives=tp,
        false_positives=fp,
        false_negatives=fn,
        correct=correct,
        incorrect=incorrect,
        missed=missed,
    )


def score_f1(activations: Sequence[Iterable[int]], roll: PianoRoll) -> F1Report:
    """Score a bimanual activation log against every goal of the roll."""
    return score_goals(activations, roll.goal_keys())


def summarize(scores: Sequence[float]) -> EvalSummary:
    """Mean and sample standard deviation of F1 x 100."""
    values = np.asarray(scores, dtype=np.float64) * 100.0
    sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return EvalSummary(mean=float(values.mean()), sd=sd, scores=values.tolist())


def eval_protocol(
    envs: Dict[Hand, PianoEnv],
    source: CommandSource,
    roll: PianoRoll,
    n: int = 5,
    base_seed: int = 0,
    companions: Optional[Dict[Hand, PianoEnv]] = None,
) -> EvalSummary:
    """Score n rollouts seeded base_seed..base_seed+n-1 without exploration noise."""
    scores = []
    for i in range(n):
        result = rollout(envs, source, seed=base_seed + i, companions=companions)
        scores.append(score_f1(result.activations, roll).f1)
    summary = summarize(scores)
    logger.debug(f"Evaluated {n} rollouts of '{roll.title}': {summary.mean:.1f} +- {summary.sd:.1f}")
    return summary


def _marks(report: F1Report) -> Dict[str, List[Tuple[int, int]]]:
    return {
        "correct": [(t, k) for t, keys in enumerate(report.correct) for k in keys],
        "incorrect": [(t, k) for t, keys in enumerate(report.incorrect) for k in keys],
        "missed": [(t, k) for t, keys in enumerate(report.missed) for k in keys],
    }


def roll_report_table(report: F1Report, roll: PianoRoll, header: Optional[Dict[str, str]] = None) -> str:
    lines = [f"# {k}: {v}" for k, v in (header or {}).items()]
    lines.append(f"# title: {roll.title}")
    lines.append(f"# precision: {report.precision:.6f} recall: {report.recall:.6f} f1: {report.f1:.6f}")
    marks = _marks(report)
    for category, points in marks.items():
        lines.append(f"# {category}: {len(points)}")
    lines.append("step\tkey\thand\tcategory")
    rows = sorted((t, k, category) for category, points in marks.items() for t, k in points)
    for t, k, category in rows:
        hand = "left" if k < roll.split_key else "right"
        lines.append(f"{t}\t{k}\t{hand}\t{category}")
    return "\n".join(lines) + "\n"


def roll_report_svg(report: F1Report, roll: PianoRoll) -> str:
    """Timestep against key index; right-hand keys sit above the split line."""
    marks = _marks(report)
    figure, axes = plt.subplots(figsize=(10, 4))
    try:
        for category, points in marks.items():
            xs = [t for t, _ in points]
            ys = [k for _, k in points]
            axes.scatter(
                xs, ys, s=12, marker="s", color=CATEGORY_COLORS[category], label=f"{category} ({len(points)})"
            )
        axes.axhline(roll.split_key - 0.5, color="black", linewidth=0.5)
        axes.set_xlim(-0.5, max(roll.num_steps, 1) - 0.5)
        axes.set_ylim(-0.5, 87.5)
        axes.set_xlabel("timestep")
        axes.set_ylabel("key index")
        axes.set_title(f"{roll.title}: F1 {report.f1 * 100:.1f}")
        axes.legend(loc="upper right", fontsize="small")
        buffer = io.StringIO()
        figure.savefig(buffer, format="svg")
    finally:
        plt.close(figure)
    return buffer.getvalue()


def emit_roll_report(
    report: F1Report,
    roll: PianoRoll,
    directory: Path,
    stem: str = "report",
    header: Optional[Dict[str, str]] = None,
) -> Tuple[Path, Path]:
    """Write the vector plot and the columnar table of one scored rollout."""
    directory.mkdir(parents=True, exist_ok=True)
    svg_path = directory / f"{stem}.svg"
    tsv_path = directory / f"{stem}.tsv"
    svg_path.write_text(roll_report_svg(report, roll))
    tsv_path.write_text(roll_report_table(report, roll, header))
    logger.info(f"Wrote roll report {svg_path} and {tsv_path}")
    return svg_path, tsv_path
