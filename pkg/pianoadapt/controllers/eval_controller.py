import logging
from pathlib import Path
from typing import Dict, Optional, Tuple

from pianoadapt.controllers.base import RESIDUAL_BASES, StageController
from pianoadapt.errors import UnknownNameError
from pianoadapt.models.env import PianoEnv
from pianoadapt.models.metrics import emit_roll_report, eval_protocol, score_f1
from pianoadapt.models.rollout import CommandSource, OpenLoopSource, rollout
from pianoadapt.schemas.report import EvalSummary
from pianoadapt.schemas.score import Hand, PianoRoll

logger = logging.getLogger(__name__)

EVAL_SOURCES = ("tau_sim", "tau_refined", "closed-loop", "hybrid") + tuple(f"residual-{b}" for b in RESIDUAL_BASES)


class EvalController(StageController):
    """
    Controller for the seeded evaluation protocol and roll reports
    """

    command = "eval"

    def source(
        self, song: str, roll: PianoRoll, gap: str, name: str
    ) -> Tuple[CommandSource, Optional[Dict[Hand, PianoEnv]]]:
        """
        Command source for an evaluation name, with the companion nominal envs hybrid execution needs

        Raises:
            UnknownNameError: If the name is not an evaluation source
            MissingArtifactError: If the source's artifacts have not been produced
        """
        if name == "tau_sim":
            return OpenLoopSource(self.sim_trajectory(song)), None
        if name == "tau_refined":
            return OpenLoopSource(self.refined_trajectory(song, gap)), None
        if name == "closed-loop":
            return self.policy_source(song, roll), None
        if name == "hybrid":
            return self.policy_source(song, roll), self.nominal_envs(roll)
        if name.startswith("residual-") and name[len("residual-"):] in RESIDUAL_BASES:
            return self.residual_source(song, roll, gap, name[len("residual-"):]), None
        raise UnknownNameError(f"unknown evaluation source '{name}'; choose one of {', '.join(EVAL_SOURCES)}")

    def evaluate(self, song: str, gap: str, name: str) -> Tuple[EvalSummary, Path, Path]:
        """
        Score the protocol's seeded rollouts and write the report of the run-seed rollout

        Args:
            song: Parsed song name
            gap: Gap preset name
            name: Evaluation source

        Returns:
            Mean and sample sd of F1 x 100, and the written plot and table
        """
        roll = self.load_roll(song)
        envs = self.real_envs(roll, gap)
        source, companions = self.source(song, roll, gap, name)
        summary = eval_protocol(envs, source, roll, self.settings.eval.rollouts, self.seed, companions)
        report = score_f1(rollout(envs, source, seed=self.seed, companions=companions).activations, roll)
        header = self.header(
            song=song, gap=gap, source=name, f1_mean=f"{summary.mean:.4f}", f1_sd=f"{summary.sd:.4f}"
        )
        svg, tsv = emit_roll_report(report, roll, self.store.path(song, "", gap), f"report_{name}", header)
        logger.info(f"{name} on '{gap}': F1 {summary.mean:.1f} +- {summary.sd:.1f} over {len(summary.scores)} rollouts")
        return summary, svg, tsv
