import logging
from typing import Dict, Optional

from pianoadapt.controllers.base import RESIDUAL_BASES, StageController, agent_file, curve_table
from pianoadapt.errors import UnknownNameError
from pianoadapt.models.env import PianoEnv
from pianoadapt.models.td3 import ResidualResult, save_checkpoint, train_residual
from pianoadapt.schemas.hand import JointTrajectory
from pianoadapt.schemas.learn import TD3Config
from pianoadapt.schemas.report import CurvePoint
from pianoadapt.schemas.score import Hand, PianoRoll

logger = logging.getLogger(__name__)


def best_point(result: ResidualResult) -> CurvePoint:
    """First evaluation reaching the best mean."""
    return max(result.curve, key=lambda p: p.f1_mean)


class ResidualController(StageController):
    """
    Controller for residual RL over an open-loop base trajectory
    """

    command = "train-residual"

    def fit(
        self,
        roll: PianoRoll,
        envs: Dict[Hand, PianoEnv],
        base: str,
        trajectory: JointTrajectory,
        cfg: Optional[TD3Config] = None,
    ) -> ResidualResult:
        """Train without persisting; scratch widens the residual to the full joint range."""
        if base not in RESIDUAL_BASES:
            raise UnknownNameError(f"unknown residual base '{base}'; choose one of {', '.join(RESIDUAL_BASES)}")
        cfg = cfg or self.settings.td3
        full_range = True if base == "scratch" else cfg.full_range
        logger.info(f"Training residual agents over {base} for {cfg.episodes} episodes")
        seed = self.seed if cfg.seed is None else cfg.seed
        return train_residual(envs, trajectory, roll, cfg, self.settings.hand, seed, full_range)

    def train(self, song: str, gap: str, base: str = "tau_refined") -> ResidualResult:
        """
        Train one residual agent per hand and store the agents and the evaluation curve

        Args:
            song: Parsed song name
            gap: Gap preset name
            base: tau_refined, tau_sim or scratch (scripted wrist, fingers at rest)

        Returns:
            Agents restored to their best evaluation, and the curve

        Raises:
            MissingArtifactError: If the base trajectory has not been produced
        """
        roll = self.load_roll(song)
        trajectory = self.base_trajectory(song, roll, gap, base)
        result = self.fit(roll, self.real_envs(roll, gap), base, trajectory)
        header = self.header(song=song, gap=gap, base=base)
        for hand, agent in result.agents.items():
            path = self.store.path(song, agent_file(base, hand), gap)
            path.parent.mkdir(parents=True, exist_ok=True)
            save_checkpoint(agent, path, header)
            logger.info(f"Wrote {path}")
        self.store.write_text(self.store.path(song, f"residual_curve_{base}.tsv", gap), curve_table(result.curve, header))
        best = best_point(result)
        logger.info(f"Residual over {base} on '{gap}': best F1 {best.f1_mean:.1f} +- {best.f1_sd:.1f} at episode {best.episode}")
        return result
