import logging
from typing import List, Tuple

from pianoadapt.controllers.base import REFINED_TRAJECTORY_FILE, StageController
from pianoadapt.db.artifact_store import format_header
from pianoadapt.models.refine import refine
from pianoadapt.schemas.hand import JointTrajectory
from pianoadapt.schemas.refine import RefineStep

logger = logging.getLogger(__name__)


def history_table(history: List[RefineStep]) -> str:
    lines = ["iteration\tdelta\tf1\tprecision\trecall"]
    lines += [f"{s.iteration}\t{s.delta:.6f}\t{s.f1:.6f}\t{s.precision:.6f}\t{s.recall:.6f}" for s in history]
    return "\n".join(lines) + "\n"


class RefineController(StageController):
    """
    Controller for lateral-joint refinement of tau_sim on a gap preset
    """

    command = "refine"

    def refine(self, song: str, gap: str) -> Tuple[JointTrajectory, List[RefineStep]]:
        """
        Refine the simulation trajectory against the pseudo-real environments

        Args:
            song: Parsed song name
            gap: Gap preset name

        Returns:
            The best trajectory and the score of every iteration

        Raises:
            MissingArtifactError: If train-sim has not run for the song
        """
        roll = self.load_roll(song)
        traj0 = self.sim_trajectory(song)
        cfg = self.settings.refine
        best, history, iterates = refine(
            self.real_envs(roll, gap), traj0, roll, cfg, self.settings.hand, self.keyboard, seed=self.seed
        )
        best_step = max(history, key=lambda s: s.f1)
        header = self.header(song=song, gap=gap)
        for i, iterate in enumerate(iterates):
            self.save_trajectory(self.store.path(song, f"refine_iterates/iter_{i:02d}.traj", gap), iterate, iteration=str(i))
        self.store.write_text(self.store.path(song, "refine_history.tsv", gap), format_header(header) + history_table(history))
        self.save_trajectory(
            self.store.path(song, REFINED_TRAJECTORY_FILE, gap), best, gap=gap, f1=f"{best_step.f1:.6f}"
        )
        logger.info(f"Refined '{song}' on '{gap}': F1 {history[0].f1 * 100:.1f} -> {best_step.f1 * 100:.1f}")
        return best, history
