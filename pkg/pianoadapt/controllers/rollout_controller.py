import logging
from typing import Dict, Optional

from pianoadapt.controllers.base import StageController
from pianoadapt.db.artifact_store import format_header
from pianoadapt.errors import UnknownNameError
from pianoadapt.models.env import PianoEnv
from pianoadapt.models.metrics import score_f1
from pianoadapt.models.rollout import LOG_COLUMNS, CommandSource, OpenLoopSource, rollout
from pianoadapt.schemas.report import F1Report
from pianoadapt.schemas.score import Hand

logger = logging.getLogger(__name__)

ROLLOUT_MODES = ("open-loop", "closed-loop", "hybrid")
TRAJECTORIES = ("tau_sim", "tau_refined")


class RolloutController(StageController):
    """
    Controller for single seeded rollouts on a gap preset
    """

    command = "rollout"

    def run(self, song: str, mode: str, gap: str, trajectory: str = "tau_sim") -> F1Report:
        """
        Roll out one source on the pseudo-real environments and write the step log

        Args:
            song: Parsed song name
            mode: open-loop replays a stored trajectory; closed-loop and hybrid run the sim policy
            gap: Gap preset name
            trajectory: Stored trajectory replayed in open-loop mode

        Returns:
            F1 report of the rollout

        Raises:
            UnknownNameError: If the mode, trajectory or preset is unknown
            MissingArtifactError: If the source's artifacts have not been produced
        """
        roll = self.load_roll(song)
        envs = self.real_envs(roll, gap)
        companions: Optional[Dict[Hand, PianoEnv]] = None
        if mode == "open-loop":
            if trajectory == "tau_sim":
                source: CommandSource = OpenLoopSource(self.sim_trajectory(song))
            elif trajectory == "tau_refined":
                source = OpenLoopSource(self.refined_trajectory(song, gap))
            else:
                raise UnknownNameError(f"unknown trajectory '{trajectory}'; choose one of {', '.join(TRAJECTORIES)}")
        elif mode in ("closed-loop", "hybrid"):
            source = self.policy_source(song, roll)
            if mode == "hybrid":
                companions = self.nominal_envs(roll)
        else:
            raise UnknownNameError(f"unknown rollout mode '{mode}'; choose one of {', '.join(ROLLOUT_MODES)}")

        result = rollout(envs, source, seed=self.seed, companions=companions)
        report = score_f1(result.activations, roll)
        header = self.header(song=song, mode=mode, gap=gap, f1=f"{report.f1:.6f}")
        if mode == "open-loop":
            header["trajectory"] = trajectory
        text = format_header(header) + f"# {LOG_COLUMNS}\n" + "\n".join(result.lines) + "\n"
        self.store.write_text(self.store.path(song, f"rollout_{mode}.log", gap), text)
        logger.info(f"{mode} rollout of '{song}' on '{gap}': F1 {report.f1 * 100:.1f}")
        return report
