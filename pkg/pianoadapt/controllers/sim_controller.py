import logging
from typing import Tuple

from pianoadapt.controllers.base import SIM_TRAJECTORY_FILE, StageController, curve_table, policy_file
from pianoadapt.models.hand import script_presses
from pianoadapt.models.metrics import score_f1
from pianoadapt.models.ppo import save_policy, train_sim
from pianoadapt.models.rollout import OpenLoopSource, rollout
from pianoadapt.schemas.hand import JointTrajectory

logger = logging.getLogger(__name__)


class SimController(StageController):
    """
    Controller for producing the simulation-trained policy and its open-loop trajectory
    """

    command = "train-sim"

    def train(self, song: str, scripted: bool = False) -> Tuple[JointTrajectory, float]:
        """
        Train per-hand policies in the nominal simulator and export the best evaluation as tau_sim

        Args:
            song: Parsed song name
            scripted: Skip learning and export the kinematic reference trajectory instead

        Returns:
            The exported trajectory and its open-loop F1 in the nominal simulator

        Raises:
            MissingArtifactError: If the song has not been parsed
            TrainingDivergedError: If a PPO loss turns non-finite
        """
        roll = self.load_roll(song)
        header = self.header(song=song, scripted=str(scripted).lower())
        if scripted:
            trajectory = script_presses(roll, self.keyboard, self.settings.hand)
        else:
            results, trajectory = train_sim(
                roll,
                self.keyboard,
                self.settings.hand,
                self.settings.env,
                self.settings.ppo,
                self.seed,
                self.store.song_dir(song),
            )
            for hand, result in results.items():
                path = self.store.path(song, policy_file(hand))
                path.parent.mkdir(parents=True, exist_ok=True)
                save_policy(result.policy, path, header, best_f1=result.best_f1)
                logger.info(f"Wrote {path}")
                self.store.write_text(self.store.path(song, f"sim_curve_{hand.value}.tsv"), curve_table(result.curve, header))

        replay = rollout(self.nominal_envs(roll), OpenLoopSource(trajectory), seed=self.seed)
        f1 = score_f1(replay.activations, roll).f1
        self.save_trajectory(self.store.path(song, SIM_TRAJECTORY_FILE), trajectory, song=song, nominal_f1=f"{f1:.6f}")
        logger.info(f"Simulation trajectory for '{song}' plays at F1 {f1 * 100:.1f} in the nominal simulator")
        return trajectory, f1
