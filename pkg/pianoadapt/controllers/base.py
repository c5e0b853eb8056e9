"""
Shared plumbing for the stage controllers: settings, artifact locations and environment construction.
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional

from pianoadapt.config import Settings
from pianoadapt.db.artifact_store import (
    ArtifactStore,
    artifact_header,
    check_provenance,
    format_header,
    read_header,
)
from pianoadapt.errors import UnknownNameError
from pianoadapt.models.env import PianoEnv, build_envs, preset_gap
from pianoadapt.models.hand import rest_trajectory, trajectory_from_text, trajectory_to_text
from pianoadapt.models.keyboard import Keyboard
from pianoadapt.models.ppo import PolicySource, load_policy, make_commanders
from pianoadapt.models.score import load_fingering, parse_midi
from pianoadapt.models.td3 import ResidualSource, load_checkpoint
from pianoadapt.schemas.hand import JointTrajectory
from pianoadapt.schemas.report import CurvePoint
from pianoadapt.schemas.score import Hand, PianoRoll

logger = logging.getLogger(__name__)

ROLL_FILE = "roll.mid"
FINGERING_FILE = "fingering.txt"
SIM_TRAJECTORY_FILE = "tau_sim.traj"
REFINED_TRAJECTORY_FILE = "tau_refined.traj"
RESIDUAL_BASES = ("tau_refined", "tau_sim", "scratch")


class StageController:
    """Base class: one pipeline stage bound to resolved settings and the artifact store."""

    command = ""

    def __init__(self, settings: Settings, store: Optional[ArtifactStore] = None):
        self.settings = settings
        self.store = store or ArtifactStore(settings.run.artifact_dir)
        self.keyboard = Keyboard(settings.keyboard)

    @property
    def seed(self) -> int:
        return self.settings.run.seed

    def header(self, **extra: str) -> Dict[str, str]:
        header = artifact_header(self.settings, self.command)
        header.update({k: str(v) for k, v in extra.items()})
        return header

    def load_roll(self, song: str) -> PianoRoll:
        """
        Raises:
            MissingArtifactError: If the song has not been parsed
        """
        raw = self.store.read_bytes(self.store.path(song, ROLL_FILE), f"parse {song}")
        sidecar = self.store.read_text(self.store.path(song, FINGERING_FILE), f"parse {song}")
        split_key = int(read_header(sidecar).get("split_key", self.settings.score.split_key))
        return load_fingering(parse_midi(raw, split_key=split_key), sidecar)

    def load_trajectory(self, path: Path, command: str) -> JointTrajectory:
        text = self.store.read_text(path, command)
        check_provenance(path, text, self.settings)
        return trajectory_from_text(text)

    def save_trajectory(self, path: Path, trajectory: JointTrajectory, **extra: str) -> Path:
        return self.store.write_text(path, trajectory_to_text(trajectory, self.header(**extra)))

    def sim_trajectory(self, song: str) -> JointTrajectory:
        return self.load_trajectory(self.store.path(song, SIM_TRAJECTORY_FILE), f"train-sim {song}")

    def refined_trajectory(self, song: str, gap: str) -> JointTrajectory:
        return self.load_trajectory(
            self.store.path(song, REFINED_TRAJECTORY_FILE, gap), f"refine {song} --gap {gap}"
        )

    def gaps(self, gap: str):
        """Gap model of every hand for a named preset, seeded by the run seed."""
        return {hand: preset_gap(gap, self.seed, hand, self.keyboard, self.settings.hand) for hand in Hand}

    def real_envs(self, roll: PianoRoll, gap: str) -> Dict[Hand, PianoEnv]:
        """Pseudo-real environments: the nominal simulator with the preset's gap injected."""
        return build_envs(roll, self.keyboard, self.settings.hand, self.settings.env, self.gaps(gap), self.seed)

    def nominal_envs(self, roll: PianoRoll) -> Dict[Hand, PianoEnv]:
        return build_envs(roll, self.keyboard, self.settings.hand, self.settings.env, seed=self.seed)

    def policy_source(self, song: str, roll: PianoRoll) -> PolicySource:
        """
        Closed-loop source over the sim-trained policy of every hand with notes.

        Raises:
            MissingArtifactError: If a hand's policy was never trained
        """
        policies = {}
        for hand in Hand:
            if roll.notes_for(hand):
                path = self.store.path(song, policy_file(hand))
                policies[hand] = load_policy(self.store.require(path, f"train-sim {song}"))
        commanders = make_commanders(roll, self.keyboard, self.settings.hand, self.settings.ppo.action_scale)
        return PolicySource(policies, commanders)

    def base_trajectory(self, song: str, roll: PianoRoll, gap: str, base: str) -> JointTrajectory:
        """
        Raises:
            UnknownNameError: If base is not a residual base name
        """
        if base == "tau_refined":
            return self.refined_trajectory(song, gap)
        if base == "tau_sim":
            return self.sim_trajectory(song)
        if base == "scratch":
            return rest_trajectory(roll, self.keyboard, self.settings.hand)
        raise UnknownNameError(f"unknown residual base '{base}'; choose one of {', '.join(RESIDUAL_BASES)}")

    def residual_source(self, song: str, roll: PianoRoll, gap: str, base: str) -> ResidualSource:
        trajectory = self.base_trajectory(song, roll, gap, base)
        agents = {}
        for hand in Hand:
            if roll.notes_for(hand):
                path = self.store.path(song, agent_file(base, hand), gap)
                agents[hand] = load_checkpoint(self.store.require(path, f"train-residual {song} --gap {gap} --base {base}"))
        return ResidualSource(agents, trajectory)


def policy_file(hand: Hand) -> str:
    return f"policy_sim_{hand.value}.pt"


def agent_file(base: str, hand: Hand) -> str:
    return f"agent_{base}_{hand.value}.pt"


def curve_table(curve: List[CurvePoint], header: Dict[str, str]) -> str:
    lines = ["episode\tenv_steps\tgrad_steps\tf1_mean\tf1_sd"]
    lines += [f"{p.episode}\t{p.env_steps}\t{p.grad_steps}\t{p.f1_mean:.4f}\t{p.f1_sd:.4f}" for p in curve]
    return format_header(header) + "\n".join(lines) + "\n"
