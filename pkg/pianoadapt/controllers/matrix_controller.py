import logging
from typing import List, Optional

from pydantic import BaseModel

from pianoadapt.controllers.base import StageController
from pianoadapt.controllers.residual_controller import ResidualController, best_point
from pianoadapt.db.artifact_store import format_header
from pianoadapt.errors import MissingArtifactError
from pianoadapt.models.hand import rest_trajectory
from pianoadapt.models.metrics import eval_protocol
from pianoadapt.models.refine import refine
from pianoadapt.models.rollout import OpenLoopSource
from pianoadapt.schemas.learn import TD3Config

logger = logging.getLogger(__name__)

MATRIX_ROWS = (
    "sim closed-loop",
    "RL from scratch",
    "sim open-loop",
    "sim + residual RL",
    "refinement only",
    "refinement + residual RL",
)


class MatrixRow(BaseModel):
    configuration: str
    f1_mean: Optional[float] = None
    f1_sd: Optional[float] = None
    note: str = ""


def matrix_table(rows: List[MatrixRow]) -> str:
    lines = ["configuration\tf1_mean\tf1_sd\tnote"]
    for row in rows:
        mean = "n/a" if row.f1_mean is None else f"{row.f1_mean:.2f}"
        sd = "n/a" if row.f1_sd is None else f"{row.f1_sd:.2f}"
        lines.append(f"{row.configuration}\t{mean}\t{sd}\t{row.note or '-'}")
    return "\n".join(lines) + "\n"


class MatrixController(StageController):
    """
    Controller for the six-configuration comparison on one gap preset
    """

    command = "matrix"

    def run(self, song: str, gap: str, cfg: Optional[TD3Config] = None) -> List[MatrixRow]:
        """
        Evaluate every baseline and the full pipeline from the stored simulation artifacts

        Refinement and the three residual trainings run in memory; only the table is stored.
        The closed-loop row is n/a when train-sim ran in scripted mode.

        Raises:
            MissingArtifactError: If train-sim has not run for the song
        """
        roll = self.load_roll(song)
        tau_sim = self.sim_trajectory(song)
        envs = self.real_envs(roll, gap)
        n = self.settings.eval.rollouts
        residual = ResidualController(self.settings, self.store)
        rows: List[MatrixRow] = []

        try:
            summary = eval_protocol(envs, self.policy_source(song, roll), roll, n, self.seed)
            rows.append(MatrixRow(configuration=MATRIX_ROWS[0], f1_mean=summary.mean, f1_sd=summary.sd))
        except MissingArtifactError as e:
            logger.warning(f"Closed-loop row skipped: {e}")
            rows.append(MatrixRow(configuration=MATRIX_ROWS[0], note="no sim policy"))

        scratch = residual.fit(roll, envs, "scratch", rest_trajectory(roll, self.keyboard, self.settings.hand), cfg)
        point = best_point(scratch)
        rows.append(MatrixRow(configuration=MATRIX_ROWS[1], f1_mean=point.f1_mean, f1_sd=point.f1_sd))

        summary = eval_protocol(envs, OpenLoopSource(tau_sim), roll, n, self.seed)
        rows.append(MatrixRow(configuration=MATRIX_ROWS[2], f1_mean=summary.mean, f1_sd=summary.sd))

        point = best_point(residual.fit(roll, envs, "tau_sim", tau_sim, cfg))
        rows.append(MatrixRow(configuration=MATRIX_ROWS[3], f1_mean=point.f1_mean, f1_sd=point.f1_sd))

        tau_refined, _, _ = refine(envs, tau_sim, roll, self.settings.refine, self.settings.hand, self.keyboard, self.seed)
        summary = eval_protocol(envs, OpenLoopSource(tau_refined), roll, n, self.seed)
        rows.append(MatrixRow(configuration=MATRIX_ROWS[4], f1_mean=summary.mean, f1_sd=summary.sd))

        point = best_point(residual.fit(roll, envs, "tau_refined", tau_refined, cfg))
        rows.append(MatrixRow(configuration=MATRIX_ROWS[5], f1_mean=point.f1_mean, f1_sd=point.f1_sd))

        header = self.header(song=song, gap=gap)
        self.store.write_text(self.store.path(song, "matrix.tsv", gap), format_header(header) + matrix_table(rows))
        return rows
