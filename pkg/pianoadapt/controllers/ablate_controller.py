import logging
from typing import Dict, List, Tuple

from pydantic import BaseModel

from pianoadapt.controllers.base import StageController
from pianoadapt.controllers.residual_controller import ResidualController, best_point
from pianoadapt.db.artifact_store import format_header

logger = logging.getLogger(__name__)

ABLATIONS: Tuple[Tuple[str, float], ...] = (
    ("gamma", 0.8),
    ("gamma", 0.75),
    ("gamma", 0.9),
    ("guided_prob", 0.5),
    ("guided_prob", 0.0),
    ("guided_prob", 1.0),
)


class AblationRow(BaseModel):
    parameter: str
    value: float
    f1_mean: float
    f1_sd: float


class AblateController(StageController):
    """
    Controller for the discount and guided-noise variants of residual RL over tau_refined
    """

    command = "ablate"

    def run(self, song: str, gap: str) -> List[AblationRow]:
        """
        Train one residual variant per ablation setting; settings that coincide train once

        Raises:
            MissingArtifactError: If refine has not run for the song on this gap
        """
        roll = self.load_roll(song)
        trajectory = self.refined_trajectory(song, gap)
        envs = self.real_envs(roll, gap)
        residual = ResidualController(self.settings, self.store)
        trained: Dict[str, Tuple[float, float]] = {}
        rows: List[AblationRow] = []
        for parameter, value in ABLATIONS:
            cfg = self.settings.td3.model_copy(update={parameter: value})
            key = cfg.model_dump_json()
            if key not in trained:
                logger.info(f"Ablation {parameter}={value}")
                point = best_point(residual.fit(roll, envs, "tau_refined", trajectory, cfg))
                trained[key] = (point.f1_mean, point.f1_sd)
            mean, sd = trained[key]
            rows.append(AblationRow(parameter=parameter, value=value, f1_mean=mean, f1_sd=sd))

        lines = ["parameter\tvalue\tf1_mean\tf1_sd"]
        lines += [f"{r.parameter}\t{r.value:g}\t{r.f1_mean:.2f}\t{r.f1_sd:.2f}" for r in rows]
        header = self.header(song=song, gap=gap)
        self.store.write_text(self.store.path(song, "ablation.tsv", gap), format_header(header) + "\n".join(lines) + "\n")
        return rows
