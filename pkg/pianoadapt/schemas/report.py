from typing import List

from pydantic import BaseModel, Field


class F1Report(BaseModel):
    precision: float = Field(..., ge=0, le=1)
    recall: float = Field(..., ge=0, le=1)
    f1: float = Field(..., ge=0, le=1)
    true_positives: int = Field(..., ge=0)
    false_positives: int = Field(..., ge=0)
    false_negatives: int = Field(..., ge=0)
    correct: List[List[int]] = Field(default_factory=list, description="Per-step keys pressed and wanted")
    incorrect: List[List[int]] = Field(default_factory=list, description="Per-step keys pressed but not wanted")
    missed: List[List[int]] = Field(default_factory=list, description="Per-step keys wanted but not pressed")


class EvalSummary(BaseModel):
    """F1 x 100 across seeded rollouts."""

    mean: float
    sd: float
    scores: List[float] = Field(default_factory=list)


class CurvePoint(BaseModel):
    episode: int
    env_steps: int
    grad_steps: int
    f1_mean: float
    f1_sd: float
