from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from pianoadapt.schemas.score import Finger, Hand


class RefineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    delta_init: Optional[float] = Field(
        None, gt=0, description="Initial lateral step (rad); default is half a white key at fingertip radius"
    )
    anneal_factor: float = Field(0.7, gt=0, lt=1, description="Step size multiplier per iteration")
    iterations: int = Field(10, ge=0, description="Rollout/update iterations")
    chunk_K: int = Field(10, ge=1, description="Chunk length in steps")
    lookahead_L: int = Field(5, ge=0, description="Extra steps of error considered per chunk")
    neighbor_coef: float = Field(0.3, ge=0, description="Share of a correction applied to adjacent fingers")


class PressRecord(BaseModel):
    step: int
    targets: List[Tuple[Finger, int]] = Field(default_factory=list, description="Goal (finger, key) pairs")
    pressed: Dict[Finger, List[int]] = Field(default_factory=dict, description="Keys each finger pressed")
    active: List[int] = Field(default_factory=list, description="All sounding keys of this hand")


class PressLog(BaseModel):
    hand: Hand
    records: List[PressRecord] = Field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)


class RefineStep(BaseModel):
    iteration: int = Field(..., description="0 is the input trajectory")
    delta: float = Field(..., description="Step size used to produce the next iteration")
    f1: float
    precision: float
    recall: float
