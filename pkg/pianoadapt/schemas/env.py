from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator


class GapModel(BaseModel):
    """Discrepancy between the nominal simulator and the pseudo-real one."""

    model_config = ConfigDict(frozen=True)

    lateral_bias: List[float] = Field([0.0, 0.0, 0.0], description="Per-finger lateral joint bias (rad), slot order")
    wrist_y_offset: float = Field(0.0, description="Constant wrist placement error along the keyboard (m)")
    lag_alpha: float = Field(1.0, gt=0, le=1, description="First-order tracking coefficient per substep")
    actuation_noise_sd: float = Field(0.0, ge=0, description="Per-substep joint noise (rad)")
    threshold_shift: float = Field(0.0, description="Shift of the key activation threshold")
    seed: int = Field(0, description="Seed the parameters were drawn with")

    @field_validator("lateral_bias")
    @classmethod
    def _three_fingers(cls, value: List[float]) -> List[float]:
        if len(value) != 3:
            raise ValueError("lateral_bias needs one value per finger")
        return value

    @property
    def is_identity(self) -> bool:
        return (
            self.lag_alpha == 1.0
            and not any(self.lateral_bias)
            and self.wrist_y_offset == 0.0
            and self.actuation_noise_sd == 0.0
            and self.threshold_shift == 0.0
        )


class GapRanges(BaseModel):
    """Uniform sampling ranges a GapModel is drawn from."""

    model_config = ConfigDict(extra="forbid")

    lateral_bias_key_widths: Tuple[float, float] = Field(
        (0.0, 0.0), description="Bias magnitude range in white-key widths at fingertip radius; sign is random"
    )
    wrist_y_offset: float = Field(0.0, ge=0, description="Maximum absolute wrist offset (m)")
    lag_alpha: Tuple[float, float] = Field((1.0, 1.0), description="Tracking coefficient range")
    actuation_noise_sd: float = Field(0.0, ge=0)
    threshold_shift: Tuple[float, float] = Field((0.0, 0.0))


GAP_PRESETS = {
    "identity": GapRanges(),
    "bias-only": GapRanges(lateral_bias_key_widths=(0.3, 0.6)),
    "paper-like": GapRanges(
        lateral_bias_key_widths=(0.4, 0.9),
        wrist_y_offset=0.003,
        lag_alpha=(0.2, 0.2),
        actuation_noise_sd=0.004,
        threshold_shift=(0.1, 0.1),
    ),
}

# Ranges the sim policy is trained under.
DOMAIN_RANDOMIZATION = GapRanges(
    lateral_bias_key_widths=(0.0, 0.6),
    wrist_y_offset=0.002,
    lag_alpha=(0.3, 1.0),
    actuation_noise_sd=0.002,
    threshold_shift=(-0.05, 0.1),
)


class EnvConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lookahead: int = Field(10, ge=1, description="Goal window length H in steps")
    substeps: int = Field(8, ge=1, description="Actuation substeps per 10 Hz step")
    fingering_coef: float = Field(1.0, description="Fingering reward coefficient")
    key_press_coef: float = Field(1.0, description="Key press reward coefficient")
    action_l1_coef: float = Field(0.01, description="Action L1 penalty coefficient")
    key_on_coef: float = Field(0.7, ge=0, le=1, description="Weight of the depression term in the key press reward")
    kernel_margin: float = Field(0.05, gt=0, description="Distance at which the tolerance kernel reaches 0.1")
    randomization: Optional[GapRanges] = Field(
        default_factory=DOMAIN_RANDOMIZATION.model_copy,
        description="Domain randomization ranges resampled on every reset",
    )


class RewardBreakdown(BaseModel):
    key_press: float = Field(..., ge=0, le=1)
    fingering: float = Field(..., ge=0, le=1)
    action_l1: float = Field(..., ge=0)
    total: float
