from enum import Enum

from pydantic import BaseModel, ConfigDict, Field


class KeyColor(str, Enum):
    WHITE = "white"
    BLACK = "black"


class KeyboardGeometry(BaseModel):
    """Keyboard dimensions in meters; x is depth from the front edge, y runs along the board, z is up."""

    model_config = ConfigDict(extra="forbid")

    white_half_width: float = Field(0.01175, gt=0, description="Half width of a white key")
    black_half_width: float = Field(0.006, gt=0, description="Half width of a black key")
    white_length: float = Field(0.15, gt=0, description="Depth of the key bed")
    black_front: float = Field(0.05, ge=0, description="Depth where black keys begin")
    white_contact_x: float = Field(0.03, ge=0, description="Nominal fingertip contact depth on white keys")
    black_contact_x: float = Field(0.10, ge=0, description="Nominal fingertip contact depth on black keys")
    black_height: float = Field(0.012, ge=0, description="Black key top above white key top")
    travel: float = Field(0.010, gt=0, description="Full press depth")
    clamp_margin: float = Field(0.002, ge=0, description="Allowed fingertip depth below a fully pressed key")
    activation_threshold: float = Field(0.5, gt=0, le=1, description="Normalized depression that makes a key sound")

    @property
    def white_width(self) -> float:
        return 2.0 * self.white_half_width


class KeySpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int = Field(..., ge=0, le=87)
    color: KeyColor
    center_y: float = Field(..., description="Lateral position of the key center")
    half_width: float
    contact_x: float = Field(..., description="Depth of the nominal contact point")
    x_min: float = Field(..., description="Front edge of the pressable surface")
    x_max: float = Field(..., description="Back edge of the pressable surface")
    top_z: float = Field(..., description="Height of the key top at rest")
