"""
Keyboard layout and quasi-static key dynamics.
Depression follows the fingertips instantaneously; the only memory is the previous activation for edge detection.
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from pianoadapt.errors import ContractViolation
from pianoadapt.schemas.keyboard import KeyboardGeometry, KeyColor, KeySpec
from pianoadapt.schemas.score import NUM_KEYS

logger = logging.getLogger(__name__)

# Colors of the twelve semitones starting from A, the lowest key of the board.
_OCTAVE_FROM_A = (
    KeyColor.WHITE, KeyColor.BLACK, KeyColor.WHITE, KeyColor.WHITE, KeyColor.BLACK, KeyColor.WHITE,
    KeyColor.BLACK, KeyColor.WHITE, KeyColor.WHITE, KeyColor.BLACK, KeyColor.WHITE, KeyColor.BLACK,
)

Fingertip = Tuple[int, float, float, float]  # (finger_id, x, y, z)


def build_keyboard(num_keys: int = NUM_KEYS, geometry: Optional[KeyboardGeometry] = None) -> List[KeySpec]:
    """
    Lay out keys from A0 upward.

    White keys tile y from 0 without gaps; a black key is centered on the boundary
    between its two white neighbors, further back and raised.
    """
    if not 12 <= num_keys <= NUM_KEYS:
        raise ContractViolation(f"num_keys must be in [12, {NUM_KEYS}], got {num_keys}")
    geometry = geometry or KeyboardGeometry()
    width = geometry.white_width

    specs: List[KeySpec] = []
    whites = 0
    for index in range(num_keys):
        color = _OCTAVE_FROM_A[index % 12]
        if color == KeyColor.WHITE:
            specs.append(
                KeySpec(
                    index=index,
                    color=color,
                    center_y=whites * width + geometry.white_half_width,
                    half_width=geometry.white_half_width,
                    contact_x=geometry.white_contact_x,
                    x_min=0.0,
                    x_max=geometry.white_length,
                    top_z=0.0,
                )
            )
            whites += 1
        else:
            specs.append(
                KeySpec(
                    index=index,
                    color=color,
                    center_y=whites * width,
                    half_width=geometry.black_half_width,
                    contact_x=geometry.black_contact_x,
                    x_min=geometry.black_front,
                    x_max=geometry.white_length,
                    top_z=geometry.black_height,
                )
            )
    return specs


class Keyboard:
    """Key specs plus the column arrays the per-step contact test runs on."""

    def __init__(self, geometry: Optional[KeyboardGeometry] = None, num_keys: int = NUM_KEYS):
        self.geometry = geometry or KeyboardGeometry()
        self.specs = build_keyboard(num_keys, self.geometry)
        self.center_y = np.array([s.center_y for s in self.specs])
        self.half_width = np.array([s.half_width for s in self.specs])
        self.x_min = np.array([s.x_min for s in self.specs])
        self.x_max = np.array([s.x_max for s in self.specs])
        self.top_z = np.array([s.top_z for s in self.specs])
        self.contact_x = np.array([s.contact_x for s in self.specs])
        self.is_black = np.array([s.color == KeyColor.BLACK for s in self.specs])
        self.key_floor_z = self.top_z - self.geometry.travel - self.geometry.clamp_margin
        self.floor_z = float(self.key_floor_z.min())

    def __len__(self) -> int:
        return len(self.specs)

    def __getitem__(self, index: int) -> KeySpec:
        return self.specs[index]

    def tip_depressions(self, x: float, y: float, z: float) -> np.ndarray:
        """Depression each key would receive from one fingertip alone."""
        inside = (
            (np.abs(y - self.center_y) <= self.half_width)
            & (x >= self.x_min)
            & (x <= self.x_max)
            & (z < self.top_z)
        )
        depth = np.clip((self.top_z - z) / self.geometry.travel, 0.0, 1.0)
        return np.where(inside, depth, 0.0)

    def floor_under(self, x, y):
        """Lowest fingertip height over (x, y): the highest key floor there, else the board floor."""
        xs, ys = np.atleast_1d(x), np.atleast_1d(y)
        inside = (
            (np.abs(ys[:, None] - self.center_y) <= self.half_width)
            & (xs[:, None] >= self.x_min)
            & (xs[:, None] <= self.x_max)
        )
        floors = np.where(inside, self.key_floor_z, self.floor_z).max(axis=1)
        return float(floors[0]) if np.ndim(x) == 0 else floors


class KeyState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    depression: np.ndarray = Field(..., description="Normalized depression per key in [0, 1]")
    active: np.ndarray = Field(..., description="Sounding keys")
    owner: np.ndarray = Field(..., description="Finger that activated each sounding key, -1 when silent")

    @classmethod
    def released(cls, num_keys: int = NUM_KEYS) -> "KeyState":
        return cls(
            depression=np.zeros(num_keys),
            active=np.zeros(num_keys, dtype=bool),
            owner=np.full(num_keys, -1, dtype=np.int64),
        )

    def active_keys(self) -> List[int]:
        return np.flatnonzero(self.active).tolist()


class PressEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    finger_id: int
    key_index: int
    on: bool = Field(..., description="True for a new activation, False for a release")


def tip_depression_table(keyboard: Keyboard, fingertips: Sequence[Fingertip]) -> np.ndarray:
    """(num_tips, num_keys) depression of every key by every fingertip."""
    if not fingertips:
        return np.zeros((0, len(keyboard)))
    return np.stack([keyboard.tip_depressions(x, y, z) for _, x, y, z in fingertips])


def step_keys(
    keyboard: Keyboard,
    fingertips: Sequence[Fingertip],
    prev: KeyState,
    threshold: Optional[float] = None,
) -> Tuple[KeyState, List[PressEvent]]:
    """
    Advance key state to the given fingertip positions.

    A press event fires on each inactive-to-active transition and names the fingertip
    depressing that key the most; releases report the finger that activated the key.
    """
    threshold = keyboard.geometry.activation_threshold if threshold is None else threshold
    table = tip_depression_table(keyboard, fingertips)
    depression = table.max(axis=0) if len(table) else np.zeros(len(keyboard))
    active = depression >= threshold
    owner = prev.owner.copy()

    events: List[PressEvent] = []
    for key in np.flatnonzero(active & ~prev.active):
        finger_id = fingertips[int(np.argmax(table[:, key]))][0]
        owner[key] = finger_id
        events.append(PressEvent(finger_id=finger_id, key_index=int(key), on=True))
    for key in np.flatnonzero(prev.active & ~active):
        events.append(PressEvent(finger_id=int(prev.owner[key]), key_index=int(key), on=False))
        owner[key] = -1

    return KeyState(depression=depression, active=active, owner=owner), events


def pressed_by_finger(
    keyboard: Keyboard,
    fingertips: Sequence[Fingertip],
    threshold: Optional[float] = None,
) -> Dict[int, List[int]]:
    """Keys each fingertip holds at or past the threshold on its own."""
    threshold = keyboard.geometry.activation_threshold if threshold is None else threshold
    table = tip_depression_table(keyboard, fingertips)
    return {tip[0]: np.flatnonzero(row >= threshold).tolist() for tip, row in zip(fingertips, table)}


def depth_clamp(z, keyboard: Keyboard, x=None, y=None):
    """
    Keep fingertips from sinking below a fully pressed key; works on scalars and arrays.
    With a position the floor is that of the key under it, otherwise the lowest key floor.
    """
    floor = keyboard.floor_z if x is None else keyboard.floor_under(x, y)
    return np.maximum(z, floor)


def format_press_events(step: int, events: Sequence[PressEvent]) -> List[str]:
    return [f"{step} {e.finger_id} {e.key_index} {'on' if e.on else 'off'}" for e in events]
