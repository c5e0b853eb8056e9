from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from pianoadapt.schemas.score import Hand

FINGERS_PER_HAND = 3
JOINTS_PER_FINGER = 4


class HandConfig(BaseModel):
    """Kinematics of one three-finger hand. Identical for both hands in physical slot order."""

    model_config = ConfigDict(extra="forbid")

    link_lengths: List[float] = Field(
        [0.03, 0.04, 0.03, 0.015], description="Proximal link then one link after each flexion joint"
    )
    finger_spacing: float = Field(0.0235, gt=0, description="Lateral distance between adjacent finger bases")
    base_x: float = Field(0.0, description="Finger base depth offset from the wrist")
    base_z: float = Field(0.0, description="Finger base height offset from the wrist")
    joint_limits: List[Tuple[float, float]] = Field(
        [(-0.6, 0.6), (-0.3, 1.5), (0.0, 1.5), (0.0, 1.6)], description="Per-joint [lo, hi] in radians"
    )
    rest_pose: List[float] = Field([0.0, 0.3, 0.3, 1.0], description="Joint angles of a hovering finger")
    fixed_last_joint: float = Field(1.0, description="Last flexion angle held by the sim-training pipeline")
    hover_clearance: float = Field(0.015, gt=0, description="Rest fingertip height above white key tops")
    press_depth: float = Field(1.1, gt=0, le=1.2, description="Scripted press depth as a fraction of key travel")
    lateral_joint_index: int = Field(0, description="Index of the lateral joint within a finger")

    @field_validator("link_lengths")
    @classmethod
    def _four_links(cls, value: List[float]) -> List[float]:
        if len(value) != JOINTS_PER_FINGER or any(v <= 0 for v in value):
            raise ValueError("link_lengths needs four positive lengths")
        return value

    @model_validator(mode="after")
    def _check_limits(self) -> "HandConfig":
        if len(self.joint_limits) != JOINTS_PER_FINGER or len(self.rest_pose) != JOINTS_PER_FINGER:
            raise ValueError("joint_limits and rest_pose need one entry per joint")
        for lo, hi in self.joint_limits:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError("joint limits must be finite with lo < hi")
        return self

    def limits_array(self) -> np.ndarray:
        """(4, 2) array of joint limits."""
        return np.asarray(self.joint_limits, dtype=np.float64)

    def finger_base_offsets(self) -> np.ndarray:
        """(3, 3) finger base positions relative to the wrist, leftmost finger first."""
        offsets = np.zeros((FINGERS_PER_HAND, 3))
        offsets[:, 0] = self.base_x
        offsets[:, 1] = (np.arange(FINGERS_PER_HAND) - 1) * self.finger_spacing
        offsets[:, 2] = self.base_z
        return offsets


class HandTrack(BaseModel):
    """Target joint states of one hand for indices 0..T."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    q: np.ndarray = Field(..., description="(T+1, 3, 4) joint angles")
    wrist: np.ndarray = Field(..., description="(T+1, 3) wrist position in keyboard frame")

    @model_validator(mode="after")
    def _check_shapes(self) -> "HandTrack":
        q = np.asarray(self.q, dtype=np.float64)
        wrist = np.asarray(self.wrist, dtype=np.float64)
        if q.ndim != 3 or q.shape[1:] != (FINGERS_PER_HAND, JOINTS_PER_FINGER):
            raise ValueError(f"q must have shape (T+1, 3, 4), got {q.shape}")
        if wrist.shape != (q.shape[0], 3):
            raise ValueError(f"wrist must have shape ({q.shape[0]}, 3), got {wrist.shape}")
        self.q = q
        self.wrist = wrist
        return self

    def __len__(self) -> int:
        return self.q.shape[0]

    def copy(self) -> "HandTrack":
        return HandTrack(q=self.q.copy(), wrist=self.wrist.copy())


class JointTrajectory(BaseModel):
    """Open-loop rollout s_0..s_T for both hands, passed between pipeline stages."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    title: str = Field(..., description="Song the trajectory plays")
    left: HandTrack
    right: HandTrack

    @model_validator(mode="after")
    def _same_length(self) -> "JointTrajectory":
        if len(self.left) != len(self.right):
            raise ValueError("left and right tracks differ in length")
        return self

    @property
    def num_steps(self) -> int:
        return len(self.left) - 1

    def track(self, hand: Hand) -> HandTrack:
        return self.left if hand == Hand.LEFT else self.right

    def with_track(self, hand: Hand, track: HandTrack) -> "JointTrajectory":
        if hand == Hand.LEFT:
            return JointTrajectory(title=self.title, left=track, right=self.right.copy())
        return JointTrajectory(title=self.title, left=self.left.copy(), right=track)

    def copy(self) -> "JointTrajectory":
        return JointTrajectory(title=self.title, left=self.left.copy(), right=self.right.copy())


class JointState(BaseModel):
    """Joint angles and wrist position of one hand at one step."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    q: np.ndarray = Field(..., description="(3, 4) joint angles, slot order")
    wrist: np.ndarray = Field(..., description="(3,) wrist position in keyboard frame")

    @model_validator(mode="after")
    def _check_shapes(self) -> "JointState":
        q = np.asarray(self.q, dtype=np.float64)
        wrist = np.asarray(self.wrist, dtype=np.float64)
        if q.shape != (FINGERS_PER_HAND, JOINTS_PER_FINGER) or wrist.shape != (3,):
            raise ValueError(f"expected q (3, 4) and wrist (3,), got {q.shape} and {wrist.shape}")
        self.q = q
        self.wrist = wrist
        return self

    @classmethod
    def from_track(cls, track: HandTrack, index: int) -> "JointState":
        return cls(q=track.q[index].copy(), wrist=track.wrist[index].copy())
