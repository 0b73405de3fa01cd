from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field


class FoliationPoint(BaseModel):
    """
    A spacetime event carried in both the (t, x) and (s, x) charts.
    s is None for points on or outside the light cone (r >= t).
    """
    t: float
    x: Tuple[float, float, float]
    s: Optional[float] = None
    r: float = 0.0
    in_cone: bool = False

    class Config:
        allow_mutation = False
        schema_extra = {
            "example": {
                "t": 7.0710678118654755,
                "x": [3.0, 4.0, 0.0],
                "s": 5.0,
                "r": 5.0,
                "in_cone": True
            }
        }

    @property
    def position(self) -> np.ndarray:
        return np.asarray(self.x, dtype=float)


class FrameMatrices(BaseModel):
    """Transition matrices: row alpha of phi holds the natural components of the frame field alpha"""
    phi: np.ndarray
    psi: np.ndarray
    point: FoliationPoint

    class Config:
        arbitrary_types_allowed = True


class SemiFrameMetric(BaseModel):
    m_up: np.ndarray = Field(..., description="contravariant components in the semi-hyperboloidal frame")
    m_down: np.ndarray = Field(..., description="covariant components in the semi-hyperboloidal frame")
    point: FoliationPoint

    class Config:
        arbitrary_types_allowed = True
