"""
Schemas for the verification suites: test-function families, per-check
results and the aggregated report.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, validator

from models.run import ProfileSpec

SELECTIONS = ("frames", "operators", "commutators", "null", "inequalities", "all")


class TestFunctionFamily(BaseModel):
    """
    Random smooth profiles on H_s, each supported in a ball that stays
    `margin` away from the slice support radius (s^2 - 1)/2.
    """
    __test__ = False

    generator: str = "bump"
    members: int = Field(50, ge=1)
    seed: int = 0
    s: float = Field(3.0, gt=1.0)
    width_range: Tuple[float, float] = (0.6, 1.2)
    amplitude_range: Tuple[float, float] = (0.5, 2.0)
    power: int = Field(6, ge=3)
    margin: float = Field(0.25, ge=0)

    class Config:
        schema_extra = {
            "example": {"generator": "bump", "members": 50, "seed": 0, "s": 3.0, "width_range": [0.6, 1.2]}
        }

    @validator("generator")
    def known_generator(cls, generator):
        if generator not in ("bump", "gaussian"):
            raise ValueError(f"unknown generator '{generator}'")
        return generator

    @validator("width_range", "amplitude_range")
    def ordered_range(cls, value):
        if not 0 < value[0] <= value[1]:
            raise ValueError(f"range must satisfy 0 < low <= high, got {value}")
        return value

    @property
    def support_radius(self) -> float:
        return 0.5 * (self.s ** 2 - 1.0)

    def profiles(self) -> List[ProfileSpec]:
        """The members, drawn deterministically from the seed"""
        rng = np.random.default_rng(self.seed)
        reach_factor = 1.0 if self.generator == "bump" else 3.0
        room = self.support_radius - self.margin
        out = []
        for _ in range(self.members):
            width = rng.uniform(*self.width_range)
            width = min(width, 0.9 * room / reach_factor)
            amplitude = rng.uniform(*self.amplitude_range) * rng.choice([-1.0, 1.0])
            offset = max(0.0, room - reach_factor * width)
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            center = direction * rng.uniform(0.0, offset)
            out.append(ProfileSpec(kind=self.generator, amplitude=amplitude, center=tuple(center),
                                   radius=width, power=self.power))
        return out


class CheckResult(BaseModel):
    name: str
    passed: bool
    measured: Dict[str, float] = {}
    refinement_delta: Optional[float] = None
    detail: str = ""


class VerificationReport(BaseModel):
    selection: str
    checks: List[CheckResult] = []
    seed: int = 0

    @validator("selection")
    def known_selection(cls, selection):
        if selection not in SELECTIONS:
            raise ValueError(f"unknown selection '{selection}'; choose from {', '.join(SELECTIONS)}")
        return selection

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failed_checks(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]


class HardyCheck(BaseModel):
    lhs: float
    rhs: float
    ratio: float


class HomogeneityResult(BaseModel):
    coefficient: str
    degree: int
    translations: str = Field("id", description="label of the pure-translation multi-index")
    fields: str = Field("id", description="label of the admissible multi-index")
    constant: float
    rescaled_constant: float
    scale: float
    invariant: bool


class ConvergenceResult(BaseModel):
    name: str
    spacings: List[float]
    errors: List[float]
    slopes: List[float]
    fitted_slope: float
