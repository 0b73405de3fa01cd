"""
Schemas for wave-Klein-Gordon system coefficient data and the
structural analysis results derived from it.

Coefficient tensors are stored as sparse lists of (index tuple, value)
with 1-based component indices and spacetime indices in 0..3. Dense
0-based numpy arrays are produced on demand by SystemSpec.dense().
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, validator

SparseEntry = Tuple[List[int], float]

# Layout of each tensor's index tuple: "c" = component, "s" = spacetime
TENSOR_LAYOUTS: Dict[str, str] = {
    "A": "ccsssc",   # A_i^{j alpha beta gamma k}
    "B": "ccssc",    # B_i^{j alpha beta k}
    "P": "csscc",    # P_i^{alpha beta j k}
    "Q": "cscc",     # Q_i^{alpha j k}
    "R": "ccc",      # R_i^{j k}
}


class SystemSpec(BaseModel):
    """
    Constant coefficient data of
        box w_i + G_i^{j ab} d_a d_b w_j + c_i^2 w_i = F_i
    with G = A.dw + B.w and F = P.dw.dw + Q.w.dw + R.w.w.
    """
    name: str = "system"
    n0: int = Field(..., ge=1)
    j0: int = Field(..., ge=0)
    masses: List[float]
    sigma: float = Field(1.0, gt=0)
    components: Optional[List[str]] = None
    A: List[SparseEntry] = []
    B: List[SparseEntry] = []
    P: List[SparseEntry] = []
    Q: List[SparseEntry] = []
    R: List[SparseEntry] = []

    class Config:
        schema_extra = {
            "example": {
                "name": "null-wave",
                "n0": 1,
                "j0": 1,
                "masses": [0.0],
                "sigma": 1.0,
                "P": [[[1, 0, 0, 1, 1], 1.0], [[1, 1, 1, 1, 1], -1.0],
                      [[1, 2, 2, 1, 1], -1.0], [[1, 3, 3, 1, 1], -1.0]]
            }
        }

    @validator("A", "B", "P", "Q", "R")
    def entries_have_indices(cls, entries, field):
        expected = len(TENSOR_LAYOUTS[field.name])
        for position, (indices, _) in enumerate(entries):
            if len(indices) != expected:
                raise ValueError(
                    f"entry {position} needs {expected} indices, got {len(indices)}"
                )
        return entries

    @property
    def component_names(self) -> List[str]:
        if self.components:
            return list(self.components)
        return [f"w{i + 1}" for i in range(self.n0)]

    def shape_of(self, name: str) -> Tuple[int, ...]:
        return tuple(self.n0 if c == "c" else 4 for c in TENSOR_LAYOUTS[name])

    def dense(self, name: str) -> np.ndarray:
        """
        Dense 0-based array for one tensor.

        Raises:
            IndexError: when an index falls outside its range
        """
        layout = TENSOR_LAYOUTS[name]
        array = np.zeros(self.shape_of(name))
        for indices, value in getattr(self, name):
            position = []
            for kind, index in zip(layout, indices):
                if kind == "c":
                    if not 1 <= index <= self.n0:
                        raise IndexError(f"{name}: component index {index} outside 1..{self.n0}")
                    position.append(index - 1)
                else:
                    if not 0 <= index <= 3:
                        raise IndexError(f"{name}: spacetime index {index} outside 0..3")
                    position.append(index)
            array[tuple(position)] += value
        return array

    @property
    def is_quasilinear(self) -> bool:
        return bool(self.A or self.B)


class QuadraticForm(BaseModel):
    """Constant coefficients T^{ab} acting on a pair of gradients"""
    coefficients: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    @validator("coefficients", pre=True)
    def to_matrix(cls, value):
        array = np.asarray(value, dtype=float)
        if array.shape != (4, 4):
            raise ValueError(f"quadratic form needs shape (4, 4), got {array.shape}")
        return array


class CubicForm(BaseModel):
    """Constant coefficients A^{abc}"""
    coefficients: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    @validator("coefficients", pre=True)
    def to_tensor(cls, value):
        array = np.asarray(value, dtype=float)
        if array.shape != (4, 4, 4):
            raise ValueError(f"cubic form needs shape (4, 4, 4), got {array.shape}")
        return array


class NullCertificate(BaseModel):
    label: str = ""
    form_kind: str
    is_null: bool
    violations: List[str] = []
    sampled_max: float = 0.0
    samples: int = 0
    sampling_agrees: bool = True


class FrameBoundCertificate(BaseModel):
    constant: float
    is_null: bool
    unbounded_candidate: bool
    near_cone_samples: int = 0
    sample_size: int


class PointwiseNullEstimate(BaseModel):
    first_term: float = Field(..., description="|Tbar^00 d_t u d_t v|")
    mixed_terms: float
    total: float
    direct: float


class ConditionOutcome(BaseModel):
    name: str
    passed: bool
    offending: List[Tuple[int, ...]] = []
    detail: str = ""


class StructureReport(BaseModel):
    spec_name: str
    passed: bool
    conditions: List[ConditionOutcome]
    null_certificates: List[NullCertificate] = []
    frame_bounds: Dict[str, float] = {}

    def failed_conditions(self) -> List[str]:
        return [c.name for c in self.conditions if not c.passed]
