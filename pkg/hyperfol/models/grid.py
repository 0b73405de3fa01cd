"""
Uniform cubic lattices and the sampled field state on one hyperboloid.
"""

from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, validator


class GridSpec(BaseModel):
    """Vertex-centred lattice with n points per axis covering |x|_inf <= extent"""
    n: int = Field(96, ge=9)
    extent: float = Field(..., gt=0)

    class Config:
        schema_extra = {"example": {"n": 96, "extent": 120.0}}

    @property
    def h(self) -> float:
        return 2.0 * self.extent / (self.n - 1)


class Grid:
    """
    Coordinate arrays for a uniform cubic lattice. Instances are
    treated as immutable once built.
    """

    def __init__(self, n: int, extent: float):
        if n < 9:
            raise ValueError(f"grid needs at least 9 points per axis, got {n}")
        self.n = int(n)
        self.extent = float(extent)
        self.h = 2.0 * self.extent / (self.n - 1)
        self.axis = np.linspace(-self.extent, self.extent, self.n)
        self.x = np.stack(np.meshgrid(self.axis, self.axis, self.axis, indexing="ij"))
        self.r = np.sqrt(np.sum(self.x ** 2, axis=0))

    @classmethod
    def from_spec(cls, spec: GridSpec) -> "Grid":
        return cls(spec.n, spec.extent)

    @staticmethod
    def points_for(h: float, extent: float) -> int:
        return int(np.ceil(2.0 * extent / h)) + 1

    @classmethod
    def from_spacing(cls, h: float, extent: float) -> "Grid":
        """Smallest lattice with spacing h whose extent reaches the requested one"""
        n = cls.points_for(h, extent)
        return cls(n, 0.5 * (n - 1) * h)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def cell_volume(self) -> float:
        return self.h ** 3

    def nearest_index(self, position) -> Tuple[int, int, int]:
        index = np.rint((np.asarray(position, dtype=float) + self.extent) / self.h).astype(int)
        return tuple(int(i) for i in index)

    def box(self, radius: float, margin: int) -> Tuple[slice, slice, slice]:
        """Index box covering |x|_inf <= radius plus `margin` extra points, clipped to the grid"""
        half = int(np.ceil(radius / self.h)) + margin
        centre = (self.n - 1) // 2
        lo = max(0, centre - half)
        hi = min(self.n, centre + half + 2)
        return (slice(lo, hi),) * 3

    def __repr__(self) -> str:
        return f"Grid(n={self.n}, extent={self.extent:.4g}, h={self.h:.4g})"


class GridSlice(BaseModel):
    """
    Multi-component state on H_s sampled over the grid.

    w, ds_w and dt_w have shape (n0, n, n, n). ds_w is the evolution
    variable d_s w; dt_w = (t/s) ds_w is kept alongside so diagnostics
    never difference across slices.
    """
    s: float
    grid: Grid
    components: List[str]
    w: np.ndarray
    ds_w: np.ndarray
    dt_w: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    @validator("dt_w")
    def same_shapes(cls, dt_w, values):
        w = values.get("w")
        ds_w = values.get("ds_w")
        if w is not None and (w.shape != dt_w.shape or (ds_w is not None and ds_w.shape != w.shape)):
            raise ValueError("w, ds_w and dt_w must share a shape")
        return dt_w

    @classmethod
    def from_frame_data(cls, s: float, grid: Grid, w: np.ndarray, ds_w: np.ndarray,
                        components: Optional[List[str]] = None) -> "GridSlice":
        t = np.sqrt(s * s + grid.r ** 2)
        names = components or [f"w{i + 1}" for i in range(w.shape[0])]
        return cls(s=s, grid=grid, components=names, w=w, ds_w=ds_w, dt_w=(t / s) * ds_w)

    @classmethod
    def zeros(cls, s: float, grid: Grid, components: List[str]) -> "GridSlice":
        shape = (len(components),) + grid.shape
        return cls.from_frame_data(s, grid, np.zeros(shape), np.zeros(shape), components)

    @property
    def n0(self) -> int:
        return self.w.shape[0]

    @property
    def t(self) -> np.ndarray:
        return np.sqrt(self.s ** 2 + self.grid.r ** 2)

    @property
    def support_radius(self) -> float:
        return 0.5 * (self.s ** 2 - 1.0)

    @property
    def support_mask(self) -> np.ndarray:
        return self.grid.r < self.support_radius
