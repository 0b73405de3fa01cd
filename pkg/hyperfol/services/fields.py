"""
Admissible vector fields Z in {d_alpha, L_a} acting on gridded data.

Gridded data is carried as a JetField: the stack u, d_t u, d_t^2 u, ...
sampled on a graph chart t = T(x), either a constant-t slab or a
hyperboloid H_s. Grid differences D_a act along the chart, so the
Cartesian derivative at fixed t is

    d_a u = D_a u - (d_a T) d_t u

and every application of a field consumes one level of the stack and,
for spatial derivatives, one stencil half-width of grid margin.
"""

import logging
from functools import lru_cache
from math import comb, factorial
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp
from pydantic import BaseModel, validator

from models.geometry import FoliationPoint
from models.grid import Grid
from services import stencils
from services.geometry import frame_coefficient_fields
from utils.errors import DomainError, MissingCoFieldError, StencilMarginError

logger = logging.getLogger(__name__)

T_SYMBOL, X1, X2, X3 = sp.symbols("t x1 x2 x3", real=True)
SPACETIME_SYMBOLS = (T_SYMBOL, X1, X2, X3)


class AdmissibleField(BaseModel):
    """Translation d_alpha (alpha in 0..3) or boost L_a (a in 1..3)"""
    kind: str
    index: int

    class Config:
        allow_mutation = False
        schema_extra = {"example": {"kind": "boost", "index": 1}}

    @validator("kind")
    def known_kind(cls, kind):
        if kind not in ("translation", "boost"):
            raise ValueError(f"unknown field kind '{kind}'")
        return kind

    @validator("index")
    def index_in_range(cls, index, values):
        low = 0 if values.get("kind") == "translation" else 1
        if not low <= index <= 3:
            raise ValueError(f"index {index} out of range for {values.get('kind')}")
        return index

    @property
    def name(self) -> str:
        return f"d{self.index}" if self.kind == "translation" else f"L{self.index}"

    @property
    def is_boost(self) -> bool:
        return self.kind == "boost"

    @property
    def uses_space(self) -> bool:
        return self.is_boost or self.index > 0

    @classmethod
    def parse(cls, name: str) -> "AdmissibleField":
        name = name.strip()
        if len(name) == 2 and name[0] in "dL" and name[1].isdigit():
            return cls(kind="translation" if name[0] == "d" else "boost", index=int(name[1]))
        raise ValueError(f"cannot parse admissible field '{name}'")

    def __hash__(self):
        return hash((self.kind, self.index))

    def __str__(self) -> str:
        return self.name


def translation(alpha: int) -> AdmissibleField:
    return AdmissibleField(kind="translation", index=alpha)


def boost(a: int) -> AdmissibleField:
    return AdmissibleField(kind="boost", index=a)


ADMISSIBLE_FIELDS: Tuple[AdmissibleField, ...] = tuple(
    [translation(alpha) for alpha in range(4)] + [boost(a) for a in range(1, 4)]
)


class MultiIndex(BaseModel):
    """
    Ordered sequence of admissible fields. Z^I = Z_1 Z_2 ... Z_m, so
    the last entry acts first. `null` marks the zero operator used for
    negative orders.
    """
    fields: List[AdmissibleField] = []
    null: bool = False

    class Config:
        allow_mutation = False

    @classmethod
    def identity(cls) -> "MultiIndex":
        return cls()

    @classmethod
    def null_operator(cls) -> "MultiIndex":
        return cls(null=True)

    @classmethod
    def of(cls, *names: Union[str, AdmissibleField]) -> "MultiIndex":
        return cls(fields=[n if isinstance(n, AdmissibleField) else AdmissibleField.parse(n) for n in names])

    @classmethod
    def parse(cls, text: str) -> "MultiIndex":
        text = text.strip()
        if not text or text in ("()", "id"):
            return cls.identity()
        return cls.of(*text.split(","))

    @property
    def order(self) -> int:
        return -1 if self.null else len(self.fields)

    @property
    def label(self) -> str:
        if self.null:
            return "null"
        return ",".join(f.name for f in self.fields) or "id"

    def __hash__(self):
        return hash((tuple(self.fields), self.null))


def all_multi_indices(max_order: int) -> List[MultiIndex]:
    """Every multi-index of order 0..max_order, shortest first, in field-table order"""
    result = [MultiIndex.identity()]
    frontier: List[Tuple[AdmissibleField, ...]] = [()]
    for _ in range(max_order):
        frontier = [prefix + (z,) for prefix in frontier for z in ADMISSIBLE_FIELDS]
        result.extend(MultiIndex(fields=list(f)) for f in frontier)
    return result


class JetField:
    """
    Time-derivative stack of one scalar field on a graph chart.

    Args:
        grid: spatial lattice
        levels: arrays u, d_t u, d_t^2 u, ... each of the grid shape
        t: chart time T(x) at each grid point
        tau: the three slice derivatives d_a T
        order: stencil order
        margin: boundary band (in points) already consumed by differencing
    """

    def __init__(self, grid: Grid, levels: Sequence[np.ndarray], t: np.ndarray,
                 tau: np.ndarray, order: int = 4, margin: int = 0, s: Optional[float] = None):
        self.grid = grid
        self.levels = [np.asarray(level, dtype=float) for level in levels]
        self.t = t
        self.tau = tau
        self.order = order
        self.margin = margin
        self.s = s
        self.hw = stencils.half_width(order)

    @classmethod
    def flat(cls, grid: Grid, t0: float, levels: Sequence[np.ndarray], order: int = 4) -> "JetField":
        t = np.full(grid.shape, float(t0))
        return cls(grid, levels, t, np.zeros((3,) + grid.shape), order)

    @classmethod
    def on_slice(cls, grid: Grid, s: float, levels: Sequence[np.ndarray], order: int = 4) -> "JetField":
        geometry = frame_coefficient_fields(s, grid)
        return cls(grid, levels, geometry.t, geometry.tau, order, s=s)

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def value(self) -> np.ndarray:
        return self.levels[0]

    def _derived(self, levels: List[np.ndarray], extra_margin: int) -> "JetField":
        return JetField(self.grid, levels, self.t, self.tau, self.order, self.margin + extra_margin, self.s)

    def require_depth(self, needed: int, what: str) -> None:
        if self.depth < needed:
            raise MissingCoFieldError(
                f"{what} needs {needed} time-derivative levels, only {self.depth} present"
            )

    def _D(self, f: np.ndarray, a: int) -> np.ndarray:
        return stencils.derivative(f, a, self.grid.h, self.order)

    def _spatial_levels(self, a: int) -> List[np.ndarray]:
        # (d_a u)_k = D_a u_k - tau_a u_{k+1}
        return [self._D(self.levels[k], a) - self.tau[a] * self.levels[k + 1]
                for k in range(self.depth - 1)]

    def _over_t_levels(self, coefficient: np.ndarray, levels: Sequence[np.ndarray], count: int) -> List[np.ndarray]:
        # d_t^k ((c / t) g) with c independent of t
        out = []
        for k in range(count):
            acc = np.zeros(self.grid.shape)
            for j in range(k + 1):
                acc = acc + comb(k, j) * (-1) ** j * factorial(j) * coefficient / self.t ** (j + 1) * levels[k - j]
            out.append(acc)
        return out

    def partial(self, alpha: int) -> "JetField":
        self.require_depth(2, f"d_{alpha}")
        if alpha == 0:
            return self._derived(self.levels[1:], 0)
        return self._derived(self._spatial_levels(alpha - 1), self.hw)

    def boost(self, a: int) -> "JetField":
        # (L_a u)_k = x^a u_{k+1} + t (d_a u)_k + k (d_a u)_{k-1}
        self.require_depth(2, f"L_{a}")
        du = self._spatial_levels(a - 1)
        xa = self.grid.x[a - 1]
        levels = []
        for k in range(self.depth - 1):
            level = xa * self.levels[k + 1] + self.t * du[k]
            if k > 0:
                level = level + k * du[k - 1]
            levels.append(level)
        return self._derived(levels, self.hw)

    def semi_derivative(self, b: int) -> "JetField":
        """dbar_b = (x^b / t) d_t + d_b"""
        self.require_depth(2, f"dbar_{b}")
        du = self._spatial_levels(b - 1)
        time_part = self._over_t_levels(self.grid.x[b - 1], self.levels[1:], self.depth - 1)
        return self._derived([time_part[k] + du[k] for k in range(self.depth - 1)], self.hw)

    def rotation(self, a: int, b: int) -> "JetField":
        """Omega_ab = (x^a/t) L_b - (x^b/t) L_a"""
        lb = self.boost(b)
        la = self.boost(a)
        first = self._over_t_levels(self.grid.x[a - 1], lb.levels, lb.depth)
        second = self._over_t_levels(self.grid.x[b - 1], la.levels, la.depth)
        return self._derived([f - g for f, g in zip(first, second)], self.hw)

    def box(self) -> "JetField":
        self.require_depth(3, "the wave operator")
        laplace = None
        for a in range(1, 4):
            second = self.partial(a).partial(a)
            laplace = second if laplace is None else laplace.plus(second)
        levels = [self.levels[k + 2] - laplace.levels[k] for k in range(self.depth - 2)]
        return self._derived(levels, 2 * self.hw)

    def plus(self, other: "JetField", scale: float = 1.0) -> "JetField":
        count = min(self.depth, other.depth)
        levels = [self.levels[k] + scale * other.levels[k] for k in range(count)]
        return JetField(self.grid, levels, self.t, self.tau, self.order,
                        max(self.margin, other.margin), self.s)

    def apply(self, field: AdmissibleField) -> "JetField":
        if field.is_boost:
            return self.boost(field.index)
        return self.partial(field.index)

    def interior(self) -> np.ndarray:
        return stencils.interior_mask(self.grid.shape, self.margin)


def check_point_margin(u: JetField, index: Tuple[int, int, int], extra: int) -> None:
    needed = u.margin + extra
    n = u.grid.n
    if min(min(i, n - 1 - i) for i in index) < needed:
        raise StencilMarginError(f"grid point {index} lies within {needed} points of the boundary")


def apply_field(Z: AdmissibleField, u: JetField, p: Tuple[int, int, int]) -> float:
    """Value of Zu at grid index p"""
    check_point_margin(u, p, u.hw if Z.uses_space else 0)
    return float(u.apply(Z).value[p])


def apply_multi(I: MultiIndex, u: JetField) -> JetField:
    """Z^I u, innermost field first, with margins and levels checked up front"""
    if I.null:
        return JetField(u.grid, [np.zeros(u.grid.shape)] * max(u.depth, 1), u.t, u.tau, u.order, u.margin, u.s)
    spatial = sum(1 for z in I.fields if z.uses_space)
    needed = u.margin + spatial * u.hw
    if 2 * needed >= u.grid.n:
        raise StencilMarginError(f"multi-index {I.label} needs a margin of {needed} points on a {u.grid.n}-point grid")
    if u.depth < I.order + 1:
        raise MissingCoFieldError(f"multi-index {I.label} needs {I.order + 1} time-derivative levels, have {u.depth}")
    result = u
    for z in reversed(I.fields):
        result = result.apply(z)
    return result


def rotation_from_boosts(a: int, b: int, p: FoliationPoint) -> Tuple[float, float]:
    """Coefficients (x^a/t, -x^b/t) of Omega_ab = (x^a/t) L_b - (x^b/t) L_a"""
    if p.t < 1:
        raise DomainError(f"rotation coefficients need t >= 1, got t={p.t}")
    return (p.x[a - 1] / p.t, -p.x[b - 1] / p.t)


def killing_residual(Z: AdmissibleField, u: JetField) -> float:
    """Max over the valid interior of |Z(box u) - box(Z u)|"""
    needed_margin = u.margin + 3 * u.hw
    if 2 * needed_margin >= u.grid.n:
        raise StencilMarginError(f"killing residual needs a margin of {needed_margin} points")
    lhs = u.box().apply(Z)
    rhs = u.apply(Z).box()
    mask = stencils.interior_mask(u.grid.shape, max(lhs.margin, rhs.margin))
    return float(np.max(np.abs(lhs.value - rhs.value)[mask]))


@lru_cache(maxsize=256)
def time_derivative_functions(expr: sp.Expr, depth: int):
    return [sp.lambdify(SPACETIME_SYMBOLS, sp.diff(expr, T_SYMBOL, k), modules="numpy")
            for k in range(depth)]


def evaluate_expression(func, t: np.ndarray, x: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        values = func(t, x[0], x[1], x[2])
    return np.broadcast_to(np.asarray(values, dtype=float), t.shape).copy()


def jet_from_expression(expr: Union[sp.Expr, str], grid: Grid, depth: int, order: int = 4,
                        s: Optional[float] = None, t0: Optional[float] = None) -> JetField:
    """
    Sample a symbolic field u(t, x1, x2, x3) and its first depth-1 time
    derivatives on H_s (when s is given) or on the slab t = t0.
    """
    expr = sp.sympify(expr, locals={"t": T_SYMBOL, "x1": X1, "x2": X2, "x3": X3})
    funcs = time_derivative_functions(expr, depth)
    if s is not None:
        jet = JetField.on_slice(grid, s, [np.zeros(grid.shape)], order)
    elif t0 is not None:
        jet = JetField.flat(grid, t0, [np.zeros(grid.shape)], order)
    else:
        raise DomainError("either s or t0 must be given")
    jet.levels = [evaluate_expression(f, jet.t, grid.x) for f in funcs]
    return jet