"""
Time-derivative jets of solutions on a slice, obtained from the field
equations themselves.

Given (w, d_t w) on H_s, the equation
    box w_i + G_i^{j ab} d_a d_b w_j + c_i^2 w_i = F_i + f_i
differentiated k times in t yields d_t^{k+2} w from lower levels:

    (mbar^00 I + Gbar^00) u_{k+2} = d_t^k (F + f - c^2 u) - (box u)_k|explicit
                                    - sum_m C(k, m) d_t^m G . (dd u)_{k-m}|explicit

with mbar^00 = (s/t)^2 and Gbar^00 = G^{ab} xibar_a xibar_b, xibar = (1, -x/t).
"""

import logging
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from models.grid import GridSlice
from models.system import SystemSpec
from services.fields import JetField, time_derivative_functions, evaluate_expression
from services.geometry import frame_coefficient_fields
from utils.errors import QuasilinearBreakdown

logger = logging.getLogger(__name__)

PRINCIPAL_LIMIT = 0.5


class CoefficientTables:
    """Dense coefficient arrays of a SystemSpec with their nonzero entries listed once"""

    def __init__(self, spec: SystemSpec):
        self.spec = spec
        self.n0 = spec.n0
        self.masses = np.asarray(spec.masses, dtype=float)
        self.dense = {name: spec.dense(name) for name in "ABPQR"}
        self.entries: Dict[str, List[Tuple[Tuple[int, ...], float]]] = {
            name: [(tuple(int(i) for i in index), float(array[tuple(index)]))
                   for index in np.argwhere(array != 0)]
            for name, array in self.dense.items()
        }

    @property
    def quasilinear(self) -> bool:
        return bool(self.entries["A"] or self.entries["B"])

    @property
    def semilinear_terms(self) -> bool:
        return bool(self.entries["P"] or self.entries["Q"] or self.entries["R"])


def principal_solve(matrix: np.ndarray, rhs: np.ndarray, s: float,
                    positions: Optional[np.ndarray] = None, shift: Optional[np.ndarray] = None,
                    limit: float = PRINCIPAL_LIMIT) -> np.ndarray:
    """
    Solve (shift I + matrix) y = rhs pointwise.

    Args:
        matrix: the quasilinear block, shape (n0, n0, *points)
        rhs: shape (n0, *points)
        s: slice label, for error reports
        positions: coordinates (3, *points) used to name the worst point
        shift: diagonal factor per point, 1 when omitted
        limit: largest admissible max-row-sum norm of matrix / shift

    Raises:
        QuasilinearBreakdown: when the smallness bound fails somewhere
    """
    n0 = rhs.shape[0]
    points = rhs.shape[1:]
    scale = np.ones(points) if shift is None else shift
    norm = np.sum(np.abs(matrix), axis=1).max(axis=0) / scale
    if norm.size and float(np.max(norm)) > limit:
        worst = np.unravel_index(int(np.argmax(norm)), norm.shape)
        if positions is not None:
            where = tuple(float(positions[(a,) + worst]) for a in range(3))
        else:
            where = tuple(float(i) for i in worst)
        logger.error(f"quasilinear smallness lost at s={s:.6g}: norm {float(np.max(norm)):.4g} > {limit} at {where}")
        raise QuasilinearBreakdown(f"principal block norm {float(np.max(norm)):.4g} exceeds {limit}",
                                   s=s, worst_point=where)
    full = matrix + np.einsum("ij,...->ij...", np.eye(n0), scale)
    system = np.moveaxis(full, (0, 1), (-2, -1))
    vector = np.moveaxis(rhs, 0, -1)[..., None]
    return np.moveaxis(np.linalg.solve(system, vector)[..., 0], -1, 0)


def _leibniz(f: Sequence[np.ndarray], g: Sequence[np.ndarray], k: int) -> np.ndarray:
    return sum(comb(k, m) * f[m] * g[k - m] for m in range(k + 1))


def forcing_levels(forcing: Optional[Sequence[sp.Expr]], i: int, depth: int,
                   t: np.ndarray, x: np.ndarray) -> List[np.ndarray]:
    if forcing is None:
        return [np.zeros(t.shape)] * depth
    funcs = time_derivative_functions(forcing[i], depth)
    return [evaluate_expression(f, t, x) for f in funcs]


def extend_jet(slice_: GridSlice, spec: SystemSpec, depth: int, order: int = 4,
               forcing: Optional[Sequence[sp.Expr]] = None,
               tables: Optional[CoefficientTables] = None) -> List[JetField]:
    """
    Time-derivative stacks u_0..u_{depth-1} of every component on H_s.

    Returns:
        One JetField per component, each with `depth` levels
    """
    tables = tables or CoefficientTables(spec)
    grid, s = slice_.grid, slice_.s
    geometry = frame_coefficient_fields(s, grid)
    t, tau = geometry.t, geometry.tau
    mask = slice_.support_mask
    levels = [[slice_.w[i], slice_.dt_w[i]] for i in range(tables.n0)]
    top = max(0, depth - 2)
    f_levels = [forcing_levels(forcing, i, top, t, grid.x) for i in range(tables.n0)]
    xibar = np.concatenate([np.ones((1,) + grid.shape), -tau])
    m00 = geometry.s_over_t ** 2

    for k in range(top):
        jets = [JetField.on_slice(grid, s, lv + [np.zeros(grid.shape)], order) for lv in levels]
        grads = [[jet.partial(g).levels for g in range(4)] for jet in jets]
        rhs = np.zeros((tables.n0,) + grid.shape)
        for i in range(tables.n0):
            rhs[i] = f_levels[i][k] - tables.masses[i] ** 2 * levels[i][k] - jets[i].box().levels[k]
        for (i, a, b, j, l), value in tables.entries["P"]:
            rhs[i] += value * _leibniz(grads[j][a], grads[l][b], k)
        for (i, a, j, l), value in tables.entries["Q"]:
            rhs[i] += value * _leibniz(grads[j][a], levels[l], k)
        for (i, j, l), value in tables.entries["R"]:
            rhs[i] += value * _leibniz(levels[j], levels[l], k)

        principal = np.zeros((tables.n0, tables.n0) + grid.shape)
        if tables.quasilinear:
            second: Dict[Tuple[int, int, int], List[np.ndarray]] = {}

            def hessian(j, a, b):
                if (j, a, b) not in second:
                    second[(j, a, b)] = jets[j].partial(a).partial(b).levels
                return second[(j, a, b)]

            for (i, j, a, b, g, l), value in tables.entries["A"]:
                rhs[i] -= value * _leibniz(grads[l][g], hessian(j, a, b), k)
                principal[i, j] += value * grads[l][g][0] * xibar[a] * xibar[b]
            for (i, j, a, b, l), value in tables.entries["B"]:
                rhs[i] -= value * _leibniz(levels[l], hessian(j, a, b), k)
                principal[i, j] += value * levels[l][0] * xibar[a] * xibar[b]

        rhs = np.where(mask, rhs, 0.0)
        principal = np.where(mask, principal, 0.0)
        if tables.quasilinear:
            solved = np.zeros_like(rhs)
            solved[:, mask] = principal_solve(principal[:, :, mask], rhs[:, mask], s,
                                              grid.x[:, mask], m00[mask])
        else:
            solved = np.where(mask, rhs / m00, 0.0)
        for i in range(tables.n0):
            levels[i].append(solved[i])

    return [JetField.on_slice(grid, s, levels[i][:depth], order) for i in range(tables.n0)]


def source_terms(jets: Sequence[JetField], tables: CoefficientTables,
                 forcing: Optional[Sequence[sp.Expr]] = None) -> np.ndarray:
    """
    S_i in box w_i + c_i^2 w_i = S_i on the slice, i.e. F + f - G.dd w.
    Jets need three levels when the system is quasilinear, two otherwise.
    """
    grid = jets[0].grid
    t = jets[0].t
    out = np.zeros((tables.n0,) + grid.shape)
    for i in range(tables.n0):
        out[i] = forcing_levels(forcing, i, 1, t, grid.x)[0]
    if not (tables.semilinear_terms or tables.quasilinear):
        return out
    grads = [[jet.partial(g).value for g in range(4)] for jet in jets]
    values = [jet.value for jet in jets]
    for (i, a, b, j, l), value in tables.entries["P"]:
        out[i] += value * grads[j][a] * grads[l][b]
    for (i, a, j, l), value in tables.entries["Q"]:
        out[i] += value * grads[j][a] * values[l]
    for (i, j, l), value in tables.entries["R"]:
        out[i] += value * values[j] * values[l]
    for (i, j, a, b, g, l), value in tables.entries["A"]:
        out[i] -= value * grads[l][g] * jets[j].partial(a).partial(b).value
    for (i, j, a, b, l), value in tables.entries["B"]:
        out[i] -= value * values[l] * jets[j].partial(a).partial(b).value
    return out
