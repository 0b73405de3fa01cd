"""
Symbolic initial profiles, external forcing and manufactured solutions.

Everything is a sympy expression in (t, x1, x2, x3), lambdified once
and sampled on grids through services.fields.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
import sympy as sp

from models.grid import Grid
from models.run import InitialDataSpec, ProfileSpec
from models.system import SystemSpec
from services.fields import SPACETIME_SYMBOLS, T_SYMBOL, X1, X2, X3, evaluate_expression
from utils.errors import DomainError

logger = logging.getLogger(__name__)

SYMBOL_TABLE = {"t": T_SYMBOL, "x1": X1, "x2": X2, "x3": X3}
SPACE = (X1, X2, X3)


def parse_expression(text) -> sp.Expr:
    if isinstance(text, sp.Expr):
        return text
    try:
        return sp.sympify(text, locals=SYMBOL_TABLE)
    except (sp.SympifyError, TypeError, SyntaxError) as exc:
        raise DomainError(f"cannot parse expression '{text}': {exc}") from exc


def profile_expression(profile: ProfileSpec) -> sp.Expr:
    if profile.kind == "zero":
        return sp.Integer(0)
    if profile.kind == "expression":
        return parse_expression(profile.expression)
    rho_sq = sum((x - c) ** 2 for x, c in zip(SPACE, profile.center)) / sp.Float(profile.radius) ** 2
    if profile.kind == "bump":
        return sp.Float(profile.amplitude) * sp.Piecewise(((1 - rho_sq) ** profile.power, rho_sq < 1), (0, True))
    cutoff = sp.Piecewise(((1 - rho_sq / 9) ** 4, rho_sq < 9), (0, True))
    return sp.Float(profile.amplitude) * sp.exp(-rho_sq) * cutoff


def sample(expr: sp.Expr, t: np.ndarray, grid: Grid) -> np.ndarray:
    func = sp.lambdify(SPACETIME_SYMBOLS, expr, modules="numpy")
    return evaluate_expression(func, t, grid.x)


def wave_operator(u: sp.Expr) -> sp.Expr:
    return sp.diff(u, T_SYMBOL, 2) - sum(sp.diff(u, x, 2) for x in SPACE)


def manufactured_forcing(u_exact, c: float = 0.0) -> sp.Expr:
    """f = box u + c^2 u for a chosen exact solution u"""
    u = parse_expression(u_exact)
    return sp.simplify(wave_operator(u) + sp.Float(c) ** 2 * u)


def system_manufactured_forcing(spec: SystemSpec, exact: Sequence) -> List[sp.Expr]:
    """
    Forcing f_i making the given fields exact solutions of
        box w_i + G_i^{j ab} d_a d_b w_j + c_i^2 w_i = F_i + f_i
    """
    if len(exact) != spec.n0:
        raise DomainError(f"{len(exact)} exact solutions given for n0={spec.n0}")
    u = [parse_expression(e) for e in exact]
    du = [[sp.diff(ui, x) for x in SPACETIME_SYMBOLS] for ui in u]
    ddu = [[[sp.diff(ui, x, y) for y in SPACETIME_SYMBOLS] for x in SPACETIME_SYMBOLS] for ui in u]
    arrays = {name: spec.dense(name) for name in "ABPQR"}
    forcing = []
    for i in range(spec.n0):
        expr = wave_operator(u[i]) + sp.Float(spec.masses[i]) ** 2 * u[i]
        for index in np.argwhere(arrays["A"][i] != 0):
            j, a, b, g, k = (int(v) for v in index)
            expr += float(arrays["A"][i][tuple(index)]) * du[k][g] * ddu[j][a][b]
        for index in np.argwhere(arrays["B"][i] != 0):
            j, a, b, k = (int(v) for v in index)
            expr += float(arrays["B"][i][tuple(index)]) * u[k] * ddu[j][a][b]
        for index in np.argwhere(arrays["P"][i] != 0):
            a, b, j, k = (int(v) for v in index)
            expr -= float(arrays["P"][i][tuple(index)]) * du[j][a] * du[k][b]
        for index in np.argwhere(arrays["Q"][i] != 0):
            a, j, k = (int(v) for v in index)
            expr -= float(arrays["Q"][i][tuple(index)]) * du[j][a] * u[k]
        for index in np.argwhere(arrays["R"][i] != 0):
            j, k = (int(v) for v in index)
            expr -= float(arrays["R"][i][tuple(index)]) * u[j] * u[k]
        forcing.append(expr)
    return forcing


def initial_fields(data: InitialDataSpec, spec: SystemSpec, s0: float, grid: Grid):
    """
    Sample (w, d_s w) on H_{s0}.

    Returns:
        Two arrays of shape (n0, n, n, n)
    """
    t = np.sqrt(s0 * s0 + grid.r ** 2)
    shape = (spec.n0,) + grid.shape
    w = np.zeros(shape)
    ds_w = np.zeros(shape)
    if data.exact is not None:
        for i, text in enumerate(data.exact):
            u = parse_expression(text)
            w[i] = sample(u, t, grid)
            ds_w[i] = (s0 / t) * sample(sp.diff(u, T_SYMBOL), t, grid)
        return w, ds_w
    support = 0.5 * (s0 * s0 - 1.0)
    for i, component in enumerate(data.components):
        for profile in (component.value, component.ds):
            if profile.kind != "expression" and profile.support_radius >= support:
                raise DomainError(
                    f"initial profile for component {i + 1} reaches r={profile.support_radius:.4g}, "
                    f"outside the support radius {support:.4g} of H_{s0}"
                )
        w[i] = sample(profile_expression(component.value), t, grid)
        ds_w[i] = sample(profile_expression(component.ds), t, grid)
    return w, ds_w


def forcing_expressions(forcing: Optional[Sequence], n0: int) -> Optional[List[sp.Expr]]:
    if forcing is None:
        return None
    exprs = [parse_expression(f) for f in forcing]
    if all(e == 0 for e in exprs):
        return None
    if len(exprs) != n0:
        raise DomainError(f"{len(exprs)} forcing terms given for n0={n0}")
    return exprs
