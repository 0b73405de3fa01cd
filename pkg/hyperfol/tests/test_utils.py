"""
Shared constants and builders for the hyperfol tests.
"""
import os
import sys

import numpy as np
import sympy as sp

# Add parent directory to path to enable proper imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from models.grid import Grid, GridSlice  # noqa: E402
from models.system import SystemSpec  # noqa: E402
from services.fields import T_SYMBOL, X1, X2, X3  # noqa: E402
from services.profiles import parse_expression, sample  # noqa: E402

# Sample coefficient data that can be reused across tests
SAMPLE_NULL_WAVE_SPEC = {
    "name": "null-wave",
    "n0": 1,
    "j0": 1,
    "masses": [0.0],
    "sigma": 1.0,
    "components": ["u"],
    "P": [[[1, 0, 0, 1, 1], 1.0], [[1, 1, 1, 1, 1], -1.0],
          [[1, 2, 2, 1, 1], -1.0], [[1, 3, 3, 1, 1], -1.0]],
}

SAMPLE_NONNULL_WAVE_SPEC = {
    "name": "nonnull-wave",
    "n0": 1,
    "j0": 1,
    "masses": [0.0],
    "components": ["u"],
    "P": [[[1, 0, 0, 1, 1], 1.0]],
}

# R_1^{11} couples the wave component to itself without derivatives
SAMPLE_BLOWUP_SPEC = {
    "name": "wave-square",
    "n0": 2,
    "j0": 1,
    "masses": [0.0, 1.0],
    "components": ["u", "v"],
    "R": [[[1, 1, 1], 1.0]],
}

SAMPLE_KG_SPEC = {
    "name": "linear-kg",
    "n0": 1,
    "j0": 0,
    "masses": [1.0],
    "components": ["v"],
}

SAMPLE_QUASILINEAR_SPEC = {
    "name": "quasilinear-wave",
    "n0": 1,
    "j0": 1,
    "masses": [0.0],
    "components": ["u"],
    "B": [[[1, 1, 0, 0, 1], 0.1]],
}

# B_1^{1 00 1} = 0.6 under a unit bump exceeds the principal smallness bound 0.5
SAMPLE_BREAKDOWN_SPEC = dict(SAMPLE_QUASILINEAR_SPEC, name="quasilinear-breakdown", B=[[[1, 1, 0, 0, 1], 0.6]])

SAMPLE_POINT = (5.0, (3.0, 4.0, 0.0))

SAMPLE_BUMP = "Piecewise(((1 - (x1**2 + x2**2 + x3**2))**6, x1**2 + x2**2 + x3**2 < 1), (0, True))"

# C^5 bump of radius 1.2, the shape of the forced Klein-Gordon solution
SMOOTH_BUMP = "Piecewise(((1 - (x1**2 + x2**2 + x3**2)/1.44)**6, x1**2 + x2**2 + x3**2 < 1.44), (0, True))"


def spec_from(data: dict) -> SystemSpec:
    return SystemSpec.parse_obj(data)


def gaussian(width: float = 1.0, center=(0.0, 0.0, 0.0)) -> sp.Expr:
    """exp(-|x - c|^2 / width^2), time independent"""
    rho_sq = (X1 - center[0]) ** 2 + (X2 - center[1]) ** 2 + (X3 - center[2]) ** 2
    return sp.exp(-rho_sq / width ** 2)


def standing_wave(frequency: float = 1.0) -> sp.Expr:
    return sp.cos(frequency * T_SYMBOL) * gaussian(0.5)


def slice_from_expression(expr, s: float, grid: Grid, name: str = "u") -> GridSlice:
    """One-component slice holding the exact values of expr and its time derivative on H_s"""
    expr = parse_expression(expr)
    t = np.sqrt(s * s + grid.r ** 2)
    w = sample(expr, t, grid)[None]
    dt_w = sample(sp.diff(expr, T_SYMBOL), t, grid)[None]
    return GridSlice.from_frame_data(s, grid, w, (s / t) * dt_w, [name])
