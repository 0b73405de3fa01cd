"""
Hyperboloidal foliation geometry.

Slices H_s = {t^2 - |x|^2 = s^2}, the cone K = {|x| < t - 1}, the
semi-hyperboloidal frame dbar_0 = d_t, dbar_a = (x^a/t) d_t + d_a and
the transition matrices between it and the natural frame. Everything
here is a pure function of (t, x).
"""

import logging
from typing import Sequence, Union

import numpy as np

from models.geometry import FoliationPoint, FrameMatrices, SemiFrameMetric
from models.grid import Grid
from models.system import CubicForm, QuadraticForm
from utils.errors import DomainError

logger = logging.getLogger(__name__)

MINKOWSKI = np.diag([1.0, -1.0, -1.0, -1.0])


def _as_vector(x: Sequence[float]) -> np.ndarray:
    vector = np.asarray(x, dtype=float).reshape(-1)
    if vector.shape != (3,):
        raise DomainError(f"spatial position must have 3 components, got {vector.shape}")
    return vector


def point_from_tx(t: float, x: Sequence[float]) -> FoliationPoint:
    """Build a point from the (t, x) chart; s stays None off the cone"""
    vector = _as_vector(x)
    r = float(np.linalg.norm(vector))
    s = float(np.sqrt(t * t - r * r)) if r < t else None
    return FoliationPoint(t=float(t), x=tuple(vector), s=s, r=r, in_cone=bool(r < t - 1.0))


def lift_to_hyperboloid(s: float, x: Sequence[float]) -> FoliationPoint:
    """
    Lift a spatial position onto H_s.

    Args:
        s: hyperbolic time, must be positive
        x: spatial position

    Returns:
        The point (sqrt(s^2 + |x|^2), x) with its cone flag
    """
    if s <= 0:
        raise DomainError(f"hyperbolic time must be positive, got s={s}")
    vector = _as_vector(x)
    r = float(np.linalg.norm(vector))
    t = float(np.sqrt(s * s + r * r))
    return FoliationPoint(t=t, x=tuple(vector), s=float(s), r=r, in_cone=bool(r < t - 1.0))


def slice_support_radius(s: float) -> float:
    """Largest r with r < t - 1 on H_s"""
    if s < 1:
        raise DomainError(f"slice H_s with s={s} < 1 does not meet the cone")
    return 0.5 * (s * s - 1.0)


def _require_inside_light_cone(p: FoliationPoint) -> None:
    if p.s is None or p.s <= 0:
        raise DomainError(f"point t={p.t}, r={p.r} is not strictly inside the light cone")


def frame_matrices(p: FoliationPoint) -> FrameMatrices:
    if p.t <= 0:
        raise DomainError(f"frame matrices need t > 0, got t={p.t}")
    ratio = p.position / p.t
    phi = np.eye(4)
    psi = np.eye(4)
    phi[1:, 0] = ratio
    psi[1:, 0] = -ratio
    return FrameMatrices(phi=phi, psi=psi, point=p)


def semi_frame_metric(p: FoliationPoint) -> SemiFrameMetric:
    _require_inside_light_cone(p)
    ratio = p.position / p.t
    m_up = -np.eye(4)
    m_up[0, 0] = (p.s / p.t) ** 2
    m_up[0, 1:] = ratio
    m_up[1:, 0] = ratio
    m_down = np.outer(ratio, ratio) - np.eye(3)
    m_down = np.block([[np.ones((1, 1)), ratio[None, :]],
                       [ratio[:, None], m_down]])
    return SemiFrameMetric(m_up=m_up, m_down=m_down, point=p)


def _coefficients(form: Union[QuadraticForm, CubicForm, np.ndarray]) -> np.ndarray:
    if isinstance(form, (QuadraticForm, CubicForm)):
        return form.coefficients
    return np.asarray(form, dtype=float)


def frame_transform_tensor2(T: Union[QuadraticForm, np.ndarray], p: FoliationPoint) -> QuadraticForm:
    """Tbar^{ab} = T^{a'b'} Psi_{a'}^a Psi_{b'}^b"""
    _require_inside_light_cone(p)
    psi = frame_matrices(p).psi
    return QuadraticForm(coefficients=psi.T @ _coefficients(T) @ psi)


def inverse_frame_transform_tensor2(Tbar: Union[QuadraticForm, np.ndarray], p: FoliationPoint) -> QuadraticForm:
    _require_inside_light_cone(p)
    phi = frame_matrices(p).phi
    return QuadraticForm(coefficients=phi.T @ _coefficients(Tbar) @ phi)


def frame_transform_tensor3(A: Union[CubicForm, np.ndarray], p: FoliationPoint) -> CubicForm:
    _require_inside_light_cone(p)
    psi = frame_matrices(p).psi
    coefficients = np.einsum("abc,ai,bj,ck->ijk", _coefficients(A), psi, psi, psi)
    return CubicForm(coefficients=coefficients)


def s_frame_transition(p: FoliationPoint) -> np.ndarray:
    """
    Matrix with d_alpha = M[alpha][beta] dhat_beta, where dhat_0 = d_s
    and dhat_a = d_a at fixed s are the evolution-chart derivatives.
    """
    _require_inside_light_cone(p)
    matrix = np.eye(4)
    matrix[0, 0] = p.t / p.s
    matrix[1:, 0] = -p.position / p.s
    return matrix


class SliceGeometry:
    """
    Homogeneous coefficient fields on H_s evaluated analytically at the
    grid points: t(x), the slice derivatives x^a/t of t, and s/t.
    """

    def __init__(self, s: float, grid: Grid):
        if s <= 0:
            raise DomainError(f"hyperbolic time must be positive, got s={s}")
        self.s = float(s)
        self.grid = grid
        self.t = np.sqrt(s * s + grid.r ** 2)
        self.tau = grid.x / self.t
        self.s_over_t = s / self.t


def frame_coefficient_fields(s: float, grid: Grid) -> SliceGeometry:
    return SliceGeometry(s, grid)
