"""
Centered finite-difference stencils on uniform grids.

Arrays carry the three spatial axes last, so single fields (n, n, n)
and stacked components (n0, n, n, n) share one code path. Points
within the stencil half-width of the boundary are left at zero and
must not be read as derivatives.
"""

from typing import Dict, Tuple

import numpy as np

FIRST_DERIVATIVE: Dict[int, Tuple[float, ...]] = {
    2: (-0.5, 0.0, 0.5),
    4: (1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0),
}

SECOND_DERIVATIVE: Dict[int, Tuple[float, ...]] = {
    2: (1.0, -2.0, 1.0),
    4: (-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0),
}


def half_width(order: int) -> int:
    if order not in FIRST_DERIVATIVE:
        raise ValueError(f"stencil order must be 2 or 4, got {order}")
    return order // 2


def _apply(f: np.ndarray, axis: int, weights: Tuple[float, ...], scale: float) -> np.ndarray:
    axis = f.ndim - 3 + axis
    n = f.shape[axis]
    hw = len(weights) // 2
    out = np.zeros_like(f, dtype=float)
    target = [slice(None)] * f.ndim
    target[axis] = slice(hw, n - hw)
    acc = np.zeros_like(out[tuple(target)])
    for offset, weight in enumerate(weights):
        if weight == 0.0:
            continue
        source = [slice(None)] * f.ndim
        source[axis] = slice(offset, n - 2 * hw + offset)
        acc += weight * f[tuple(source)]
    out[tuple(target)] = acc * scale
    return out


def derivative(f: np.ndarray, axis: int, h: float, order: int = 4) -> np.ndarray:
    half_width(order)
    return _apply(f, axis, FIRST_DERIVATIVE[order], 1.0 / h)


def second_derivative(f: np.ndarray, axis: int, h: float, order: int = 4) -> np.ndarray:
    half_width(order)
    return _apply(f, axis, SECOND_DERIVATIVE[order], 1.0 / (h * h))


def mixed_derivative(f: np.ndarray, a: int, b: int, h: float, order: int = 4) -> np.ndarray:
    if a == b:
        return second_derivative(f, a, h, order)
    return derivative(derivative(f, a, h, order), b, h, order)


def gradient(f: np.ndarray, h: float, order: int = 4) -> np.ndarray:
    """Stack of the three spatial derivatives along a new leading axis"""
    return np.stack([derivative(f, a, h, order) for a in range(3)])


def laplacian(f: np.ndarray, h: float, order: int = 4) -> np.ndarray:
    return sum(second_derivative(f, a, h, order) for a in range(3))


def interior_mask(shape: Tuple[int, int, int], margin: int) -> np.ndarray:
    """True on points at least `margin` indices away from every face"""
    mask = np.zeros(shape, dtype=bool)
    if 2 * margin < min(shape):
        mask[margin:shape[0] - margin, margin:shape[1] - margin, margin:shape[2] - margin] = True
    return mask
