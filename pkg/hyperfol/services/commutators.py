"""
Exact commutator coefficient tables for the admissible fields.

    [L_a, d_beta]    = Theta_{a beta}^gamma d_gamma
    [d_alpha, dbar_beta] = t^{-1} Gammabar_{alpha beta}^gamma d_gamma
    [L_a, dbar_beta] = Thetabar_{a beta}^gamma dbar_gamma

Entries are sympy expressions in (t, x1, x2, x3) so identities can be
checked as equalities of rational functions. Higher-order families
[Z^I, d_alpha] and [Z^I, dbar_b] are built by induction for |I| <= 3.
"""

import logging
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import sympy as sp
from pydantic import BaseModel, validator

from services.fields import ADMISSIBLE_FIELDS, AdmissibleField, MultiIndex, SPACETIME_SYMBOLS, T_SYMBOL
from utils.errors import DomainError

logger = logging.getLogger(__name__)

X_SYMBOLS = SPACETIME_SYMBOLS[1:]
MAX_EXPANSION_ORDER = 3


class FrameDerivative(BaseModel):
    """Natural d_beta or semi-hyperboloidal dbar_beta"""
    frame: str
    index: int

    class Config:
        allow_mutation = False

    @validator("frame")
    def known_frame(cls, frame):
        if frame not in ("natural", "semi"):
            raise ValueError(f"unknown frame '{frame}'")
        return frame

    @validator("index")
    def index_in_range(cls, index):
        if not 0 <= index <= 3:
            raise ValueError(f"frame index {index} outside 0..3")
        return index

    @property
    def name(self) -> str:
        return f"d{self.index}" if self.frame == "natural" else f"dbar{self.index}"

    @classmethod
    def parse(cls, name: str) -> "FrameDerivative":
        if name.startswith("dbar"):
            return cls(frame="semi", index=int(name[4:]))
        if name.startswith("d"):
            return cls(frame="natural", index=int(name[1:]))
        raise ValueError(f"cannot parse frame derivative '{name}'")


class CommutatorEntry(BaseModel):
    """
    [field, derivative] u = sum_gamma coefficients[gamma] * basis_gamma u,
    with basis the natural frame or the semi-hyperboloidal frame.
    `table` holds the raw Theta / Gammabar / Thetabar values and
    `prefactor` the t^{-1} carried by Gammabar.
    """
    field: str
    derivative: str
    basis: str
    table_name: str
    table: List[sp.Expr]
    prefactor: sp.Expr = sp.Integer(1)

    class Config:
        arbitrary_types_allowed = True

    @property
    def coefficients(self) -> List[sp.Expr]:
        return [sp.simplify(self.prefactor * value) for value in self.table]

    def nonzero(self) -> Dict[int, sp.Expr]:
        return {gamma: value for gamma, value in enumerate(self.coefficients) if value != 0}


def _delta(i: int, j: int) -> sp.Integer:
    return sp.Integer(1 if i == j else 0)


def theta(a: int, beta: int) -> List[sp.Expr]:
    """Theta_{a beta}^gamma for gamma = 0..3"""
    if beta == 0:
        return [-_delta(a, gamma) for gamma in range(4)]
    return [-_delta(a, beta) * _delta(gamma, 0) for gamma in range(4)]


def gamma_bar(alpha: int, beta: int) -> List[sp.Expr]:
    if beta == 0:
        return [sp.Integer(0)] * 4
    if alpha == 0:
        return [-X_SYMBOLS[beta - 1] / T_SYMBOL * _delta(gamma, 0) for gamma in range(4)]
    return [_delta(alpha, beta) * _delta(gamma, 0) for gamma in range(4)]


def theta_bar(a: int, beta: int) -> List[sp.Expr]:
    xa_over_t = X_SYMBOLS[a - 1] / T_SYMBOL
    if beta == 0:
        return [-_delta(a, gamma) + xa_over_t * _delta(gamma, 0) for gamma in range(4)]
    return [-X_SYMBOLS[beta - 1] / T_SYMBOL * _delta(a, gamma) for gamma in range(4)]


def commutator_coefficients(field: AdmissibleField, derivative: FrameDerivative) -> CommutatorEntry:
    label = dict(field=field.name, derivative=derivative.name)
    if derivative.frame == "natural":
        if not field.is_boost:
            return CommutatorEntry(basis="natural", table_name="zero", table=[sp.Integer(0)] * 4, **label)
        return CommutatorEntry(basis="natural", table_name="Theta", table=theta(field.index, derivative.index), **label)
    if not field.is_boost:
        return CommutatorEntry(basis="natural", table_name="Gammabar",
                               table=gamma_bar(field.index, derivative.index),
                               prefactor=1 / T_SYMBOL, **label)
    return CommutatorEntry(basis="semi", table_name="Thetabar",
                           table=theta_bar(field.index, derivative.index), **label)


def all_table_entries() -> List[CommutatorEntry]:
    return [commutator_coefficients(z, FrameDerivative(frame=frame, index=beta))
            for z in ADMISSIBLE_FIELDS for frame in ("natural", "semi") for beta in range(4)]


# Symbolic action of the fields --------------------------------------------------

def symbolic_apply(field: AdmissibleField, expr: sp.Expr) -> sp.Expr:
    if field.is_boost:
        a = field.index
        return X_SYMBOLS[a - 1] * sp.diff(expr, T_SYMBOL) + T_SYMBOL * sp.diff(expr, X_SYMBOLS[a - 1])
    return sp.diff(expr, SPACETIME_SYMBOLS[field.index])


def symbolic_apply_multi(I: Sequence[AdmissibleField], expr: sp.Expr) -> sp.Expr:
    for z in reversed(list(I)):
        expr = symbolic_apply(z, expr)
    return expr


def symbolic_frame_derivative(derivative: FrameDerivative, expr: sp.Expr) -> sp.Expr:
    beta = derivative.index
    if derivative.frame == "natural" or beta == 0:
        return sp.diff(expr, SPACETIME_SYMBOLS[beta])
    return X_SYMBOLS[beta - 1] / T_SYMBOL * sp.diff(expr, T_SYMBOL) + sp.diff(expr, X_SYMBOLS[beta - 1])


def boost_bracket(a: int, b: int) -> Tuple[sp.Expr, sp.Expr]:
    """[L_a, L_b] = c_b L_b + c_a L_a, returned as (c_b, c_a) = (x^a/t, -x^b/t)"""
    return (X_SYMBOLS[a - 1] / T_SYMBOL, -X_SYMBOLS[b - 1] / T_SYMBOL)


def generic_field() -> sp.Expr:
    return sp.Function("u")(*SPACETIME_SYMBOLS)


def entry_holds(entry: CommutatorEntry, u: Optional[sp.Expr] = None) -> bool:
    """Apply both sides to a generic function and compare exactly"""
    u = generic_field() if u is None else u
    field = AdmissibleField.parse(entry.field)
    derivative = FrameDerivative.parse(entry.derivative)
    lhs = (symbolic_apply(field, symbolic_frame_derivative(derivative, u))
           - symbolic_frame_derivative(derivative, symbolic_apply(field, u)))
    basis = [FrameDerivative(frame=entry.basis, index=gamma) for gamma in range(4)]
    rhs = sum(c * symbolic_frame_derivative(d, u) for c, d in zip(entry.coefficients, basis))
    return sp.simplify(sp.expand(lhs - rhs)) == 0


# Higher-order families ----------------------------------------------------------

ExpansionKey = Tuple[Tuple[str, ...], int]


def _names(fields: Sequence[AdmissibleField]) -> Tuple[str, ...]:
    return tuple(z.name for z in fields)


def _add(terms: Dict[ExpansionKey, sp.Expr], key: ExpansionKey, value) -> None:
    terms[key] = sp.simplify(terms.get(key, sp.Integer(0)) + value)


def commutator_expansion(I: MultiIndex, alpha: int) -> Dict[ExpansionKey, sp.Expr]:
    """
    Constants theta with [Z^I, d_alpha] u = sum theta[(J, beta)] d_beta Z^J u,
    |J| < |I|. Keys hold J as a tuple of field names.
    """
    if I.order > MAX_EXPANSION_ORDER:
        raise DomainError(f"commutator families are tabulated up to order {MAX_EXPANSION_ORDER}")
    if I.order <= 0:
        return {}
    first, rest = I.fields[0], MultiIndex(fields=I.fields[1:])
    terms: Dict[ExpansionKey, sp.Expr] = {}
    if first.is_boost:
        for gamma, value in enumerate(theta(first.index, alpha)):
            if value != 0:
                _add(terms, (_names(rest.fields), gamma), value)
    for (j_names, gamma), value in commutator_expansion(rest, alpha).items():
        _add(terms, ((first.name,) + j_names, gamma), value)
        if first.is_boost:
            for delta, inner in enumerate(theta(first.index, gamma)):
                if inner != 0:
                    _add(terms, (j_names, delta), value * inner)
    return {key: value for key, value in terms.items() if value != 0}


def _splits(fields: Sequence[AdmissibleField]):
    """Ordered splittings of a multi-index into complementary subsequences"""
    positions = range(len(fields))
    for size in range(len(fields) + 1):
        for chosen in combinations(positions, size):
            first = [fields[i] for i in chosen]
            second = [fields[i] for i in positions if i not in chosen]
            yield first, second


def frame_commutator_expansion(I: MultiIndex, b: int) -> Dict[ExpansionKey, sp.Expr]:
    """
    Functions thetabar with [Z^I, dbar_b] u = sum thetabar[(J, gamma)] d_gamma Z^J u.
    """
    if I.order > MAX_EXPANSION_ORDER:
        raise DomainError(f"commutator families are tabulated up to order {MAX_EXPANSION_ORDER}")
    if I.order <= 0:
        return {}
    phi_row = [X_SYMBOLS[b - 1] / T_SYMBOL if gamma == 0 else _delta(gamma, b) for gamma in range(4)]
    terms: Dict[ExpansionKey, sp.Expr] = {}
    for first, second in _splits(I.fields):
        for gamma, coefficient in enumerate(phi_row):
            if coefficient == 0:
                continue
            derived = sp.simplify(symbolic_apply_multi(first, coefficient))
            if derived == 0:
                continue
            if first:
                _add(terms, (_names(second), gamma), derived)
            for (j_names, beta), value in commutator_expansion(MultiIndex(fields=second), gamma).items():
                _add(terms, (j_names, beta), derived * value)
    return {key: value for key, value in terms.items() if value != 0}


def expansion_holds(I: MultiIndex, derivative: FrameDerivative,
                    expansion: Dict[ExpansionKey, sp.Expr], u: Optional[sp.Expr] = None) -> bool:
    u = generic_field() if u is None else u
    lhs = (symbolic_apply_multi(I.fields, symbolic_frame_derivative(derivative, u))
           - symbolic_frame_derivative(derivative, symbolic_apply_multi(I.fields, u)))
    rhs = sp.Integer(0)
    for (j_names, beta), value in expansion.items():
        J = [AdmissibleField.parse(name) for name in j_names]
        rhs += value * sp.diff(symbolic_apply_multi(J, u), SPACETIME_SYMBOLS[beta])
    return sp.simplify(sp.expand(lhs - rhs)) == 0
