import pytest
import sympy as sp

from services.commutators import (FrameDerivative, all_table_entries, boost_bracket, commutator_coefficients,
                                  commutator_expansion, entry_holds, expansion_holds, frame_commutator_expansion,
                                  generic_field, symbolic_apply)
from services.fields import T_SYMBOL, MultiIndex, boost, translation
from utils.errors import DomainError


def test_boost_time_commutator():
    entry = commutator_coefficients(boost(1), FrameDerivative(frame="natural", index=0))
    assert entry.table_name == "Theta"
    assert entry.nonzero() == {1: -1}


def test_translations_commute_with_natural_frame():
    entry = commutator_coefficients(translation(2), FrameDerivative.parse("d3"))
    assert entry.nonzero() == {}


def test_translation_against_semi_frame_carries_inverse_t():
    entry = commutator_coefficients(translation(1), FrameDerivative.parse("dbar1"))
    # [d_1, (x^1/t) d_t + d_1] = (1/t) d_t
    assert entry.nonzero() == {0: 1 / T_SYMBOL}


def test_table_has_every_pair():
    entries = all_table_entries()
    assert len(entries) == 7 * 2 * 4
    assert {(e.field, e.derivative) for e in entries} >= {("L3", "dbar2"), ("d0", "d0")}


@pytest.mark.parametrize("entry", all_table_entries(), ids=lambda e: f"{e.field}-{e.derivative}")
def test_table_entries_hold_exactly(entry):
    assert entry_holds(entry)


def test_boost_bracket_matches_symbolic_action():
    u = generic_field()
    c_b, c_a = boost_bracket(1, 2)
    lhs = symbolic_apply(boost(1), symbolic_apply(boost(2), u)) - symbolic_apply(boost(2), symbolic_apply(boost(1), u))
    # Omega_12 = x1 d2 - x2 d1, rewritten in boosts
    rhs = c_b * symbolic_apply(boost(2), u) + c_a * symbolic_apply(boost(1), u)
    assert sp.simplify(lhs - rhs) == 0


@pytest.mark.parametrize("label,alpha", [("L1", 0), ("L2,L1", 1), ("d0,L3", 3)])
def test_commutator_expansion_holds(label, alpha):
    I = MultiIndex.parse(label)
    expansion = commutator_expansion(I, alpha)
    assert expansion_holds(I, FrameDerivative(frame="natural", index=alpha), expansion)


def test_translations_give_empty_expansion():
    assert commutator_expansion(MultiIndex.parse("d1,d2"), 0) == {}


@pytest.mark.parametrize("label,b", [("L1", 1), ("L1,d2", 2)])
def test_frame_commutator_expansion_holds(label, b):
    I = MultiIndex.parse(label)
    expansion = frame_commutator_expansion(I, b)
    assert expansion_holds(I, FrameDerivative(frame="semi", index=b), expansion)


def test_expansions_stop_at_order_three():
    with pytest.raises(DomainError):
        commutator_expansion(MultiIndex.parse("L1,L1,L1,L1"), 0)
