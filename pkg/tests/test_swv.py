"""Tests for weak-value oracles, extraction formulas and expansion fits."""
import itertools
import math

import numpy as np
import pytest

from conftest import make_chain
from simulation import swv
from simulation.chain_torch import pointer_joint_expectation, pointer_state
from simulation.errors import (
    AllIdentity,
    FitDiverged,
    MissingSetting,
    NoPhysicalRoot,
    OrthogonalPostSelection,
    ZeroStrength,
)
from simulation.qcore import (
    KET_H,
    KET_PLUS,
    KET_R,
    KET_V,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    Ket2,
    PointerSetting,
    sigma_phi,
)

P = PointerSetting.PLUS
R = PointerSetting.CIRCULAR
I = PointerSetting.IDENTITY


def _expectations(chain, combos):
    ps = pointer_state(chain)
    return {combo: pointer_joint_expectation(ps, combo) for combo in combos}


def test_oracle_examples(triple_observables, triple_oracle):
    assert swv.weak_value_oracle(KET_PLUS, KET_H, [SIGMA_Z]) == pytest.approx(1.0)
    assert swv.weak_value_oracle(KET_PLUS, KET_PLUS, [SIGMA_Z]) == pytest.approx(0.0, abs=1e-12)
    assert swv.weak_value_oracle(KET_PLUS, KET_H, [SIGMA_Y, SIGMA_Z]) == pytest.approx(-1j)
    assert swv.weak_value_oracle(KET_PLUS, KET_H, triple_observables) == pytest.approx(triple_oracle, abs=1e-12)


def test_oracle_rejects_orthogonal_post_selection():
    with pytest.raises(OrthogonalPostSelection):
        swv.weak_value_oracle(KET_H, KET_V, [SIGMA_Z])


def test_oracle_linearity_and_involution():
    psi_i, psi_f = Ket2.from_amplitudes(0.8, 0.6j), Ket2.from_amplitudes(1, 0.5)
    phi = 0.3
    # sigma_phi = cos 2phi sigma_z + sin 2phi sigma_x
    lhs = swv.weak_value_oracle(psi_i, psi_f, [SIGMA_Y, sigma_phi(phi)])
    rhs = (math.cos(2 * phi) * swv.weak_value_oracle(psi_i, psi_f, [SIGMA_Y, SIGMA_Z])
           + math.sin(2 * phi) * swv.weak_value_oracle(psi_i, psi_f, [SIGMA_Y, SIGMA_X]))
    assert lhs == pytest.approx(rhs, abs=1e-12)
    a = sigma_phi(phi)
    collapsed = swv.weak_value_oracle(psi_i, psi_f, [SIGMA_X, a, a, SIGMA_Z])
    assert collapsed == pytest.approx(swv.weak_value_oracle(psi_i, psi_f, [SIGMA_X, SIGMA_Z]), abs=1e-12)


@pytest.mark.parametrize('settings, part', [
    ((P, P, P), swv.Part.REAL),
    ((R, R, R), swv.Part.IMAG),
    ((R,), swv.Part.IMAG),
    ((R, I, R), swv.Part.REAL),
])
def test_parity_rule(settings, part):
    assert swv.parity_rule(settings) is part


def test_parity_rule_all_identity():
    with pytest.raises(AllIdentity):
        swv.parity_rule((I, I))


def test_single_firstorder_examples():
    assert swv.extract_single_firstorder(0.0, 0.0, 0.1) == 0
    assert swv.extract_single_firstorder(0.2, 0.0, 0.1) == pytest.approx(1.0)
    with pytest.raises(ZeroStrength):
        swv.extract_single_firstorder(0.1, 0.0, 0.0)
    g = 0.01
    e = _expectations(make_chain([SIGMA_Z], g), [(P,), (R,)])
    assert swv.extract_single_firstorder(e[(P,)], e[(R,)], g) == pytest.approx(1.0, abs=1e-3)


def test_single_exact_examples():
    g25, g30 = math.radians(25), math.radians(30)
    assert swv.extract_single_exact(math.sin(2 * g25), 0.0, g25) == pytest.approx(1.0, abs=1e-12)
    assert swv.extract_single_exact(0.0, math.sin(2 * g30), g30) == pytest.approx(1j, abs=1e-12)
    assert swv.extract_single_exact(0.0, 0.0, 0.3) == 0
    with pytest.raises(NoPhysicalRoot):
        swv.extract_single_exact(0.9, 0.9, 0.3)
    with pytest.raises(ZeroStrength):
        swv.extract_single_exact(0.1, 0.1, 0.0)


def test_single_exact_matches_oracle_for_circular_post_selection():
    g = math.radians(30)
    chain = make_chain([SIGMA_Z], g, psi_f=KET_R)
    assert swv.weak_value_oracle(KET_PLUS, KET_R, [SIGMA_Z]) == pytest.approx(1j)
    e = _expectations(chain, [(P,), (R,)])
    assert swv.extract_single_exact(e[(P,)], e[(R,)], g) == pytest.approx(1j, abs=1e-12)


@pytest.mark.parametrize('psi_f', [KET_H, Ket2.from_amplitudes(1, 0.4), Ket2.from_amplitudes(1, 0.3j)])
def test_single_exact_is_strength_independent(psi_f):
    values = []
    for deg in (25, 30):
        g = math.radians(deg)
        e = _expectations(make_chain([sigma_phi(0.2)], g, psi_f=psi_f), [(P,), (R,)])
        values.append(swv.extract_single_exact(e[(P,)], e[(R,)], g))
    assert values[0] == pytest.approx(values[1], abs=1e-9)
    assert values[0] == pytest.approx(swv.weak_value_oracle(KET_PLUS, psi_f, [sigma_phi(0.2)]), abs=1e-9)


def test_leading_order_weights_single_pointer():
    assert swv.leading_order_weights((P,)) == {frozenset(): 1, frozenset({0}): 1}
    assert swv.leading_order_weights((R,)) == {frozenset(): 1j, frozenset({0}): -1j}
    with pytest.raises(ValueError):
        swv.leading_order_weights((P, I))


def test_pair_firstorder_recovers_minus_i():
    g = 0.005
    chain = make_chain([SIGMA_Y, SIGMA_Z], g)
    e = _expectations(chain, [(P, P), (P, R)])
    value = swv.extract_pair_firstorder(e, -1j, 1.0, g)
    assert value == pytest.approx(-1j, abs=2e-3)


def test_pair_firstorder_trivial_cases():
    assert swv.extract_pair_firstorder({(P, P): 0.0, (P, R): 0.0}, 0, 0, 0.1) == 0
    g = 0.005
    e = _expectations(make_chain([SIGMA_Z, SIGMA_Z], g), [(P, P), (R, P)])
    assert swv.extract_pair_firstorder(e, 1.0, 1.0, g) == pytest.approx(1.0, abs=1e-3)


def test_pair_firstorder_missing_settings():
    with pytest.raises(MissingSetting):
        swv.extract_pair_firstorder({(P, R): 0.1}, 0, 0, 0.1)
    with pytest.raises(MissingSetting):
        swv.extract_pair_firstorder({(P, P): 0.1, (P, R): 0.1, (R, P): 0.1}, 0, 0, 0.1)


def _lower(chain):
    return {s: swv.subset_oracle(chain, s)
            for size in (1, 2) for s in map(frozenset, itertools.combinations(range(3), size))}


def test_triple_firstorder_all_sigma_z():
    g = 0.005
    chain = make_chain([SIGMA_Z] * 3, g)
    e = _expectations(chain, [(P, P, P), (R, R, R)])
    assert swv.extract_triple_firstorder(e[(P, P, P)], e[(R, R, R)], _lower(chain), g) == pytest.approx(1.0, abs=1e-3)
    assert swv.extract_triple_firstorder(0.0, 0.0, {s: 0 for s in _lower(chain)}, g) == 0


def test_triple_firstorder_example_chain(triple_observables, triple_oracle):
    g = 0.02
    chain = make_chain(triple_observables, g)
    e = _expectations(chain, [(P, P, P), (R, R, R)])
    value = swv.extract_triple_firstorder(e[(P, P, P)], e[(R, R, R)], _lower(chain), g)
    assert value == pytest.approx(triple_oracle, abs=5e-2)


def test_triple_firstorder_missing_lower():
    with pytest.raises(MissingSetting):
        swv.extract_triple_firstorder(0.1, 0.1, {frozenset({0}): 1}, 0.1)


def test_general_firstorder_agrees_with_triple(triple_observables, triple_oracle):
    g = 0.01
    chain = make_chain(triple_observables, g)
    e = _expectations(chain, [(P, P, P), (P, P, R)])
    general = swv.extract_firstorder_general(e[(P, P, P)], e[(P, P, R)], _lower(chain), g, 3)
    assert general == pytest.approx(triple_oracle, abs=2e-2)


@pytest.mark.parametrize('degrees', [25, 30, 40])
def test_sequence_exact_recovers_oracle(triple_observables, triple_oracle, degrees):
    g = math.radians(degrees)
    chain = make_chain(triple_observables, g)
    combos = list(itertools.product((P, R), repeat=3))
    ps = pointer_state(chain)
    e = {c: pointer_joint_expectation(ps, c) for c in combos}
    value = swv.extract_sequence_exact(e, ps.norm_sq, 0.5, g)
    assert value == pytest.approx(triple_oracle, abs=1e-9)


def test_sequence_exact_errors():
    with pytest.raises(MissingSetting):
        swv.extract_sequence_exact({(P,): 0.1}, 0.5, 0.5, 0.1)
    with pytest.raises(ZeroStrength):
        swv.extract_sequence_exact({(P,): 0.1, (R,): 0.0}, 0.5, 0.5, 0.0)
    with pytest.raises(OrthogonalPostSelection):
        swv.extract_sequence_exact({(P,): 0.1, (R,): 0.0}, 0.5, 0.0, 0.1)


def test_expansion_single_pointer_coefficients():
    chain = make_chain([SIGMA_Z], 0.1)
    grid = swv.default_gamma_grid(1)
    assert swv.expansion_coefficients(chain, (P,), grid).coefficient(1) == pytest.approx(2.0, abs=1e-6)
    assert swv.expansion_coefficients(chain, (R,), grid).coefficient(1) == pytest.approx(0.0, abs=1e-6)


def test_expansion_triple_sigma_z_leading_coefficient():
    chain = make_chain([SIGMA_Z] * 3, 0.1)
    table = swv.expansion_coefficients(chain, (P, P, P), swv.default_gamma_grid(3))
    assert table.leading == pytest.approx(8.0, abs=1e-6)
    assert table.residual < 1e-9


@pytest.mark.parametrize('settings', list(itertools.product((P, R), repeat=3)))
def test_weight_table_matches_fit(triple_observables, settings):
    chain = make_chain(triple_observables, 0.1)
    table = swv.expansion_coefficients(chain, settings, swv.default_gamma_grid(3))
    known = {s: swv.subset_oracle(chain, s) for size in range(1, 4)
             for s in map(frozenset, itertools.combinations(range(3), size))}
    known[frozenset()] = 1
    predicted = swv._bracket(swv.leading_order_weights(settings), known, 3)
    assert abs(predicted.imag) < 1e-9
    assert table.leading == pytest.approx(predicted.real, abs=1e-6)


def test_parity_suppression_for_real_chain():
    chain = make_chain([SIGMA_Z, SIGMA_X, sigma_phi(0.4)], 0.1)
    grid = swv.default_gamma_grid(3)
    for settings in itertools.product((P, R), repeat=3):
        table = swv.expansion_coefficients(chain, settings, grid)
        if swv.parity_rule(settings) is swv.Part.IMAG:
            assert abs(table.leading) < 1e-9


def test_expansion_grid_validation():
    chain = make_chain([SIGMA_Z], 0.1)
    with pytest.raises(ValueError):
        swv.expansion_coefficients(chain, (P,), [0.01, 0.02])
    with pytest.raises(ValueError):
        swv.expansion_coefficients(chain, (P,), np.linspace(0.1, 0.5, 20))


def test_expansion_reports_divergent_fit():
    chain = make_chain([SIGMA_Z], 0.1, psi_f=Ket2.from_amplitudes(1, -0.9))
    # a low degree cannot follow the large-|W| curve
    with pytest.raises(FitDiverged):
        swv.expansion_coefficients(chain, (P,), np.linspace(0.05, 0.3, 12), degree=1)
