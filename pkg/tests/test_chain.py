"""Tests for the chain engine: evolution, post-selection, pointer statistics."""
import math

import numpy as np
import pytest
import torch

from conftest import make_chain
from simulation.chain_torch import (
    Chain,
    WeakModule,
    chain_with_gammas,
    coupling_unitary,
    evolve,
    kraus_branch,
    overlap,
    pointer_joint_expectation,
    pointer_state,
    post_select,
)
from simulation.errors import ChainTooLong, ZeroPostSelection
from simulation.qcore import (
    KET_H,
    KET_PLUS,
    KET_R,
    KET_V,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    Ket2,
    PauliObservable,
    PointerSetting,
    analyzer_basis,
    inner,
    sigma_phi,
)
from simulation.swv import weak_value_oracle

P = PointerSetting.PLUS
R = PointerSetting.CIRCULAR
I = PointerSetting.IDENTITY


def _np(t):
    return t.cpu().numpy()


def _random_ket(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return Ket2.from_amplitudes(*v)


def _random_observable(rng):
    return PauliObservable.from_direction(*rng.normal(size=3))


def test_weak_module_gamma_range():
    with pytest.raises(ValueError):
        WeakModule(SIGMA_Z, -0.1)
    with pytest.raises(ValueError):
        WeakModule(SIGMA_Z, 1.0)
    assert WeakModule(SIGMA_Z, math.pi / 4).gamma == pytest.approx(math.pi / 4)


def test_coupling_unitary_is_unitary():
    u = _np(coupling_unitary(PauliObservable.from_direction(1, 2, 3), 0.4))
    np.testing.assert_allclose(u @ u.conj().T, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(_np(coupling_unitary(SIGMA_Y, 0.0)), np.eye(4), atol=1e-12)


@pytest.mark.parametrize('system, sign', [(KET_H, 1), (KET_V, -1)])
def test_coupling_on_sigma_z_eigenstates(system, sign):
    g = 0.3
    u = _np(coupling_unitary(SIGMA_Z, g))
    state = np.kron(_np(system.vector()), [1, 0])
    expected = np.kron(_np(system.vector()), [math.cos(g), sign * math.sin(g)])
    np.testing.assert_allclose(u @ state, expected, atol=1e-12)


def test_evolve_gamma_zero_is_identity():
    chain = make_chain([SIGMA_X], 0.0, psi_i=KET_R)
    amps = _np(evolve(chain).flat())
    np.testing.assert_allclose(amps, [KET_R.a0, 0, KET_R.a1, 0], atol=1e-12)


def test_evolve_eigenstate_factorizes():
    g = 0.2
    chain = make_chain([SIGMA_Z, SIGMA_Z], g, psi_i=KET_H)
    pointer = np.array([math.cos(g), math.sin(g)])
    expected = np.kron([1, 0], np.kron(pointer, pointer))
    np.testing.assert_allclose(_np(evolve(chain).flat()), expected, atol=1e-12)


def test_evolve_is_normalized_and_capped():
    chain = make_chain([SIGMA_Y, SIGMA_Z, sigma_phi(0.3), SIGMA_X], 0.35)
    assert float(torch.linalg.vector_norm(evolve(chain).flat())) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ChainTooLong):
        evolve(make_chain([SIGMA_Z] * 13, 0.1))


def test_post_select_examples():
    ps = post_select(evolve(make_chain([SIGMA_Z], 0.0)), KET_H)
    assert ps.norm_sq == pytest.approx(0.5)
    np.testing.assert_allclose(_np(ps.flat()), [1 / math.sqrt(2), 0], atol=1e-12)

    assert pointer_state(make_chain([SIGMA_Z], 0.0, psi_f=KET_PLUS)).norm_sq == pytest.approx(1.0)

    g = 0.25
    ps = pointer_state(make_chain([SIGMA_Z], g))
    assert ps.norm_sq == pytest.approx(0.5)
    np.testing.assert_allclose(_np(ps.flat()) * math.sqrt(2), [math.cos(g), math.sin(g)], atol=1e-12)


def test_joint_expectation_examples():
    g = 0.3
    ps = pointer_state(make_chain([SIGMA_Z], g))
    assert pointer_joint_expectation(ps, [I]) == pytest.approx(1.0)
    assert pointer_joint_expectation(ps, [P]) == pytest.approx(math.sin(2 * g), abs=1e-12)
    assert pointer_joint_expectation(ps, [R]) == pytest.approx(0.0, abs=1e-12)


def test_zero_post_selection_raises():
    ps = pointer_state(make_chain([SIGMA_Z], 0.0, psi_i=KET_H, psi_f=KET_V))
    with pytest.raises(ZeroPostSelection):
        pointer_joint_expectation(ps, [P])


def test_single_pauli_closed_form_randomized():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 100:
        psi_i, psi_f, obs = _random_ket(rng), _random_ket(rng), _random_observable(rng)
        if abs(inner(psi_f, psi_i)) <= 0.1:
            continue
        g = float(rng.uniform(1e-3, math.pi / 4))
        w = weak_value_oracle(psi_i, psi_f, [obs])
        denominator = math.cos(g) ** 2 + math.sin(g) ** 2 * abs(w) ** 2
        ps = pointer_state(Chain(psi_i, (WeakModule(obs, g),), psi_f))
        assert pointer_joint_expectation(ps, [P]) == pytest.approx(
            math.sin(2 * g) * w.real / denominator, abs=1e-12)
        assert pointer_joint_expectation(ps, [R]) == pytest.approx(
            math.sin(2 * g) * w.imag / denominator, abs=1e-12)
        checked += 1


def test_kraus_branch_examples():
    g = 0.4
    zero = kraus_branch(WeakModule(SIGMA_Z, 0.0), KET_H)
    one = kraus_branch(WeakModule(SIGMA_Z, 0.0), KET_V)
    np.testing.assert_allclose(_np(zero), np.eye(2), atol=1e-12)
    np.testing.assert_allclose(_np(one), np.zeros((2, 2)), atol=1e-12)
    k_plus = kraus_branch(WeakModule(SIGMA_Z, g), KET_PLUS)
    expected = (math.cos(g) * np.eye(2) + math.sin(g) * np.diag([1, -1])) / math.sqrt(2)
    np.testing.assert_allclose(_np(k_plus), expected, atol=1e-12)


@pytest.mark.parametrize('setting', list(PointerSetting))
@pytest.mark.parametrize('obs', [SIGMA_Y, sigma_phi(1.1), PauliObservable.from_direction(-1, 0.5, 2)])
def test_kraus_completeness(obs, setting):
    module = WeakModule(obs, 0.6)
    total = sum(_np(k).conj().T @ _np(k) for k in (kraus_branch(module, v) for v in analyzer_basis(setting)))
    np.testing.assert_allclose(total, np.eye(2), atol=1e-12)


def test_order_sensitivity_for_noncommuting_observables():
    yz = evolve(make_chain([SIGMA_Y, SIGMA_Z], 0.3)).flat()
    zy = evolve(make_chain([SIGMA_Z, SIGMA_Y], 0.3)).flat()
    assert float(torch.linalg.vector_norm(yz - zy)) > 1e-3


def test_commuting_observables_are_order_invariant():
    a = pointer_state(make_chain([SIGMA_Z, sigma_phi(0.0)], [0.2, 0.5]))
    b = pointer_state(make_chain([sigma_phi(0.0), SIGMA_Z], [0.5, 0.2]))
    for settings in ([P, R], [R, R], [P, P]):
        assert pointer_joint_expectation(a, settings) == pytest.approx(
            pointer_joint_expectation(b, settings[::-1]), abs=1e-12)


def test_zero_strength_modules_change_nothing():
    base = make_chain([SIGMA_Y, SIGMA_Z], 0.3)
    padded = make_chain([SIGMA_Y, SIGMA_X, SIGMA_Z], [0.3, 0.0, 0.3])
    for settings in ([P, P], [P, R], [R, R]):
        padded_settings = [settings[0], I, settings[1]]
        assert pointer_joint_expectation(pointer_state(base), settings) == pytest.approx(
            pointer_joint_expectation(pointer_state(padded), padded_settings), abs=1e-12)


def test_first_order_limit_of_single_pointer():
    chain = make_chain([sigma_phi(0.4)], 0.1, psi_i=KET_PLUS, psi_f=Ket2.from_amplitudes(1, 0.3j))
    w = weak_value_oracle(chain.psi_i, chain.psi_f, chain.observables)
    ov = overlap(chain)

    def error(g):
        exact = _np(pointer_state(chain_with_gammas(chain, [g])).flat())
        # exp(-i g W sigma_y)|0> = cos(gW)|0> + sin(gW)|1>
        approx = ov * np.array([np.cos(g * w), np.sin(g * w)])
        return np.linalg.norm(exact - approx)

    assert error(0.02) / error(0.01) >= 3.9
