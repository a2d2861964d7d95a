"""PyTorch engine for chains of weak-measurement modules.

The joint state is a [2] * (N+1) tensor: axis 0 is the system, axis k is
pointer k. Flattened row-major this puts the system on the most
significant bit and pointer k on bit N-k.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence, Tuple

import torch

from . import config
from .device_setup import as_tensor, eye, setup_joint_state
from .errors import ChainTooLong, ZeroPostSelection
from .qcore import (
    Ket2,
    PauliObservable,
    PointerSetting,
    inner,
    observable_matrix,
    pauli,
    pointer_operator,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WeakModule:
    obs: PauliObservable
    gamma: float

    def __post_init__(self):
        gamma = float(self.gamma)
        if not math.isfinite(gamma) or gamma < 0.0 or gamma > math.pi / 4 + config.ALGEBRA_TOL:
            raise ValueError(f"gamma must lie in [0, pi/4], got {gamma!r}")
        object.__setattr__(self, 'gamma', gamma)


@dataclass(frozen=True)
class Chain:
    psi_i: Ket2
    modules: Tuple[WeakModule, ...]
    psi_f: Ket2

    def __post_init__(self):
        modules = tuple(self.modules)
        if not modules:
            raise ValueError("a chain needs at least one module")
        object.__setattr__(self, 'modules', modules)

    @property
    def n(self) -> int:
        return len(self.modules)

    @property
    def observables(self) -> Tuple[PauliObservable, ...]:
        return tuple(m.obs for m in self.modules)

    @property
    def gammas(self) -> Tuple[float, ...]:
        return tuple(m.gamma for m in self.modules)


@dataclass(frozen=True)
class JointState:
    n_pointers: int
    amplitudes: torch.Tensor

    def flat(self) -> torch.Tensor:
        return self.amplitudes.reshape(-1)


@dataclass(frozen=True)
class PointerState:
    """Unnormalized post-selected pointer amplitudes."""
    n_pointers: int
    amplitudes: torch.Tensor
    norm_sq: float

    def flat(self) -> torch.Tensor:
        return self.amplitudes.reshape(-1)


def chain_with_gammas(chain: Chain, gammas: Sequence[float]) -> Chain:
    if len(gammas) != chain.n:
        raise ValueError(f"expected {chain.n} strengths, got {len(gammas)}")
    modules = tuple(WeakModule(m.obs, g) for m, g in zip(chain.modules, gammas))
    return replace(chain, modules=modules)


def overlap(chain: Chain) -> complex:
    return inner(chain.psi_f, chain.psi_i)


def coupling_unitary(obs: PauliObservable, gamma: float) -> torch.Tensor:
    """exp(-i gamma sigma_A (x) sigma_y) = cos gamma I4 - i sin gamma sigma_A (x) sigma_y."""
    generator = torch.kron(observable_matrix(obs), pauli('y'))
    return math.cos(gamma) * eye(4) - 1j * math.sin(gamma) * generator


def _apply_coupling(state: torch.Tensor, unitary: torch.Tensor, pointer_axis: int) -> torch.Tensor:
    # U as [s', p', s, p]; contract (s, p) with axes (0, pointer_axis)
    u = unitary.reshape(2, 2, 2, 2)
    out = torch.tensordot(u, state, dims=([2, 3], [0, pointer_axis]))
    # out axes: s', p', remaining axes in order
    return torch.movedim(out, 1, pointer_axis)


def evolve(chain: Chain) -> JointState:
    n = chain.n
    if n > config.MAX_MODULES:
        raise ChainTooLong(f"chain has {n} modules, the cap is {config.MAX_MODULES}")

    state = setup_joint_state(chain.psi_i.vector(), n)
    for k, module in enumerate(chain.modules, start=1):
        if module.gamma == 0.0:
            continue
        state = _apply_coupling(state, coupling_unitary(module.obs, module.gamma), k)
    return JointState(n_pointers=n, amplitudes=state)


def post_select(joint: JointState, psi_f: Ket2) -> PointerState:
    bra = psi_f.vector().conj()
    amplitudes = torch.tensordot(bra, joint.amplitudes, dims=([0], [0]))
    norm_sq = float(torch.sum(torch.abs(amplitudes) ** 2))
    return PointerState(n_pointers=joint.n_pointers, amplitudes=amplitudes, norm_sq=norm_sq)


def pointer_state(chain: Chain) -> PointerState:
    return post_select(evolve(chain), chain.psi_f)


def pointer_joint_expectation(ps: PointerState, settings: Sequence[PointerSetting]) -> float:
    """<Phi| (x)_k O_k |Phi> / <Phi|Phi> for per-pointer settings."""
    if len(settings) != ps.n_pointers:
        raise ValueError(f"expected {ps.n_pointers} settings, got {len(settings)}")
    if ps.norm_sq <= config.ZERO_POSTSELECTION:
        raise ZeroPostSelection(f"post-selection weight {ps.norm_sq:.3e} is zero")

    phi = ps.amplitudes
    transformed = phi
    for axis, setting in enumerate(settings):
        if setting is PointerSetting.IDENTITY:
            continue
        op = pointer_operator(setting)
        transformed = torch.movedim(torch.tensordot(op, transformed, dims=([1], [axis])), 0, axis)

    value = torch.vdot(phi.reshape(-1), transformed.reshape(-1)).real / ps.norm_sq
    return float(value)


def kraus_branch(module: WeakModule, outcome: Ket2) -> torch.Tensor:
    """<outcome|_p U |0>_p as a 2x2 system operator.

    Closed form: cos gamma conj(v0) I + sin gamma conj(v1) sigma_A,
    using sigma_y|0> = i|1>.
    """
    u = coupling_unitary(module.obs, module.gamma).reshape(2, 2, 2, 2)
    bra = outcome.vector().conj()
    # u[s', p', s, p=0], contract p' with <outcome|
    return torch.tensordot(bra, u[:, :, :, 0], dims=([0], [1]))
