"""Qubit primitives: kets, Pauli observables, pointer settings.

Basis convention used everywhere:
    |0> = |H>, |1> = |V>
    |+-> = (|0> +- |1>)/sqrt2
    |R> = (|0> + i|1>)/sqrt2, |L> = (|0> - i|1>)/sqrt2
"""

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Tuple

import torch

from . import config
from .device_setup import as_tensor, eye

_SQRT2_INV = 1.0 / math.sqrt(2.0)


def _check_finite(*values):
    for v in values:
        if not cmath.isfinite(complex(v)):
            raise ValueError(f"non-finite value {v!r}")


@dataclass(frozen=True)
class UnnormalizedKet:
    a0: complex
    a1: complex

    def __post_init__(self):
        _check_finite(self.a0, self.a1)
        object.__setattr__(self, 'a0', complex(self.a0))
        object.__setattr__(self, 'a1', complex(self.a1))

    @property
    def norm_sq(self) -> float:
        return abs(self.a0) ** 2 + abs(self.a1) ** 2

    def normalized(self) -> 'Ket2':
        norm = math.sqrt(self.norm_sq)
        if norm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return Ket2(self.a0 / norm, self.a1 / norm)


@dataclass(frozen=True)
class Ket2:
    """Normalized qubit state a0|H> + a1|V>."""
    a0: complex
    a1: complex

    def __post_init__(self):
        _check_finite(self.a0, self.a1)
        object.__setattr__(self, 'a0', complex(self.a0))
        object.__setattr__(self, 'a1', complex(self.a1))
        norm_sq = abs(self.a0) ** 2 + abs(self.a1) ** 2
        if abs(norm_sq - 1.0) > config.ALGEBRA_TOL:
            raise ValueError(f"Ket2 must be normalized, got |a0|^2+|a1|^2 = {norm_sq!r}")

    @classmethod
    def from_amplitudes(cls, a0, a1) -> 'Ket2':
        return UnnormalizedKet(a0, a1).normalized()

    def vector(self) -> torch.Tensor:
        return as_tensor([self.a0, self.a1])

    def amplitudes(self) -> Tuple[complex, complex]:
        return (self.a0, self.a1)


class PointerSetting(enum.Enum):
    PLUS = 'plus'
    CIRCULAR = 'circular'
    IDENTITY = 'identity'

    @property
    def symbol(self):
        return {'plus': 'P', 'circular': 'R', 'identity': 'I'}[self.value]


@dataclass(frozen=True)
class PauliObservable:
    """sigma_A = n . sigma for a unit Bloch vector n."""
    n: Tuple[float, float, float]

    def __post_init__(self):
        n = tuple(float(c) for c in self.n)
        if len(n) != 3:
            raise ValueError(f"Bloch vector needs 3 components, got {len(n)}")
        _check_finite(*n)
        norm = math.sqrt(sum(c * c for c in n))
        if abs(norm - 1.0) > config.ALGEBRA_TOL:
            raise ValueError(f"Bloch vector must be unit length, got norm {norm!r}")
        object.__setattr__(self, 'n', n)

    @classmethod
    def from_direction(cls, x, y, z) -> 'PauliObservable':
        norm = math.sqrt(x * x + y * y + z * z)
        if norm == 0.0 or not math.isfinite(norm):
            raise ValueError("Bloch direction must be a nonzero finite vector")
        return cls((x / norm, y / norm, z / norm))

    @property
    def is_linear(self) -> bool:
        """True for sigma_phi observables (no circular component)."""
        return abs(self.n[1]) <= config.ALGEBRA_TOL

    @property
    def linear_angle(self) -> float:
        """phi with n = (sin 2phi, 0, cos 2phi); only meaningful when is_linear."""
        return 0.5 * math.atan2(self.n[0], self.n[2])


SIGMA_X = PauliObservable((1.0, 0.0, 0.0))
SIGMA_Y = PauliObservable((0.0, 1.0, 0.0))
SIGMA_Z = PauliObservable((0.0, 0.0, 1.0))

_PAULI = {
    'x': [[0, 1], [1, 0]],
    'y': [[0, -1j], [1j, 0]],
    'z': [[1, 0], [0, -1]],
}


def pauli(axis: str) -> torch.Tensor:
    return as_tensor(_PAULI[axis])


def sigma_phi(phi: float) -> PauliObservable:
    """|phi><phi| - |phi_perp><phi_perp| with |phi> = cos phi|H> + sin phi|V>."""
    _check_finite(phi)
    return PauliObservable((math.sin(2 * phi), 0.0, math.cos(2 * phi)))


def observable_matrix(obs: PauliObservable) -> torch.Tensor:
    nx, ny, nz = obs.n
    return as_tensor([[nz, nx - 1j * ny], [nx + 1j * ny, -nz]])


def _fix_phase(v0: complex, v1: complex) -> Ket2:
    # first nonzero component made real-positive
    lead = v0 if abs(v0) > config.ALGEBRA_TOL else v1
    phase = lead.conjugate() / abs(lead)
    return Ket2.from_amplitudes(v0 * phase, v1 * phase)


def eigenbasis(obs: PauliObservable) -> Tuple[Ket2, Ket2]:
    """(v+, v-) with sigma_A v+- = +-v+-, first nonzero component real-positive."""
    nx, ny, nz = obs.n
    theta = math.acos(max(-1.0, min(1.0, nz)))
    phase = cmath.exp(1j * math.atan2(ny, nx))
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    v_plus = _fix_phase(complex(c), phase * s)
    v_minus = _fix_phase(complex(s), -phase * c)
    return v_plus, v_minus


def inner(bra: Ket2, ket: Ket2) -> complex:
    """<bra|ket>."""
    return bra.a0.conjugate() * ket.a0 + bra.a1.conjugate() * ket.a1


def orthogonal_ket(k: Ket2) -> Ket2:
    return Ket2(-k.a1.conjugate(), k.a0.conjugate())


def linear_ket(theta: float) -> Ket2:
    return Ket2.from_amplitudes(math.cos(theta), math.sin(theta))


_NAMED = {
    'h': (1, 0),
    'v': (0, 1),
    'plus': (_SQRT2_INV, _SQRT2_INV),
    'minus': (_SQRT2_INV, -_SQRT2_INV),
    'r': (_SQRT2_INV, 1j * _SQRT2_INV),
    'l': (_SQRT2_INV, -1j * _SQRT2_INV),
}


def named_ket(name: str) -> Ket2:
    key = name.strip().lower()
    if key not in _NAMED:
        raise ValueError(f"unknown ket preset {name!r}; expected one of {sorted(_NAMED)}")
    return Ket2.from_amplitudes(*_NAMED[key])


KET_H = named_ket('H')
KET_V = named_ket('V')
KET_PLUS = named_ket('plus')
KET_MINUS = named_ket('minus')
KET_R = named_ket('R')
KET_L = named_ket('L')


def pointer_operator(setting: PointerSetting) -> torch.Tensor:
    if setting is PointerSetting.PLUS:
        return pauli('x')
    if setting is PointerSetting.CIRCULAR:
        return pauli('y')
    return eye(2)


def analyzer_basis(setting: PointerSetting) -> Tuple[Ket2, Ket2]:
    """Outcome pair (+1, -1) read by the pointer analyzer.

    Identity pointers are read in the computational basis; product
    estimators skip them.
    """
    if setting is PointerSetting.PLUS:
        return KET_PLUS, KET_MINUS
    if setting is PointerSetting.CIRCULAR:
        return KET_R, KET_L
    return KET_H, KET_V
