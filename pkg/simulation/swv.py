"""Sequential weak values: definition-level oracle and extraction from
pointer expectation values (first order, and exact for Pauli observables).
"""

import enum
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, Mapping, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial

from . import config
from .chain_torch import Chain, chain_with_gammas, pointer_joint_expectation, pointer_state
from .errors import (
    AllIdentity,
    FitDiverged,
    MissingSetting,
    NoPhysicalRoot,
    OrthogonalPostSelection,
    ZeroStrength,
)
from .qcore import Ket2, PauliObservable, PointerSetting, observable_matrix

logger = logging.getLogger(__name__)

P = PointerSetting.PLUS
R = PointerSetting.CIRCULAR

Gammas = Union[float, Sequence[float]]
Subset = FrozenSet[int]


class Part(enum.Enum):
    REAL = 'real'
    IMAG = 'imag'


@dataclass(frozen=True)
class SWValue:
    value: complex
    order: int
    observables: Tuple[PauliObservable, ...]

    def __post_init__(self):
        if not (math.isfinite(self.value.real) and math.isfinite(self.value.imag)):
            raise ValueError(f"sequential weak value must be finite, got {self.value!r}")


@dataclass(frozen=True)
class ExpansionTable:
    settings: Tuple[PointerSetting, ...]
    coefficients: np.ndarray
    residual: float

    def coefficient(self, order: int) -> float:
        if order >= len(self.coefficients):
            return 0.0
        return float(self.coefficients[order])

    @property
    def leading(self) -> float:
        """Coefficient of gamma^N for N pointers."""
        return self.coefficient(len(self.settings))


def weak_value_oracle(psi_i: Ket2, psi_f: Ket2, obs_list: Sequence[PauliObservable]) -> complex:
    """<psi_f| A_N ... A_1 |psi_i> / <psi_f|psi_i> by direct matrix products."""
    bra = psi_f.vector().conj()
    ket = psi_i.vector()
    denominator = complex(bra @ ket)
    if abs(denominator) <= config.ORTHOGONAL_OVERLAP:
        raise OrthogonalPostSelection(f"|<psi_f|psi_i>| = {abs(denominator):.3e}")
    for obs in obs_list:
        ket = observable_matrix(obs) @ ket
    return complex(bra @ ket) / denominator


def parity_rule(settings: Sequence[PointerSetting]) -> Part:
    """Even number of circular readings gives the real part, odd the imaginary."""
    active = [s for s in settings if s is not PointerSetting.IDENTITY]
    if not active:
        raise AllIdentity("parity is undefined when every pointer is traced out")
    n_circular = sum(1 for s in active if s is R)
    return Part.REAL if n_circular % 2 == 0 else Part.IMAG


def _strength_product(gamma: Gammas, n: int) -> float:
    gammas = [float(gamma)] * n if np.isscalar(gamma) else [float(g) for g in gamma]
    if len(gammas) != n:
        raise ValueError(f"expected {n} strengths, got {len(gammas)}")
    if any(g <= 0.0 for g in gammas):
        raise ZeroStrength("first-order extraction needs every gamma > 0")
    return math.prod(gammas)


def extract_single_firstorder(e_plus: float, e_circ: float, gamma: float) -> complex:
    if gamma <= 0.0:
        raise ZeroStrength("gamma must be positive")
    return complex(e_plus / (2 * gamma), e_circ / (2 * gamma))


def extract_single_exact(e_plus: float, e_circ: float, gamma: float) -> complex:
    """Invert <s+> = sin2g Re W / D, <sR> = sin2g Im W / D, D = cos^2 g + sin^2 g |W|^2.

    Substituting |W| = r D / sin 2g gives r^2 D^2 / (4 cos^2 g) - D + cos^2 g = 0;
    the root continuous with D -> cos^2 g as r -> 0 is
    D = 2 cos^2 g / (1 + sqrt(1 - r^2)). Exact for |W| <= cot g.
    """
    if gamma <= 0.0 or gamma > math.pi / 4 + config.ALGEBRA_TOL:
        raise ZeroStrength(f"gamma must lie in (0, pi/4], got {gamma!r}")
    r_sq = e_plus * e_plus + e_circ * e_circ
    discriminant = 1.0 - r_sq
    if discriminant < -config.ALGEBRA_TOL:
        raise NoPhysicalRoot(f"pointer readings ({e_plus}, {e_circ}) exceed the unit disc")
    discriminant = max(0.0, discriminant)
    cos_sq = math.cos(gamma) ** 2
    d = 2.0 * cos_sq / (1.0 + math.sqrt(discriminant))
    scale = d / math.sin(2 * gamma)
    return complex(e_plus * scale, e_circ * scale)


def leading_order_weights(settings: Sequence[PointerSetting]) -> Dict[Subset, complex]:
    """c(S) in  <(x) O_k> ~ prod(gamma) * sum_S c(S) W_S conj(W_{S^c}).

    Only the partition terms of the pointer density matrix survive an
    all-off-diagonal reading; a circular pointer contributes i when its
    module is outside S and -i when inside. Pointers are 0-based indices.
    """
    if any(s is PointerSetting.IDENTITY for s in settings):
        raise ValueError("leading-order weights are defined for Plus/Circular readings only")
    n = len(settings)
    circular = [k for k, s in enumerate(settings) if s is R]
    weights = {}
    for size in range(n + 1):
        for subset in itertools.combinations(range(n), size):
            members = frozenset(subset)
            c = 1 + 0j
            for k in circular:
                c *= -1j if k in members else 1j
            weights[members] = c
    return weights


def _bracket(weights: Mapping[Subset, complex], swv: Mapping[Subset, complex], n: int) -> complex:
    full = frozenset(range(n))
    total = 0j
    for subset, c in weights.items():
        total += c * swv[subset] * swv[full - subset].conjugate()
    return total


def _lower_table(n: int, lower: Mapping[Subset, complex]) -> Dict[Subset, complex]:
    table = {frozenset(): 1 + 0j}
    for subset, value in lower.items():
        table[frozenset(subset)] = complex(value)
    return table


def extract_firstorder_general(e_all_plus: float, e_last_circular: float,
                               lower: Mapping[Subset, complex], gamma: Gammas, n: int) -> complex:
    """First-order SWV of N modules from the all-Plus reading and the
    reading with Circular on the last pointer, given every proper sub-chain SWV.

    The weight table fixes the signs: the full-chain term enters as
    2 Re W for all-Plus and as 2 Im W for one Circular pointer.
    """
    scale = _strength_product(gamma, n)
    full = frozenset(range(n))
    missing = [s for s in _proper_subsets(n) if s not in {frozenset(k) for k in lower}]
    if missing:
        raise MissingSetting(f"sub-chain weak values missing for {sorted(map(sorted, missing))}")

    known = _lower_table(n, lower)
    known[full] = 0j

    plus = (P,) * n
    circ = (P,) * (n - 1) + (R,)
    rest_plus = _bracket(leading_order_weights(plus), known, n)
    rest_circ = _bracket(leading_order_weights(circ), known, n)
    re = 0.5 * (e_all_plus / scale - rest_plus.real)
    im = 0.5 * (e_last_circular / scale - rest_circ.real)
    return complex(re, im)


def _proper_subsets(n: int):
    for size in range(1, n):
        for subset in itertools.combinations(range(n), size):
            yield frozenset(subset)


def extract_pair_firstorder(e: Mapping[Tuple[PointerSetting, PointerSetting], float],
                            w1: complex, w2: complex, gamma: Gammas) -> complex:
    """Re from (Plus, Plus), Im from the single odd-parity pair present."""
    scale = _strength_product(gamma, 2)
    if (P, P) not in e:
        raise MissingSetting("pair extraction needs the (Plus, Plus) reading")
    odd = [pair for pair in ((P, R), (R, P)) if pair in e]
    if len(odd) != 1:
        raise MissingSetting("pair extraction needs exactly one of (Plus, Circular), (Circular, Plus)")
    odd_pair = odd[0]

    known = {frozenset(): 1 + 0j, frozenset({0}): complex(w1), frozenset({1}): complex(w2),
             frozenset({0, 1}): 0j}
    rest_plus = _bracket(leading_order_weights((P, P)), known, 2)
    rest_odd = _bracket(leading_order_weights(odd_pair), known, 2)
    # full-chain term of the odd pair: c(empty) conj(W) + c(full) W = 2 Im W
    re = 0.5 * (e[(P, P)] / scale - rest_plus.real)
    im = 0.5 * (e[odd_pair] / scale - rest_odd.real)
    return complex(re, im)


def extract_triple_firstorder(e_ppp: float, e_ccc: float, lower: Mapping[Subset, complex],
                              gamma: Gammas) -> complex:
    """Invert
        <s+ s+ s+> = 2g^3 Re[W123 + W12 W3* + W13 W2* + W23 W1*]
        <sR sR sR> = 2g^3 Im[-W123 + W12 W3* + W13 W2* + W23 W1*]
    with the six lower-order SWVs keyed by 0-based module subsets.
    """
    scale = _strength_product(gamma, 3)
    table = _lower_table(3, lower)
    try:
        cross = (table[frozenset({0, 1})] * table[frozenset({2})].conjugate()
                 + table[frozenset({0, 2})] * table[frozenset({1})].conjugate()
                 + table[frozenset({1, 2})] * table[frozenset({0})].conjugate())
    except KeyError as exc:
        raise MissingSetting(f"lower-order weak value missing for modules {sorted(exc.args[0])}") from None
    re = e_ppp / (2 * scale) - cross.real
    im = -e_ccc / (2 * scale) + cross.imag
    return complex(re, im)


def extract_sequence_exact(expectations: Mapping[Tuple[PointerSetting, ...], float], p_pass: float,
                           overlap_sq: float, gamma: Gammas) -> complex:
    """Exact N-module SWV of Pauli observables.

    The normalized pointer state has <1..1|rho|0..0> = <(x)(s+ + i sR)/2> and
    Phi_b = <psi_f|psi_i> prod(cos | sin) W_S(b), so
        W = p_pass * sum_settings i^{#R} e_settings / (|<psi_f|psi_i>|^2 prod sin 2g).
    """
    if not expectations:
        raise MissingSetting("no pointer readings supplied")
    n = len(next(iter(expectations)))
    gammas = [float(gamma)] * n if np.isscalar(gamma) else [float(g) for g in gamma]
    if len(gammas) != n:
        raise ValueError(f"expected {n} strengths, got {len(gammas)}")
    if any(g <= 0.0 for g in gammas):
        raise ZeroStrength("exact extraction needs every gamma > 0")
    if overlap_sq <= config.ORTHOGONAL_OVERLAP ** 2:
        raise OrthogonalPostSelection(f"|<psi_f|psi_i>|^2 = {overlap_sq:.3e}")

    total = 0j
    for combo in itertools.product((P, R), repeat=n):
        if combo not in expectations:
            raise MissingSetting(f"missing reading {''.join(s.symbol for s in combo)}")
        n_circular = sum(1 for s in combo if s is R)
        total += (1j ** n_circular) * expectations[combo]
    denominator = overlap_sq * math.prod(math.sin(2 * g) for g in gammas)
    return total * p_pass / denominator


def default_gamma_grid(n: int, points=None) -> np.ndarray:
    degree = 2 * n + 4
    count = points if points is not None else 2 * degree + 4
    return np.linspace(config.FIT_GRID[0], config.FIT_GRID[1], count)


def expansion_coefficients(chain: Chain, settings: Sequence[PointerSetting],
                           gamma_grid: Sequence[float], degree=None) -> ExpansionTable:
    """Least-squares polynomial in gamma of the joint expectation, every module at the same gamma."""
    n = chain.n
    grid = np.asarray(sorted(set(float(g) for g in gamma_grid)))
    degree = 2 * n + 4 if degree is None else int(degree)
    needed = max(2 * n + 2, degree + 2)
    if len(grid) < needed:
        raise ValueError(f"need at least {needed} distinct gamma values, got {len(grid)}")
    if grid[0] <= 0.0 or grid[-1] > 0.3:
        raise ValueError("gamma grid must lie in (0, 0.3]")

    values = np.array([
        pointer_joint_expectation(pointer_state(chain_with_gammas(chain, [g] * n)), settings)
        for g in grid
    ])
    fit = Polynomial.fit(grid, values, degree)
    residual = float(np.max(np.abs(fit(grid) - values)))
    logger.debug("expansion fit %s: degree %d, residual %.3e",
                 ''.join(s.symbol for s in settings), degree, residual)
    if residual > config.FIT_RESIDUAL_TOL:
        raise FitDiverged(f"fit residual {residual:.3e} exceeds {config.FIT_RESIDUAL_TOL:.0e}")
    coefficients = fit.convert().coef
    return ExpansionTable(settings=tuple(settings), coefficients=np.asarray(coefficients), residual=residual)


def subset_oracle(chain: Chain, subset: Subset) -> complex:
    """SWV of the sub-chain holding only the modules in `subset`, in chain order."""
    obs = [chain.modules[k].obs for k in sorted(subset)]
    return weak_value_oracle(chain.psi_i, chain.psi_f, obs)
