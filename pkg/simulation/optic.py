"""Optical compiler for weak-measurement modules.

A module is a two-path polarization interferometer. The photon enters in
the down arm (path 0). Conventions used throughout:

    HWP(t) = [[cos 2t, sin 2t], [sin 2t, -cos 2t]]
    QWP(t) = R(t) diag(1, i) R(-t), so QWP(pi/4)|H> = e^{i pi/4}|L>
    BD     : H keeps its path, V moves from path p to path p+1
    PBS    : port 0 transmits H, port 1 reflects V; both re-emitted as H

The system polarization is first rotated so that the observable's
eigenbasis becomes {H, V}, a BD then writes it into the path, and the arm
waveplates rotate the (now free) polarization into the pointer state. The
compiled core realizes the coupling with gamma -> -gamma, so analyzer ports
of Plus and Circular settings carry outcome labels (-1, +1).
"""

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple, Union

import torch

from . import config
from .chain_torch import WeakModule, kraus_branch
from .device_setup import as_tensor, worker_count, zeros
from .errors import InvalidLayout, NotAWaveplate, ParseError
from .qcore import (
    Ket2,
    PauliObservable,
    PointerSetting,
    SIGMA_Y,
    SIGMA_Z,
    analyzer_basis,
    eigenbasis,
    sigma_phi,
)
from .sampler import OutcomeDistribution, distribution_from_branches

logger = logging.getLogger(__name__)

DOWN, UP = 0, 1
H, V = 0, 1


class ElementKind(enum.Enum):
    HWP = 'HWP'
    QWP = 'QWP'
    PBS = 'PBS'
    BD = 'BD'
    PATH_SWAP = 'PathSwap'


class Arm(enum.Enum):
    BOTH = 'both'
    UP = 'up'
    DOWN = 'down'


WAVEPLATES = (ElementKind.HWP, ElementKind.QWP)


@dataclass(frozen=True)
class Element:
    kind: ElementKind
    angle: float = 0.0
    arm: Arm = Arm.BOTH

    def __post_init__(self):
        angle = float(self.angle)
        if not math.isfinite(angle):
            raise ValueError(f"{self.kind.value} angle must be finite, got {self.angle!r}")
        if self.kind not in WAVEPLATES and self.arm is not Arm.BOTH:
            raise ValueError(f"{self.kind.value} acts on both arms, got arm={self.arm.value}")
        object.__setattr__(self, 'angle', angle)


def hwp(angle, arm=Arm.BOTH) -> Element:
    return Element(ElementKind.HWP, angle, arm)


def qwp(angle, arm=Arm.BOTH) -> Element:
    return Element(ElementKind.QWP, angle, arm)


BD = Element(ElementKind.BD)
PBS = Element(ElementKind.PBS)
PATH_SWAP = Element(ElementKind.PATH_SWAP)


@dataclass(frozen=True)
class CircuitModule:
    """One compiled module; analyzer port j reports outcome_labels[j]."""
    prolog: Tuple[Element, ...] = ()
    core: Tuple[Element, ...] = ()
    analyzer: Tuple[Element, ...] = ()
    epilog: Tuple[Element, ...] = ()
    setting: PointerSetting = PointerSetting.IDENTITY
    outcome_labels: Tuple[int, ...] = ()

    @property
    def elements(self) -> Tuple[Element, ...]:
        return self.prolog + self.core + self.analyzer + self.epilog


@dataclass(frozen=True)
class GridResult:
    observable: PauliObservable
    gamma: float
    setting: PointerSetting
    deviation: float

    @property
    def passed(self) -> bool:
        return self.deviation < config.OPTICS_TOL


def _rotation(theta: float) -> torch.Tensor:
    c, s = math.cos(theta), math.sin(theta)
    return as_tensor([[c, -s], [s, c]])


def jones_matrix(e: Element) -> torch.Tensor:
    if e.kind is ElementKind.HWP:
        c, s = math.cos(2 * e.angle), math.sin(2 * e.angle)
        return as_tensor([[c, s], [s, -c]])
    if e.kind is ElementKind.QWP:
        return _rotation(e.angle) @ as_tensor([[1, 0], [0, 1j]]) @ _rotation(-e.angle)
    raise NotAWaveplate(f"{e.kind.value} has no 2x2 Jones matrix")


def analyzer_angles(v: Ket2) -> Tuple[float, float]:
    """(QWP, HWP) angles with HWP(h) QWP(q) v = e^{i delta}|H>.

    q is the ellipse orientation, h = (q - chi)/2 with chi the ellipticity.
    """
    s1 = abs(v.a0) ** 2 - abs(v.a1) ** 2
    cross = v.a0.conjugate() * v.a1
    s2, s3 = 2 * cross.real, 2 * cross.imag
    psi = 0.5 * math.atan2(s2, s1)
    chi = 0.5 * math.asin(max(-1.0, min(1.0, s3)))
    return psi, 0.5 * (psi - chi)


def basis_change_elements(obs: PauliObservable) -> Tuple[Element, ...]:
    """Elements mapping the +1 eigenstate of obs to |H> (and the -1 one to |V>).

    Linear observables need one HWP. Any other eigenbasis is elliptical and a
    QWP(psi), HWP((psi - chi)/2) pair already reaches |H>, so the third
    plate of the general QWP-HWP-QWP decomposition is left out; the epilog
    undoes the pair in reverse.
    """
    if obs.is_linear:
        return (hwp(obs.linear_angle / 2),)
    q, h = analyzer_angles(eigenbasis(obs)[0])
    return (qwp(q), hwp(h))


def _basis_restore_elements(obs: PauliObservable) -> Tuple[Element, ...]:
    if obs.is_linear:
        return (hwp(obs.linear_angle / 2),)
    q, h = analyzer_angles(eigenbasis(obs)[0])
    # QWP(q)^dagger = -i QWP(q + pi/2)
    return (hwp(h), qwp(q + math.pi / 2))


def compile_module(obs: PauliObservable, gamma: float, setting: PointerSetting) -> CircuitModule:
    if not 0.0 <= gamma <= math.pi / 4 + config.ALGEBRA_TOL:
        raise ValueError(f"gamma must lie in [0, pi/4], got {gamma!r}")

    core = (
        BD,
        hwp(math.pi / 4, Arm.UP),
        hwp(-gamma / 2, Arm.DOWN),
        hwp(gamma / 2, Arm.UP),
    )
    q, h = analyzer_angles(analyzer_basis(setting)[0])
    analyzer = (qwp(q), hwp(h), PBS)
    epilog = (hwp(math.pi / 4, Arm.DOWN), BD, hwp(math.pi / 4)) + _basis_restore_elements(obs)
    labels = (1, -1) if setting is PointerSetting.IDENTITY else (-1, 1)
    return CircuitModule(
        prolog=basis_change_elements(obs),
        core=core,
        analyzer=analyzer,
        epilog=epilog,
        setting=setting,
        outcome_labels=labels,
    )


def _paths(arm: Arm) -> Tuple[int, ...]:
    return {Arm.BOTH: (DOWN, UP), Arm.UP: (UP,), Arm.DOWN: (DOWN,)}[arm]


def _apply(e: Element, state: torch.Tensor) -> List[torch.Tensor]:
    """state is [path, polarization]; returns one state per output port."""
    if e.kind in WAVEPLATES:
        j = jones_matrix(e)
        out = state.clone()
        for p in _paths(e.arm):
            out[p] = j @ state[p]
        return [out]

    if e.kind is ElementKind.BD:
        if float(torch.abs(state[UP, V])) > config.OPTICS_TOL:
            raise InvalidLayout("beam displacer would push the up-arm V component off the layout")
        out = zeros(2, 2)
        out[DOWN, H] = state[DOWN, H]
        out[UP, H] = state[UP, H]
        out[UP, V] = state[DOWN, V]
        return [out]

    if e.kind is ElementKind.PBS:
        transmitted = zeros(2, 2)
        reflected = zeros(2, 2)
        transmitted[:, H] = state[:, H]
        reflected[:, H] = state[:, V]
        return [transmitted, reflected]

    return [torch.flip(state, dims=[0])]


def _propagate(elements: Iterable[Element], states: List[torch.Tensor]) -> List[torch.Tensor]:
    for e in elements:
        states = [out for state in states for out in _apply(e, state)]
    return states


def _input_state(ket: Ket2) -> torch.Tensor:
    state = zeros(2, 2)
    state[DOWN] = ket.vector()
    return state


def _output_polarization(state: torch.Tensor) -> torch.Tensor:
    down = float(torch.linalg.vector_norm(state[DOWN]))
    up = float(torch.linalg.vector_norm(state[UP]))
    if down > config.OPTICS_TOL and up > config.OPTICS_TOL:
        raise InvalidLayout(f"paths not recombined at the output (norms {down:.3e}, {up:.3e})")
    return state[DOWN] + state[UP]


def simulate_elements(elements: Sequence[Element], ket: Ket2) -> Tuple[torch.Tensor, ...]:
    """Output polarization amplitudes per port, first PBS most significant."""
    states = _propagate(elements, [_input_state(ket)])
    return tuple(_output_polarization(s) for s in states)


def simulate_circuit(cm: CircuitModule, ket: Ket2) -> Tuple[torch.Tensor, ...]:
    return simulate_elements(cm.elements, ket)


def mid_module_state(cm: CircuitModule, ket: Ket2) -> torch.Tensor:
    """[path, polarization] state right after the coupling waveplates."""
    (state,) = _propagate(cm.prolog + cm.core, [_input_state(ket)])
    return state


def module_kraus(cm: CircuitModule) -> Tuple[torch.Tensor, ...]:
    """Simulated 2x2 operator per analyzer port, columns from |H> and |V> inputs."""
    from_h = simulate_circuit(cm, Ket2(1, 0))
    from_v = simulate_circuit(cm, Ket2(0, 1))
    return tuple(torch.stack([h, v], dim=1) for h, v in zip(from_h, from_v))


def _phase_deviation(simulated: torch.Tensor, target: torch.Tensor) -> float:
    overlap = complex(torch.trace(target.conj().T @ simulated))
    phase = overlap / abs(overlap) if abs(overlap) > 0.0 else 1.0
    return float(torch.linalg.matrix_norm(simulated - phase * target))


def verify_module(cm: CircuitModule, obs: PauliObservable, gamma: float) -> float:
    """Largest per-port distance to the abstract Kraus branch, up to global phase."""
    module = WeakModule(obs, gamma)
    plus, minus = analyzer_basis(cm.setting)
    deviation = 0.0
    for label, simulated in zip(cm.outcome_labels, module_kraus(cm)):
        target = kraus_branch(module, plus if label == 1 else minus)
        deviation = max(deviation, _phase_deviation(simulated, target))
    return deviation


def pipeline_distribution(circuits: Sequence[CircuitModule], psi_i: Ket2, psi_f: Ket2,
                          include_fail_port: bool = True) -> OutcomeDistribution:
    branches = []
    for cm in circuits:
        by_label = dict(zip(cm.outcome_labels, module_kraus(cm)))
        branches.append((by_label[1], by_label[-1]))
    settings = tuple(cm.setting for cm in circuits)
    return distribution_from_branches(settings, psi_i, psi_f, branches, include_fail_port)


def preparation_elements(psi_i: Ket2) -> Tuple[Element, ...]:
    """Waveplates turning the source's |H> into psi_i (up to phase)."""
    q, h = analyzer_angles(psi_i)
    if abs(q - 2 * h) <= config.ALGEBRA_TOL:
        # linear state at angle q
        return (hwp(q / 2),)
    return (hwp(h), qwp(q + math.pi / 2))


def postselection_elements(theta: float) -> Tuple[Element, ...]:
    """HWP(theta/2) then PBS: port 0 passes cos theta|H> + sin theta|V>."""
    return (hwp(theta / 2), PBS)


def _format_angle(angle: float) -> str:
    return repr(round(math.degrees(angle), 9) + 0.0)


def export_circuit(cm: CircuitModule) -> str:
    lines = [f"# setting {cm.setting.value} labels {' '.join(str(l) for l in cm.outcome_labels)}"]
    for section in ('prolog', 'core', 'analyzer', 'epilog'):
        lines.append(f"# {section}")
        for e in getattr(cm, section):
            lines.append(f"{e.kind.value} {_format_angle(e.angle)} {e.arm.value}")
    return '\n'.join(lines) + '\n'


def parse_circuit(text: str) -> Tuple[Element, ...]:
    elements = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"expected 'KIND angle_deg arm', got {line!r}", line=lineno)
        kind, angle, arm = parts
        try:
            elements.append(Element(ElementKind(kind), math.radians(float(angle)), Arm(arm)))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc
    return tuple(elements)


DEFAULT_GRID_PHIS = (0.0, math.pi / 8, math.pi / 4, math.pi / 3)
DEFAULT_GRID_GAMMAS = tuple(math.radians(g) for g in (0.0, 10.0, 25.0, 30.0))
EXPERIMENT_GRID_OBSERVABLES = (SIGMA_Y, SIGMA_Z, sigma_phi(math.pi / 3))
EXPERIMENT_GRID_GAMMAS = (math.radians(25.0), math.radians(30.0))
ALL_SETTINGS = (PointerSetting.PLUS, PointerSetting.CIRCULAR, PointerSetting.IDENTITY)


def _as_observable(o: Union[float, PauliObservable]) -> PauliObservable:
    return o if isinstance(o, PauliObservable) else sigma_phi(float(o))


def verify_grid(phis: Iterable[Union[float, PauliObservable]], gammas: Iterable[float],
                settings: Iterable[PointerSetting] = ALL_SETTINGS) -> List[GridResult]:
    """verify_module over a grid; entries of phis are sigma_phi angles or observables."""
    cases = [(_as_observable(o), float(g), s) for o in phis for g in gammas for s in settings]

    def check(case):
        obs, gamma, setting = case
        deviation = verify_module(compile_module(obs, gamma, setting), obs, gamma)
        return GridResult(obs, gamma, setting, deviation)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(check, cases))
    failed = [r for r in results if not r.passed]
    if failed:
        logger.warning("%d of %d compiled modules deviate from their Kraus targets", len(failed), len(results))
    return results


def grid_by_name(name: str) -> Tuple[Tuple, Tuple]:
    if name == 'default':
        return DEFAULT_GRID_PHIS, DEFAULT_GRID_GAMMAS
    if name == 'experiment':
        return EXPERIMENT_GRID_OBSERVABLES, EXPERIMENT_GRID_GAMMAS
    raise ValueError(f"unknown grid {name!r}; expected 'default' or 'experiment'")
