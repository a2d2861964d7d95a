"""Run configuration: parsing and validation.

Two accepted layouts, both UTF-8:

    # comment
    key = <JSON value>
        <indented continuation of the JSON value>

or a single JSON object. Angles are given in degrees and stored in radians.
"""

import json
import math
from dataclasses import dataclass, replace
from typing import Any, Dict, Optional, Tuple

from . import config
from .chain_torch import Chain, WeakModule
from .errors import ParseError, ValidationError
from .pipeline import EXACT_PAULI, EXTRACTIONS
from .qcore import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    Ket2,
    PauliObservable,
    UnnormalizedKet,
    linear_ket,
    named_ket,
    sigma_phi,
)

EXACT = 'exact'
SAMPLED = 'sampled'
MODES = (EXACT, SAMPLED)

KEYS = ('pre_state', 'post_select', 'modules', 'mode', 'shots', 'seed',
        'resamples', 'extraction', 'output')

_NAMED_OBSERVABLES = {'sx': SIGMA_X, 'sy': SIGMA_Y, 'sz': SIGMA_Z}


@dataclass(frozen=True)
class Sweep:
    """Post-selection family cos theta|H> + sin theta|V>, stop inclusive."""
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.start, self.stop, self.step)):
            raise ValidationError("sweep bounds must be finite", constraint="finite theta_deg_*")
        if self.step <= 0.0:
            raise ValidationError("sweep step must be positive", constraint="theta_deg_step > 0")
        if self.stop < self.start:
            raise ValidationError("sweep stop lies before start", constraint="theta_deg_stop >= theta_deg_start")

    def thetas(self) -> Tuple[float, ...]:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return tuple(self.start + k * self.step for k in range(count))

    def to_dict(self) -> Dict[str, float]:
        return {
            'theta_deg_start': _degrees(self.start),
            'theta_deg_stop': _degrees(self.stop),
            'theta_deg_step': _degrees(self.step),
        }


@dataclass(frozen=True)
class ModuleSpec:
    observable: str
    obs: PauliObservable
    gamma: float

    def weak_module(self) -> WeakModule:
        return WeakModule(self.obs, self.gamma)


@dataclass(frozen=True)
class RunConfig:
    pre_state: Ket2
    modules: Tuple[ModuleSpec, ...]
    post_select: Optional[Ket2] = None
    sweep: Optional[Sweep] = None
    mode: str = EXACT
    shots: int = config.DEFAULT_SHOTS
    seed: int = config.DEFAULT_SEED
    resamples: int = config.DEFAULT_RESAMPLES
    extraction: str = EXACT_PAULI
    output_path: Optional[str] = None

    def __post_init__(self):
        if not self.modules:
            raise ValidationError("at least one module is required", constraint="N >= 1")
        if len(self.modules) > config.MAX_MODULES:
            raise ValidationError(f"{len(self.modules)} modules given",
                                  constraint=f"N <= {config.MAX_MODULES}")
        if (self.post_select is None) == (self.sweep is None):
            raise ValidationError("post_select must be either a state or a sweep",
                                  constraint="exactly one post-selection")
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}", constraint=f"mode in {MODES}")
        if self.extraction not in EXTRACTIONS:
            raise ValidationError(f"unknown extraction {self.extraction!r}",
                                  constraint=f"extraction in {EXTRACTIONS}")
        if self.seed < 0:
            raise ValidationError(f"seed {self.seed} is negative", constraint="seed >= 0")
        if self.mode == SAMPLED:
            if self.shots < config.MIN_SHOTS:
                raise ValidationError(f"shots = {self.shots}", constraint=f"shots >= {config.MIN_SHOTS}")
            if self.resamples < config.MIN_RESAMPLES:
                raise ValidationError(f"resamples = {self.resamples}",
                                      constraint=f"resamples >= {config.MIN_RESAMPLES}")

    def with_overrides(self, **overrides) -> 'RunConfig':
        """Copy with command-line overrides applied; None values are ignored."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **changes) if changes else self

    def post_states(self) -> Tuple[Tuple[Optional[float], Ket2], ...]:
        """(theta, psi_f) per row; theta is None for an explicit post-selected state."""
        if self.sweep is None:
            return ((None, self.post_select),)
        return tuple((theta, linear_ket(theta)) for theta in self.sweep.thetas())

    def chain(self, psi_f: Ket2) -> Chain:
        return Chain(self.pre_state, tuple(m.weak_module() for m in self.modules), psi_f)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'pre_state': _ket_to_json(self.pre_state),
            'post_select': self.sweep.to_dict() if self.sweep else _ket_to_json(self.post_select),
            'modules': [{'observable': m.observable, 'gamma_deg': _degrees(m.gamma)} for m in self.modules],
            'mode': self.mode,
            'shots': self.shots,
            'seed': self.seed,
            'resamples': self.resamples,
            'extraction': self.extraction,
            'output': self.output_path,
        }


def _degrees(rad: float) -> float:
    return round(math.degrees(rad), 9) + 0.0


def _ket_to_json(k: Ket2):
    return [[k.a0.real, k.a0.imag], [k.a1.real, k.a1.imag]]


def _split_lines(text: str) -> Tuple[Dict[str, str], Dict[str, int]]:
    values: Dict[str, str] = {}
    lines: Dict[str, int] = {}
    key = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith('#'):
            continue
        if raw[0] in ' \t':
            if key is None:
                raise ParseError("continuation line before any key", line=lineno)
            values[key] += '\n' + stripped
            continue
        if '=' not in raw:
            raise ParseError(f"expected 'key = value', got {stripped!r}", line=lineno)
        key, value = (part.strip() for part in raw.split('=', 1))
        if not key.isidentifier():
            raise ParseError(f"invalid key {key!r}", line=lineno)
        if key in values:
            raise ParseError("duplicate key", line=lineno, field=key)
        values[key] = value
        lines[key] = lineno
    parsed = {}
    for key, value in values.items():
        try:
            parsed[key] = json.loads(value)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON value: {exc.msg}", line=lines[key], field=key) from exc
    return parsed, lines


def _number(value, field, line, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"expected a number, got {value!r}", line=line, field=field)
    if integer and not float(value).is_integer():
        raise ParseError(f"expected an integer, got {value!r}", line=line, field=field)
    if not math.isfinite(value):
        raise ValidationError(f"{field} must be finite", constraint=f"finite {field}")
    return int(value) if integer else float(value)


def _amplitude(value, field, line) -> complex:
    if isinstance(value, list) and len(value) == 2:
        return complex(_number(value[0], field, line), _number(value[1], field, line))
    return complex(_number(value, field, line))


def parse_ket(value, field, line=None) -> Ket2:
    """Preset name, [a0, a1] reals, or [[re, im], [re, im]]."""
    if isinstance(value, str):
        try:
            return named_ket(value)
        except ValueError as exc:
            raise ParseError(str(exc), line=line, field=field) from exc
    if not isinstance(value, list) or len(value) != 2:
        raise ParseError("a state is a preset name or two amplitudes", line=line, field=field)
    ket = UnnormalizedKet(_amplitude(value[0], field, line), _amplitude(value[1], field, line))
    if ket.norm_sq == 0.0:
        raise ValidationError(f"{field} is the zero vector", constraint="nonzero amplitudes")
    return ket.normalized()


def parse_observable(spec, field='modules', line=None) -> PauliObservable:
    """'sigma_phi:<deg>', 'bloch:x,y,z' or one of sx, sy, sz."""
    if not isinstance(spec, str):
        raise ParseError(f"observable must be a string, got {spec!r}", line=line, field=field)
    name = spec.strip().lower()
    if name in _NAMED_OBSERVABLES:
        return _NAMED_OBSERVABLES[name]
    kind, _, arg = name.partition(':')
    try:
        if kind == 'sigma_phi':
            phi = float(arg)
            if not math.isfinite(phi):
                raise ValueError(f"non-finite angle {arg!r}")
            return sigma_phi(math.radians(phi))
        if kind == 'bloch':
            components = [float(c) for c in arg.split(',')]
            if len(components) != 3:
                raise ValueError(f"Bloch vector needs 3 components, got {len(components)}")
        else:
            raise ValueError(f"unknown observable {spec!r}")
    except ValueError as exc:
        raise ParseError(str(exc), line=line, field=field) from exc
    if not all(math.isfinite(c) for c in components) or not any(components):
        raise ValidationError(f"Bloch direction {spec!r} is not a usable vector",
                              constraint="finite nonzero Bloch vector")
    return PauliObservable.from_direction(*components)


def _parse_modules(value, line) -> Tuple[ModuleSpec, ...]:
    if not isinstance(value, list):
        raise ParseError("modules must be a list", line=line, field='modules')
    modules = []
    for entry in value:
        if not isinstance(entry, dict) or set(entry) != {'observable', 'gamma_deg'}:
            raise ParseError("each module needs exactly 'observable' and 'gamma_deg'",
                             line=line, field='modules')
        gamma_deg = _number(entry['gamma_deg'], 'gamma_deg', line)
        if not 0.0 <= gamma_deg <= 45.0:
            raise ValidationError(f"gamma_deg = {gamma_deg}", constraint="0 <= gamma_deg <= 45")
        obs = parse_observable(entry['observable'], line=line)
        modules.append(ModuleSpec(entry['observable'].strip().lower(), obs, math.radians(gamma_deg)))
    return tuple(modules)


def _parse_sweep(value, line) -> Sweep:
    expected = {'theta_deg_start', 'theta_deg_stop', 'theta_deg_step'}
    if set(value) != expected:
        raise ParseError(f"sweep needs exactly {sorted(expected)}", line=line, field='post_select')
    degrees = {k: _number(value[k], k, line) for k in expected}
    return Sweep(
        start=math.radians(degrees['theta_deg_start']),
        stop=math.radians(degrees['theta_deg_stop']),
        step=math.radians(degrees['theta_deg_step']),
    )


def _build(raw: Dict[str, Any], lines: Dict[str, int]) -> RunConfig:
    for key in raw:
        if key not in KEYS:
            raise ParseError(f"unknown key; expected one of {', '.join(KEYS)}", line=lines.get(key), field=key)
    for key in ('pre_state', 'modules'):
        if key not in raw:
            raise ParseError("missing required key", field=key)

    post = raw.get('post_select')
    post_line = lines.get('post_select')
    if post is None:
        sweep = Sweep(math.radians(config.THETA_START_DEG), math.radians(config.THETA_STOP_DEG),
                      math.radians(config.THETA_STEP_DEG))
        post_select = None
    elif isinstance(post, dict):
        sweep, post_select = _parse_sweep(post, post_line), None
    else:
        sweep, post_select = None, parse_ket(post, 'post_select', post_line)

    options = {}
    for key, integer in (('shots', True), ('seed', True), ('resamples', True)):
        if key in raw:
            options[key] = _number(raw[key], key, lines.get(key), integer=True)
    for key in ('mode', 'extraction', 'output'):
        if key in raw:
            if not isinstance(raw[key], str):
                raise ParseError(f"expected a string, got {raw[key]!r}", line=lines.get(key), field=key)
            options['output_path' if key == 'output' else key] = raw[key]

    return RunConfig(
        pre_state=parse_ket(raw['pre_state'], 'pre_state', lines.get('pre_state')),
        modules=_parse_modules(raw['modules'], lines.get('modules')),
        post_select=post_select,
        sweep=sweep,
        **options,
    )


def parse_config(text: bytes) -> RunConfig:
    try:
        decoded = text.decode('utf-8')
    except UnicodeDecodeError as exc:
        raise ParseError(f"config is not UTF-8: {exc.reason}") from exc

    if decoded.lstrip().startswith('{'):
        try:
            raw = json.loads(decoded)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
        if not isinstance(raw, dict):
            raise ParseError("top-level JSON value must be an object")
        return _build(raw, {})

    raw, lines = _split_lines(decoded)
    return _build(raw, lines)
