"""Setting-run plans shared by the exact and the sampled extraction paths.

A run is one experimental configuration: which modules are active (the
others sit at gamma = 0) and what each pointer analyzer reads. Both the
exact pipeline and the photon-count emulation produce one expectation per
run and hand the table to extract_from_runs.
"""

import itertools
import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Tuple

from . import swv
from .chain_torch import Chain, chain_with_gammas, overlap, pointer_joint_expectation, pointer_state
from .errors import UnsupportedExtraction, ZeroStrength
from .qcore import PointerSetting

logger = logging.getLogger(__name__)

P = PointerSetting.PLUS
R = PointerSetting.CIRCULAR
I = PointerSetting.IDENTITY

FIRSTORDER = 'firstorder'
EXACT_PAULI = 'exact_pauli'
EXTRACTIONS = (FIRSTORDER, EXACT_PAULI)


@dataclass(frozen=True)
class SettingRun:
    active: Tuple[bool, ...]
    settings: Tuple[PointerSetting, ...]

    @property
    def label(self) -> str:
        return ''.join(s.symbol if a else '0' for a, s in zip(self.active, self.settings))

    @property
    def is_full(self) -> bool:
        return all(self.active)


def run_chain(chain: Chain, run: SettingRun) -> Chain:
    """The chain as configured for `run`: inactive modules at gamma = 0."""
    gammas = [m.gamma if a else 0.0 for m, a in zip(chain.modules, run.active)]
    return chain_with_gammas(chain, gammas)


def active_chain(chain: Chain) -> Chain:
    """Drop gamma = 0 modules; they perform no measurement at all."""
    modules = tuple(m for m in chain.modules if m.gamma > 0.0)
    if not modules:
        raise ZeroStrength("every module has gamma = 0, nothing is measured")
    return replace(chain, modules=modules)


def _subset_run(n: int, subset, pattern) -> SettingRun:
    members = sorted(subset)
    settings = [I] * n
    for k, s in zip(members, pattern):
        settings[k] = s
    return SettingRun(active=tuple(k in subset for k in range(n)), settings=tuple(settings))


def _patterns(size: int) -> Tuple[Tuple[PointerSetting, ...], Tuple[PointerSetting, ...]]:
    """(real-part pattern, imaginary-part pattern) for a sub-chain of `size` modules."""
    if size == 3:
        return (P, P, P), (R, R, R)
    return (P,) * size, (P,) * (size - 1) + (R,)


def _subsets(n: int):
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(n), size):
            yield frozenset(subset)


def required_runs(n: int, extraction: str) -> List[SettingRun]:
    if extraction == EXACT_PAULI:
        return [SettingRun(active=(True,) * n, settings=combo)
                for combo in itertools.product((P, R), repeat=n)]
    if extraction == FIRSTORDER:
        runs = []
        for subset in _subsets(n):
            for pattern in _patterns(len(subset)):
                runs.append(_subset_run(n, subset, pattern))
        return runs
    raise UnsupportedExtraction(f"unknown extraction {extraction!r}; expected one of {EXTRACTIONS}")


def _firstorder(chain: Chain, readings: Mapping[SettingRun, float]) -> complex:
    n = chain.n
    values: Dict[frozenset, complex] = {}
    for subset in _subsets(n):
        members = sorted(subset)
        size = len(members)
        gammas = [chain.modules[k].gamma for k in members]
        re_pattern, im_pattern = _patterns(size)
        e_re = readings[_subset_run(n, subset, re_pattern)]
        e_im = readings[_subset_run(n, subset, im_pattern)]
        # lower-order values re-indexed to positions inside the sub-chain
        local = {frozenset(members.index(k) for k in sub): values[sub]
                 for sub in values if sub < subset}

        if size == 1:
            values[subset] = swv.extract_single_firstorder(e_re, e_im, gammas[0])
        elif size == 2:
            values[subset] = swv.extract_pair_firstorder(
                {(P, P): e_re, (P, R): e_im}, local[frozenset({0})], local[frozenset({1})], gammas)
        elif size == 3:
            values[subset] = swv.extract_triple_firstorder(e_re, e_im, local, gammas)
        else:
            values[subset] = swv.extract_firstorder_general(e_re, e_im, local, gammas, size)
    return values[frozenset(range(n))]


def extract_from_runs(chain: Chain, extraction: str, readings: Mapping[SettingRun, float],
                      p_pass: Optional[float] = None) -> complex:
    """Combine per-run expectations into the full-chain SWV.

    exact_pauli also needs the post-selection probability of the full chain.
    """
    if extraction == FIRSTORDER:
        return _firstorder(chain, readings)
    if extraction == EXACT_PAULI:
        if p_pass is None:
            raise ValueError("exact_pauli extraction needs the post-selection probability")
        expectations = {run.settings: value for run, value in readings.items() if run.is_full}
        return swv.extract_sequence_exact(expectations, p_pass, abs(overlap(chain)) ** 2, chain.gammas)
    raise UnsupportedExtraction(f"unknown extraction {extraction!r}; expected one of {EXTRACTIONS}")


def exact_readings(chain: Chain, runs) -> Tuple[Dict[SettingRun, float], float]:
    """Noiseless expectation per run plus the full-chain post-selection probability."""
    readings = {}
    cache: Dict[Tuple[bool, ...], object] = {}
    for run in runs:
        ps = cache.get(run.active)
        if ps is None:
            ps = pointer_state(run_chain(chain, run))
            cache[run.active] = ps
        readings[run] = pointer_joint_expectation(ps, run.settings)
    full = cache.get((True,) * chain.n) or pointer_state(chain)
    return readings, full.norm_sq


def exact_swv_pipeline(chain: Chain, extraction: str = EXACT_PAULI) -> swv.SWValue:
    chain = active_chain(chain)
    runs = required_runs(chain.n, extraction)
    readings, p_pass = exact_readings(chain, runs)
    logger.debug("exact pipeline: %d runs, p_pass=%.6f", len(runs), p_pass)
    value = extract_from_runs(chain, extraction, readings, p_pass)
    return swv.SWValue(value=value, order=chain.n, observables=chain.observables)
