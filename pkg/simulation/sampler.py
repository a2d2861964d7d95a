"""Heralded photon-counting emulation.

Exact outcome probabilities come from products of Kraus branches; finite
shot tables are multinomial draws from a counter-based Philox generator
keyed by (seed, stream, plan index, resample index), so results do not
depend on the order in which plans or resamples are evaluated.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
import torch

from . import config
from .chain_torch import Chain, kraus_branch
from .errors import NoPassEvents
from .pipeline import (
    EXACT_PAULI,
    active_chain,
    extract_from_runs,
    required_runs,
    run_chain,
)
from .qcore import Ket2, PointerSetting, analyzer_basis, orthogonal_ket
from .swv import SWValue

logger = logging.getLogger(__name__)

PASS, FAIL = 0, 1
PORTS = ('pass', 'fail')


@dataclass(frozen=True)
class MeasurementPlan:
    chain: Chain
    settings: Tuple[PointerSetting, ...]
    include_fail_port: bool = True

    def __post_init__(self):
        settings = tuple(self.settings)
        if len(settings) != self.chain.n:
            raise ValueError(f"plan needs {self.chain.n} pointer settings, got {len(settings)}")
        object.__setattr__(self, 'settings', settings)

    @property
    def analyzer_bases(self) -> Tuple[Tuple[Ket2, Ket2], ...]:
        return tuple(analyzer_basis(s) for s in self.settings)


@dataclass(frozen=True)
class OutcomeDistribution:
    """probs[outcome index, port]; outcome bit k-1 (MSB first) is 0 for s_k=+1, 1 for s_k=-1."""
    settings: Tuple[PointerSetting, ...]
    probs: np.ndarray

    def outcomes(self):
        return list(itertools.product((1, -1), repeat=len(self.settings)))

    def as_dict(self) -> Dict[Tuple[Tuple[int, ...], str], float]:
        table = {}
        for index, outcome in enumerate(self.outcomes()):
            for port, name in enumerate(PORTS):
                table[(outcome, name)] = float(self.probs[index, port])
        return table


@dataclass(frozen=True)
class CountsTable:
    settings: Tuple[PointerSetting, ...]
    counts: np.ndarray
    n_total: int
    seed: int

    @property
    def n_pass(self) -> int:
        return int(self.counts[:, PASS].sum())

    @property
    def entries(self) -> Dict[Tuple[Tuple[int, ...], str], int]:
        table = {}
        outcomes = itertools.product((1, -1), repeat=len(self.settings))
        for index, outcome in enumerate(outcomes):
            for port, name in enumerate(PORTS):
                table[(outcome, name)] = int(self.counts[index, port])
        return table


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n_pass: int


@dataclass(frozen=True)
class SWVEstimate:
    swv: SWValue
    re_sd: float
    im_sd: float
    n_pass: int
    p_pass: float


def distribution_from_branches(settings, psi_i: Ket2, psi_f: Ket2, branches,
                               include_fail_port: bool = True) -> OutcomeDistribution:
    """Outcome table from per-module (K_plus, K_minus) pairs, applied in order."""
    amps = psi_i.vector().reshape(1, 2)
    for k_plus, k_minus in branches:
        # rows are branch amplitudes; row-vector form of K @ psi
        amps = torch.stack([amps @ k_plus.T, amps @ k_minus.T], dim=1).reshape(-1, 2)

    pass_amp = amps @ psi_f.vector().conj()
    fail_amp = amps @ orthogonal_ket(psi_f).vector().conj()
    probs = torch.stack([torch.abs(pass_amp) ** 2, torch.abs(fail_amp) ** 2], dim=1)
    probs = probs.cpu().numpy().astype(np.float64)
    if not include_fail_port:
        probs[:, FAIL] = 0.0
    return OutcomeDistribution(settings=tuple(settings), probs=probs)


def outcome_distribution(plan: MeasurementPlan) -> OutcomeDistribution:
    """P(s_1..s_N, pass) = |<psi_f| K_sN ... K_s1 |psi_i>|^2, fail with <psi_f_perp|."""
    branches = [(kraus_branch(module, plus), kraus_branch(module, minus))
                for module, (plus, minus) in zip(plan.chain.modules, plan.analyzer_bases)]
    return distribution_from_branches(plan.settings, plan.chain.psi_i, plan.chain.psi_f,
                                      branches, plan.include_fail_port)


def _generator(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, key)])))


def sample_counts(dist: OutcomeDistribution, n: int, seed: int, plan_index: int = 0,
                  stream: int = 0) -> CountsTable:
    if n < 1:
        raise ValueError(f"shot count must be >= 1, got {n}")
    p = np.clip(dist.probs.ravel(), 0.0, None)
    p = p / p.sum()
    rng = _generator(seed, stream, plan_index, 0)
    counts = rng.multinomial(n, p).reshape(dist.probs.shape)
    return CountsTable(settings=dist.settings, counts=counts, n_total=int(n), seed=int(seed))


def resample_counts(counts: CountsTable, seed: int, plan_index: int, resample_index: int,
                    stream: int = 0) -> CountsTable:
    """Bootstrap replicate: n_total events redrawn from the observed frequencies."""
    p = counts.counts.ravel() / counts.n_total
    rng = _generator(seed, stream, plan_index, 1 + resample_index)
    redrawn = rng.multinomial(counts.n_total, p).reshape(counts.counts.shape)
    return CountsTable(settings=counts.settings, counts=redrawn, n_total=counts.n_total, seed=counts.seed)


def _product_signs(settings) -> np.ndarray:
    signs = []
    for outcome in itertools.product((1, -1), repeat=len(settings)):
        sign = 1
        for s_k, setting in zip(outcome, settings):
            if setting is not PointerSetting.IDENTITY:
                sign *= s_k
        signs.append(sign)
    return np.asarray(signs, dtype=np.float64)


def estimate_joint_expectation(counts: CountsTable) -> Estimate:
    n_pass = counts.n_pass
    if n_pass < 2:
        raise NoPassEvents(f"only {n_pass} post-selected events")
    mean = float(np.dot(_product_signs(counts.settings), counts.counts[:, PASS]) / n_pass)
    stderr = math.sqrt(max(0.0, 1.0 - mean * mean) / n_pass)
    return Estimate(mean=mean, stderr=stderr, n_pass=n_pass)


def _readings(runs, tables):
    readings = {run: estimate_joint_expectation(t).mean for run, t in zip(runs, tables)}
    full = [t for run, t in zip(runs, tables) if run.is_full]
    n_pass = sum(t.n_pass for t in full)
    n_total = sum(t.n_total for t in full)
    return readings, n_pass, n_total


def estimate_swv_pipeline(chain: Chain, shots: int, seed: int, resamples: int,
                          extraction: str = EXACT_PAULI, stream: int = 0) -> SWVEstimate:
    """Sample every run the extraction needs, extract, bootstrap the spread."""
    if shots < config.MIN_SHOTS:
        raise ValueError(f"shots must be >= {config.MIN_SHOTS}, got {shots}")
    if resamples < config.MIN_RESAMPLES:
        raise ValueError(f"resamples must be >= {config.MIN_RESAMPLES}, got {resamples}")

    chain = active_chain(chain)
    runs = required_runs(chain.n, extraction)
    tables = []
    for plan_index, run in enumerate(runs):
        plan = MeasurementPlan(run_chain(chain, run), run.settings)
        tables.append(sample_counts(outcome_distribution(plan), shots, seed, plan_index, stream))

    readings, n_pass, n_total = _readings(runs, tables)
    p_pass = n_pass / n_total
    value = extract_from_runs(chain, extraction, readings, p_pass)

    replicas = np.empty(resamples, dtype=np.complex128)
    for r in range(resamples):
        redrawn = [resample_counts(t, seed, i, r, stream) for i, t in enumerate(tables)]
        r_readings, r_pass, r_total = _readings(runs, redrawn)
        replicas[r] = extract_from_runs(chain, extraction, r_readings, r_pass / r_total)

    logger.debug("sampled pipeline: %d runs x %d shots, %d resamples, p_pass=%.4f",
                 len(runs), shots, resamples, p_pass)
    return SWVEstimate(
        swv=SWValue(value=value, order=chain.n, observables=chain.observables),
        re_sd=float(np.std(replicas.real)),
        im_sd=float(np.std(replicas.imag)),
        n_pass=n_pass,
        p_pass=p_pass,
    )
