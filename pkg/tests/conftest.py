import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from simulation.chain_torch import Chain, WeakModule
from simulation.qcore import KET_H, KET_PLUS, SIGMA_Y, SIGMA_Z, sigma_phi


def make_chain(observables, gamma, psi_i=KET_PLUS, psi_f=KET_H):
    gammas = gamma if isinstance(gamma, (list, tuple)) else [gamma] * len(observables)
    return Chain(psi_i, tuple(WeakModule(o, g) for o, g in zip(observables, gammas)), psi_f)


@pytest.fixture
def triple_observables():
    return (SIGMA_Y, SIGMA_Z, sigma_phi(math.pi / 3))


@pytest.fixture
def chain_factory():
    return make_chain


@pytest.fixture
def triple_oracle():
    return 1j * (1 - math.sqrt(3)) / 2
