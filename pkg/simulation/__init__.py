"""Sequential weak measurement of Pauli observables: simulation and extraction."""

__version__ = '1.0.0'

from . import qcore
from . import chain_torch
from . import swv
from . import pipeline
from . import sampler
from . import optic
from . import run_config
from . import sweep

__all__ = [
    'qcore',
    'chain_torch',
    'swv',
    'pipeline',
    'sampler',
    'optic',
    'run_config',
    'sweep',
]
