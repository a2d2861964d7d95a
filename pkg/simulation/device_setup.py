"""Torch device selection and state-vector allocation."""

import logging
import os

import torch

from . import config

logger = logging.getLogger(__name__)

DTYPE = torch.complex128

_device = None


def select_device():
    """Device for all tensors; CPU unless SWM_DEVICE asks for something else.

    CUDA is honoured only when torch reports it available, otherwise we fall
    back to CPU with a warning.
    """
    global _device
    if _device is not None:
        return _device

    requested = os.environ.get(config.DEVICE_ENV, 'cpu').strip() or 'cpu'
    if requested.startswith('cuda') and not torch.cuda.is_available():
        logger.warning("%s=%s but CUDA is not available, using cpu", config.DEVICE_ENV, requested)
        requested = 'cpu'
    _device = torch.device(requested)
    return _device


def as_tensor(values):
    return torch.as_tensor(values, dtype=DTYPE, device=select_device())


def zeros(*shape):
    return torch.zeros(*shape, dtype=DTYPE, device=select_device())


def eye(n):
    return torch.eye(n, dtype=DTYPE, device=select_device())


def setup_joint_state(psi_i_vector, n_pointers):
    """|psi_i>|0>...|0> as a [2] * (N+1) tensor, system on axis 0."""
    state = zeros(*([2] * (n_pointers + 1)))
    origin = (0,) * n_pointers
    state[(0,) + origin] = psi_i_vector[0]
    state[(1,) + origin] = psi_i_vector[1]
    return state


def worker_count():
    """Thread pool size for independent work items, from SWM_WORKERS (default 1)."""
    raw = os.environ.get(config.WORKERS_ENV, '').strip()
    if not raw:
        return 1
    try:
        workers = int(raw)
    except ValueError:
        logger.warning("ignoring %s=%r, expected a positive integer", config.WORKERS_ENV, raw)
        return 1
    return max(1, workers)
