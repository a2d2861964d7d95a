"""Post-selection sweeps and their CSV/JSON output."""

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple

from . import __version__, config
from .chain_torch import overlap, pointer_state
from .device_setup import worker_count
from .errors import SimulationError, ValidationError
from .pipeline import active_chain, exact_swv_pipeline
from .qcore import Ket2
from .run_config import EXACT, RunConfig
from .sampler import estimate_swv_pipeline
from .swv import weak_value_oracle

logger = logging.getLogger(__name__)

DIVERGED = 'diverged'

CSV_HEADER = ('theta_deg', 're_oracle', 'im_oracle', 're_est', 'im_est', 're_err', 'im_err',
              'p_pass', 'n_pass', 're_sd', 'im_sd', 'flags')


@dataclass(frozen=True)
class SweepRow:
    theta: Optional[float]
    oracle: Optional[complex] = None
    estimate: Optional[complex] = None
    p_pass: Optional[float] = None
    n_pass: Optional[int] = None
    re_sd: Optional[float] = None
    im_sd: Optional[float] = None
    flags: Tuple[str, ...] = ()

    @property
    def flagged(self) -> bool:
        return bool(self.flags)

    @property
    def re_err(self) -> Optional[float]:
        if self.oracle is None or self.estimate is None:
            return None
        return abs(self.estimate.real - self.oracle.real)

    @property
    def im_err(self) -> Optional[float]:
        if self.oracle is None or self.estimate is None:
            return None
        return abs(self.estimate.imag - self.oracle.imag)


@dataclass(frozen=True)
class SweepTable:
    config: RunConfig
    rows: Tuple[SweepRow, ...]

    @property
    def flagged(self) -> int:
        return sum(1 for r in self.rows if r.flagged)


def _row(cfg: RunConfig, index: int, theta: Optional[float], psi_f: Ket2) -> SweepRow:
    chain = cfg.chain(psi_f)
    if abs(overlap(chain)) <= config.SWEEP_DIVERGENCE_OVERLAP:
        return SweepRow(theta, flags=(DIVERGED,))

    try:
        measured = active_chain(chain)
        oracle = weak_value_oracle(measured.psi_i, measured.psi_f, measured.observables)
        if cfg.mode == EXACT:
            swv = exact_swv_pipeline(measured, cfg.extraction)
            return SweepRow(theta, oracle, swv.value, p_pass=pointer_state(measured).norm_sq)
        # one random stream per row
        est = estimate_swv_pipeline(measured, cfg.shots, cfg.seed, cfg.resamples, cfg.extraction, stream=index)
        return SweepRow(theta, oracle, est.swv.value, p_pass=est.p_pass, n_pass=est.n_pass,
                        re_sd=est.re_sd, im_sd=est.im_sd)
    except SimulationError as exc:
        label = 'post-selection' if theta is None else f"theta={math.degrees(theta):.1f} deg"
        logger.warning("row %s failed: %s: %s", label, type(exc).__name__, exc)
        return SweepRow(theta, flags=(f"failed:{type(exc).__name__}",))


def run_sweep(cfg: RunConfig, progress: Optional[Callable[[int, int], None]] = None) -> SweepTable:
    """One row per post-selected state, in sweep order regardless of completion order."""
    states = cfg.post_states()
    total = len(states)
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        futures = [pool.submit(_row, cfg, i, theta, psi_f) for i, (theta, psi_f) in enumerate(states)]
        for done, _ in enumerate(as_completed(futures), start=1):
            if progress is not None:
                progress(done, total)
        rows = tuple(f.result() for f in futures)

    table = SweepTable(config=cfg, rows=rows)
    logger.debug("sweep finished: %d rows, %d flagged", total, table.flagged)
    return table


def _fmt(value) -> str:
    if value is None:
        return ''
    if isinstance(value, int):
        return str(value)
    return repr(float(value) + 0.0)


def format_csv(table: SweepTable) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(CSV_HEADER)
    for row in table.rows:
        theta_deg = None if row.theta is None else round(math.degrees(row.theta), 9)
        writer.writerow([
            _fmt(theta_deg),
            _fmt(None if row.oracle is None else row.oracle.real),
            _fmt(None if row.oracle is None else row.oracle.imag),
            _fmt(None if row.estimate is None else row.estimate.real),
            _fmt(None if row.estimate is None else row.estimate.imag),
            _fmt(row.re_err),
            _fmt(row.im_err),
            _fmt(row.p_pass),
            _fmt(row.n_pass),
            _fmt(row.re_sd),
            _fmt(row.im_sd),
            ';'.join(row.flags),
        ])
    return buffer.getvalue()


def format_sidecar(table: SweepTable) -> str:
    provenance = {
        'version': __version__,
        'seed': table.config.seed,
        'config': table.config.to_dict(),
        'rows': len(table.rows),
        'flagged': table.flagged,
    }
    return json.dumps(provenance, indent=2, sort_keys=True) + '\n'


def sidecar_path(path) -> Path:
    """Provenance file next to the CSV; a .json output would overwrite itself."""
    csv_path = Path(path)
    if csv_path.suffix.lower() == '.json':
        raise ValidationError(f"output {csv_path} would collide with its .json sidecar",
                              constraint="output path must not end in .json")
    return csv_path.with_suffix('.json')


def write_output(table: SweepTable, path) -> Tuple[Path, Path]:
    """Write `path` (CSV) and its `.json` provenance sidecar."""
    if not table.rows:
        raise ValueError("refusing to write an empty result table")
    csv_path = Path(path)
    sidecar = sidecar_path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, 'w', encoding='utf-8', newline='') as fh:
        fh.write(format_csv(table))
    with open(sidecar, 'w', encoding='utf-8', newline='') as fh:
        fh.write(format_sidecar(table))
    return csv_path, sidecar
