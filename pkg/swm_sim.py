#!/usr/bin/env python3
"""Sequential weak measurement simulator."""

import argparse
import logging
import math
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from simulation import __version__, optic, run_config, sweep
from simulation.errors import ConfigError, SimulationError
from simulation.pipeline import EXTRACTIONS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

logger = logging.getLogger('swm_sim')


class SweepRunner:
    """Runs one config and reports progress on a single status line."""

    def __init__(self, cfg, out_path):
        self.cfg = cfg
        self.out_path = Path(out_path)
        self.start_time = None

    def _progress(self, done, total):
        elapsed = time.time() - self.start_time
        rate = done / elapsed if elapsed > 0 else 0.0
        print(f"\rRows: {done:>4}/{total:<4} | {rate:>6.2f} rows/s | mode: {self.cfg.mode:<7} | "
              f"extraction: {self.cfg.extraction}  ", end='', file=sys.stderr, flush=True)

    def run(self):
        self.start_time = time.time()
        table = sweep.run_sweep(self.cfg, progress=self._progress)
        csv_path, sidecar_path = sweep.write_output(table, self.out_path)
        elapsed = time.time() - self.start_time
        print(f"\n\nCompleted: {len(table.rows)} rows ({table.flagged} flagged) in {elapsed:.1f}s "
              f"-> {csv_path}, {sidecar_path}", file=sys.stderr)
        return table


def _default_out(config_path):
    return Path('results') / (Path(config_path).stem + '.csv')


def cmd_run(args):
    cfg = run_config.parse_config(Path(args.config).read_bytes())
    cfg = cfg.with_overrides(
        mode=args.mode,
        seed=args.seed,
        shots=args.shots,
        resamples=args.resamples,
        extraction=args.extraction,
    )
    out = args.out or cfg.output_path or _default_out(args.config)
    sweep.sidecar_path(out)
    SweepRunner(cfg, out).run()
    return EXIT_OK


def cmd_verify_optics(args):
    observables, gammas = optic.grid_by_name(args.grid)
    results = optic.verify_grid(observables, gammas)
    failed = 0
    for r in results:
        status = 'PASS' if r.passed else 'FAIL'
        failed += not r.passed
        n = ','.join(f"{c:+.4f}" for c in r.observable.n)
        print(f"{status}  n=({n})  gamma={math.degrees(r.gamma):5.1f} deg  "
              f"{r.setting.value:<9}  deviation={r.deviation:.2e}")

    if args.export:
        export_dir = Path(args.export)
        export_dir.mkdir(parents=True, exist_ok=True)
        for i, r in enumerate(results):
            cm = optic.compile_module(r.observable, r.gamma, r.setting)
            name = f"module_{i:03d}_{r.setting.value}_g{round(math.degrees(r.gamma)):02d}.txt"
            (export_dir / name).write_text(optic.export_circuit(cm), encoding='utf-8')

    print(f"\n{len(results) - failed}/{len(results)} compiled modules verified")
    return EXIT_OK if failed == 0 else EXIT_RUNTIME


def cmd_selftest(args):
    import pytest

    tests = Path(__file__).parent / 'tests'
    code = pytest.main([str(tests), '-q'] + list(args.pytest_args))
    return EXIT_OK if code == 0 else EXIT_RUNTIME


def build_parser():
    parser = argparse.ArgumentParser(
        description='Sequential weak measurement simulator',
        formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='run a post-selection sweep from a config file')
    run.add_argument('config', help='run config (key = JSON lines, or one JSON object)')
    run.add_argument('--mode', choices=run_config.MODES, default=None,
                     help='exact or sampled (default: from config)')
    run.add_argument('--seed', type=int, default=None, help='sampling seed (default: from config)')
    run.add_argument('--out', default=None, help='CSV output path (default: results/<config>.csv)')
    run.add_argument('--shots', type=int, default=None, help='shots per setting run (sampled mode)')
    run.add_argument('--resamples', type=int, default=None, help='bootstrap resamples (sampled mode)')
    run.add_argument('--extraction', choices=EXTRACTIONS, default=None,
                     help='extraction method (default: from config)')
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser('verify-optics', help='check compiled optical modules against their Kraus branches')
    verify.add_argument('--grid', choices=('default', 'experiment'), default='default',
                        help='default: sigma_phi grid; experiment: sigma_y, sigma_z, sigma_pi/3 at 25/30 deg')
    verify.add_argument('--export', default=None, help='directory for KIND angle_deg arm element lists')
    verify.set_defaults(func=cmd_verify_optics)

    selftest = sub.add_parser('selftest', help='run the test suite')
    selftest.add_argument('pytest_args', nargs='*', help='extra pytest arguments')
    selftest.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s',
    )

    try:
        return args.func(args)
    except ConfigError as e:
        print(f"\nConfig error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, OSError) as e:
        print(f"\nError: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        print("\n\nInterrupted", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(main())
