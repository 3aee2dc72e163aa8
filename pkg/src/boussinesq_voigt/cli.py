"""Command-line entry point ``bv``.

Commands::

    bv run CONFIG
    bv sweep CONFIG --family {alpha,kappa,nu_y} --values V1 V2 ...
    bv verify
    bv resume SNAPSHOT --t-end T [--config CONFIG]

Exit codes: 0 success, 1 verify found failures, 2 invalid configuration or
usage, 3 numerical fault, 4 I/O error. Failures are reported on stderr as a
single JSON object with ``error``, ``message`` and optional ``details``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigErrors, load_config
from .errors import BoussinesqError, ConfigurationError, NumericalFaultError
from .experiments import SweepSpec, run_sweep
from .runner import resume, run, write_sweep

log = logging.getLogger("boussinesq_voigt")

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4


def _fail(kind: str, message: str, code: int, details=None) -> int:
    payload = {"error": kind, "message": message}
    if details:
        payload["details"] = details
    print(json.dumps(payload), file=sys.stderr)
    return code


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = run(cfg, args.output)
    traj = out.trajectory
    last = traj.records[-1]
    print(f"wrote {out.diagnostics} ({len(traj.records)} rows, {traj.steps} steps, t={last.t:.6g})")
    if traj.censored:
        print(f"run censored: {traj.reason}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    spec = SweepSpec(
        family=args.family,
        values=tuple(args.values),
        base_params=cfg.model,
        ic_name=cfg.ic.name,
        n=cfg.grid.n,
        T=cfg.stepper.t_end,
        stepper=cfg.stepper,
        amplitude=cfg.ic.amplitude,
        theta_amplitude=cfg.ic.theta_amplitude,
        width=cfg.ic.width,
        seed=cfg.ic.seed,
        max_workers=args.workers,
    )
    result = run_sweep(spec)
    directory = Path(args.output or Path(cfg.output.directory) / f"sweep_{args.family}")
    write_sweep(result, directory)
    print(f"reference {args.family} = {result.reference_value:g}, dt = {result.dt:.4g}")
    for key, order in result.orders.items():
        shown = "undefined" if order is None else f"{order:.3f}"
        print(f"  order[{key}] = {shown}")
    print(f"wrote {directory}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verify import format_table, run_all

    results = run_all(progress=(lambda r: print(r.line(), file=sys.stderr)) if args.verbose else None)
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECKS


def _cmd_resume(args) -> int:
    cfg = load_config(args.config) if args.config else None
    out = resume(args.snapshot, args.t_end, cfg=cfg, directory=args.output)
    traj = out.trajectory
    print(f"resumed to t={traj.final_state.t:.6g} in {traj.steps} steps; wrote {out.diagnostics}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bv", description="Boussinesq / Boussinesq-Voigt pseudo-spectral solver")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate one configuration")
    p.add_argument("config")
    p.add_argument("--output", help="override [output] directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="vanishing-parameter continuation")
    p.add_argument("config")
    p.add_argument("--family", required=True, choices=("alpha", "kappa", "nu_y"))
    p.add_argument("--values", required=True, nargs="+", type=float, help="strictly decreasing, positive")
    p.add_argument("--workers", type=int, default=1, help="members integrated concurrently")
    p.add_argument("--output", help="sweep directory (default <output>/sweep_<family>)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("verify", help="run the self-check suite")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("resume", help="continue from a snapshot")
    p.add_argument("snapshot")
    p.add_argument("--t-end", required=True, type=float)
    p.add_argument("--config", help="configuration to check against (default: the one stored in the snapshot)")
    p.add_argument("--output", help="override output directory")
    p.set_defaults(func=_cmd_resume)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigErrors as exc:
        details = [{"line": line, "message": msg} for line, msg in exc.errors]
        return _fail("ConfigurationError", "invalid configuration", EXIT_CONFIG, details)
    except NumericalFaultError as exc:
        details = {"step": exc.step, "diagnostic": exc.diagnostic}
        return _fail("NumericalFaultError", str(exc), EXIT_NUMERICAL, details)
    except ConfigurationError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_CONFIG)
    except BoussinesqError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_CONFIG)
    except OSError as exc:
        return _fail("IOError", str(exc), EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())
