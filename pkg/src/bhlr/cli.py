"""Command-line entry point: ``bhlr run | verify | list | describe``.

Exit codes: 0 success, 2 bad config or arguments, 3 numerical failure,
4 invariant violation in a verify run.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import KINDS, load_config, shipped_configs
from .errors import ConfigError, InvalidArgument, NumericalFailure
from .runner import run_experiment, write_outputs
from .verify import run_all

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VIOLATION = 0, 2, 3, 4

DESCRIPTIONS = {
    "particle": (
        "Particle propagation. Measures the eta-th moment Tr[N_{B_r(x)}^eta rho(t)] of the\n"
        "number of bosons in the ball of radius r around x, under the full Bose-Hubbard\n"
        "dynamics. Propagation estimates of this kind allow any velocity v > 2d|J|: when\n"
        "v|t| <= R - r, the late moment in the small ball is controlled by the initial\n"
        "moment in the larger ball of radius R plus a remainder that decays in R - r.\n"
        "Points outside that regime are measured anyway and flagged 'outside_regime'.\n"
        "Fit: front speed of the 1e-3 threshold crossing versus time."
    ),
    "lr": (
        "Lieb-Robinson distance in trace norm. Measures ||(tau_t(A) - tau^R_t(A)) rho||_1,\n"
        "where tau_t is the full Heisenberg evolution and tau^R_t is generated by the\n"
        "Hamiltonian restricted to X[R], the R-neighbourhood of the support X of a bounded\n"
        "number-conserving observable A. For initial states with controlled local density\n"
        "this difference becomes small once R outgrows the light cone.\n"
        "Fit: log value against log R per time."
    ),
    "commutator": (
        "Commutator light cone. Measures the operator norm ||[tau_t(A), B]|| for observables\n"
        "on disjoint sites, and the same quantity for the truncated dynamics generated by\n"
        "Pi H Pi, where at most nu bosons sit on each site and the interaction is bounded.\n"
        "In the truncated case the norm has an exponential tail in the separation.\n"
        "Fit: log value against separation per time."
    ),
    "ladder": (
        "Truncation ladder. Splits tau_t(A) - tau^R_t(A) into five steps: A -> Pi A Pi,\n"
        "full -> truncated dynamics, truncated -> restricted truncated dynamics,\n"
        "restricted truncated -> restricted dynamics, Pi A Pi -> A. Each step is measured as\n"
        "the trace norm ||rho D||_1 (the supremum of |Tr[rho D B]| over ||B|| = 1) and their\n"
        "sum is compared against the direct difference."
    ),
    "verify": (
        "Invariant suites: Hermiticity, number conservation, the commutator expansion\n"
        "[H, dGamma(g)] = -J sum (g(x) - g(y)) b_x^* b_y, projector identities, the cutoff\n"
        "sandwich and ball inequalities of the localization observables, the symmetric\n"
        "Taylor remainder order, Krylov against dense propagation, the group law, and the\n"
        "interaction-picture equation. Exits with status 4 if any check fails."
    ),
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bhlr", description="Bose-Hubbard light-cone experiments.")
    p.add_argument("--version", action="version", version=f"bhlr {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config", help="path to a TOML config, or the name of a shipped config")
    run.add_argument("--out", default=".", help="output directory (default: current)")
    run.add_argument("--threads", type=int, default=1, help="grid points evaluated concurrently")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")

    ver = sub.add_parser("verify", help="run all invariant suites")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--json", dest="json_out", default=None, help="write check results to this file")

    sub.add_parser("list", help="list experiment kinds and shipped configs")
    desc = sub.add_parser("describe", help="explain an experiment kind")
    desc.add_argument("kind")
    return p


def _resolve(config: str) -> Path:
    path = Path(config)
    if path.exists():
        return path
    shipped = shipped_configs()
    if config in shipped:
        return shipped[config]
    return path  # let the loader report it


def _verify(seed: int, json_out=None) -> int:
    checks, timing = run_all(seed=seed)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed in {sum(timing.values()):.2f} s")
    if json_out:
        Path(json_out).write_text(json.dumps({"version": __version__, "seed": seed, "timing": timing,
                                              "checks": [c.to_dict() for c in checks]}, indent=2) + "\n")
    return EXIT_VIOLATION if failed else EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list":
        for kind in KINDS:
            print(kind)
        shipped = shipped_configs()
        if shipped:
            print("\nshipped configs: " + ", ".join(shipped))
        return EXIT_OK
    if args.command == "describe":
        if args.kind not in DESCRIPTIONS:
            print(f"error: unknown experiment kind {args.kind!r} (known: {', '.join(KINDS)})", file=sys.stderr)
            return EXIT_CONFIG
        print(DESCRIPTIONS[args.kind])
        return EXIT_OK
    if args.command == "verify":
        return _verify(args.seed, args.json_out)

    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be >= 0", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(_resolve(args.config), seed=args.seed)
        if cfg.kind == "verify":
            return _verify(cfg.seed)
        result = run_experiment(cfg, threads=args.threads)
        csv_path, json_path = write_outputs(result, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        for k, v in exc.diagnostics.items():
            print(f"  {k} = {v}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"wrote {csv_path} ({len(result.records)} rows) and {json_path}")
    for fit in result.meta.get("fits", []):
        if "error" in fit:
            print(f"fit {fit['label']}: {fit['error']}")
        else:
            print(f"fit {fit['label']}: {fit['mode']} slope={fit['slope']:.4g} r2={fit['r2']:.4f}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
