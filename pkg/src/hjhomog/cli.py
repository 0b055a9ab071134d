"""Command-line entry point: ``hjhomog <subcommand> --config FILE [options]``.

Exit codes: 0 when every check of the run passed, 1 when a check failed,
2 on usage errors and faults (invalid configuration, solver failure, IO).
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, config_from_dict, echo_config, parse_config
from .experiments import run_experiment
from .output import prepare_dir, utc_now, write_outputs

SUBCOMMANDS = {
    "metric": "metric",
    "hbar": "hbar",
    "cell": "cell_rate",
    "evolve": "evolve_rate",
    "fluctuations": "fluctuations",
    "bias": "bias",
    "invariants": "invariants",
    "straszewicz": "straszewicz",
    "softmin-stats": "softmin_stats",
}

EXIT_OK, EXIT_FAILED, EXIT_FAULT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_FAULT)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hjhomog", description="Homogenization experiments for viscous "
                                                 "Hamilton-Jacobi equations in random media.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True
    for name, kind in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run the {kind} experiment")
        p.add_argument("--config", help="YAML configuration file (defaults when omitted)")
        p.add_argument("--seed", type=int, help="override the configuration seed")
        p.add_argument("--replicas", type=int, help="override n_replicas")
        p.add_argument("--threads", type=int,
                       help="worker threads (default: HJHOMOG_THREADS or 1)")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--force", action="store_true", help="write into a non-empty directory")
        p.add_argument("--plot", action="store_true", help="also write SVG plots")
    return parser


def _load(args, kind: str):
    cfg = parse_config(args.config) if args.config else config_from_dict({})
    if cfg.kind is not None and cfg.kind != kind:
        raise ConfigError(f"configuration is for {cfg.kind!r}, not {kind!r}")
    data = cfg.model_dump()
    data["kind"] = kind
    if args.seed is not None:
        data["seed"] = args.seed
    if args.replicas is not None:
        data["n_replicas"] = args.replicas
    if args.out is not None:
        data["output_dir"] = args.out
    return config_from_dict(data)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_FAULT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    kind = SUBCOMMANDS[args.command]
    try:
        cfg = _load(args, kind)
        if cfg.output_dir is None:
            raise ConfigError("no output directory: pass --out or set output_dir")
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        prepare_dir(cfg.output_dir, args.force)
        started = utc_now()
        record = run_experiment(cfg, args.threads)
        write_outputs(record, cfg.output_dir, config_text=echo_config(cfg), plot=args.plot,
                      started=started, force=True)
    except Exception as exc:  # every fault maps to exit code 2 with a diagnostic
        print(f"hjhomog {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAULT
    for name, ok in sorted(record.checks.items()):
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return EXIT_OK if record.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
