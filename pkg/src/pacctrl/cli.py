"""Command-line entry point: ``pacctrl <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 infeasible optimization,
4 certificate violated by validation, 5 missing or unreadable input file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from . import pipeline as P

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_VIOLATION = 4
EXIT_INPUT = 5

def _load_config(args) -> P.RunConfig:
    cfg = P.RunConfig.load(args.config) if args.config else P.RunConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "experiment", None):
        overrides["experiment"] = args.experiment
    if getattr(args, "n_envs", None) is not None:
        overrides["n_envs"] = args.n_envs
    if overrides:
        cfg = P.RunConfig.from_dict({**cfg.to_dict(), **overrides})
    return cfg


def _replay(cfg: P.RunConfig, out: Path) -> str:
    return P.replay_command(P.write_config(cfg, out))


def cmd_gen_envs(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    P.write_config(cfg, out)
    print(P.gen_envs(cfg, out))
    return EXIT_OK


def cmd_cost_matrix(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    env_path = Path(args.envs) if args.envs else out / P.ENV_FILE
    print(P.make_cost_matrix(cfg, env_path, out, args.workers))
    return EXIT_OK


def cmd_certify(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    cost = Path(args.cost_matrix) if args.cost_matrix else None
    envs = Path(args.envs) if args.envs else None
    try:
        P.certify(cfg, out, cost, envs, args.workers, replay=_replay(cfg, out))
    finally:
        if (out / P.REPORT_FILE).exists():
            sys.stdout.write((out / P.REPORT_FILE).read_text())
    return EXIT_OK


def _print_validation(rec) -> None:
    print(f"estimate {rec['estimate']:.6f} over M = {rec['M']}, "
          f"{int(100 * rec['ci_level'])}% CI [{rec['ci_low']:.6f}, {rec['ci_high']:.6f}], "
          f"bound {rec['bound']:.6f}: {'VIOLATION' if rec['violation'] else 'ok'}")


def cmd_validate(args) -> int:
    cert = Path(args.certificate)
    _, doc = P.load_certificate(cert)
    seed = args.seed if args.seed is not None else doc["seed"]
    out = Path(args.out) if args.out else cert.parent
    rec = P.validate(cert, args.m, seed, out, args.workers)
    _print_validation(rec)
    return EXIT_VIOLATION if rec["violation"] else EXIT_OK


def cmd_report(args) -> int:
    cert = Path(args.certificate)
    _, doc = P.load_certificate(cert)
    val = None
    vpath = Path(args.validation) if args.validation else cert.parent / P.VALIDATION_FILE
    if vpath.exists():
        val = json.loads(vpath.read_text())
    sys.stdout.write(P.format_report(doc, val))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    rec = P.run_all(cfg, out, args.workers, args.m)
    sys.stdout.write((out / P.REPORT_FILE).read_text())
    _print_validation(rec)
    return EXIT_VIOLATION if rec["violation"] else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pacctrl", description="PAC-Bayes certified "
                                 "obstacle-avoidance controllers.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True, seed=True, workers=True):
        if config:
            p.add_argument("--config", help="JSON run configuration (defaults if omitted)")
        if seed:
            p.add_argument("--seed", type=int, help="override the master seed")
        if workers:
            p.add_argument("--workers", type=int, default=1, help="worker processes")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("gen-envs", help="sample training environments")
    common(p, workers=False)
    p.add_argument("--n-envs", type=int, help="override the number of environments")
    p.set_defaults(func=cmd_gen_envs)

    p = sub.add_parser("cost-matrix", help="evaluate the finite policy grid on the environments")
    common(p, seed=False)
    p.add_argument("--envs", help=f"environments file (default OUT/{P.ENV_FILE})")
    p.set_defaults(func=cmd_cost_matrix)

    p = sub.add_parser("certify", help="optimize a posterior and write its certificate")
    common(p, seed=False)
    p.add_argument("--experiment", choices=P.EXPERIMENTS, help="override the experiment")
    p.add_argument("--cost-matrix", help=f"cost matrix CSV (default OUT/{P.COST_FILE})")
    p.add_argument("--envs", help=f"environments file (default OUT/{P.ENV_FILE})")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("validate", help="Monte-Carlo check of a certificate")
    p.add_argument("certificate")
    p.add_argument("--m", type=int, default=10_000, help="number of fresh environments")
    p.add_argument("--seed", type=int, help="validation seed (default: certificate seed)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output directory (default: next to the certificate)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="print a certificate summary")
    p.add_argument("certificate")
    p.add_argument("--validation", help="validation record to include")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="every stage end to end")
    common(p)
    p.add_argument("--experiment", choices=P.EXPERIMENTS, help="override the experiment")
    p.add_argument("--n-envs", type=int, help="override the number of environments")
    p.add_argument("--m", type=int, help="validation environments (default from config)")
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except P.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except P.InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"input error: {exc!r}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
