"""Command-line entry point: ``edgecache {train,eval,sweep,ne-check,selftest}``.

Exit status is 0 only when every run finished with all constraint audits
passing (and, for the check commands, every check passed).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
from pathlib import Path

from . import checks, harness
from .config import POLICIES, PROFILES, ConfigError, config_to_dict, load_config
from .game import NonConvergenceError
from .scaa import ScaaNetwork

log = logging.getLogger("edgecache")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--policy", choices=POLICIES)
    p.add_argument("--profile", choices=PROFILES)
    p.add_argument("--out", type=Path, default=Path("runs"))


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgecache", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train (and then evaluate) one policy")
    _common(p)
    p.add_argument("--train-slots", type=int)
    p.add_argument("--eval-slots", type=int)

    p = sub.add_parser("eval", help="run a frozen policy with no training")
    _common(p)
    p.add_argument("--checkpoint", type=Path, help="network saved by 'train'")
    p.add_argument("--eval-slots", type=int)

    p = sub.add_parser("sweep", help="grid x seeds x policies over one axis")
    _common(p)
    p.add_argument("--axis", required=True, choices=sorted(harness.SWEEP_AXES))
    p.add_argument("--grid", required=True, help="comma-separated axis values")
    p.add_argument("--seeds", default="0,1,2", help="comma-separated seeds")
    p.add_argument("--policies", default="proposed,lru,lfu,fifo,lmp,offload-only")
    p.add_argument("--workers", type=int, default=harness.default_workers())
    p.add_argument("--train-slots", type=int)
    p.add_argument("--eval-slots", type=int)

    p = sub.add_parser("ne-check", help="equilibrium, sign-agreement and iteration-bound checks")
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("selftest", help="every acceptance check")
    p.add_argument("--quick", action="store_true", help="shorter desk-scale runs")
    return parser


def _config(args, **extra):
    overrides = {"seed": args.seed, "policy": args.policy, **extra}
    return load_config(args.config, args.profile, **overrides)


def _write_config(cfg, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{harness.run_name(cfg)}-config.json", "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _report(results) -> int:
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "train":
            cfg = _config(args, train_slots=args.train_slots, eval_slots=args.eval_slots)
            _write_config(cfg, args.out)
            path = harness.run_experiment(cfg, args.out, checkpoint=True)
            _, summary = harness.read_metrics(path)
            print(f"{path}: mean energy {float(summary['energy']):.6g} J")
        elif args.command == "eval":
            cfg = _config(args, train_slots=0, eval_slots=args.eval_slots)
            net = ScaaNetwork.load(args.checkpoint) if args.checkpoint else None
            if cfg.policy == "proposed" and net is None:
                log.warning("evaluating an untrained network; pass --checkpoint")
            _write_config(cfg, args.out)
            path = harness.run_experiment(cfg, args.out, network=net)
            _, summary = harness.read_metrics(path)
            print(f"{path}: mean energy {float(summary['energy']):.6g} J")
        elif args.command == "sweep":
            cfg = _config(args, train_slots=args.train_slots, eval_slots=args.eval_slots)
            grid = [float(v) for v in args.grid.split(",")]
            seeds = [int(s) for s in args.seeds.split(",")]
            policies = args.policies.split(",")
            for p in policies:
                if p not in POLICIES:
                    raise ConfigError(f"unknown policy {p!r}")
            result = harness.run_sweep(cfg, args.axis, grid, seeds, policies, args.out,
                                       workers=args.workers)
            for row in result.table:
                print(f"{row['axis']}={row['value']:g} {row['policy']:>12}: "
                      f"{row['mean_energy']:.6g} +- {row['sd_energy']:.3g} J ({row['runs']} runs)")
            for f in result.failures:
                print(f"FAILED {args.axis}={f['value']} {f['policy']} seed {f['seed']}: {f['error']}",
                      file=sys.stderr)
            print(result.path)
            return 1 if result.failures else 0
        elif args.command == "ne-check":
            ne = checks.ne_oracle(args.instances, args.seed)
            return _report([ne, checks.sign_agreement(),
                            checks.iteration_bound(ne.data["outcomes"], seed=args.seed)])
        elif args.command == "selftest":
            with tempfile.TemporaryDirectory() as tmp:
                return _report(checks.run_all(tmp, full=not args.quick))
    except harness.ConstraintViolation as exc:
        print(f"audit failed: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, NonConvergenceError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
