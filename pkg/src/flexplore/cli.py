"""Command-line entry point: ``flexplore {explore,benchmark,chain,star}``."""
from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import harness


def _config_path(name: str) -> Path:
    """Accept a file path or the name of a shipped config (``pendulum`` or ``pendulum.ini``)."""
    path = Path(name)
    if path.exists():
        return path
    stem = path.name if path.suffix == ".ini" else f"{path.name}.ini"
    shipped = resources.files("flexplore") / "configs" / stem
    if shipped.is_file():
        return Path(str(shipped))
    raise SystemExit(f"config not found: {name}")


def _policies(arg, experiment: dict, default):
    if arg:
        return harness._parse_list(arg)
    if "policies" in experiment:
        return harness._parse_list(experiment["policies"])
    return list(default)


def cmd_explore(args) -> int:
    cfg, _ = harness.read_config(_config_path(args.config))
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.policy:
        cfg = cfg.replace(policy=args.policy)
    out = Path(args.out)
    trace = harness.run_exploration(cfg, out_dir=out)
    path = harness.write_trace(trace, out / f"{cfg.env}_{cfg.policy}_seed{cfg.seed}.csv")
    if args.periodogram:
        harness.input_periodogram(trace, out / f"{cfg.env}_{cfg.policy}_seed{cfg.seed}_psd.csv")
    print(f"wrote {path}")
    print(f"final eps {trace.final_eps:.6g}" + (f", param error {trace.final_perr:.6g}"
                                                 if not np.isnan(trace.final_perr) else ""))
    if trace.failed:
        print(f"run failed: {trace.message}", file=sys.stderr)
        return 1
    return 0


def cmd_benchmark(args) -> int:
    cfg, experiment = harness.read_config(_config_path(args.config))
    policies = _policies(args.policies, experiment, ["flex", "random", "periodic", "uniform"])
    seeds = args.seeds or int(experiment.get("seeds", 20))
    traces, _ = harness.benchmark(cfg, policies, seeds, out_dir=args.out, workers=args.workers)
    for policy, finals in harness.final_values(traces).items():
        print(f"{cfg.env:<10} {policy:<10} median final eps {np.median(finals):.6g} "
              f"({len(finals)} seeds)")
    failed = sum(tr.failed for tr in traces)
    if failed:
        print(f"{failed} run(s) failed", file=sys.stderr)
        return 1
    return 0


def cmd_chain(args) -> int:
    base = None
    if args.config:
        base, _ = harness.read_config(_config_path(args.config))
    else:
        base, _ = harness.read_config(_config_path("chain"))
    sizes = [int(s) for s in harness._parse_list(args.sizes)]
    table = harness.chain_experiment(sizes, threshold=args.threshold, cap=args.cap,
                                     n_seeds=args.seeds, base=base, workers=args.workers,
                                     out_dir=args.out)
    print(f"{'N':>3} {'policy':<8} {'median samples':>15} {'policy us/step':>15}")
    for row in table:
        med = row["median_samples"]
        shown = f">{args.cap}" if np.isinf(med) else f"{med:g}"
        print(f"{row['N']:>3} {row['policy']:<8} {shown:>15} {row['mean_policy_ns'] / 1e3:>15.1f}")
    return 1 if any(row["n_failed"] for row in table) else 0


def cmd_star(args) -> int:
    cfg, experiment = harness.read_config(_config_path(args.config))
    policies = _policies(args.policies, experiment, ["flex", "random", "episodic"])
    seeds = args.seeds or int(experiment.get("seeds", 20))
    _, summary = harness.star_experiment(cfg, policies, seeds, out_dir=args.out,
                                         workers=args.workers)
    for row in summary:
        print(f"{row['policy']:<10} median final param error {row['final_perr_median']:.4g}  "
              f"mean distance to star {row['mean_star_distance']:.4g}  "
              f"policy us/step {row['mean_policy_ns'] / 1e3:.1f}")
    return 1 if any(row["n_failed"] for row in summary) else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flexplore", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explore", help="run one exploration and write its trace")
    p.add_argument("config", help="INI file or shipped config name")
    p.add_argument("--seed", type=int)
    p.add_argument("--policy")
    p.add_argument("--periodogram", action="store_true", help="also write the input spectrum")
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("benchmark", help="compare policies over seeds")
    p.add_argument("config")
    p.add_argument("--seeds", type=int, default=0, help="defaults to the config's [experiment] seeds")
    p.add_argument("--policies", help="comma-separated policy names")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("chain", help="samples to reach a parameter error on pendulum chains")
    p.add_argument("--sizes", default="2,5,10")
    p.add_argument("--config", help="base config (defaults to the shipped chain config)")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--cap", type=int, default=500)
    p.add_argument("--threshold", type=float, default=1e-2)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_chain)

    p = sub.add_parser("star", help="time-varying star field tracking")
    p.add_argument("config", nargs="?", default="star")
    p.add_argument("--seeds", type=int, default=0)
    p.add_argument("--policies")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_star)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
