"""Command line entry point: ``vocalrecruit <experiment> [options]``."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import InvalidConfigError, VocalRecruitError
from .harness import EXPERIMENTS, OUTPUT_ENV, load_config, run_experiment


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="vocalrecruit",
        description="Run the articulator-recruitment experiments on the surrogate synthesizer.",
    )
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="YAML file overriding the shipped defaults")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV} or ./results)")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--goals", help="exp2: number of random goals; exp1: comma-separated vowel labels")
    p.add_argument("--updates", type=int, help="optimizer updates per run")
    return p


def overrides_from_args(args: argparse.Namespace) -> dict:
    ov: dict = {}
    if args.seed is not None:
        ov["master_seed"] = args.seed
    if args.workers is not None:
        ov["workers"] = args.workers
    out = args.out or os.environ.get(OUTPUT_ENV)
    if out:
        ov["output_dir"] = out
    if args.updates is not None:
        key = "toy" if args.experiment == "toy" else "optimizer"
        ov[key] = {"updates": args.updates}
    if args.goals is not None:
        if args.experiment == "exp1":
            ov["exp1"] = {"vowels": [g.strip() for g in args.goals.split(",") if g.strip()]}
        elif args.experiment == "exp2":
            try:
                ov["exp2"] = {"n_goals": int(args.goals)}
            except ValueError:
                raise InvalidConfigError(f"--goals must be an integer for exp2, got {args.goals!r}") from None
        else:
            raise InvalidConfigError(f"--goals does not apply to {args.experiment}")
    return ov


def _report(name: str, summary: dict) -> None:
    if name == "exp1":
        for v, s in summary["vowels"].items():
            print(f"/{v}/ qualifying {s['qualifying']}, P1 first {s['p1_first']}, failed {s['failed']}")
            for k, order in enumerate(s["orders"]):
                print(f"  seed {k}: " + (", ".join(f"P{m}" for m in order) or "-"))
    elif name == "exp2":
        c = summary["counts"]
        print(f"runs {c['total']}, qualifying {c['qualifying']}, failed {c['failed']}")
        print("rank-1 frequency: " + ", ".join(f"{k} {v:.3f}" for k, v in summary["rank1"].items()))
    elif name == "exp3":
        print(f"rest-cell influence ratio {summary['rest_ratio']:.4f} over {summary['n_cells']} cells")
        print("recruitment order: " + (", ".join(f"P{m}" for m in summary["record"]["order"]) or "-"))
    elif name == "sweep":
        for k, v in summary["articulators"].items():
            print(f"{k}: 3*bark(F1) range {v['w1_range']:.3f}, bark(F2) range {v['w2_range']:.3f}")
    elif name == "toy":
        print(f"median final norm {summary['median_final_norm']:.4g}, "
              f"best-so-far non-increasing: {summary['all_best_nonincreasing']}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, overrides_from_args(args))
        summary = run_experiment(args.experiment, cfg)
    except VocalRecruitError as exc:
        code = 2 if isinstance(exc, InvalidConfigError) else 1
        json.dump({"error": type(exc).__name__, "message": str(exc), "exit_code": code}, sys.stderr)
        sys.stderr.write("\n")
        return code
    np.set_printoptions(precision=4)
    _report(args.experiment, summary)
    print(f"results written to {cfg.output_dir / args.experiment}")
    return 0
