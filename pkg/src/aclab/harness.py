"""Experiment registry, deterministic orchestration, and the CLI.

Exit codes: 0 all criteria pass, 1 criterion failure, 2 configuration
error, 3 numeric failure. `AC_LAB_OUT` overrides the output root.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from aclab import experiments as exp_mod
from aclab import io as io_mod
from aclab.errors import ConfigError, NumericFailure

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


@dataclass
class ExperimentSpec:
    name: str
    params: dict = field(default_factory=dict)
    out_dir: str = "runs"
    seed: int = 0

    def __post_init__(self):
        if self.name not in exp_mod.REGISTRY:
            raise ConfigError(f"unknown experiment {self.name!r}; see `ac-lab list`")
        if "eps" in self.params:
            eps = list(self.params["eps"])
            if sorted(eps, reverse=True) != eps:
                raise ConfigError("eps list must be sorted descending")


@dataclass
class RunReport:
    name: str
    passed: bool
    criteria: list
    artifacts: list
    elapsed: float
    seed: int

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "criteria": self.criteria,
            "artifacts": self.artifacts,
            "elapsed_seconds": self.elapsed,
            "seed": self.seed,
        }


def list_experiments():
    return {name: fn.description for name, fn in sorted(exp_mod.REGISTRY.items())}


def run(spec: ExperimentSpec) -> RunReport:
    fn = exp_mod.REGISTRY[spec.name]
    out = Path(spec.out_dir) / spec.name
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    start = time.perf_counter()
    criteria, artifacts = fn(spec.params, out, rng)
    elapsed = time.perf_counter() - start
    report = RunReport(
        name=spec.name,
        passed=all(c["passed"] for c in criteria),
        criteria=criteria,
        artifacts=[str(a) for a in artifacts],
        elapsed=elapsed,
        seed=spec.seed,
    )
    io_mod.write_json(out / "report.json", report.to_dict())
    return report


def _load_config(path):
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path} not found")
    with open(p, "rb") as fh:
        return tomllib.load(fh)


def _spec_from_config(name, config, args):
    params = dict(config.get("experiments", {}).get(name, {}))
    if config.get("well"):
        params.setdefault("well", config["well"])
    if getattr(args, "eps", None):
        params["eps"] = [float(x) for x in args.eps.split(",")]
    out = os.environ.get("AC_LAB_OUT") or args.out or config.get("out", "runs")
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    return ExperimentSpec(name=name, params=params, out_dir=out, seed=seed)


def _print_report(report: RunReport):
    mark = "PASS" if report.passed else "FAIL"
    print(f"[{mark}] {report.name} ({report.elapsed:.1f}s)")
    for c in report.criteria:
        status = "pass" if c["passed"] else "FAIL"
        print(f"    {status}: {c['label']}  [{c['detail']}]")
    for a in report.artifacts:
        print(f"    artifact: {a}")


def _run_one(name, config, args):
    spec = _spec_from_config(name, config, args)
    return run(spec)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ac-lab", description="phase-field interface laboratory")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("name")
    p_list = sub.add_parser("list", help="list registered experiments")
    p_desc = sub.add_parser("describe", help="describe one experiment")
    p_desc.add_argument("name")
    p_all = sub.add_parser("all", help="run every experiment")

    for p in (p_run, p_all):
        p.add_argument("--config", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--eps", default=None, help="comma-separated epsilon override")

    args = parser.parse_args(argv)

    if args.verb == "list":
        for name, desc in list_experiments().items():
            print(f"{name:28s} {desc}")
        return 0

    if args.verb == "describe":
        reg = list_experiments()
        if args.name not in reg:
            print(f"unknown experiment {args.name!r}", file=sys.stderr)
            return 2
        print(f"{args.name}: {reg[args.name]}")
        return 0

    try:
        config = _load_config(args.config)
        if args.verb == "run":
            names = [args.name]
        else:
            names = sorted(exp_mod.REGISTRY)
        reports = []
        if args.jobs > 1 and len(names) > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
                futures = {pool.submit(_run_one, n, config, args): n for n in names}
                for fut in concurrent.futures.as_completed(futures):
                    reports.append(fut.result())
            reports.sort(key=lambda r: r.name)
        else:
            for n in names:
                reports.append(_run_one(n, config, args))
        for r in reports:
            _print_report(r)
        return 0 if all(r.passed for r in reports) else 1
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:  # ConfigError and bad experiment parameters
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
