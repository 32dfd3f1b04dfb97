"""Command-line front end: generate, simulate, sweep, learn, report."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from ..chainify import dump_jobs, load_jobs, transform
from ..market import sample_price_trace, save_price_trace
from ..policy import BID_GRID, PolicyTuple, owned_policy_set, spot_policy_set
from .generator import GeneratorConfig, generate_jobs
from .simulate import JobSetContext, run_policy_traced
from .experiments import (build_context, experiment_learning,
                          experiment_owned, experiment_spot_only)
from . import report as report_mod

OWNED_CHOICES = (0, 300, 600, 900, 1200)


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def load_policies(path, owned: int) -> list[PolicyTuple]:
    if path:
        import json
        with open(path) as fh:
            raw = json.load(fh)
        return [PolicyTuple(beta=p["beta"], bid=p.get("bid"),
                            beta0=p.get("beta0")) for p in raw]
    return owned_policy_set() if owned > 0 else spot_policy_set()


def generator_config(args) -> GeneratorConfig:
    cfg = GeneratorConfig.from_json(args.config) if args.config else GeneratorConfig()
    return GeneratorConfig(**{**cfg.__dict__, "seed": args.seed,
                              "job_type": args.job_type,
                              "job_count": args.jobs})


def cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = generator_config(args)
    jobs = generate_jobs(cfg)
    dump_jobs(jobs, out / "jobs.json")
    cfg.to_json(out / "config.json")
    horizon = max(j.deadline for j in jobs) + 1.0
    save_price_trace(sample_price_trace(cfg.seed, horizon), out / "prices.csv")
    print(f"wrote {len(jobs)} jobs to {out / 'jobs.json'}")
    return 0


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.jobs_file:
        jobs = load_jobs(args.jobs_file)
    else:
        jobs = generate_jobs(generator_config(args))
    chains = [transform(j) for j in jobs]
    horizon = max(c.deadline for c in chains) + 1.0
    market = sample_price_trace(args.seed, horizon)
    policy = PolicyTuple(beta=args.beta, bid=args.bid, beta0=args.beta0)
    ledger, trace, owned_alloc = run_policy_traced(
        chains, market, policy, args.owned)
    write_csv(out / "trace.csv",
              ["job_id", "time", "task", "owned", "spot_granted", "ondemand",
               "remaining"], trace)
    write_csv(out / "job_costs.csv",
              ["job_id", "workload", "spot_cost", "ondemand_cost",
               "spot_work", "ondemand_work", "owned_work"],
              [(c.id, ledger.workload[j], ledger.spot_cost[j],
                ledger.ondemand_cost[j], ledger.spot_work[j],
                ledger.ondemand_work[j], ledger.owned_work[j])
               for j, c in enumerate(chains)])
    alpha = ledger.job_costs.sum() / ledger.workload.sum()
    write_csv(out / "metrics.csv", ["x1", "x2", "policy", "alpha", "rho", "mu"],
              [(args.owned, args.job_type, policy.label(), alpha, None, None)])
    print(f"alpha={alpha:.6f} owned_alloc={owned_alloc:.0f} "
          f"trace rows={len(trace)}")
    return 0


def metrics_rows_spot(outcomes, seeds) -> list[tuple]:
    """Seed-averaged per-policy and summary rows for experiment 1."""
    rows = []
    labels = outcomes[0].policy_alphas.keys()
    for label in labels:
        alpha = float(np.mean([o.policy_alphas[label] for o in outcomes]))
        rows.append((0, outcomes[0].x2, label, alpha, None, None))
    for bench in ("greedy", "even"):
        rho = float(np.mean([o.rho_by_benchmark[bench] for o in outcomes]))
        alpha = float(np.mean([o.alpha_benchmarks[bench] for o in outcomes]))
        rows.append((0, outcomes[0].x2, f"best:{bench}", alpha, rho, None))
    rows.append((0, outcomes[0].x2, "best:proposed",
                 float(np.mean([o.alpha_proposed for o in outcomes])),
                 None, None))
    return rows


def metrics_rows_owned(outcomes) -> list[tuple]:
    rows = []
    o0 = outcomes[0]
    for label in o0.policy_alphas.keys():
        alpha = float(np.mean([o.policy_alphas[label] for o in outcomes]))
        rows.append((o0.x1, o0.x2, label, alpha, None, None))
    for bench in ("even_naive", "naive_owned"):
        rho = float(np.mean([o.rho_by_benchmark[bench] for o in outcomes]))
        alpha = float(np.mean([o.alpha_benchmarks[bench] for o in outcomes]))
        mu = (float(np.mean([o.mu for o in outcomes]))
              if bench == "naive_owned" else None)
        rows.append((o0.x1, o0.x2, f"best:{bench}", alpha, rho, mu))
    rows.append((o0.x1, o0.x2, "best:proposed",
                 float(np.mean([o.alpha_proposed for o in outcomes])),
                 None, None))
    return rows


def cmd_sweep(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = GeneratorConfig.from_json(args.config) if args.config else None
    rows = []
    for x2 in args.job_type_list:
        for x1 in args.owned_list:
            if x1 == 0:
                outcomes = [experiment_spot_only(seed, x2, args.jobs,
                                                 config=cfg)
                            for seed in args.seeds]
                rows.extend(metrics_rows_spot(outcomes, args.seeds))
            else:
                outcomes = [experiment_owned(seed, x2, args.jobs, x1,
                                             config=cfg)
                            for seed in args.seeds]
                rows.extend(metrics_rows_owned(outcomes))
    write_csv(out / "metrics.csv", ["x1", "x2", "policy", "alpha", "rho", "mu"],
              rows)
    print(f"wrote {len(rows)} rows to {out / 'metrics.csv'}")
    return 0


def cmd_learn(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics_rows = []
    weight_rows = []
    regret_rows = []
    for seed in args.seeds:
        res = experiment_learning(seed, args.job_type, args.jobs, args.owned)
        prop, bench = res["proposed"], res["benchmark"]
        metrics_rows.append((args.owned, args.job_type,
                             f"tola:proposed,seed={seed}", prop.alpha,
                             res["rho_bar"], None))
        metrics_rows.append((args.owned, args.job_type,
                             f"tola:benchmark,seed={seed}", bench.alpha,
                             None, None))
        weight_rows.extend((seed, *row) for row in prop.weight_log)
        regret_rows.append((seed, prop.d, prop.n_regret_jobs,
                            prop.regret_per_job, prop.regret_bound_01,
                            prop.policy_labels[prop.best_policy]))
    write_csv(out / "metrics.csv", ["x1", "x2", "policy", "alpha", "rho", "mu"],
              metrics_rows)
    write_csv(out / "weights.csv",
              ["seed", "update", "time", "policy_index", "weight"],
              weight_rows)
    write_csv(out / "regret.csv",
              ["seed", "horizon_d", "n_jobs", "regret_per_job",
               "regret_bound", "best_policy"], regret_rows)
    print(f"wrote metrics/weights/regret CSVs to {out}")
    return 0


def cmd_report(args) -> int:
    return report_mod.render(Path(args.out))


def add_common(p, jobs_default=1000):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=jobs_default,
                   help="number of jobs per run")
    p.add_argument("--job-type", type=int, default=2, choices=(1, 2, 3, 4),
                   help="deadline flexibility class")
    p.add_argument("--config", type=str, default=None,
                   help="JSON file mirroring GeneratorConfig")
    p.add_argument("--out", type=str, default="out")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spotplan",
        description="Cost simulator for deadline-constrained DAG jobs on "
                    "self-owned, spot, and on-demand cloud instances.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="emit a job set as JSON")
    add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate",
                       help="run one policy with per-slot trace output")
    add_common(p, jobs_default=50)
    p.add_argument("--jobs-file", type=str, default=None,
                   help="existing jobs.json instead of generating")
    p.add_argument("--owned", type=int, default=0)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--beta0", type=float, default=None)
    p.add_argument("--bid", type=float, default=0.24)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="fixed-policy experiments 1-3")
    add_common(p)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--owned", dest="owned_list", type=int, nargs="+",
                   default=[0], choices=OWNED_CHOICES)
    p.add_argument("--job-types", dest="job_type_list", type=int, nargs="+",
                   default=None)
    p.add_argument("--policies", type=str, default=None,
                   help="JSON list of {beta, beta0, bid} policies")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("learn", help="online-learning experiment 4")
    add_common(p)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--owned", type=int, default=0, choices=OWNED_CHOICES)
    p.add_argument("--policies", type=str, default=None)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("report",
                       help="summary tables and figures from CSV outputs")
    p.add_argument("--out", type=str, default="out")
    p.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    if getattr(args, "job_type_list", None) is None and \
            args.command == "sweep":
        args.job_type_list = [args.job_type]
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
