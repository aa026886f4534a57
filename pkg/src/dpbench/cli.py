"""Command-line front end: run benchmark grids, tune free parameters, run
property suites, and export plot-ready tables.

Exit codes: 0 success, 1 configuration error, 2 asserted property failure,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import os
import sys
from pathlib import Path

from .config import BenchConfig, ConfigError, load_config, preset_config
from .core import Domain, make_prefix_workload, make_random_range_workload
from .harness import ParamTable, competitive_set, regret, run_trials, tune_params
from .mechanisms import build_algorithm
from .reporting import (
    read_summary_csv,
    write_error_vs_scale_csv,
    write_regret_csv,
    write_shape_spread_csv,
    write_summary_csv,
    write_trials_csv,
)
from .rng import RngStream
from .suites import budget_suite, consistency_suite, exchangeability_suite

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PROPERTY = 2
EXIT_IO = 3


def _resolve_out(args) -> Path:
    out = args.out or os.environ.get("DPBENCH_OUT")
    if not out:
        raise ConfigError("no output directory: pass --out or set DPBENCH_OUT")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _resolve_config(args) -> BenchConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = preset_config(args.preset)
    else:
        raise ConfigError("pass --config PATH or --preset NAME")
    if args.seed is not None:
        cfg = BenchConfig(**{**cfg.__dict__, "seed": args.seed})
    if args.workers is not None:
        cfg = BenchConfig(**{**cfg.__dict__, "workers": args.workers})
    return cfg


def _workload_for(cfg: BenchConfig, domain: Domain, stream: RngStream):
    if cfg.workload == "prefix":
        if domain.ndim != 1:
            raise ConfigError("the prefix workload needs 1D domains; use random:<count>")
        return make_prefix_workload(domain.size)
    count = int(cfg.workload.split(":", 1)[1])
    return make_random_range_workload(domain, count, stream.child(0xA0, domain.size))


def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    out = _resolve_out(args)
    stream = RngStream(cfg.seed)
    reports = []
    settings = list(
        itertools.product(
            enumerate(cfg.domains),
            enumerate(cfg.shapes),
            enumerate(cfg.scales),
            enumerate(cfg.epsilons),
        )
    )
    for (di, dom_sizes), (si, source), (mi, scale), (ei, eps) in settings:
        domain = Domain(dom_sizes)
        workload = _workload_for(cfg, domain, stream)
        shape = source.shape_for(domain)
        for ai, (name, params) in enumerate(cfg.algorithms):
            alg = build_algorithm(name, **params)
            if domain.ndim not in alg.dims:
                continue
            report = run_trials(
                alg,
                shape,
                scale,
                domain,
                workload,
                eps,
                n_vectors=cfg.vectors,
                n_runs=cfg.runs,
                seed=stream.child(di, si, mi, ei, ai),
                workers=cfg.workers,
                shape_id=source.name,
            )
            reports.append(report)
            print(
                f"ran {report.algorithm} shape={report.shape_id} scale={scale} "
                f"domain={'x'.join(map(str, dom_sizes))} eps={eps}: "
                f"mean={report.mean:.4g} p95={report.p95:.4g}"
            )
    # competitive flags per setting
    by_setting: dict[tuple, dict[str, object]] = {}
    for report in reports:
        key = (report.shape_id, report.scale, report.domain, report.epsilon)
        by_setting.setdefault(key, {})[report.algorithm] = report
    competitive_keys = set()
    for key, group in by_setting.items():
        winners = competitive_set({name: r.errors for name, r in group.items()})
        for name in winners:
            r = group[name]
            competitive_keys.add((name, (r.algorithm, r.shape_id, r.scale, r.domain, r.epsilon))[1])
    # regret over algorithms present in every setting
    settings_keys = sorted(by_setting)
    common = set.intersection(*(set(by_setting[k]) for k in settings_keys)) if settings_keys else set()
    regrets = {}
    if len(common) >= 1:
        means = {
            name: [by_setting[k][name].mean for k in settings_keys] for name in sorted(common)
        }
        try:
            regrets = regret(means)
        except ValueError:
            regrets = {}
    write_trials_csv(reports, out / "trials.csv")
    write_summary_csv(reports, competitive_keys, out / "summary.csv")
    write_regret_csv(regrets, out / "regret.csv")
    print(f"wrote {out / 'trials.csv'}, {out / 'summary.csv'}, {out / 'regret.csv'}")
    return EXIT_OK


def _parse_grid(spec: str) -> list[dict]:
    """'rho:0.3,0.5; eta:0.5,1.0' -> cartesian list of parameter dicts."""
    axes = []
    for chunk in spec.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        name, raw = chunk.split(":", 1)
        values = [float(v) for v in raw.split(",") if v.strip()]
        axes.append((name.strip(), values))
    if not axes:
        raise ConfigError("empty tuning grid")
    grids = []
    for combo in itertools.product(*(vals for _, vals in axes)):
        theta = {}
        for (name, _), value in zip(axes, combo):
            theta[name] = int(value) if float(value).is_integer() else value
        grids.append(theta)
    return grids


def cmd_tune(args) -> int:
    cfg = _resolve_config(args)
    out = _resolve_out(args)
    tune = cfg.tune
    if not tune:
        raise ConfigError("config has no [tune] section")
    for key in ("algorithm", "grid", "shapes", "products", "domain"):
        if key not in tune:
            raise ConfigError(f"[tune] missing {key}")
    from .config import _parse_shape, _split_list  # shared parsing

    sources = [_parse_shape(tok) for tok in _split_list(tune["shapes"])]
    bad = [s.name for s in sources if not s.synthetic]
    if bad:
        raise ConfigError(
            f"training shapes must be synthetic, got evaluation data: {bad}"
        )
    if not sources:
        raise ConfigError("[tune] shapes must be non-empty")
    n = int(tune["domain"])
    domain = Domain((n,))
    shapes = [s.shape_for(domain) for s in sources]
    products = [float(tok) for tok in _split_list(tune["products"])]
    grid = _parse_grid(tune["grid"])
    trials = int(tune.get("trials", 3))
    name = tune["algorithm"]
    workload = make_prefix_workload(n)
    # candidate settings are evaluated on the base mechanism; the starred
    # variant then reads the finished table
    base = {"mwem_star": "mwem", "ahp_star": "ahp"}.get(name, name)

    def build(theta):
        return build_algorithm(base, **theta)

    table = tune_params(
        build,
        grid,
        shapes,
        products,
        workload,
        trials=trials,
        seed=RngStream(cfg.seed),
    )
    target = out / f"params_{name}.json"
    target.write_text(table.to_json(), encoding="utf-8")
    print(f"wrote {target}")
    return EXIT_OK


def cmd_check(args) -> int:
    out = _resolve_out(args)
    seed = args.seed if args.seed is not None else 20160800
    trials = args.trials
    if args.suite == "exchangeability":
        rows = exchangeability_suite(trials=trials or 200, seed=seed + 1)
    elif args.suite == "consistency":
        rows = consistency_suite(trials=trials or 5, seed=seed + 2)
    elif args.suite == "budget":
        rows = budget_suite(seed=seed + 3)
    else:
        raise ConfigError(f"unknown suite {args.suite!r}")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["suite", "algorithm", "asserted", "passed", "detail"])
    failed = False
    for row in rows:
        writer.writerow([row.suite, row.algorithm, int(row.asserted), int(row.passed), row.detail])
        status = "PASS" if row.passed else ("FAIL" if row.asserted else "recorded")
        print(f"[{row.suite}] {row.algorithm}: {status} ({row.detail})")
        failed = failed or (row.asserted and not row.passed)
    (out / f"check_{args.suite}.csv").write_text(buffer.getvalue(), encoding="utf-8")
    return EXIT_PROPERTY if failed else EXIT_OK


def cmd_report(args) -> int:
    out = _resolve_out(args)
    try:
        rows = read_summary_csv(args.summary)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    write_error_vs_scale_csv(rows, out / "error_vs_scale.csv")
    write_shape_spread_csv(rows, out / "shape_spread.csv")
    print(f"wrote {out / 'error_vs_scale.csv'}, {out / 'shape_spread.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpbench",
        description="Benchmark differentially private range-query mechanisms.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="path to a sectioned key=value config")
        p.add_argument("--preset", help="named built-in configuration")
        p.add_argument("--out", help="output directory (or env DPBENCH_OUT)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--workers", type=int, help="trial worker processes")

    p_run = sub.add_parser("run", help="run a benchmark grid")
    common(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_tune = sub.add_parser("tune", help="learn free parameters on synthetic shapes")
    common(p_tune)
    p_tune.set_defaults(fn=cmd_tune)

    p_check = sub.add_parser("check", help="run a property suite")
    p_check.add_argument("suite", choices=["exchangeability", "consistency", "budget"])
    common(p_check)
    p_check.add_argument("--trials", type=int, help="override suite trial count")
    p_check.set_defaults(fn=cmd_check)

    p_report = sub.add_parser("report", help="export plot-ready tables")
    common(p_report)
    p_report.add_argument("--summary", required=True, help="summary.csv from a run")
    p_report.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
