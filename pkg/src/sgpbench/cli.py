"""Command-line benchmarking harness.

Subcommands:

``bench``
    The automatic increasing-M sparse baseline, plus linear and
    constant-mean sanity rows.
``gpr``
    Exact GP regression with type-II maximum likelihood (capped at a
    configurable N).
``svgp``
    Stochastic variational GP training at a fixed number of inducing
    points.
``toy``
    Materialize a synthetic dataset to CSV.
``report``
    Merge long-form outputs from previous runs into a seed-averaged pivot,
    optionally smoothing re-initialization discontinuities.

Every run is fully determined by (dataset, seed, config); ``--seeds K``
expands into K runs with consecutive seeds.
"""

import argparse
import sys
import time

from . import baseline as baseline_mod
from . import datasets, exact_gpr, kernels, metrics
from .errors import SgpBenchError
from .reporting import LONG_COLUMNS, MetricRow, RunManifest, emit_report

KERNEL_CHOICES = list(kernels.FAMILIES)

EXACT_GPR_DEFAULT_CAP = 20_000


def _add_dataset_args(parser):
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--data", help="delimited numeric file with header row")
    source.add_argument(
        "--toy", choices=["smooth1d", "step1d"], help="synthetic dataset"
    )
    parser.add_argument(
        "--target", default=None, help="target column name or index (default: last)"
    )
    parser.add_argument("--toy-n", type=int, default=1000, help="toy dataset size")
    parser.add_argument(
        "--toy-noise-sd", type=float, default=0.1, help="toy observation noise"
    )


def _add_run_args(parser):
    parser.add_argument("--kernel", choices=KERNEL_CHOICES, default="se")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--seeds", type=int, default=1, help="number of consecutive-seed runs"
    )
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--format", choices=["csv", "json"], default="csv")


def _load(args, seed):
    if args.data:
        return datasets.load_dataset(args.data, args.target, seed)
    return datasets.generate_toy(args.toy, args.toy_n, args.toy_noise_sd, seed)


def _dataset_id(args):
    return args.data if args.data else f"toy:{args.toy}"


def _parse_schedule(text):
    values = tuple(int(part) for part in text.split(",") if part.strip())
    if not values:
        raise argparse.ArgumentTypeError("empty schedule")
    return values


def _trivial_rows(ds, dataset_id, kernel, seed):
    rows = []
    linear = metrics.linear_baseline(ds.x_train, ds.y_train, ds.x_test, ds.y_test)
    constant = metrics.constant_baseline(ds.y_train, ds.y_test)
    for result in (linear, constant):
        rows.append(
            MetricRow(
                dataset=dataset_id,
                method=result["method"],
                kernel=kernel,
                seed=seed,
                m=None,
                elapsed_s=0.0,
                bound_kind="train_loglik",
                bound_value=result["train_loglik"],
                upper_bound=float("nan"),
                rmse=result["rmse"],
                nlpd=result["nlpd"],
                note=result["note"],
            )
        )
    return rows


def _cmd_bench(args):
    config = baseline_mod.BaselineConfig(
        m_schedule=args.m_schedule,
        timeout_seconds=args.timeout_secs,
    )
    rows = []
    for seed in range(args.seed, args.seed + args.seeds):
        ds = _load(args, seed)
        records = baseline_mod.run_baseline(ds, args.kernel, config)
        for record in records:
            rows.append(
                MetricRow(
                    dataset=_dataset_id(args),
                    method="SGPR-baseline",
                    kernel=args.kernel,
                    seed=seed,
                    m=record.m,
                    elapsed_s=record.elapsed_train_seconds,
                    bound_kind="elbo",
                    bound_value=record.elbo,
                    upper_bound=record.upper_bound,
                    rmse=record.rmse,
                    nlpd=record.nlpd,
                    note="failed" if record.failed else "",
                )
            )
        if args.trivial_baselines:
            rows.extend(_trivial_rows(ds, _dataset_id(args), args.kernel, seed))
    manifest = RunManifest(
        dataset=_dataset_id(args),
        method="SGPR-baseline",
        kernel=args.kernel,
        seed=args.seed,
        config={
            "m_schedule": list(config.m_schedule),
            "seeds": args.seeds,
            "timeout_secs": args.timeout_secs,
        },
        output_path=args.out,
    )
    paths = emit_report(rows, manifest, args.out, args.format)
    for path in paths:
        print(f"wrote {path}")
    return 0


def _cmd_gpr(args):
    rows = []
    for seed in range(args.seed, args.seed + args.seeds):
        ds = _load(args, seed)
        if ds.n_train > args.exact_gpr_cap:
            print(
                f"seed {seed}: N={ds.n_train} exceeds --exact-gpr-cap "
                f"{args.exact_gpr_cap}, skipping",
                file=sys.stderr,
            )
            continue
        start = time.perf_counter()
        spec, noise, _ = exact_gpr.fit_mle(ds.x_train, ds.y_train, args.kernel)
        elapsed = time.perf_counter() - start
        value = exact_gpr.lml(ds.x_train, ds.y_train, spec, noise)
        posterior = exact_gpr.fit_posterior(ds.x_train, ds.y_train, spec, noise)
        mean, _, obs_var = exact_gpr.gpr_predict(posterior, ds.x_test)
        rows.append(
            MetricRow(
                dataset=_dataset_id(args),
                method="GPR",
                kernel=args.kernel,
                seed=seed,
                m=None,
                elapsed_s=elapsed,
                bound_kind="lml",
                bound_value=value,
                upper_bound=float("nan"),
                rmse=metrics.rmse(mean, ds.y_test),
                nlpd=metrics.nlpd(mean, obs_var, ds.y_test),
            )
        )
    if not rows:
        print("no GPR runs executed", file=sys.stderr)
        return 1
    manifest = RunManifest(
        dataset=_dataset_id(args),
        method="GPR",
        kernel=args.kernel,
        seed=args.seed,
        config={"exact_gpr_cap": args.exact_gpr_cap, "seeds": args.seeds},
        output_path=args.out,
    )
    for path in emit_report(rows, manifest, args.out, args.format, prefix="gpr"):
        print(f"wrote {path}")
    return 0


def _cmd_svgp(args):
    from . import svgp as svgp_mod  # imports torch; keep it off other paths

    rows = []
    for seed in range(args.seed, args.seed + args.seeds):
        ds = _load(args, seed)
        m = min(args.m, ds.n_train)
        config = svgp_mod.SvgpTrainConfig(
            batch_size=args.batch_size,
            learning_rate=args.lr,
            total_steps=args.steps,
            seed=seed,
        )
        init = svgp_mod.default_params(ds.x_train, args.kernel, m)
        start = time.perf_counter()
        params, trace = svgp_mod.train_svgp(ds.x_train, ds.y_train, init, config)
        elapsed = time.perf_counter() - start
        value = svgp_mod.svgp_elbo(params, ds.x_train, ds.y_train)
        mean, _, obs_var = svgp_mod.svgp_predict(params, ds.x_test)
        rows.append(
            MetricRow(
                dataset=_dataset_id(args),
                method="SVGP",
                kernel=args.kernel,
                seed=seed,
                m=m,
                elapsed_s=elapsed,
                bound_kind="elbo",
                bound_value=value,
                upper_bound=float("nan"),
                rmse=metrics.rmse(mean, ds.y_test),
                nlpd=metrics.nlpd(mean, obs_var, ds.y_test),
                note=f"skipped_steps={trace['skipped_steps']}",
            )
        )
    manifest = RunManifest(
        dataset=_dataset_id(args),
        method="SVGP",
        kernel=args.kernel,
        seed=args.seed,
        config={
            "m": args.m,
            "steps": args.steps,
            "batch_size": args.batch_size,
            "lr": args.lr,
            "seeds": args.seeds,
        },
        output_path=args.out,
    )
    for path in emit_report(rows, manifest, args.out, args.format, prefix="svgp"):
        print(f"wrote {path}")
    return 0


def _cmd_toy(args):
    x, y = datasets.toy_raw(args.toy, args.toy_n, args.toy_noise_sd, args.seed)
    datasets.save_csv(args.out, x, y)
    print(f"wrote {args.out} ({args.toy_n} rows)")
    return 0


def _read_long_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().strip().split(",")
        if header != list(LONG_COLUMNS):
            raise SgpBenchError(f"{path} is not a long-form report (header {header})")
        for line in handle:
            parts = line.rstrip("\n").split(",")
            record = dict(zip(LONG_COLUMNS, parts))
            rows.append(
                MetricRow(
                    dataset=record["dataset"],
                    method=record["method"],
                    kernel=record["kernel"],
                    seed=int(record["seed"]),
                    m=int(record["m"]) if record["m"] else None,
                    elapsed_s=float(record["elapsed_s"]),
                    bound_kind=record["bound_kind"],
                    bound_value=float(record["bound_value"]),
                    upper_bound=float(record["upper_bound"]),
                    rmse=float(record["rmse"]),
                    nlpd=float(record["nlpd"]),
                    note=record["note"],
                )
            )
    return rows


def _smooth_rows(rows):
    """Apply the discontinuity hold rule per (method, seed) bound series."""
    out = list(rows)
    keys = {(r.method, r.seed, r.dataset, r.kernel) for r in rows}
    for key in keys:
        group = [
            (i, r)
            for i, r in enumerate(out)
            if (r.method, r.seed, r.dataset, r.kernel) == key and r.m is not None
        ]
        if len(group) < 2:
            continue
        group.sort(key=lambda item: item[1].elapsed_s)
        series = [(r.elapsed_s, r.bound_value, r.m) for _, r in group]
        companions = [
            [r.upper_bound for _, r in group],
            [r.rmse for _, r in group],
            [r.nlpd for _, r in group],
        ]
        smoothed, (ub, rm, nl) = metrics.smooth_metric_curve(
            series, companions=companions, mode="max"
        )
        for j, (i, r) in enumerate(group):
            out[i] = MetricRow(
                dataset=r.dataset,
                method=r.method,
                kernel=r.kernel,
                seed=r.seed,
                m=r.m,
                elapsed_s=r.elapsed_s,
                bound_kind=r.bound_kind,
                bound_value=smoothed[j],
                upper_bound=ub[j],
                rmse=rm[j],
                nlpd=nl[j],
                note=r.note,
            )
    return out


def _cmd_report(args):
    rows = []
    for path in args.inputs:
        rows.extend(_read_long_csv(path))
    if not rows:
        print("no rows found", file=sys.stderr)
        return 1
    if args.smooth:
        rows = _smooth_rows(rows)
    manifest = RunManifest(
        dataset=";".join(sorted({r.dataset for r in rows})),
        method=";".join(sorted({r.method for r in rows})),
        kernel=";".join(sorted({r.kernel for r in rows})),
        seed=min(r.seed for r in rows),
        config={"inputs": list(args.inputs), "smooth": args.smooth},
        output_path=args.out,
    )
    paths = emit_report(rows, manifest, args.out, args.format, prefix="merged")
    for path in paths:
        print(f"wrote {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sgpbench",
        description="Sparse GP regression benchmarking harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="automatic increasing-M sparse baseline")
    _add_dataset_args(bench)
    _add_run_args(bench)
    bench.add_argument(
        "--m-schedule",
        type=_parse_schedule,
        default=baseline_mod.DEFAULT_M_SCHEDULE,
        help="comma-separated inducing budgets",
    )
    bench.add_argument("--timeout-secs", type=float, default=None)
    bench.add_argument(
        "--no-trivial-baselines",
        dest="trivial_baselines",
        action="store_false",
        help="skip the linear/constant sanity rows",
    )
    bench.set_defaults(func=_cmd_bench)

    gpr = sub.add_parser("gpr", help="exact GP regression baseline")
    _add_dataset_args(gpr)
    _add_run_args(gpr)
    gpr.add_argument("--exact-gpr-cap", type=int, default=EXACT_GPR_DEFAULT_CAP)
    gpr.set_defaults(func=_cmd_gpr)

    svgp = sub.add_parser("svgp", help="stochastic variational GP")
    _add_dataset_args(svgp)
    _add_run_args(svgp)
    svgp.add_argument("--m", type=int, default=1000, help="inducing budget")
    svgp.add_argument("--steps", type=int, default=20000)
    svgp.add_argument("--batch-size", type=int, default=None)
    svgp.add_argument("--lr", type=float, default=0.1)
    svgp.set_defaults(func=_cmd_svgp)

    toy = sub.add_parser("toy", help="write a synthetic dataset to CSV")
    toy.add_argument("--toy", choices=["smooth1d", "step1d"], required=True)
    toy.add_argument("--toy-n", type=int, default=1000)
    toy.add_argument("--toy-noise-sd", type=float, default=0.1)
    toy.add_argument("--seed", type=int, default=0)
    toy.add_argument("--out", required=True, help="output CSV path")
    toy.set_defaults(func=_cmd_toy)

    report = sub.add_parser("report", help="merge, average and smooth run outputs")
    report.add_argument("inputs", nargs="+", help="long-form CSV files")
    report.add_argument("--smooth", action="store_true")
    report.add_argument("--out", default="results")
    report.add_argument("--format", choices=["csv", "json"], default="csv")
    report.set_defaults(func=_cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SgpBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
