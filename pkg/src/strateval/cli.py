"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 internal
error.  All output is deterministic for fixed inputs and seeds, so runs
can be diffed.
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .bounds import bernstein_bound, empirical_range, hoeffding_bound, sample_sigma
from .dataio import (
    DataFormatError,
    SyntheticSpec,
    export_results,
    generate_synthetic,
    load_config,
    load_ratings,
    load_test_set,
    save_test_set,
)
from .metrics import DegenerateMetricError
from .model import DrawError, MissingScoreError, draw_indices, true_mean
from .simulate import (
    METHODS,
    SimulationConfig,
    calibration_eval,
    report,
    run_suite,
    sample_size,
)
from .stratify import (
    AllocationError,
    metric_proxy_sigma,
    optimal_allocation,
    partition_by_document,
    partition_by_metric_score,
    proportional_allocation,
    stratified_estimate,
    stratified_indices,
)
from .variates import (
    SMALL_SAMPLE_N,
    DegenerateVariateError,
    combined_estimate,
    cv_estimate_multi,
    cv_estimate_scalar,
    multi_variate,
    variate_from_knn,
    variate_from_metric,
    variate_mean_of_metrics,
)

_DATA_ERRORS = (
    DataFormatError,
    MissingScoreError,
    DegenerateMetricError,
    DegenerateVariateError,
    AllocationError,
    DrawError,
    FileNotFoundError,
    IsADirectoryError,
    PermissionError,
    UnicodeDecodeError,
    ValueError,
)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems; the contract here is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self.prog + ": error: " + message)


def _float_list(text: str):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _str_list(text: str):
    return tuple(x.strip() for x in text.split(",") if x.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="strateval", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic test set")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True, help="number of segments")
    p.add_argument("--docs", type=int, required=True, help="number of documents")
    p.add_argument("--metric-corrs", type=_float_list, required=True,
                   help="target score/metric correlations, comma separated")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--doc-effect", type=float, default=0.3)
    p.add_argument("--p-zero", type=float, default=0.55)
    p.add_argument("--score-scale", type=float, default=5.0)
    p.add_argument("--score-max", type=float, default=25.0)
    p.add_argument("--doc-concentration", type=float, default=8.0)
    p.add_argument("--metric-noise-corr", type=float, default=0.0)
    p.add_argument("--direction", choices=("lower", "higher"), default="lower")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("plan", help="choose which segments to rate")
    p.add_argument("--data", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--sampler", default="docs-prop",
                   choices=("random", "docs-prop", "docs-opt",
                            "metrics-prop", "metrics-opt"))
    p.add_argument("--bin-size", type=int, default=80)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("estimate", help="estimate the mean score from ratings")
    p.add_argument("--data", required=True)
    p.add_argument("--ratings", required=True)
    p.add_argument("--stratify", choices=("docs", "metrics", "none"), default="docs")
    p.add_argument("--cv", choices=("knn", "mean", "single", "multi", "none"),
                   default="knn")
    p.add_argument("--cv-metric", type=int, default=0)
    p.add_argument("--k", type=int, default=25)
    p.add_argument("--bin-size", type=int, default=80)
    p.add_argument("--gamma", type=float, default=0.95)
    p.add_argument("--r-override", type=float, default=None)
    p.add_argument("--centered-cov", action="store_true")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="Monte Carlo comparison of methods")
    p.add_argument("--data", action="append", required=True,
                   help="test set TSV; repeat for multiple simulations")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--methods", type=_str_list, default=None,
                   help=f"subset of: {', '.join(METHODS)}")
    p.add_argument("--sizes", type=_float_list, default=None)
    p.add_argument("--draws", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--bin-size", type=int, default=None)
    p.add_argument("--cv-metric", type=int, default=None)
    p.add_argument("--centered-cov", action="store_true", default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="check error-bound coverage")
    p.add_argument("--data", action="append", required=True)
    p.add_argument("--bound", choices=("hoeffding", "bernstein"), default="hoeffding")
    p.add_argument("--method", default="docs-prop+cv-knn")
    p.add_argument("--sizes", type=_float_list, default=None)
    p.add_argument("--draws", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--r-override", type=float, default=None)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("serve", help="run the rating session HTTP service")
    p.add_argument("--data", action="append", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    return parser


def cmd_gen_synth(args) -> int:
    spec = SyntheticSpec(
        n_segments=args.n,
        n_documents=args.docs,
        metric_corrs=args.metric_corrs,
        seed=args.seed,
        doc_effect=args.doc_effect,
        p_zero=args.p_zero,
        score_scale=args.score_scale,
        score_max=args.score_max,
        doc_size_concentration=args.doc_concentration,
        metric_noise_corr=args.metric_noise_corr,
        score_direction=args.direction,
    )
    test_set = generate_synthetic(spec)
    save_test_set(test_set, args.out)
    scores = test_set.scores_array()
    print(
        f"wrote {args.out}: segments={test_set.n_segments} "
        f"documents={test_set.n_documents} metrics={test_set.n_metrics} "
        f"mean={scores.mean():.6g} sd={scores.std():.6g}"
    )
    return 0


def cmd_plan(args) -> int:
    test_set = load_test_set(args.data)
    n_total = test_set.n_segments
    if not 1 <= args.budget <= n_total:
        raise AllocationError(f"budget {args.budget} out of range [1, {n_total}]")
    rng = np.random.default_rng(args.seed)
    meta = {
        "sampler": args.sampler,
        "seed": args.seed,
        "budget": args.budget,
        "n_total": n_total,
        "bins": None,
        "allocation": None,
        "flags": [],
    }
    if args.sampler == "random":
        indices = draw_indices(n_total, args.budget, rng)
    else:
        if args.sampler.startswith("docs"):
            partition = partition_by_document(test_set)
        else:
            partition = partition_by_metric_score(test_set, args.bin_size)
        if args.sampler.endswith("prop"):
            alloc = proportional_allocation(partition, args.budget)
        else:
            sigma = metric_proxy_sigma(test_set, partition)
            alloc = optimal_allocation(partition, sigma, args.budget)
        indices = stratified_indices(partition, alloc, rng)
        meta["bins"] = partition.n_bins
        meta["allocation"] = list(alloc.counts)
        meta["flags"] = list(alloc.flags)
    out = Path(args.out)
    out.write_text(
        "".join(test_set.segments[i].id + "\n" for i in indices), encoding="utf-8"
    )
    Path(str(out) + ".meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote {out}: {len(indices)} of {n_total} segments")
    return 0


def cmd_estimate(args) -> int:
    test_set = load_test_set(args.data)
    draw = load_ratings(args.ratings, test_set)
    n, n_total = draw.n, test_set.n_segments
    flags: list = []

    partition = None
    if args.stratify == "docs":
        partition = partition_by_document(test_set)
    elif args.stratify == "metrics":
        partition = partition_by_metric_score(test_set, args.bin_size)

    variate = None
    cv_label = args.cv
    if args.cv == "single":
        variate = variate_from_metric(test_set, args.cv_metric)
    elif args.cv == "mean":
        variate = variate_mean_of_metrics(test_set)
    elif args.cv == "knn":
        try:
            variate = variate_from_knn(test_set, draw, args.k)
        except DegenerateVariateError:
            variate = variate_mean_of_metrics(test_set)
            cv_label = "mean"
            flags.append("knn-degenerate")

    if args.cv == "multi":
        if partition is not None:
            raise ValueError(
                "the multi-column correction only applies without stratification "
                "(--stratify none)"
            )
        est = cv_estimate_multi(draw, multi_variate(test_set))
    elif partition is not None and variate is not None:
        est = combined_estimate(draw, partition, variate, centered=args.centered_cov)
    elif partition is not None:
        est = stratified_estimate(draw, partition)
    elif variate is not None:
        est = cv_estimate_scalar(draw, variate, centered=args.centered_cov)
    else:
        from .model import sample_mean

        est = sample_mean(draw)
    flags.extend(est.flags)

    if args.r_override is not None:
        score_range = empirical_range(test_set, args.r_override)
        range_src = "override"
    elif test_set.has_all_scores:
        score_range = empirical_range(test_set)
        range_src = "test set scores"
    else:
        scores = draw.scores_array()
        score_range = float(scores.max() - scores.min())
        range_src = "rated subset"
    if args.cv != "none" and n <= SMALL_SAMPLE_N:
        flags.append("small-sample-covariance")

    desc = {"docs": "document-stratified", "metrics": "metric-stratified",
            "none": "plain mean"}[args.stratify]
    if args.cv != "none":
        desc += f" + {cv_label} control variate"
    print(f"rated: {n} of {n_total}")
    print(f"estimate: {est.value:.6g}")
    print(f"method: {desc}")
    if score_range > 0:
        t_h = hoeffding_bound(score_range, n, n_total, args.gamma)
        t_b = bernstein_bound(
            sample_sigma(draw.scores_array()), score_range, n, args.gamma
        )
        print(f"score range: {score_range:.6g} (from {range_src})")
        print(f"hoeffding t({args.gamma:g}): {t_h:.6g}")
        print(f"bernstein t({args.gamma:g}): {t_b:.6g}")
    else:
        print("score range: 0 (bounds unavailable; pass --r-override)")
    if flags:
        print("flags: " + ", ".join(flags))
    return 0


def _override_config(base: SimulationConfig, args) -> SimulationConfig:
    updates = {}
    mapping = {
        "methods": "methods",
        "sizes": "size_fractions",
        "draws": "draws_per_size",
        "seed": "master_seed",
        "k": "knn_k",
        "bin_size": "metric_bin_size",
        "cv_metric": "cv_metric_index",
        "centered_cov": "centered_cov",
        "gamma": "gamma",
        "r_override": "r_override",
        "method": None,  # not a config field
    }
    for arg_name, field in mapping.items():
        if field is None or not hasattr(args, arg_name):
            continue
        value = getattr(args, arg_name)
        if value is not None:
            updates[field] = value
    return dataclasses.replace(base, **updates) if updates else base


def cmd_simulate(args) -> int:
    base = load_config(args.config) if args.config else SimulationConfig()
    config = _override_config(base, args)
    test_sets = [load_test_set(p) for p in args.data]
    results = run_suite(test_sets, config)
    paths = export_results(results, args.out_dir)
    print(report(results))
    print(f"wrote {paths['results']}, {paths['curves']}, {paths['summary']}")
    return 0


def cmd_calibrate(args) -> int:
    config = _override_config(SimulationConfig(), args)
    test_sets = [load_test_set(p) for p in args.data]
    rows = calibration_eval(test_sets, config, args.bound, args.method)
    print(f"{'size %':>7}{'coverage %':>12}{'mean t':>10}{'mean slack':>12}")
    for row in rows:
        print(
            f"{100 * row['size_fraction']:>7.0f}{row['coverage']:>12.1f}"
            f"{row['mean_radius']:>10.4f}{row['mean_slack']:>12.4f}"
        )
    return 0


def cmd_serve(args) -> int:
    import socket

    import uvicorn

    from .service import app_from_files

    app = app_from_files(args.data, seed=args.seed)
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((args.host, args.port))
    host, port = sock.getsockname()[:2]
    names = ", ".join(sorted(Path(p).stem for p in args.data))
    print(f"serving on http://{host}:{port} (test sets: {names})", flush=True)
    server = uvicorn.Server(uvicorn.Config(app, log_level="warning"))
    server.run(sockets=[sock])
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - the contract maps these to 3
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
