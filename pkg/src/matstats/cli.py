"""Command-line interface.

Subcommands: ``simulate``, ``fit``, ``transform``, ``detect``,
``classify``, ``bench``, ``report``.  All outputs are CSV.  Exit codes:
0 on success, 2 on validation errors (bad arguments, malformed files,
domain violations), 3 on numerical failures (non-SPD matrices, singular
scatters, degenerate data).  ``MATSTATS_WORKERS`` sets the thread count
used for parallel benchmark replicates.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from . import experiments
from .data import Dataset, load_dataset, save_dataset
from .errors import NUMERICAL_ERRORS, VALIDATION_ERRORS
from .estimators import (
    FitOptions,
    fit_matrix_normal,
    fit_matrix_T_ecme,
    fit_matrix_t_ecme,
    fit_matrix_t_px_ecme,
    fit_mvt_ecme,
)
from .experiments import SyntheticSpec, make_synthetic, records_to_csv
from .outliers import export_weight_scatter, score
from .pca import estimate_covariance, pca_from_covariance, transform

_FLOAT_FMT = "%.17g"

_MODEL_ALGOS = {
    "mn": ("cm",),
    "mt": ("ecme", "px-ecme"),
    "mT": ("ecme",),
    "mvt": ("ecme",),
}

_FAMILIES = {
    "data1": SyntheticSpec.data1,
    "data2": SyntheticSpec.data2,
    "data3": SyntheticSpec.data3,
    "data3-2": SyntheticSpec.data3_2,
    "data3-3": SyntheticSpec.data3_3,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matstats",
        description="Robust matrix-variate statistics: simulation, fitting, PCA, outlier detection, benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--family", choices=sorted(_FAMILIES) + ["custom"], default="data1")
    p.add_argument("--c", type=int, default=None, help="rows per observation (custom family)")
    p.add_argument("--r", type=int, default=None, help="columns per observation (custom family)")
    p.add_argument("--n", type=int, default=None, help="number of clean observations")
    p.add_argument("--nu", type=float, default=None, help="degrees of freedom; inf for matrix-normal")
    p.add_argument("--p", type=float, default=None, help="outlier contamination fraction")
    p.add_argument("--outlier-lo", type=float, default=100.0)
    p.add_argument("--outlier-hi", type=float, default=110.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("fit", help="fit a model to a dataset")
    p.add_argument("--data", required=True, help="manifest path")
    p.add_argument("--model", choices=sorted(_MODEL_ALGOS), required=True)
    p.add_argument("--algo", choices=["cm", "ecme", "px-ecme"], default=None)
    _add_fit_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("transform", help="fit a PCA method and write reduced representations")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=["PCA", "tPCA", "FPCA", "BPCA", "TPCA", "RFPCA"], required=True)
    p.add_argument("--q", type=int, default=None, help="reduced dimension (vector methods)")
    p.add_argument("--qc", type=int, default=None, help="reduced row dimension (matrix methods)")
    p.add_argument("--qr", type=int, default=None, help="reduced column dimension (matrix methods)")
    p.add_argument("--apply-to", default=None, help="optional second manifest to transform instead of the training data")
    _add_fit_flags(p)
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(handler=_cmd_transform)

    p = sub.add_parser("detect", help="fit a robust model and score outliers by expected weight")
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=["mt", "mvt"], default="mt")
    p.add_argument("--threshold", type=float, default=0.5)
    _add_fit_flags(p)
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(handler=_cmd_detect)

    p = sub.add_parser("classify", help="nearest-neighbor classification in a reduced space")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--method", choices=["PCA", "tPCA", "FPCA", "BPCA", "TPCA", "RFPCA"], required=True)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--qc", type=int, default=None)
    p.add_argument("--qr", type=int, default=None)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--standardize", action="store_true", help="z-score each coordinate on load")
    _add_fit_flags(p)
    p.add_argument("--out", default=None, help="optional output CSV")
    p.set_defaults(handler=_cmd_classify)

    p = sub.add_parser("bench", help="run a benchmark suite and write record CSVs")
    p.add_argument("--suite", choices=["convergence", "accuracy", "robustness", "outliers", "timing"], required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--quick", action="store_true", help="reduced problem sizes for smoke runs")
    p.set_defaults(handler=_cmd_bench)

    p = sub.add_parser("report", help="aggregate record CSVs into a mean/std table")
    p.add_argument("--records", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_report)

    return parser


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--tmax", type=int, default=1000)
    p.add_argument("--nu-min", type=float, default=0.01)
    p.add_argument("--nu-max", type=float, default=1e6)
    p.add_argument("--seed", type=int, default=None, help="seeded random initialization (default deterministic)")
    p.add_argument("--no-jitter", action="store_true")


def _fit_options(args) -> FitOptions:
    return FitOptions(
        tol=args.tol,
        t_max=args.tmax,
        nu_min=args.nu_min,
        nu_max=args.nu_max,
        init="random" if args.seed is not None else "deterministic",
        seed=args.seed,
        jitter=not args.no_jitter,
    )


def _cmd_simulate(args) -> int:
    if args.family == "custom":
        if args.c is None or args.r is None or args.n is None:
            raise ValueError("custom family needs --c, --r and --n")
        spec = SyntheticSpec(
            "custom",
            args.c,
            args.r,
            args.n,
            nu=math.inf if args.nu is None else args.nu,
            p=args.p or 0.0,
            outlier_range=(args.outlier_lo, args.outlier_hi),
            seed=args.seed,
        )
    else:
        factory = _FAMILIES[args.family]
        kwargs = {"seed": args.seed}
        if args.n is not None:
            kwargs["n"] = args.n
        if args.p is not None:
            kwargs["p"] = args.p
        if args.nu is not None and args.family in ("data1", "data2"):
            kwargs["nu"] = args.nu
        spec = factory(**kwargs)
    dataset, truth = make_synthetic(spec)
    os.makedirs(args.out, exist_ok=True)
    manifest = os.path.join(args.out, "manifest.json")
    save_dataset(dataset, manifest)
    np.savetxt(os.path.join(args.out, "truth_col_cov.csv"), truth.col_cov, fmt=_FLOAT_FMT, delimiter=",")
    np.savetxt(os.path.join(args.out, "truth_row_cov.csv"), truth.row_cov, fmt=_FLOAT_FMT, delimiter=",")
    print(manifest)
    return 0


def _run_fit(dataset: Dataset, model: str, algo: str | None, opts: FitOptions):
    algos = _MODEL_ALGOS[model]
    if algo is None:
        algo = algos[-1] if model == "mt" else algos[0]
    if algo not in algos:
        raise ValueError(f"model {model!r} supports algorithms {algos}, got {algo!r}")
    if model == "mn":
        return fit_matrix_normal(dataset, opts)
    if model == "mvt":
        return fit_mvt_ecme(dataset.vectors(), opts)
    if model == "mT":
        return fit_matrix_T_ecme(dataset, opts)
    if algo == "ecme":
        return fit_matrix_t_ecme(dataset, opts)
    return fit_matrix_t_px_ecme(dataset, opts)


def _cmd_fit(args) -> int:
    dataset = load_dataset(args.data)
    fit = _run_fit(dataset, args.model, args.algo, _fit_options(args))
    os.makedirs(args.out, exist_ok=True)

    with open(os.path.join(args.out, "summary.csv"), "w") as fh:
        fh.write("model,algorithm,loglik,iterations,converged,nu,nu_clamped,elapsed_seconds\n")
        nu = getattr(fit.params, "dof", "")
        fh.write(
            f"{fit.model},{fit.algorithm},{fit.loglik:.17g},{fit.iterations},{int(fit.converged)},"
            f"{'' if nu == '' else format(nu, '.17g')},{int(fit.nu_clamped)},{fit.elapsed:.6f}\n"
        )
    np.savetxt(os.path.join(args.out, "loglik_trace.csv"), fit.loglik_trace, fmt=_FLOAT_FMT)
    np.savetxt(os.path.join(args.out, "mean.csv"), np.atleast_2d(fit.params.mean), fmt=_FLOAT_FMT, delimiter=",")
    if args.model == "mvt":
        np.savetxt(os.path.join(args.out, "cov.csv"), fit.params.scale.values, fmt=_FLOAT_FMT, delimiter=",")
    else:
        np.savetxt(os.path.join(args.out, "col_cov.csv"), fit.params.col_cov.values, fmt=_FLOAT_FMT, delimiter=",")
        np.savetxt(os.path.join(args.out, "row_cov.csv"), fit.params.row_cov.values, fmt=_FLOAT_FMT, delimiter=",")
    weights = fit.weights.reshape(fit.weights.shape[0], -1)
    np.savetxt(os.path.join(args.out, "weights.csv"), weights, fmt=_FLOAT_FMT, delimiter=",")
    print(os.path.join(args.out, "summary.csv"))
    return 0


def _resolve_dims(args, dataset: Dataset):
    if args.method in ("PCA", "tPCA"):
        if args.q is None:
            raise ValueError("vector methods need --q")
        return {"q": args.q}
    if args.qc is None or args.qr is None:
        raise ValueError("matrix methods need --qc and --qr")
    return {"q_c": args.qc, "q_r": args.qr}


def _cmd_transform(args) -> int:
    dataset = load_dataset(args.data)
    dims = _resolve_dims(args, dataset)
    cm = estimate_covariance(args.method, dataset, _fit_options(args))
    model = pca_from_covariance(cm, **dims)
    target = load_dataset(args.apply_to) if args.apply_to else dataset
    source = target.vectors() if args.method in ("PCA", "tPCA") else target.X
    reduced = np.asarray(transform(model, source)).reshape(target.n, -1)
    np.savetxt(args.out, reduced, fmt=_FLOAT_FMT, delimiter=",")
    print(args.out)
    return 0


def _cmd_detect(args) -> int:
    dataset = load_dataset(args.data)
    opts = _fit_options(args)
    if args.model == "mt":
        fit = fit_matrix_t_px_ecme(dataset, opts)
    else:
        fit = fit_mvt_ecme(dataset.vectors(), opts)
    report = score(dataset, fit, threshold=args.threshold)
    export_weight_scatter(report, args.out)
    print(args.out)
    return 0


def _cmd_classify(args) -> int:
    train = load_dataset(args.train, standardize=args.standardize)
    test = load_dataset(args.test, standardize=args.standardize)
    if train.labels is None or test.labels is None:
        raise ValueError("classification needs labeled train and test datasets")
    dims = _resolve_dims(args, train)
    cm = estimate_covariance(args.method, train, _fit_options(args))
    model = pca_from_covariance(cm, **dims)
    error = experiments.knn_classify(train, test, model, k=args.k)
    line = f"method,k,error_rate\n{args.method},{args.k},{error:.17g}\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(line)
    print(f"error_rate {error:.6f}")
    return 0


def _cmd_bench(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    out = os.path.join(args.out, f"{args.suite}.csv")
    if args.suite == "convergence":
        spec = SyntheticSpec.data1(n=200 if args.quick else 500, seed=args.seed)
        ecme, px = experiments.run_convergence_race(spec)
        with open(out, "w") as fh:
            fh.write("algorithm,iteration,loglik,seconds\n")
            for name, fit in (("ecme", ecme), ("px-ecme", px)):
                clock = np.cumsum(fit.iter_seconds)
                for i, (ll, t) in enumerate(zip(fit.loglik_trace, clock), start=1):
                    fh.write(f"{name},{i},{ll:.17g},{t:.6f}\n")
    elif args.suite == "robustness":
        reps = args.replicates or (3 if args.quick else 50)
        p_list = (0.0, 0.03) if args.quick else (0.0, 0.02, 0.03, 0.07, 0.09)
        records = experiments.run_robustness_table(p_list=p_list, replicates=reps, seed=args.seed)
        records_to_csv(records, out)
    elif args.suite == "accuracy":
        reps = args.replicates or (2 if args.quick else 20)
        grid = (50, 200) if args.quick else (50, 100, 200, 500, 1000)
        records = experiments.run_accuracy_sweep(n_grid=grid, replicates=reps, seed=args.seed,
                                                 test_n=500 if args.quick else 5000)
        records_to_csv(records, out)
    elif args.suite == "outliers":
        opts = FitOptions()
        for name, spec in (
            ("data3", SyntheticSpec.data3(seed=args.seed)),
            ("data3-2", SyntheticSpec.data3_2(seed=args.seed)),
            ("data3-3", SyntheticSpec.data3_3(seed=args.seed)),
        ):
            if args.quick:
                spec = SyntheticSpec(spec.family, spec.c, spec.r, 200, nu=spec.nu, p=spec.p,
                                     outlier_range=spec.outlier_range, seed=spec.seed)
            data, _ = make_synthetic(spec)
            fit = fit_matrix_t_px_ecme(data, opts)
            export_weight_scatter(score(data, fit), os.path.join(args.out, f"outliers_{name}_mt.csv"))
            try:
                vfit = fit_mvt_ecme(data.vectors(), opts)
                export_weight_scatter(score(data, vfit), os.path.join(args.out, f"outliers_{name}_mvt.csv"))
            except NUMERICAL_ERRORS:
                pass
        out = args.out
    elif args.suite == "timing":
        sizes = (100, 200) if args.quick else (200, 500, 1000, 2000)
        dims = 40 if args.quick else 100
        records = experiments.run_timing_benchmark(sizes=sizes, c=dims, r=dims, seed=args.seed,
                                                   t_max=3 if args.quick else 5)
        records_to_csv(records, out)
    print(out)
    return 0


def _cmd_report(args) -> int:
    groups: dict[tuple[str, str, str], list[float]] = {}
    for path in args.records:
        with open(path) as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "method" not in reader.fieldnames:
                raise ValueError(f"{path} is not a records CSV")
            for row in reader:
                key = (row["method"], row["metric"], row.get("context", ""))
                value = float(row["value"])
                groups.setdefault(key, []).append(value)
    with open(args.out, "w") as fh:
        fh.write("method,metric,context,count,mean,std\n")
        for (method, metric, context), values in sorted(groups.items()):
            arr = np.asarray(values, dtype=float)
            ok = arr[~np.isnan(arr)]
            mean = float(np.mean(ok)) if ok.size else math.nan
            std = float(np.std(ok)) if ok.size else math.nan
            fh.write(f"{method},{metric},{context},{ok.size},{mean:.17g},{std:.17g}\n")
    print(args.out)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
