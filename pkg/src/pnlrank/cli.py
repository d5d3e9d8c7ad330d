"""Command-line interface.

Exit codes are a stable scripting contract: 0 success, 2 validation error,
3 convergence failure (artifacts still written), 4 ordering failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import BasisSpec, Dataset, compute_ranks, expand_basis, jitter_ties, read_csv, write_csv
from .errors import DidNotConverge, OrderingFailed, PnlRankError, TiesPresent
from .hsic import MEDIAN, HsicConfig
from .manifest import RunManifest
from .ordering import OrderConfig, estimate_ordering
from .plots import line_plot_svg
from .presets import get_preset
from .rankg import estimate_h_gauss, fit_prl
from .ranks import estimate_h_smoothed, fit_smoothed, pilot_pivot, residuals_smoothed
from .rng import splitmix64
from .simulation import (
    HIGH_SNR,
    LOW_SNR,
    ExperimentSpec,
    NoiseDistribution,
    SemSpec,
    generate_sem_data,
    run_experiment,
    sample_dag,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_ORDERING = 4


class ValidationError(Exception):
    pass


def _default_threads() -> int:
    env = os.environ.get("PNLRANK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _load_dataset(args) -> Dataset:
    path = Path(args.data)
    if not path.exists():
        raise ValidationError(f"data file not found: {path}")
    try:
        return read_csv(path)
    except PnlRankError as exc:
        raise ValidationError(str(exc)) from exc


def _ranks_or_jitter(y, args):
    try:
        return compute_ranks(y), False
    except TiesPresent:
        if not getattr(args, "jitter_ties", False):
            raise ValidationError(
                "exact ties in the target column; pass --jitter-ties to break them deterministically"
            )
        jittered = jitter_ties(y, seed=args.seed)
        return compute_ranks(jittered), True


def _json_dump(doc, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_y0(value: str):
    if value == "median":
        return "median"
    try:
        return float(value)
    except ValueError:
        raise ValidationError(f"--y0 must be 'median' or a number, got {value!r}")


def _hsic_config(args) -> HsicConfig:
    if args.hsic_bw_mode == "unit":
        bw_x, bw_e = 1.0, 1.0
    else:
        bw_x, bw_e = MEDIAN, MEDIAN
    if args.hsic_bw_x is not None:
        bw_x = args.hsic_bw_x
    if args.hsic_bw_e is not None:
        bw_e = args.hsic_bw_e
    return HsicConfig(bw_x, bw_e)


def cmd_fit(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = _load_dataset(args)
    if args.target not in data.column_names:
        raise ValidationError(f"target column {args.target!r} not in {data.column_names}")
    predictors = [c for c in data.column_names if c != args.target]
    if not predictors:
        raise ValidationError("need at least one predictor column")
    y = data.column(args.target)
    ranks, jittered = _ranks_or_jitter(y, args)
    x = np.column_stack([data.column(c) for c in predictors])
    design = expand_basis(x, BasisSpec(args.basis_degree))
    if data.n <= design.shape[1]:
        raise ValidationError(
            f"n > expanded dimension required: n={data.n}, expanded p={design.shape[1]}"
        )
    y0_policy = _parse_y0(args.y0)
    config = {
        "data": str(args.data),
        "target": args.target,
        "method": args.method,
        "basis_degree": args.basis_degree,
        "lambda": args.lam,
        "y0": y0_policy,
        "pivot": args.pivot,
        "recenter_h": args.recenter_h,
        "jitter_ties": jittered,
    }
    manifest = RunManifest("fit", sys.argv[1:], config, args.seed, 1)

    exit_code = EXIT_OK
    if args.method == "rankg":
        try:
            fit = fit_prl(design, ranks)
            converged = fit.converged
        except DidNotConverge as exc:
            fit = exc.fit
            converged = False
        if not converged:
            exit_code = EXIT_CONVERGENCE
        est = estimate_h_gauss(y, ranks, design, fit.beta)
        h_vals = est.at(y)
        residuals = h_vals - design @ fit.beta
        doc = {
            "method": "rankg",
            "beta": fit.beta.tolist(),
            "objective": fit.objective_value,
            "converged": converged,
            "h_points": est.points.tolist(),
            "residuals": residuals.tolist(),
        }
        resolved = {"pivot_index": None, "y0": None}
    else:
        if args.pivot is not None:
            if args.pivot not in predictors:
                raise ValidationError(f"pivot column {args.pivot!r} not among predictors")
            pivot = predictors.index(args.pivot) * args.basis_degree
            pilot_beta = None
        else:
            pivot, pilot = pilot_pivot(design, ranks)
            pilot_beta = None if pilot is None else pilot.beta
        y0 = float(np.median(y)) if y0_policy == "median" else float(y0_policy)
        try:
            fit = fit_smoothed(design, ranks, pivot, pilot_beta=pilot_beta)
            converged = fit.converged
        except DidNotConverge as exc:
            raise ValidationError(str(exc)) from exc
        if not converged:
            exit_code = EXIT_CONVERGENCE
        est = estimate_h_smoothed(y, fit.beta, design, y, y0, args.lam)
        if args.recenter_h:
            est = est.recentered()
        residuals = residuals_smoothed(y, design, fit, est)
        doc = {
            "method": "ranks",
            "beta": fit.beta.tolist(),
            "objective": fit.objective_value,
            "converged": converged,
            "h_points": est.points.tolist(),
            "residuals": residuals.tolist(),
            "pivot_index": fit.pivot_index,
            "lambda": est.lam,
            "y0": est.y0,
            "h_at_y0": est.h_at_y0,
            "h_monotonicity_violations": est.monotonicity_violations(),
        }
        resolved = {"pivot_index": fit.pivot_index, "y0": y0}
    doc["predictors"] = predictors
    doc["basis_degree"] = args.basis_degree
    doc["run_id"] = manifest.run_id
    doc["manifest"] = "manifest.json"

    fit_path = out / "fit_result.json"
    _json_dump(doc, fit_path)
    res_path = out / "residuals.csv"
    with open(res_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("residual\n")
        for v in residuals:
            fh.write(repr(float(v)) + "\n")
    manifest.config.update({"resolved": resolved})
    manifest.add_output(str(fit_path))
    manifest.add_output(str(res_path))
    manifest.write(out / "manifest.json")
    print(f"wrote {fit_path} (converged={doc['converged']})")
    return exit_code


def _break_column_ties(data: Dataset, args) -> tuple[Dataset, bool]:
    """Columns with exact ties fail rank computation; --jitter-ties opts into
    a deterministic per-column perturbation."""
    tied = [
        name for j, name in enumerate(data.column_names)
        if np.unique(data.values[:, j]).size < data.n
    ]
    if not tied:
        return data, False
    if not getattr(args, "jitter_ties", False):
        raise ValidationError(
            f"exact ties in column(s) {', '.join(tied)}; pass --jitter-ties to break them"
        )
    cols = []
    for j, name in enumerate(data.column_names):
        col = data.values[:, j]
        if name in tied:
            col = jitter_ties(col, seed=splitmix64(args.seed, j + 1))
        cols.append(col)
    return Dataset(np.column_stack(cols), data.column_names), True


def cmd_order(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = _load_dataset(args)
    if data.m < 2:
        raise ValidationError("need at least two columns")
    data, jittered = _break_column_ties(data, args)
    expanded = BasisSpec(args.basis_degree).output_dim(data.m - 1)
    if data.n <= expanded:
        raise ValidationError(
            f"n > expanded dimension required: n={data.n}, expanded p={expanded}"
        )
    y0_policy = _parse_y0(args.y0)
    cfg = OrderConfig(
        method=args.method,
        basis=BasisSpec(args.basis_degree),
        hsic=_hsic_config(args),
        lam=args.lam if args.method == "ranks" else None,
        y0_policy=y0_policy,
    )
    config = {
        "data": str(args.data),
        "method": args.method,
        "basis_degree": args.basis_degree,
        "hsic_bw_mode": args.hsic_bw_mode,
        "hsic_bw_x": args.hsic_bw_x,
        "hsic_bw_e": args.hsic_bw_e,
        "lambda": args.lam if args.method == "ranks" else None,
        "y0": y0_policy,
        "jitter_ties": jittered,
    }
    manifest = RunManifest("order", sys.argv[1:], config, args.seed, 1)
    try:
        ordering = estimate_ordering(data, cfg)
    except OrderingFailed as exc:
        print(f"ordering failed: {exc}", file=sys.stderr)
        manifest.cells["error"] = str(exc)
        manifest.write(out / "manifest.json")
        return EXIT_ORDERING
    doc = ordering.to_json_dict(data.column_names)
    doc["run_id"] = manifest.run_id
    doc["manifest"] = "manifest.json"
    order_path = out / "ordering.json"
    _json_dump(doc, order_path)
    log_path = out / "steps.txt"
    with open(log_path, "w", encoding="utf-8", newline="\n") as fh:
        for idx, step in enumerate(ordering.steps, start=1):
            stats = ", ".join(
                f"{data.column_names[k]}={step.t_values[k]:.6g}" for k in sorted(step.t_values)
            )
            fh.write(f"step {idx}: remaining [{', '.join(data.column_names[k] for k in step.remaining)}]\n")
            fh.write(f"  t: {stats}\n")
            fh.write(f"  sink -> {data.column_names[step.chosen]}\n")
        fh.write("ordering: " + " < ".join(data.column_names[k] for k in ordering.order) + "\n")
    manifest.add_output(str(order_path))
    manifest.add_output(str(log_path))
    manifest.write(out / "manifest.json")
    print("ordering:", " < ".join(data.column_names[k] for k in ordering.order))
    return EXIT_OK


def _spec_from_file(path: Path) -> ExperimentSpec:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        sem = SemSpec(
            m=doc["m"],
            edge_prob=doc.get("edge_prob"),
            inner_degree=doc.get("inner_degree", 2),
            coef_range=tuple(doc.get("coef_range", LOW_SNR)),
            noise=NoiseDistribution(doc.get("noise", "gaussian")),
            seed=0,
        )
        methods = tuple(doc.get("methods", ["rankg"]))
        cfg = OrderConfig(
            method=methods[0],
            basis=BasisSpec(doc.get("basis_degree", sem.inner_degree)),
            hsic=HsicConfig(doc.get("hsic_bw_x", 1.0), doc.get("hsic_bw_e", 1.0)),
            lam=doc.get("lambda") if "ranks" in methods else None,
            y0_policy=doc.get("y0", "zero"),
        )
        return ExperimentSpec(
            sem=sem,
            n_values=tuple(doc["n_values"]),
            methods=methods,
            replications=doc.get("replications", 100),
            order_cfg=cfg,
            base_seed=doc.get("base_seed", 0),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad spec file {path}: {exc}") from exc


def cmd_benchmark(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.preset == "custom":
        if not args.spec:
            raise ValidationError("--preset custom requires --spec FILE")
        spec = _spec_from_file(Path(args.spec))
        name = Path(args.spec).stem
    else:
        try:
            spec = get_preset(args.preset)
        except KeyError as exc:
            raise ValidationError(str(exc)) from exc
        name = args.preset
    from dataclasses import replace

    if args.reps is not None:
        spec = replace(spec, replications=args.reps)
    if args.seed is not None:
        spec = replace(spec, base_seed=args.seed)
    if args.nmax is not None:
        kept = tuple(n for n in spec.n_values if n <= args.nmax)
        if not kept:
            raise ValidationError(f"--nmax {args.nmax} excludes every n in {spec.n_values}")
        spec = replace(spec, n_values=kept)

    config = {
        "preset": name,
        "n_values": list(spec.n_values),
        "methods": list(spec.methods),
        "replications": spec.replications,
        "base_seed": spec.base_seed,
        "hsic_bw_x": spec.order_cfg.hsic.bandwidth_x,
        "hsic_bw_e": spec.order_cfg.hsic.bandwidth_e,
    }
    manifest = RunManifest("benchmark", sys.argv[1:], config, spec.base_seed, args.threads)
    manifest.threads = args.threads
    result = run_experiment(spec, threads=args.threads)

    csv_path = out / f"{name}.csv"
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(result.csv_text())
    table_path = out / f"{name}_table.csv"
    with open(table_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(result.table_csv_text())
    json_path = out / f"{name}.json"
    doc = result.to_json_dict()
    doc["run_id"] = manifest.run_id
    _json_dump(doc, json_path)
    svg_path = out / f"{name}.svg"
    cells = result.cells()
    series = {
        method: [(float(n), cells[(method, n)].mean) for n in spec.n_values]
        for method in spec.methods
    }
    with open(svg_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            line_plot_svg(series, f"{name}: mean wrong edges vs n", "sample size n", "mean wrong edges")
        )
    for p in (csv_path, table_path, json_path, svg_path):
        manifest.add_output(str(p))
    flagged = []
    for (method, n), c in sorted(cells.items()):
        manifest.cells[f"{method}@{n}"] = {
            "mean": c.mean,
            "sd": c.sd,
            "count": c.count,
            "failures": c.failures,
            "flagged": c.flagged,
        }
        if c.flagged:
            flagged.append(f"{method}@{n}")
    manifest.write(out / "manifest.json")
    print(result.table_text(), end="")
    if flagged:
        print(f"warning: >10% failures in cells: {', '.join(flagged)}", file=sys.stderr)
    print(f"wrote {csv_path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.nodes < 2:
        raise ValidationError("--nodes must be >= 2")
    if args.n < 2:
        raise ValidationError("--n must be >= 2")
    coef_range = LOW_SNR if args.snr == "low" else HIGH_SNR
    sem = SemSpec(
        m=args.nodes,
        inner_degree=args.degree,
        coef_range=coef_range,
        noise=NoiseDistribution(args.noise),
        seed=splitmix64(args.seed, 2),
    )
    dag = sample_dag(args.nodes, sem.resolved_edge_prob, splitmix64(args.seed, 1))
    sample = generate_sem_data(dag, sem, args.n)
    config = {
        "nodes": args.nodes,
        "n": args.n,
        "noise": args.noise,
        "snr": args.snr,
        "degree": args.degree,
    }
    manifest = RunManifest("simulate", sys.argv[1:], config, args.seed, 1)
    data_path = out / "data.csv"
    write_csv(sample.dataset, data_path)
    truth = {
        "edges": sorted([list(e) for e in dag.edges]),
        "coefficients": [
            {"child": child, "parent": parent, "coeffs": c.tolist()}
            for (child, parent), c in sorted(sample.coefficients.items())
        ],
        "seed": args.seed,
        "noise": args.noise,
        "snr": args.snr,
        "degree": args.degree,
        "run_id": manifest.run_id,
        "manifest": "manifest.json",
    }
    truth_path = out / "truth.json"
    _json_dump(truth, truth_path)
    manifest.add_output(str(data_path))
    manifest.add_output(str(truth_path))
    manifest.write(out / "manifest.json")
    print(f"wrote {data_path} ({args.n} rows, {args.nodes} columns, {len(dag.edges)} edges)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pnlrank",
        description="Rank-based causal discovery for post-nonlinear models",
    )
    parser.add_argument("--version", action="version", version=f"pnlrank {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit one rank regression from a CSV")
    fit.add_argument("--data", required=True)
    fit.add_argument("--target", required=True)
    fit.add_argument("--method", choices=("rankg", "ranks"), required=True)
    fit.add_argument("--basis-degree", type=int, default=1)
    fit.add_argument("--lambda", dest="lam", type=float, default=1e-3)
    fit.add_argument("--y0", default="median")
    fit.add_argument("--pivot", default=None, help="pivot column name (ranks method)")
    fit.add_argument("--recenter-h", action="store_true")
    fit.add_argument("--jitter-ties", action="store_true")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--out", default=".")
    fit.set_defaults(func=cmd_fit)

    order = sub.add_parser("order", help="estimate a causal ordering from a CSV")
    order.add_argument("--data", required=True)
    order.add_argument("--method", choices=("rankg", "ranks"), default="rankg")
    order.add_argument("--basis-degree", type=int, default=2)
    order.add_argument("--hsic-bw-mode", choices=("median", "unit"), default="unit")
    order.add_argument("--hsic-bw-x", type=float, default=None)
    order.add_argument("--hsic-bw-e", type=float, default=None)
    order.add_argument("--lambda", dest="lam", type=float, default=1e-3)
    order.add_argument("--y0", default="median")
    order.add_argument("--jitter-ties", action="store_true")
    order.add_argument("--seed", type=int, default=0)
    order.add_argument("--out", default=".")
    order.set_defaults(func=cmd_order)

    bench = sub.add_parser("benchmark", help="run a simulation benchmark grid")
    bench.add_argument("--preset", required=True, help="table1..table24 or custom")
    bench.add_argument("--spec", default=None, help="JSON spec file for --preset custom")
    bench.add_argument("--reps", type=int, default=None)
    bench.add_argument("--nmax", type=int, default=None)
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--threads", type=int, default=_default_threads())
    bench.add_argument("--out", default=".")
    bench.set_defaults(func=cmd_benchmark)

    sim = sub.add_parser("simulate", help="sample a DAG and SEM dataset to CSV")
    sim.add_argument("--nodes", type=int, required=True)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--noise", choices=("gaussian", "gumbel", "logistic"), default="gaussian")
    sim.add_argument("--snr", choices=("low", "high"), default="low")
    sim.add_argument("--degree", type=int, choices=(2, 4), default=2)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default=".")
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, PnlRankError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
