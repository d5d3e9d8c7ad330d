"""Data-generating processes and the Monte Carlo benchmark harness.

DAGs are Erdos-Renyi over a uniformly random node order; each structural
equation is the signed cube root of an inner polynomial of the parents plus
independent noise.  Every sampled object is a pure function of (seed,
parameters); replication r of an experiment runs on seed splitmix64(base, r),
so cells are independently re-runnable and thread-count invariant.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dag, Dataset, compute_ranks
from .ordering import OrderConfig, RANKG, RANKS, estimate_ordering, ordering_error
from .rankg import estimate_h_gauss, fit_prl
from .ranks import estimate_h_smoothed, fit_smoothed, residuals_smoothed
from .rng import Stream, splitmix64

GAUSSIAN = "gaussian"
GUMBEL = "gumbel"
LOGISTIC = "logistic"
NOISE_LAWS = (GAUSSIAN, GUMBEL, LOGISTIC)

LOW_SNR = (-10.0, 10.0)
HIGH_SNR = (-100.0, 100.0)


@dataclass(frozen=True)
class NoiseDistribution:
    law: str = GAUSSIAN

    def __post_init__(self):
        if self.law not in NOISE_LAWS:
            raise ValueError(f"unknown noise law {self.law!r}")

    def sample(self, stream: Stream, shape) -> np.ndarray:
        if self.law == GAUSSIAN:
            return stream.gaussian(shape)
        if self.law == GUMBEL:
            return stream.gumbel(shape)
        return stream.logistic(shape)


@dataclass(frozen=True)
class SemSpec:
    m: int
    edge_prob: float | None = None
    inner_degree: int = 2
    coef_range: tuple[float, float] = LOW_SNR
    noise: NoiseDistribution = field(default_factory=NoiseDistribution)
    seed: int = 0

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("need m >= 2")
        if self.inner_degree not in (2, 4):
            raise ValueError("inner_degree must be 2 or 4")
        lo, hi = self.coef_range
        if not lo < hi:
            raise ValueError("coef_range must satisfy lo < hi")
        p = self.resolved_edge_prob
        if not 0 < p <= 1:
            raise ValueError("edge_prob must be in (0, 1]")

    @property
    def resolved_edge_prob(self) -> float:
        if self.edge_prob is None:
            return min(1.0, 2.0 / (self.m - 1))
        return self.edge_prob


@dataclass(frozen=True)
class SemSample:
    dataset: Dataset
    noise: np.ndarray
    coefficients: dict[tuple[int, int], np.ndarray]
    dag: Dag
    seed: int


@dataclass(frozen=True)
class ExperimentSpec:
    sem: SemSpec
    n_values: tuple[int, ...]
    methods: tuple[str, ...] = (RANKG,)
    replications: int = 100
    order_cfg: OrderConfig = field(default_factory=OrderConfig)
    base_seed: int = 0

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not all(n > 0 for n in self.n_values):
            raise ValueError("n_values must be positive")
        if list(self.n_values) != sorted(self.n_values):
            raise ValueError("n_values must be increasing")
        for m in self.methods:
            if m not in (RANKG, RANKS):
                raise ValueError(f"unknown method {m!r}")


def sample_dag(m: int, edge_prob: float, seed: int) -> Dag:
    """Erdos-Renyi DAG: uniform node order, each forward pair kept with edge_prob."""
    if m < 2:
        raise ValueError("need m >= 2")
    stream = Stream(seed)
    order = stream.permutation(m)
    u = stream.random_open((m, m))
    edges = set()
    for a in range(m):
        for b in range(a + 1, m):
            if u[a, b] < edge_prob:
                edges.add((int(order[a]), int(order[b])))
    return Dag(m, frozenset(edges))


def _draw_coefficients(dag: Dag, spec: SemSpec, stream: Stream):
    coeffs: dict[tuple[int, int], np.ndarray] = {}
    for child in range(dag.m):
        for parent in dag.parents(child):
            coeffs[(child, parent)] = stream.uniform(*spec.coef_range, spec.inner_degree)
    return coeffs


def assemble_sem(dag: Dag, coeffs, noise: np.ndarray, degree: int) -> np.ndarray:
    """Evaluate the structural equations in topological order (test hook)."""
    n, m = noise.shape
    values = np.empty((n, m))
    for k in dag.topological_order():
        acc = noise[:, k].copy()
        for parent in dag.parents(k):
            col = values[:, parent]
            powed = col.copy()
            cs = coeffs[(k, parent)]
            acc += cs[0] * powed
            for d in range(1, degree):
                powed = powed * col
                acc += cs[d] * powed
        values[:, k] = np.cbrt(acc)
    return values


def generate_sem_data(dag: Dag, spec: SemSpec, n: int) -> SemSample:
    if spec.m != dag.m:
        raise ValueError("spec.m must match dag.m")
    stream = Stream(spec.seed)
    coeffs = _draw_coefficients(dag, spec, stream)
    noise = spec.noise.sample(stream, (n, spec.m))
    values = assemble_sem(dag, coeffs, noise, spec.inner_degree)
    names = tuple(f"X{k + 1}" for k in range(spec.m))
    return SemSample(Dataset(values, names), noise, coeffs, dag, spec.seed)


@dataclass(frozen=True)
class ReplicationOutcome:
    method: str
    n: int
    rep: int
    seed: int
    wrong_edges: int | None
    order: tuple[int, ...] | None
    failure: str | None


@dataclass(frozen=True)
class CellStats:
    mean: float
    sd: float
    count: int
    failures: int
    flagged: bool


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list[ReplicationOutcome]

    def cells(self) -> dict[tuple[str, int], CellStats]:
        out = {}
        for method in self.spec.methods:
            for n in self.spec.n_values:
                vals = [
                    r.wrong_edges
                    for r in self.rows
                    if r.method == method and r.n == n and r.failure is None
                ]
                failures = sum(
                    1 for r in self.rows if r.method == method and r.n == n and r.failure
                )
                total = len(vals) + failures
                mean = float(np.mean(vals)) if vals else math.nan
                sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
                out[(method, n)] = CellStats(
                    mean, sd, len(vals), failures, failures > 0.1 * max(total, 1)
                )
        return out

    def csv_text(self) -> str:
        sem = self.spec.sem
        lines = ["method,n,m,noise,degree,coef_lo,coef_hi,mean,sd,reps,failures,flagged"]
        cells = self.cells()
        for method in self.spec.methods:
            for n in self.spec.n_values:
                c = cells[(method, n)]
                lines.append(
                    ",".join(
                        [
                            method,
                            str(n),
                            str(sem.m),
                            sem.noise.law,
                            str(sem.inner_degree),
                            repr(float(sem.coef_range[0])),
                            repr(float(sem.coef_range[1])),
                            repr(c.mean) if not math.isnan(c.mean) else "nan",
                            repr(c.sd),
                            str(c.count),
                            str(c.failures),
                            str(int(c.flagged)),
                        ]
                    )
                )
        return "\n".join(lines) + "\n"

    def table_text(self) -> str:
        """Report-style "mean +/- sd" table, one row per n."""
        cells = self.cells()
        header = " n    " + "  ".join(f"{m:>16}" for m in self.spec.methods)
        lines = [header]
        for n in self.spec.n_values:
            row = [f"{n:<5}"]
            for method in self.spec.methods:
                c = cells[(method, n)]
                row.append(f"{c.mean:.2f} +/- {c.sd:.2f}".rjust(16))
            lines.append("  ".join(row))
        return "\n".join(lines) + "\n"

    def table_csv_text(self) -> str:
        """Table-layout CSV: one row per n, one "mean +/- sd" cell per method."""
        cells = self.cells()
        lines = ["n," + ",".join(self.spec.methods)]
        for n in self.spec.n_values:
            row = [str(n)]
            for method in self.spec.methods:
                c = cells[(method, n)]
                row.append(f"{c.mean:.2f} +/- {c.sd:.2f}")
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        sem = self.spec.sem
        return {
            "spec": {
                "m": sem.m,
                "edge_prob": sem.resolved_edge_prob,
                "inner_degree": sem.inner_degree,
                "coef_range": list(sem.coef_range),
                "noise": sem.noise.law,
                "n_values": list(self.spec.n_values),
                "methods": list(self.spec.methods),
                "replications": self.spec.replications,
                "base_seed": self.spec.base_seed,
                "basis_degree": self.spec.order_cfg.basis.degree,
                "hsic_bandwidth_x": self.spec.order_cfg.hsic.bandwidth_x,
                "hsic_bandwidth_e": self.spec.order_cfg.hsic.bandwidth_e,
            },
            "replications": [
                {
                    "method": r.method,
                    "n": r.n,
                    "rep": r.rep,
                    "seed": r.seed,
                    "wrong_edges": r.wrong_edges,
                    "order": list(r.order) if r.order is not None else None,
                    "failure": r.failure,
                }
                for r in self.rows
            ],
        }


def cfg_for_method(cfg: OrderConfig, method: str) -> OrderConfig:
    if method == cfg.method:
        return cfg
    if method == RANKG:
        return replace(cfg, method=RANKG, lam=None)
    return replace(cfg, method=RANKS)


def replication_seed(base_seed: int, rep: int) -> int:
    return splitmix64(base_seed, rep)


def _experiment_task(args) -> ReplicationOutcome:
    spec, method, n, rep = args
    seed = replication_seed(spec.base_seed, rep)
    try:
        dag = sample_dag(spec.sem.m, spec.sem.resolved_edge_prob, splitmix64(seed, 1))
        sample = generate_sem_data(dag, replace(spec.sem, seed=splitmix64(seed, 2)), n)
        cfg = cfg_for_method(spec.order_cfg, method)
        ordering = estimate_ordering(sample.dataset, cfg)
        err = ordering_error(ordering, dag)
        return ReplicationOutcome(method, n, rep, seed, err, ordering.order, None)
    except Exception as exc:
        return ReplicationOutcome(method, n, rep, seed, None, None, f"{type(exc).__name__}: {exc}")


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> ExperimentResult:
    """One ordering estimate per (method, n, replication) cell.

    Replications run in their own processes when threads > 1; results are
    keyed and assembled in a fixed order, so output is identical for any
    thread count.
    """
    tasks = [
        (spec, method, n, rep)
        for method in spec.methods
        for n in spec.n_values
        for rep in range(spec.replications)
    ]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_experiment_task, tasks, chunksize=1))
    else:
        rows = [_experiment_task(t) for t in tasks]
    rows.sort(key=lambda r: (r.method, r.n, r.rep))
    return ExperimentResult(spec, rows)


@dataclass(frozen=True)
class RegressionRep:
    rep: int
    seed: int
    beta: np.ndarray
    pivot_index: int | None
    h_points: np.ndarray | None  # (n, 2) columns (y, h_hat(y))
    residuals: np.ndarray | None
    y: np.ndarray
    noise: np.ndarray
    converged: bool


def _study_task(args) -> RegressionRep:
    beta0, law, n, rep, base_seed, method, estimate_transform, lam, y0 = args
    seed = replication_seed(base_seed, rep)
    stream = Stream(seed)
    p = beta0.size
    x = stream.gaussian((n, p))
    eps = NoiseDistribution(law).sample(stream, n)
    y = np.cbrt(x @ beta0 + eps)
    ranks = compute_ranks(y)
    if method == RANKG:
        fit = fit_prl(x, ranks)
        h_points = resid = None
        if estimate_transform:
            est = estimate_h_gauss(y, ranks, x, fit.beta)
            h_points = est.points
            resid = est.at(y) - x @ fit.beta
        return RegressionRep(
            rep, seed, fit.beta, None, h_points, resid, y, eps, fit.converged
        )
    fit = fit_smoothed(x, ranks, pivot=p - 1)
    h_points = resid = None
    if estimate_transform:
        est = estimate_h_smoothed(y, fit.beta, x, y, y0, lam)
        ys = np.sort(y)
        h_points = np.column_stack([ys, est.at(ys)])
        resid = residuals_smoothed(y, x, fit, est)
    return RegressionRep(
        rep, seed, fit.beta, fit.pivot_index, h_points, resid, y, eps, fit.converged
    )


def run_regression_study(
    beta0,
    noise: str,
    n: int,
    reps: int,
    method: str,
    base_seed: int = 0,
    threads: int = 1,
    estimate_transform: bool = True,
    lam: float = 1e-3,
    y0: float = 0.0,
) -> list[RegressionRep]:
    """Single-regression estimation study: Y = (X^T beta0 + eps)^(1/3) with
    standard normal covariates; returns per-replication fit artifacts."""
    beta0 = np.asarray(beta0, dtype=np.float64)
    tasks = [
        (beta0, noise, n, rep, base_seed, method, estimate_transform, lam, y0)
        for rep in range(reps)
    ]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(_study_task, tasks, chunksize=1))
    else:
        out = [_study_task(t) for t in tasks]
    out.sort(key=lambda r: r.rep)
    return out
