"""Causal ordering by recursive sink identification.

Each candidate node is regressed on the basis expansion of the remaining
nodes, its residual dependence on the raw remaining columns is scored with
HSIC, and the argmin is eliminated as a sink.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import BasisSpec, Dag, Dataset, compute_ranks, expand_basis
from .errors import DimensionMismatch, OrderingFailed, ResidualsUnavailable
from .hsic import HsicConfig, hsic_statistic
from .rankg import FitOptions, estimate_h_gauss, fit_prl
from .ranks import estimate_h_smoothed, fit_smoothed, pilot_pivot, residuals_smoothed

RANKG = "rankg"
RANKS = "ranks"


@dataclass(frozen=True)
class OrderConfig:
    method: str = RANKG
    basis: BasisSpec = field(default_factory=BasisSpec)
    hsic: HsicConfig = field(default_factory=HsicConfig.unit)
    lam: float | None = None
    y0_policy: str | float = "zero"
    fit: FitOptions = field(default_factory=FitOptions)

    def __post_init__(self):
        if self.method not in (RANKG, RANKS):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == RANKG and self.lam is not None:
            raise ValueError("lam applies only to the ranks method")
        if isinstance(self.y0_policy, str) and self.y0_policy not in ("zero", "median"):
            raise ValueError("y0_policy must be 'zero', 'median' or an explicit value")

    @property
    def resolved_lam(self) -> float:
        return 1e-3 if self.lam is None else self.lam

    def resolve_y0(self, y: np.ndarray) -> float:
        if self.y0_policy == "zero":
            return 0.0
        if self.y0_policy == "median":
            return float(np.median(y))
        return float(self.y0_policy)


@dataclass(frozen=True)
class SinkStep:
    remaining: tuple[int, ...]
    t_values: dict[int, float]
    chosen: int


@dataclass(frozen=True)
class CausalOrdering:
    """Permutation of node indices; position k holds the k-th node of the
    ordering (sinks identified first occupy the last positions)."""

    order: tuple[int, ...]
    steps: tuple[SinkStep, ...]

    @property
    def m(self) -> int:
        return len(self.order)

    def to_json_dict(self, names: tuple[str, ...] | None = None) -> dict:
        label = (lambda k: names[k]) if names is not None else (lambda k: k)
        return {
            "order": [label(k) for k in self.order],
            "steps": [
                {
                    "remaining": [label(k) for k in st.remaining],
                    "t": {str(label(k)): v for k, v in sorted(st.t_values.items())},
                    "chosen": label(st.chosen),
                }
                for st in self.steps
            ],
        }


def node_residuals(
    data: Dataset, target: int, predictors: list[int], cfg: OrderConfig
) -> np.ndarray:
    """Residuals of the target node regressed on the expanded predictors."""
    if target in predictors:
        raise ValueError("target must not be among predictors")
    if not predictors:
        raise ValueError("predictors must be nonempty")
    y = data.values[:, target]
    design = expand_basis(data.values[:, list(predictors)], cfg.basis)
    try:
        ranks = compute_ranks(y)
        if cfg.method == RANKG:
            fit = fit_prl(design, ranks, cfg.fit)
            est = estimate_h_gauss(y, ranks, design, fit.beta)
            return est.at(y) - design @ fit.beta
        pivot, pilot = pilot_pivot(design, ranks, cfg.fit)
        fit = fit_smoothed(
            design, ranks, pivot, cfg.fit,
            pilot_beta=None if pilot is None else pilot.beta,
        )
        y0 = cfg.resolve_y0(y)
        h_est = estimate_h_smoothed(y, fit.beta, design, y, y0, cfg.resolved_lam)
        return residuals_smoothed(y, design, fit, h_est)
    except Exception as exc:
        raise ResidualsUnavailable(target, exc) from exc


def sink_scores(data: Dataset, remaining: list[int], cfg: OrderConfig) -> dict[int, float]:
    """HSIC statistic t_k per candidate sink; failed fits score +inf."""
    if len(remaining) < 2:
        raise ValueError("need at least two remaining nodes")
    scores: dict[int, float] = {}
    for k in remaining:
        rest = [j for j in remaining if j != k]
        try:
            eps = node_residuals(data, k, rest, cfg)
        except ResidualsUnavailable:
            scores[k] = math.inf
            continue
        scores[k] = hsic_statistic(data.values[:, rest], eps, cfg.hsic)
    return scores


def estimate_ordering(data: Dataset, cfg: OrderConfig) -> CausalOrdering:
    """Recursively eliminate the argmin-HSIC node (ties by lowest node id)."""
    if data.m < 2:
        raise ValueError("need at least two variables")
    p = cfg.basis.output_dim(data.m - 1)
    if data.n <= p:
        raise ValueError(
            f"n > expanded dimension required: n={data.n}, expanded p={p}"
        )
    remaining = list(range(data.m))
    steps: list[SinkStep] = []
    order_rev: list[int] = []
    while len(remaining) > 1:
        scores = sink_scores(data, remaining, cfg)
        finite = {k: v for k, v in scores.items() if math.isfinite(v)}
        if not finite:
            raise OrderingFailed(f"all candidate fits failed with {sorted(remaining)} remaining")
        chosen = min(finite, key=lambda k: (finite[k], k))
        steps.append(SinkStep(tuple(remaining), dict(scores), chosen))
        order_rev.append(chosen)
        remaining.remove(chosen)
    order_rev.append(remaining[0])
    return CausalOrdering(tuple(reversed(order_rev)), tuple(steps))


def ordering_error(ordering: CausalOrdering, truth: Dag) -> int:
    """Number of true edges oriented backwards by the ordering (0 iff valid)."""
    if ordering.m != truth.m:
        raise DimensionMismatch(f"ordering over {ordering.m} nodes, dag over {truth.m}")
    pos = {node: i for i, node in enumerate(ordering.order)}
    return sum(1 for u, v in truth.edges if pos[v] < pos[u])
