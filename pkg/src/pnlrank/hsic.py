"""Biased HSIC statistic with Gaussian kernels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import DimensionMismatch

MEDIAN = "median"


@dataclass(frozen=True)
class HsicConfig:
    """Kernel bandwidths; a float fixes the scale, "median" uses the median
    of squared pairwise distances. Bandwidth 1 gives the plain unscaled
    kernels exp(-squared distance)."""

    bandwidth_x: float | str = MEDIAN
    bandwidth_e: float | str = MEDIAN

    def __post_init__(self):
        for bw in (self.bandwidth_x, self.bandwidth_e):
            if isinstance(bw, str):
                if bw != MEDIAN:
                    raise ValueError(f"unknown bandwidth mode {bw!r}")
            elif not bw > 0:
                raise ValueError("bandwidth must be strictly positive")

    @staticmethod
    def unit() -> "HsicConfig":
        return HsicConfig(1.0, 1.0)


def median_squared_distance(rows: np.ndarray, max_rows: int = 500) -> float:
    """Median heuristic on a deterministic subsample of at most max_rows rows."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[0] > max_rows:
        idx = np.unique(np.linspace(0, rows.shape[0] - 1, max_rows).astype(np.int64))
        rows = rows[idx]
    sq = np.sum(rows * rows, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (rows @ rows.T)
    tri = d2[np.triu_indices(rows.shape[0], k=1)]
    med = float(np.median(tri))
    return med if med > 0.0 else 1.0


def _resolve(bw, rows) -> float:
    return median_squared_distance(rows) if bw == MEDIAN else float(bw)


def gram_gaussian(rows: np.ndarray, bandwidth: float) -> np.ndarray:
    """Gram matrix exp(-||r_i - r_j||^2 / bandwidth); bandwidth 1 reproduces
    the unscaled kernel form."""
    if not bandwidth > 0:
        raise ValueError("bandwidth must be strictly positive")
    rows = np.ascontiguousarray(np.atleast_2d(np.asarray(rows, dtype=np.float64)))
    if rows.ndim != 2:
        raise ValueError("rows must be 2-d")
    return K.gram_gaussian_kernel(rows, 1.0 / bandwidth)


def hsic_biased(k: np.ndarray, l: np.ndarray) -> float:
    """Biased HSIC estimate (1/n^2) tr(K H L H) via the three-sum decomposition:
    mean(K o L) + mean(K) mean(L) - (2/n^3) sum_i (K 1)_i (L 1)_i."""
    k = np.asarray(k, dtype=np.float64)
    l = np.asarray(l, dtype=np.float64)
    if k.shape != l.shape or k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise DimensionMismatch(f"gram shapes {k.shape} and {l.shape} incompatible")
    n = k.shape[0]
    term1 = float(np.mean(k * l))
    term2 = float(np.mean(k)) * float(np.mean(l))
    term3 = 2.0 / n**3 * float(np.sum(k.sum(axis=1) * l.sum(axis=1)))
    return term1 + term2 - term3


def hsic_statistic(x_rows: np.ndarray, e: np.ndarray, cfg: HsicConfig = HsicConfig()) -> float:
    """HSIC between rows of x and the residual vector e."""
    x_rows = np.atleast_2d(np.asarray(x_rows, dtype=np.float64))
    e = np.asarray(e, dtype=np.float64).reshape(-1, 1)
    if x_rows.shape[0] != e.shape[0]:
        raise DimensionMismatch("x_rows and e must have the same number of rows")
    k = gram_gaussian(x_rows, _resolve(cfg.bandwidth_x, x_rows))
    l = gram_gaussian(e, _resolve(cfg.bandwidth_e, e))
    return hsic_biased(k, l)
