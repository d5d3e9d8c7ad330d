"""Distribution-free rank regression: smoothed rank objective for the linear
coefficients (last-pinned parametrization) and the L2-regularized smoothed
rank correlation for the monotone transform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import _kernels as K
from .errors import DegeneratePivot, DidNotConverge, MissingTransformPoint
from .rankg import FitOptions, _validate, fit_prl


@dataclass(frozen=True)
class SmoothedFit:
    """Maximizer of the smoothed rank objective with beta[pivot_index] = 1."""

    theta: np.ndarray
    beta: np.ndarray
    objective_value: float
    pivot_index: int
    converged: bool


@dataclass(frozen=True)
class QTransformEstimate:
    """Pointwise penalized-argmax transform estimate.

    Monotonicity is not enforced: the pointwise argmax need not be monotone at
    finite n; it is measured by callers, not clamped.
    """

    points: np.ndarray  # (n, 2) columns (y, h_hat(y)) sorted by y
    lam: float
    y0: float
    h_at_y0: float

    def at(self, y: np.ndarray) -> np.ndarray:
        ys = self.points[:, 0]
        idx = np.searchsorted(ys, y)
        idx = np.clip(idx, 0, ys.size - 1)
        if not np.array_equal(ys[idx], np.asarray(y, dtype=np.float64)):
            raise MissingTransformPoint("query point not among the fitted targets")
        return self.points[idx, 1]

    def recentered(self) -> "QTransformEstimate":
        """Shift so that h_hat(y0) = 0 (opt-in; the penalty does not enforce it)."""
        pts = self.points.copy()
        pts[:, 1] -= self.h_at_y0
        return QTransformEstimate(pts, self.lam, self.y0, 0.0)

    def monotonicity_violations(self) -> int:
        """Count of adjacent decreases in h_hat over increasing y."""
        return int(np.sum(np.diff(self.points[:, 1]) < 0.0))


def smoothed_objective(beta: np.ndarray, x: np.ndarray, ranks: np.ndarray) -> float:
    """Rank-concordance score with Phi(sqrt(n) .) smoothing; value in (0, 1)."""
    x, ranks = _validate(x, ranks)
    beta = np.asarray(beta, dtype=np.float64)
    t = x @ beta
    s, _ = K.smoothed_eval_kernel(t, ranks, float(np.sqrt(x.shape[0])))
    return float(s)


def smoothed_gradient(beta: np.ndarray, x: np.ndarray, ranks: np.ndarray) -> np.ndarray:
    x, ranks = _validate(x, ranks)
    beta = np.asarray(beta, dtype=np.float64)
    n = x.shape[0]
    sqrtn = float(np.sqrt(n))
    t = x @ beta
    _, a = K.smoothed_eval_kernel(t, ranks, sqrtn)
    return (x.T @ a) * (sqrtn / (0.5 * n * (n - 1)))


def pilot_pivot(x: np.ndarray, ranks: np.ndarray, opts: FitOptions = FitOptions()):
    """Pivot choice for the ordering pipeline: largest |beta| of a Gaussian
    pilot fit; falls back to the last column if the pilot fails."""
    try:
        pilot = fit_prl(x, ranks, opts)
        return int(np.argmax(np.abs(pilot.beta))), pilot
    except Exception:
        return x.shape[1] - 1, None


def fit_smoothed(
    x: np.ndarray,
    ranks: np.ndarray,
    pivot: int,
    opts: FitOptions = FitOptions(),
    pilot_beta: np.ndarray | None = None,
) -> SmoothedFit:
    """Multi-start ascent of S(theta, 1) with the pivot coordinate pinned to 1.

    The objective is non-concave; starts are the rescaled Gaussian pilot, the
    zero vector and +/- unit vectors, best final objective wins (ties by first
    found).
    """
    x, ranks = _validate(x, ranks)
    n, p = x.shape
    if p < 2:
        raise ValueError("need p >= 2 for the pinned parametrization")
    if not 0 <= pivot < p:
        raise ValueError(f"pivot {pivot} out of range for p={p}")
    if np.ptp(x[:, pivot]) == 0.0:
        raise DegeneratePivot(f"pivot column {pivot} is constant")
    sqrtn = float(np.sqrt(n))
    xt = np.ascontiguousarray(np.delete(x, pivot, axis=1))
    xpiv = np.ascontiguousarray(x[:, pivot])
    c = 0.5 * n * (n - 1)

    def neg_s_and_grad(theta):
        t = xt @ theta + xpiv
        s, a = K.smoothed_eval_kernel(t, ranks, sqrtn)
        grad = (xt.T @ a) * (sqrtn / c)
        return -s, -grad

    starts = []
    if pilot_beta is None:
        try:
            pilot_beta = fit_prl(x, ranks, opts).beta
        except Exception:
            pilot_beta = None
    if pilot_beta is not None and abs(pilot_beta[pivot]) > 1e-8:
        starts.append(np.delete(pilot_beta / pilot_beta[pivot], pivot))
    starts.append(np.zeros(p - 1))
    for k in range(p - 1):
        e = np.zeros(p - 1)
        e[k] = 1.0
        starts.append(e.copy())
        starts.append(-e)

    best = None
    failures = []
    for theta0 in starts:
        try:
            res = scipy.optimize.minimize(
                neg_s_and_grad,
                theta0,
                jac=True,
                method="L-BFGS-B",
                options={"maxiter": opts.max_iter, "ftol": 1e-14, "gtol": 1e-10},
            )
        except Exception as exc:  # pragma: no cover - scipy internal failure
            failures.append(exc)
            continue
        if best is None or -res.fun > best[0]:
            best = (-res.fun, res.x, bool(res.success))
    if best is None:
        raise DidNotConverge(None, f"all smoothed starts failed: {failures[:1]}")
    value, theta, converged = best
    beta = np.insert(theta, pivot, 1.0)
    return SmoothedFit(theta, beta, float(value), pivot, converged)


def q_objective(
    z: float, y: float, beta: np.ndarray, x: np.ndarray, yvec: np.ndarray, y0: float
) -> float:
    """Smoothed rank correlation at (z, y): mean over ordered pairs i != j of
    (1{Y_j >= y} - 1{Y_i >= y0}) * Phi(sqrt(n)((X_j - X_i)^T beta - z))."""
    from scipy.special import ndtr

    x = np.asarray(x, dtype=np.float64)
    yvec = np.asarray(yvec, dtype=np.float64)
    n = x.shape[0]
    t = x @ np.asarray(beta, dtype=np.float64)
    sqrtn = np.sqrt(n)
    d = (yvec >= y).astype(np.float64)
    e = (yvec >= y0).astype(np.float64)
    args = ndtr(sqrtn * ((t[None, :] - t[:, None]) - z))
    w = d[None, :] - e[:, None]
    total = float(np.sum(w * args))
    diag = float(np.sum((d - e) * ndtr(np.full(n, -sqrtn * z))))
    return (total - diag) / (n * (n - 1))


def estimate_h_smoothed(
    y_targets: np.ndarray,
    beta: np.ndarray,
    x: np.ndarray,
    yvec: np.ndarray,
    y0: float,
    lam: float = 1e-3,
    tol: float = 1e-6,
) -> QTransformEstimate:
    """Penalized argmax h_hat(y) = argmax_z Q(z, y, beta) - lam * z^2 per target.

    The search covers a bracket wide enough that the penalty dominates the
    bounded Q outside it, and refines each candidate region by golden section
    to absolute tolerance ``tol`` in z.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    x = np.asarray(x, dtype=np.float64)
    yvec = np.asarray(yvec, dtype=np.float64)
    y_targets = np.atleast_1d(np.asarray(y_targets, dtype=np.float64))
    n = x.shape[0]
    if n < 2 or yvec.shape != (n,):
        raise ValueError("need n >= 2 rows with matching yvec")
    t = x @ np.asarray(beta, dtype=np.float64)
    ii, jj = np.where(~np.eye(n, dtype=bool))
    s = t[jj] - t[ii]
    order = np.argsort(s, kind="stable")
    s_sorted = np.ascontiguousarray(s[order])
    i_sorted = np.ascontiguousarray(ii[order].astype(np.int64))
    j_sorted = np.ascontiguousarray(jj[order].astype(np.int64))
    thresholds = y_targets
    if not np.any(y_targets == y0):
        thresholds = np.append(y_targets, y0)
    sqrtn = float(np.sqrt(n))
    z_bound = float(np.sqrt(2.0 / lam) + 1.0)
    wpad = max(16.0 / sqrtn, 0.05)
    z = K.smoothed_h_solve(
        s_sorted,
        i_sorted,
        j_sorted,
        yvec,
        thresholds,
        float(y0),
        sqrtn,
        float(lam),
        z_bound,
        6,
        17,
        wpad,
        float(tol),
    )
    h_at_y0 = float(z[np.nonzero(thresholds == y0)[0][0]])
    srt = np.argsort(thresholds, kind="stable")
    points = np.column_stack([thresholds[srt], z[srt]])
    return QTransformEstimate(points, float(lam), float(y0), h_at_y0)


def residuals_smoothed(
    yvec: np.ndarray, x: np.ndarray, fit: SmoothedFit, h_est: QTransformEstimate
) -> np.ndarray:
    """Estimated noise: h_hat(Y_i) - X_i^T beta_hat."""
    x = np.asarray(x, dtype=np.float64)
    yvec = np.asarray(yvec, dtype=np.float64)
    return h_est.at(yvec) - x @ fit.beta
