"""Compiled inner loops for the O(n^2) pairwise objectives.

All kernels are single-threaded and run in a fixed accumulation order, so
results are bit-identical across runs and across process pools.  The pairwise
log-likelihood sum uses Kahan compensation.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

SQRT1_2 = 0.7071067811865476
LOG_SQRT2PI = 0.9189385332046727
INV_SQRT2PI = 0.3989422804014327
_GOLDEN = 0.6180339887498949


@njit(cache=True, inline="always")
def _logphi(u):
    """log of the standard normal CDF, stable over the whole real line.

    Uses erfc directly down to u = -30 and a 6-term scaled-erfc asymptotic
    series below that (relative error < 2e-14 at the switch point).
    """
    if u >= -30.0:
        return math.log(0.5 * math.erfc(-u * SQRT1_2))
    v = -u * SQRT1_2
    x = 1.0 / (2.0 * v * v)
    s = 1.0 + x * (-1.0 + x * (3.0 + x * (-15.0 + x * (105.0 + x * (-945.0 + x * 10395.0)))))
    return -v * v + math.log(0.5 * s / (v * 1.7724538509055159))


@njit(cache=True)
def logphi_array(u):
    out = np.empty_like(u)
    for k in range(u.size):
        out[k] = _logphi(u[k])
    return out


@njit(cache=True)
def prl_objective_kernel(t, ranks):
    """Mean over pairs i<j of log Phi(signed standardized difference)."""
    n = t.size
    obj = 0.0
    comp = 0.0
    for i in range(n):
        ti = t[i]
        ri = ranks[i]
        for j in range(i + 1, n):
            w = 1.0 if ranks[j] > ri else -1.0
            u = w * (t[j] - ti) * SQRT1_2
            lp = _logphi(u)
            y = lp - comp
            tot = obj + y
            comp = (tot - obj) - y
            obj = tot
    return obj / (0.5 * n * (n - 1))


@njit(cache=True)
def prl_full_kernel(t, ranks, kmat, rowsum):
    """Objective sum plus per-row gradient weights and curvature matrix.

    Writes the pair curvature kappa = -r(u) * (u + r(u)) into kmat (symmetric,
    zero diagonal) and its row sums into rowsum; returns (objective_mean, a)
    where the gradient is X^T a * (1/sqrt(2)) / C(n,2).
    """
    n = t.size
    obj = 0.0
    comp = 0.0
    a = np.zeros(n)
    for i in range(n):
        kmat[i, i] = 0.0
    for i in range(n):
        ti = t[i]
        ri = ranks[i]
        for j in range(i + 1, n):
            w = 1.0 if ranks[j] > ri else -1.0
            u = w * (t[j] - ti) * SQRT1_2
            lp = _logphi(u)
            y = lp - comp
            tot = obj + y
            comp = (tot - obj) - y
            obj = tot
            r = math.exp(-0.5 * u * u - LOG_SQRT2PI - lp)
            g = r * w
            a[j] += g
            a[i] -= g
            kap = -r * (u + r)
            kmat[i, j] = kap
            kmat[j, i] = kap
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += kmat[i, j]
        rowsum[i] = s
    return obj / (0.5 * n * (n - 1)), a


@njit(cache=True)
def min_signed_concordance(t, ranks):
    """min over pairs of sign-adjusted projection differences.

    Strictly positive iff every pair is rank-concordant along the direction
    that produced t, i.e. the likelihood has no finite maximizer (separation).
    """
    n = t.size
    best = np.inf
    for i in range(n):
        ti = t[i]
        ri = ranks[i]
        for j in range(i + 1, n):
            w = 1.0 if ranks[j] > ri else -1.0
            v = w * (t[j] - ti)
            if v < best:
                best = v
    return best


@njit(cache=True)
def smoothed_eval_kernel(t, ranks, sqrtn):
    """Smoothed rank objective: (S_mean, a) with gradient = sqrtn * Xt^T a / C."""
    n = t.size
    obj = 0.0
    comp = 0.0
    a = np.zeros(n)
    for i in range(n):
        ti = t[i]
        ri = ranks[i]
        for j in range(i + 1, n):
            w = 1.0 if ranks[j] > ri else -1.0
            arg = sqrtn * w * (t[j] - ti)
            val = 0.5 * math.erfc(-arg * SQRT1_2)
            y = val - comp
            tot = obj + y
            comp = (tot - obj) - y
            obj = tot
            if arg > -38.0 and arg < 38.0:
                coef = math.exp(-0.5 * arg * arg) * INV_SQRT2PI * w
                a[j] += coef
                a[i] -= coef
    return obj / (0.5 * n * (n - 1)), a


@njit(cache=True, inline="always")
def _mixture_cdf_pdf(c_sorted, z):
    """CDF and density of the Phi-mixture at z, windowed at +/-10 (exact to <1e-22)."""
    n = c_sorted.size
    lo = np.searchsorted(c_sorted, z - 10.0)
    hi = np.searchsorted(c_sorted, z + 10.0)
    f = float(lo)
    fp = 0.0
    for k in range(lo, hi):
        a = z - c_sorted[k]
        f += 0.5 * math.erfc(-a * SQRT1_2)
        fp += math.exp(-0.5 * a * a) * INV_SQRT2PI
    return f / n, fp / n


@njit(cache=True)
def mixture_cdf_batch(c_sorted, z):
    out = np.empty(z.size)
    for k in range(z.size):
        f, _ = _mixture_cdf_pdf(c_sorted, z[k])
        out[k] = f
    return out


@njit(cache=True)
def invert_mixture_cdf(c_sorted, u, lo0, hi0, tol):
    """Bracketed inversion of the mixture CDF, bisection safeguarded by Newton.

    Brackets must straddle on entry; alternating bisection steps guarantee
    geometric bracket shrinkage, Newton steps give the fast tail.
    """
    m = u.size
    out = np.empty(m)
    for k in range(m):
        lo = lo0[k]
        hi = hi0[k]
        uk = u[k]
        z = 0.5 * (lo + hi)
        it = 0
        while hi - lo > tol and it < 200:
            f, fp = _mixture_cdf_pdf(c_sorted, z)
            if f > uk:
                hi = z
            else:
                lo = z
            if it % 2 == 0 and fp > 0.0:
                zn = z - (f - uk) / fp
                if zn <= lo or zn >= hi:
                    zn = 0.5 * (lo + hi)
            else:
                zn = 0.5 * (lo + hi)
            z = zn
            it += 1
        out[k] = 0.5 * (lo + hi)
    return out


@njit(cache=True)
def gram_gaussian_kernel(rows, inv_bw):
    n, d = rows.shape
    out = np.empty((n, n))
    for i in range(n):
        out[i, i] = 1.0
        for j in range(i + 1, n):
            s = 0.0
            for k in range(d):
                diff = rows[i, k] - rows[j, k]
                s += diff * diff
            v = math.exp(-s * inv_bw)
            out[i, j] = v
            out[j, i] = v
    return out


@njit(cache=True, inline="always")
def _q_windowed(z, s_sorted, v, sfx, sqrtn, delta, inv_count, lam):
    """Penalized smoothed rank-correlation value at z, exact to ~1e-14.

    Pairs with s_p >= z + delta contribute exactly 1 (suffix sum); pairs below
    z - delta contribute exactly 0; only the window is evaluated.
    """
    lo = np.searchsorted(s_sorted, z - delta)
    hi = np.searchsorted(s_sorted, z + delta)
    q = float(sfx[hi])
    for p in range(lo, hi):
        q += v[p] * 0.5 * math.erfc(-(s_sorted[p] - z) * sqrtn * SQRT1_2)
    return q * inv_count - lam * z * z


@njit(cache=True)
def q_exact_batch(z_batch, s_sorted, v, sfx, sqrtn, delta, inv_count, lam):
    out = np.empty(z_batch.size)
    for k in range(z_batch.size):
        out[k] = _q_windowed(z_batch[k], s_sorted, v, sfx, sqrtn, delta, inv_count, lam)
    return out


@njit(cache=True)
def smoothed_h_solve(
    s_sorted,
    i_sorted,
    j_sorted,
    yvec,
    thresholds,
    y0,
    sqrtn,
    lam,
    z_bound,
    top_j,
    coarse_pts,
    wpad,
    tol,
):
    """Penalized argmax of the smoothed rank correlation for each threshold.

    For one threshold, the objective is a sum of +/-1-weighted sigmoids of
    width ~1/sqrt(n) centered at the sorted pair differences; its value away
    from any center is an exact suffix sum.  Maxima are localized on that
    staircase (keeping the top_j separated candidates plus z = 0), then each
    window gets a coarse grid and a golden-section refinement with exact
    windowed evaluation, tolerance tol in z.
    """
    npair = s_sorted.size
    n_t = thresholds.size
    out = np.empty(n_t)
    v = np.empty(npair, dtype=np.float64)
    sfx = np.empty(npair + 1, dtype=np.int64)
    delta = 10.0 / sqrtn
    inv_count = 1.0 / npair
    n_cand = top_j + 1
    cand_z = np.empty(n_cand)
    cand_v = np.empty(n_cand)
    for ti in range(n_t):
        thr = thresholds[ti]
        sfx[npair] = 0
        acc = 0
        for p in range(npair - 1, -1, -1):
            dj = 1 if yvec[j_sorted[p]] >= thr else 0
            di = 1 if yvec[i_sorted[p]] >= y0 else 0
            w = dj - di
            v[p] = float(w)
            acc += w
            sfx[p] = acc
        # staircase scan: on (s_{k-1}, s_k) the unpenalized value is sfx[k]
        for c in range(top_j):
            cand_v[c] = -1e300
            cand_z[c] = 1e300
        for k in range(npair + 1):
            lo_k = -z_bound if k == 0 else s_sorted[k - 1]
            hi_k = z_bound if k == npair else s_sorted[k]
            if hi_k < -z_bound or lo_k > z_bound:
                continue
            if lo_k < -z_bound:
                lo_k = -z_bound
            if hi_k > z_bound:
                hi_k = z_bound
            z = 0.0
            if z < lo_k:
                z = lo_k
            if z > hi_k:
                z = hi_k
            val = sfx[k] * inv_count - lam * z * z
            # keep top_j candidates separated by at least wpad
            placed = False
            for c in range(top_j):
                if abs(z - cand_z[c]) < wpad:
                    if val > cand_v[c]:
                        cand_v[c] = val
                        cand_z[c] = z
                    placed = True
                    break
            if not placed:
                worst = 0
                for c in range(1, top_j):
                    if cand_v[c] < cand_v[worst]:
                        worst = c
                if val > cand_v[worst]:
                    cand_v[worst] = val
                    cand_z[worst] = z
        cand_z[top_j] = 0.0
        cand_v[top_j] = 0.0
        best_z = 0.0
        best_val = -1e300
        for c in range(n_cand):
            if cand_v[c] <= -1e299:
                continue
            a = cand_z[c] - wpad
            b = cand_z[c] + wpad
            if a < -z_bound:
                a = -z_bound
            if b > z_bound:
                b = z_bound
            # coarse grid over the window
            step = (b - a) / (coarse_pts - 1)
            gbest = 0
            gbest_val = -1e300
            for g in range(coarse_pts):
                zg = a + step * g
                val = _q_windowed(zg, s_sorted, v, sfx, sqrtn, delta, inv_count, lam)
                if val > gbest_val:
                    gbest_val = val
                    gbest = g
            glo = a + step * (gbest - 1) if gbest > 0 else a
            ghi = a + step * (gbest + 1) if gbest < coarse_pts - 1 else b
            # golden-section within the bracketing cell
            x1 = ghi - _GOLDEN * (ghi - glo)
            x2 = glo + _GOLDEN * (ghi - glo)
            f1 = _q_windowed(x1, s_sorted, v, sfx, sqrtn, delta, inv_count, lam)
            f2 = _q_windowed(x2, s_sorted, v, sfx, sqrtn, delta, inv_count, lam)
            while ghi - glo > tol:
                if f1 < f2:
                    glo = x1
                    x1 = x2
                    f1 = f2
                    x2 = glo + _GOLDEN * (ghi - glo)
                    f2 = _q_windowed(x2, s_sorted, v, sfx, sqrtn, delta, inv_count, lam)
                else:
                    ghi = x2
                    x2 = x1
                    f2 = f1
                    x1 = ghi - _GOLDEN * (ghi - glo)
                    f1 = _q_windowed(x1, s_sorted, v, sfx, sqrtn, delta, inv_count, lam)
            zf = 0.5 * (glo + ghi)
            vf = _q_windowed(zf, s_sorted, v, sfx, sqrtn, delta, inv_count, lam)
            if vf > best_val or (vf == best_val and zf < best_z):
                best_val = vf
                best_z = zf
        out[ti] = best_z
    return out
