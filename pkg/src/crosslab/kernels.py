"""Hot numeric loops, each in a numba and a pure-numpy flavour.

The public names at the bottom dispatch on :data:`crosslab.NUMBA_ENABLED`.
Both flavours stay importable (``KERNELS[name]["numba"|"numpy"]``) so tests
can check them against each other and the benchmark can time them.

Conditional-logit parameter layout: with ``k`` utility features per
observation and two non-base alternatives (Mid=1, Large=2), parameter
``2*j + (a - 1)`` multiplies feature ``j`` for alternative ``a``. With
features ``(1, p)`` that is ``[alpha_mid, alpha_large, beta_mid, beta_large]``.
"""

from __future__ import annotations

import math

import numpy as np

from crosslab._accel import NUMBA_ENABLED, njit

# --------------------------------------------------------------------------
# conditional logit: log-likelihood, gradient, Hessian
# --------------------------------------------------------------------------


@njit
def _logit_llgh_nb(theta, feats, chosen, weights):
    n, k = feats.shape
    m = 2 * k
    ll = 0.0
    grad = np.zeros(m)
    hess = np.zeros((m, m))
    for i in range(n):
        v1 = 0.0
        v2 = 0.0
        for j in range(k):
            v1 += theta[2 * j] * feats[i, j]
            v2 += theta[2 * j + 1] * feats[i, j]
        vmax = max(0.0, max(v1, v2))
        e0 = math.exp(-vmax)
        e1 = math.exp(v1 - vmax)
        e2 = math.exp(v2 - vmax)
        s = e0 + e1 + e2
        p1 = e1 / s
        p2 = e2 / s
        c = chosen[i]
        w = weights[i]
        if c == 0:
            vc = 0.0
        elif c == 1:
            vc = v1
        else:
            vc = v2
        ll += w * (vc - vmax - math.log(s))
        r1 = (1.0 if c == 1 else 0.0) - p1
        r2 = (1.0 if c == 2 else 0.0) - p2
        h11 = p1 * (1.0 - p1)
        h22 = p2 * (1.0 - p2)
        h12 = -p1 * p2
        for j in range(k):
            fj = feats[i, j]
            grad[2 * j] += w * r1 * fj
            grad[2 * j + 1] += w * r2 * fj
            for l in range(k):
                f = w * fj * feats[i, l]
                hess[2 * j, 2 * l] -= f * h11
                hess[2 * j, 2 * l + 1] -= f * h12
                hess[2 * j + 1, 2 * l] -= f * h12
                hess[2 * j + 1, 2 * l + 1] -= f * h22
    return ll, grad, hess


def _logit_llgh_np(theta, feats, chosen, weights):
    n, k = feats.shape
    coef = theta.reshape(k, 2)
    v = np.zeros((n, 3))
    v[:, 1:] = feats @ coef
    vmax = v.max(axis=1, keepdims=True)
    e = np.exp(v - vmax)
    s = e.sum(axis=1, keepdims=True)
    prob = e / s
    logp = v - vmax - np.log(s)
    ll = float(weights @ logp[np.arange(n), chosen])
    d = np.zeros((n, 3))
    d[np.arange(n), chosen] = 1.0
    resid = (d - prob)[:, 1:]
    grad = np.einsum("i,ij,ia->ja", weights, feats, resid).reshape(-1)
    p1, p2 = prob[:, 1], prob[:, 2]
    block = np.empty((n, 2, 2))
    block[:, 0, 0] = p1 * (1.0 - p1)
    block[:, 1, 1] = p2 * (1.0 - p2)
    block[:, 0, 1] = block[:, 1, 0] = -p1 * p2
    hess = -np.einsum("i,ij,il,iab->jalb", weights, feats, feats, block).reshape(2 * k, 2 * k)
    return ll, grad, hess


# --------------------------------------------------------------------------
# brute-force 4-D grid search over (alpha_mid, beta_mid, alpha_large, beta_large)
# --------------------------------------------------------------------------


@njit
def _grid_search_nb(counts, pvals, grid, rel_tol):
    g = grid.shape[0]
    nq = pvals.shape[0]
    npair = g * g
    lin_m = np.zeros(npair)
    lin_l = np.zeros(npair)
    exp_m = np.empty((npair, nq))
    exp_l = np.empty((npair, nq))
    tot = np.empty(nq)
    for q in range(nq):
        tot[q] = counts[q, 0] + counts[q, 1] + counts[q, 2]
    for a in range(g):
        for b in range(g):
            idx = a * g + b
            for q in range(nq):
                v = grid[a] + grid[b] * pvals[q]
                lin_m[idx] += counts[q, 1] * v
                lin_l[idx] += counts[q, 2] * v
                exp_m[idx, q] = math.exp(v)
                exp_l[idx, q] = exp_m[idx, q]
    best = -np.inf
    best_m = 0
    best_l = 0
    ties = 0
    for im in range(npair):
        for il in range(npair):
            val = lin_m[im] + lin_l[il]
            for q in range(nq):
                val -= tot[q] * math.log(1.0 + exp_m[im, q] + exp_l[il, q])
            tol = rel_tol * max(1.0, abs(best))
            if val > best + tol:
                best = val
                best_m = im
                best_l = il
                ties = 1
            elif val >= best - tol:
                ties += 1
                if val > best:
                    best = val
                    best_m = im
                    best_l = il
    return best, best_m, best_l, ties


def _grid_search_np(counts, pvals, grid, rel_tol):
    g = grid.shape[0]
    a, b = np.meshgrid(grid, grid, indexing="ij")
    v = (a.reshape(-1, 1) + b.reshape(-1, 1) * pvals[None, :])  # (pairs, q)
    lin_m = v @ counts[:, 1]
    lin_l = v @ counts[:, 2]
    ev = np.exp(v)
    tot = counts.sum(axis=1)
    best = -np.inf
    best_m = best_l = 0
    ties = 0
    for im in range(g * g):
        vals = lin_m[im] + lin_l - np.log(1.0 + ev[im][None, :] + ev) @ tot
        j = int(np.argmax(vals))
        top = vals[j]
        tol = rel_tol * max(1.0, abs(max(top, best)))
        if top > best + tol:
            best, best_m, best_l = top, im, j
            ties = int(np.count_nonzero(vals >= top - tol))
        elif top >= best - tol:
            ties += int(np.count_nonzero(vals >= best - tol))
            if top > best:
                best, best_m, best_l = top, im, j
    return best, best_m, best_l, ties


# --------------------------------------------------------------------------
# LOWESS: tricube-weighted local linear fit on the k nearest neighbours
# --------------------------------------------------------------------------


@njit
def _lowess_nb(x, y, k):
    n = x.shape[0]
    out = np.empty(n)
    lo = 0
    for i in range(n):
        while lo + k < n and x[lo + k] - x[i] < x[i] - x[lo]:
            lo += 1
        hi = lo + k
        radius = max(x[i] - x[lo], x[hi - 1] - x[i])
        sw = 0.0
        swx = 0.0
        swy = 0.0
        swxx = 0.0
        swxy = 0.0
        for j in range(lo, hi):
            d = abs(x[j] - x[i])
            if radius > 0.0:
                u = d / radius
                if u >= 1.0:
                    continue
                t = 1.0 - u * u * u
                w = t * t * t
            else:
                w = 1.0
            dx = x[j] - x[i]
            sw += w
            swx += w * dx
            swy += w * y[j]
            swxx += w * dx * dx
            swxy += w * dx * y[j]
        mx = swx / sw
        my = swy / sw
        var = swxx / sw - mx * mx
        if var <= 1e-12 * (radius * radius + 1e-300):
            out[i] = my
        else:
            slope = (swxy / sw - mx * my) / var
            out[i] = my - slope * mx
    return out


def _lowess_np(x, y, k):
    n = x.shape[0]
    out = np.empty(n)
    lo = 0
    for i in range(n):
        while lo + k < n and x[lo + k] - x[i] < x[i] - x[lo]:
            lo += 1
        xs = x[lo:lo + k]
        ys = y[lo:lo + k]
        radius = max(x[i] - xs[0], xs[-1] - x[i])
        if radius > 0.0:
            u = np.abs(xs - x[i]) / radius
            w = np.where(u < 1.0, (1.0 - u ** 3) ** 3, 0.0)
        else:
            w = np.ones_like(xs)
        dx = xs - x[i]
        sw = w.sum()
        mx = (w @ dx) / sw
        my = (w @ ys) / sw
        var = (w @ (dx * dx)) / sw - mx * mx
        if var <= 1e-12 * (radius * radius + 1e-300):
            out[i] = my
        else:
            slope = ((w @ (dx * ys)) / sw - mx * my) / var
            out[i] = my - slope * mx
    return out


# --------------------------------------------------------------------------
# ECM data-generating recursion
# --------------------------------------------------------------------------


@njit
def _ecm_path_nb(p, eps, beta0, beta1, alpha0, alpha1, alpha2, y0):
    n = p.shape[0]
    y = np.empty(n)
    y[0] = y0
    for t in range(1, n):
        e = y[t - 1] - beta0 - beta1 * p[t - 1]
        dp = p[t - 1] - p[t - 2] if t >= 2 else 0.0
        y[t] = y[t - 1] + alpha0 + alpha1 * e + alpha2 * dp + eps[t]
    return y


def _ecm_path_np(p, eps, beta0, beta1, alpha0, alpha1, alpha2, y0):
    # the recursion is inherently sequential; plain Python loop over floats
    n = p.shape[0]
    y = np.empty(n)
    y[0] = y0
    for t in range(1, n):
        e = y[t - 1] - beta0 - beta1 * p[t - 1]
        dp = p[t - 1] - p[t - 2] if t >= 2 else 0.0
        y[t] = y[t - 1] + alpha0 + alpha1 * e + alpha2 * dp + eps[t]
    return y


@njit
def _clamped_walk_nb(start, shocks, phi, mean, lo, hi):
    n = shocks.shape[0]
    out = np.empty(n)
    prev = start
    for t in range(n):
        v = mean + phi * (prev - mean) + shocks[t]
        if v < lo:
            v = lo
        elif v > hi:
            v = hi
        out[t] = v
        prev = v
    return out


def _clamped_walk_np(start, shocks, phi, mean, lo, hi):
    n = shocks.shape[0]
    out = np.empty(n)
    prev = start
    for t in range(n):
        v = mean + phi * (prev - mean) + shocks[t]
        v = min(max(v, lo), hi)
        out[t] = v
        prev = v
    return out


KERNELS = {
    "logit_llgh": {"numba": _logit_llgh_nb, "numpy": _logit_llgh_np},
    "grid_search": {"numba": _grid_search_nb, "numpy": _grid_search_np},
    "lowess": {"numba": _lowess_nb, "numpy": _lowess_np},
    "ecm_path": {"numba": _ecm_path_nb, "numpy": _ecm_path_np},
    "clamped_walk": {"numba": _clamped_walk_nb, "numpy": _clamped_walk_np},
}

BACKEND = "numba" if NUMBA_ENABLED else "numpy"

logit_llgh = KERNELS["logit_llgh"][BACKEND]
grid_search = KERNELS["grid_search"][BACKEND]
lowess_kernel = KERNELS["lowess"][BACKEND]
ecm_path = KERNELS["ecm_path"][BACKEND]
clamped_walk = KERNELS["clamped_walk"][BACKEND]
