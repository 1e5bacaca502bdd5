"""Compiled inner loops for trajectory generation and invariant monitoring."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .nonexp import AFFINE, BALL, BOX, HALFSPACE

# rows of the monitor statistics array
BOUND_STEP, BOUND_BALL, RESIDUAL, CYCLE_GAP, SQUARE_DIST = range(5)
N_CHECKS = 5


@njit(cache=True)
def apply_map(x, out, codes, pstart, params, first, count, work):
    d = x.shape[0]
    for j in range(d):
        out[j] = x[j]
    for q in range(first, first + count):
        c = codes[q]
        s = pstart[q]
        if c == HALFSPACE:
            ex = -params[s + d]
            for j in range(d):
                ex += params[s + j] * out[j]
            if ex > 0.0:
                f = ex / params[s + d + 1]
                for j in range(d):
                    out[j] -= f * params[s + j]
        elif c == BALL:
            r2 = 0.0
            for j in range(d):
                t = out[j] - params[s + j]
                r2 += t * t
            r = math.sqrt(r2)
            rad = params[s + d]
            if r > rad:
                f = rad / r
                for j in range(d):
                    out[j] = params[s + j] + f * (out[j] - params[s + j])
        elif c == BOX:
            for j in range(d):
                lo = params[s + j]
                hi = params[s + d + j]
                if out[j] < lo:
                    out[j] = lo
                elif out[j] > hi:
                    out[j] = hi
        elif c == AFFINE:
            r = int(params[s])
            off = s + 1
            qb = s + 1 + d
            for cc in range(r):
                t = 0.0
                for j in range(d):
                    t += params[qb + j * r + cc] * (out[j] - params[off + j])
                work[cc] = t
            for j in range(d):
                t = params[off + j]
                for cc in range(r):
                    t += params[qb + j * r + cc] * work[cc]
                out[j] = t


@njit(cache=True)
def xu_chunk(x0, n0, alphas, A, u, codes, pstart, params, mfirst, mcount, xs_out, ys_out):
    """Steps ``n0 -> n0 + len(alphas)``; ``alphas[s] = alpha_{n0+s+1}``.

    Row ``s`` of ``xs_out`` receives ``x_{n0+s+1}`` and row ``s`` of ``ys_out``
    receives ``T_{n0+s+1} x_{n0+s}``.
    """
    d = x0.shape[0]
    l = mfirst.shape[0]
    x = x0.copy()
    y = np.empty(d)
    work = np.empty(d)
    for s in range(alphas.shape[0]):
        i = (n0 + s + 1) % l
        apply_map(x, y, codes, pstart, params, mfirst[i], mcount[i], work)
        a = alphas[s]
        for r in range(d):
            ay = 0.0
            for c in range(d):
                ay += A[r, c] * y[c]
            x[r] = y[r] - a * ay + a * u[r]
        for r in range(d):
            xs_out[s, r] = x[r]
            ys_out[s, r] = y[r]


@njit(cache=True)
def _dist(a, b):
    s = 0.0
    for j in range(a.shape[0]):
        t = a[j] - b[j]
        s += t * t
    return math.sqrt(s)


@njit(cache=True)
def _record(stats, check, lhs, rhs):
    stats[check, 0] += 1.0
    slack = 1e-9 * (1.0 + abs(rhs))
    excess = lhs - rhs
    if excess > slack:
        stats[check, 1] += 1.0
    if excess > stats[check, 2]:
        stats[check, 2] = excess


@njit(cache=True)
def monitor_chunk(X, xbase, Y, m_start, AL, abase, p, u, A, zs, zres, zw,
                  Q, K, bA1K, gamma, dist_up, l, stats):
    """Check the per-step inequalities for the new iterates ``m_start..``.

    ``X[j]`` is ``x_{xbase+j}``, ``Y[j]`` is ``T_m x_{m-1}`` for
    ``m = m_start + j`` and ``AL[j]`` is ``alpha_{abase+j}``.  Probe points
    ``zs`` come with ``zres[z, i] = |T_i z - z|`` and ``zw[z] = u - A z``.
    """
    d = p.shape[0]
    nz = zs.shape[0]
    m_end = xbase + X.shape[0]
    Ay = np.empty(d)
    for m in range(m_start, m_end):
        xm = X[m - xbase]
        n = m - 1
        if m >= Q:
            _record(stats, BOUND_BALL, _dist(xm, p), K)
        if n < Q or n < xbase:
            continue
        xn = X[n - xbase]
        a = AL[m - abase]
        dn = _dist(xn, p)
        _record(stats, BOUND_STEP, _dist(xm, p), (1.0 - gamma * a) * dn + a * dist_up)
        y = Y[m - m_start]
        s = 0.0
        for r in range(d):
            ay = 0.0
            for c in range(d):
                ay += A[r, c] * y[c]
            t = u[r] - ay
            s += t * t
        _record(stats, RESIDUAL, math.sqrt(s), bA1K)
        nl = n - l
        if nl >= Q and nl >= xbase and m - l >= abase:
            lhs = _dist(xm, X[m - l - xbase])
            prev = _dist(xn, X[nl - xbase])
            rhs = (1.0 - a * gamma) * prev + bA1K * abs(a - AL[m - l - abase])
            _record(stats, CYCLE_GAP, lhs, rhs)
        i = m % l
        for z in range(nz):
            dz = _dist(xn, zs[z])
            t = zres[z, i]
            inner = 0.0
            lhs = 0.0
            for r in range(d):
                w = xm[r] - zs[z, r]
                inner += zw[z, r] * w
                lhs += w * w
            rhs = (1.0 - a * gamma) * dz * dz + 2.0 * dz * t + t * t + 2.0 * a * inner
            _record(stats, SQUARE_DIST, lhs, rhs)
