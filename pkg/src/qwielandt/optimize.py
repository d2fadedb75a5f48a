"""Gradient-free multistart minimization, vectorized across starts.

scipy's Nelder-Mead runs one start at a time and spends most of its time in
Python call overhead when the objective is a tiny eigenvalue problem.  The
routines here advance every start of a multistart run in lock step so one
batched ``eigvalsh`` call serves all of them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

BatchObjective = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MultistartResult:
    x: np.ndarray  # (m, n) best point per start
    fun: np.ndarray  # (m,) best value per start
    iterations: int
    stopped_early: bool

    @property
    def best_index(self) -> int:
        # np.argmin returns the first minimum: ties resolve to the lowest start index
        return int(np.argmin(self.fun))

    @property
    def best_x(self) -> np.ndarray:
        return self.x[self.best_index]

    @property
    def best_fun(self) -> float:
        return float(self.fun[self.best_index])


def batch_nelder_mead(
    f: BatchObjective,
    x0: np.ndarray,
    *,
    maxiter: int = 500,
    xatol: float | None = 1e-10,
    fatol: float = 1e-14,
    stop_below: float | None = None,
) -> MultistartResult:
    """Adaptive Nelder-Mead (Gao & Han parameters) on every row of ``x0``.

    ``f`` maps an ``(m, n)`` array of points to ``m`` values.  Iteration ends
    when every start has converged, after ``maxiter`` iterations, or as soon
    as any simplex vertex drops below ``stop_below``.  ``xatol=None`` drops
    the simplex-size test, for objectives with flat gauge directions (phase
    and scale of a vector) along which the simplex never shrinks.
    """
    x0 = np.asarray(x0, dtype=float)
    m, n = x0.shape
    alpha, gamma = 1.0, 1.0 + 2.0 / n
    rho, sigma = 0.75 - 1.0 / (2 * n), 1.0 - 1.0 / n

    simplex = np.repeat(x0[:, None, :], n + 1, axis=1)
    for j in range(n):
        simplex[:, j + 1, j] += np.where(x0[:, j] != 0, 0.05 * x0[:, j], 0.00025)
    fs = f(simplex.reshape(-1, n)).reshape(m, n + 1)

    active = np.ones(m, dtype=bool)
    it = 0
    stopped = False
    for it in range(1, maxiter + 1):
        order = np.argsort(fs, axis=1, kind="stable")
        simplex = np.take_along_axis(simplex, order[:, :, None], axis=1)
        fs = np.take_along_axis(fs, order, axis=1)
        if stop_below is not None and fs[:, 0].min() < stop_below:
            stopped = True
            break
        spread_x = np.abs(simplex[:, 1:] - simplex[:, :1]).max(axis=(1, 2))
        spread_f = np.abs(fs[:, 1:] - fs[:, :1]).max(axis=1)
        converged = spread_f <= fatol
        if xatol is not None:
            converged &= spread_x <= xatol
        active &= ~converged
        if not active.any():
            break

        idx = np.flatnonzero(active)
        s = simplex[idx]
        fv = fs[idx]
        centroid = s[:, :-1].mean(axis=1)
        worst = s[:, -1]

        xr = centroid + alpha * (centroid - worst)
        fr = f(xr)
        xe = centroid + gamma * (xr - centroid)
        fe = f(xe)
        xoc = centroid + rho * (xr - centroid)
        foc = f(xoc)
        xic = centroid - rho * (centroid - worst)
        fic = f(xic)

        best_f, second_worst_f, worst_f = fv[:, 0], fv[:, -2], fv[:, -1]
        improve = fr < best_f
        take_e = improve & (fe < fr)
        take_r = (improve & ~take_e) | (~improve & (fr < second_worst_f))
        outside = ~improve & (fr >= second_worst_f) & (fr < worst_f)
        inside = ~improve & (fr >= worst_f)
        take_oc = outside & (foc <= fr)
        take_ic = inside & (fic < worst_f)

        new_x = worst.copy()
        new_f = worst_f.copy()
        for mask, xx, ff in ((take_e, xe, fe), (take_r, xr, fr), (take_oc, xoc, foc), (take_ic, xic, fic)):
            new_x[mask] = xx[mask]
            new_f[mask] = ff[mask]
        s[:, -1] = new_x
        fv[:, -1] = new_f

        shrink = (outside & ~take_oc) | (inside & ~take_ic)
        if shrink.any():
            si = np.flatnonzero(shrink)
            ss = s[si]
            ss[:, 1:] = ss[:, :1] + sigma * (ss[:, 1:] - ss[:, :1])
            fv[si, 1:] = f(ss[:, 1:].reshape(-1, n)).reshape(len(si), n)
            s[si] = ss

        simplex[idx] = s
        fs[idx] = fv

    best = np.argmin(fs, axis=1)
    rows = np.arange(m)
    return MultistartResult(x=simplex[rows, best], fun=fs[rows, best], iterations=it, stopped_early=stopped)
