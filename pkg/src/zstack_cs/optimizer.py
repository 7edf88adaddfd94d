"""Orthant-wise limited-memory quasi-Newton (OWL-QN).

Minimizes ``f(x) + C * ||x||_1`` for a smooth ``f`` given as a
value-and-gradient callback. The core routine :func:`minimize_batch` runs
many independent problems in lockstep, one per row of a 2D array; every
reduction is row-wise, so a row's trajectory does not depend on which other
rows share the batch. :func:`minimize` is the single-vector front end.

Algorithm outline per iteration:

1. pseudo-gradient of the composite objective,
2. L-BFGS two-loop recursion on the pseudo-gradient, components whose sign
   disagrees with the steepest-descent direction are zeroed,
3. backtracking line search where each trial point is projected back onto
   the orthant chosen at the current iterate (sign-crossing coordinates are
   clamped to exactly 0.0),
4. the curvature pair is built from the smooth gradient only.
"""
from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numba as nb
import numpy as np

__all__ = [
    "Termination",
    "SolverOptions",
    "SolverResult",
    "BatchResult",
    "NonFiniteError",
    "pseudo_gradient",
    "minimize",
    "minimize_batch",
    "minimize_least_squares",
]

# pairs with s.y at or below this are not used in the two-loop recursion
CURVATURE_EPS = 1e-10


class Termination(str, enum.Enum):
    TOLERANCE = "Tolerance"
    MAX_ITERS = "MaxIters"
    LINE_SEARCH_FAILURE = "LineSearchFailure"


class NonFiniteError(FloatingPointError):
    """The objective callback produced a NaN or infinite value or gradient."""


@dataclass(frozen=True)
class SolverOptions:
    memory: int = 10
    max_iters: int = 500
    tol: float = 1e-6
    l1_weight: float = 0.0
    line_search_max_steps: int = 50
    backtrack: float = 0.5
    sufficient_decrease: float = 1e-4

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if not (self.l1_weight >= 0 and np.isfinite(self.l1_weight)):
            raise ValueError("l1_weight must be a finite value >= 0")
        if self.line_search_max_steps < 1:
            raise ValueError("line_search_max_steps must be >= 1")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if not 0 < self.sufficient_decrease < 1:
            raise ValueError("sufficient_decrease must lie in (0, 1)")


@dataclass
class SolverResult:
    solution: np.ndarray
    final_objective: float
    iterations: int
    converged: bool
    termination_reason: Termination


@dataclass
class BatchResult:
    """Row-wise results of :func:`minimize_batch`."""

    solution: np.ndarray
    final_objective: np.ndarray
    iterations: np.ndarray
    termination_reason: np.ndarray  # Termination values as strings

    @property
    def converged(self) -> np.ndarray:
        return self.termination_reason == Termination.TOLERANCE.value

    def counts(self) -> dict[str, int]:
        return {t.value: int((self.termination_reason == t.value).sum()) for t in Termination}

    def row(self, i: int) -> SolverResult:
        reason = Termination(self.termination_reason[i])
        return SolverResult(
            solution=self.solution[i].copy(),
            final_objective=float(self.final_objective[i]),
            iterations=int(self.iterations[i]),
            converged=reason == Termination.TOLERANCE,
            termination_reason=reason,
        )


def pseudo_gradient(x: np.ndarray, grad: np.ndarray, c: float) -> np.ndarray:
    """Steepest-descent surrogate of ``f + c * ||x||_1``."""
    if c == 0:
        return grad.copy()
    pg = grad + c * np.sign(x)
    at_zero = x == 0
    right = grad + c
    left = grad - c
    pg_zero = np.where(right < 0, right, np.where(left > 0, left, 0.0))
    return np.where(at_zero, pg_zero, pg)


def _check_finite(values: np.ndarray, grads: np.ndarray) -> None:
    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(grads))):
        raise NonFiniteError("objective callback returned a non-finite value or gradient")


def _rowdot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # elementwise product then a per-row pairwise sum: independent of the
    # row's position or alignment in memory, unlike BLAS/einsum kernels
    return (a * b).sum(axis=1)


BatchObjective = Callable[[np.ndarray, np.ndarray], "tuple[np.ndarray, np.ndarray]"]


def minimize_batch(
    fun: BatchObjective,
    x0: np.ndarray,
    opts: SolverOptions,
    *,
    compact_fraction: float = 0.75,
) -> BatchResult:
    """Run OWL-QN on every row of ``x0`` independently.

    ``fun(X, rows)`` receives a ``(k, n)`` array of points together with the
    ``k`` original row indices they belong to, and returns the smooth values
    ``(k,)`` and gradients ``(k, n)``.
    """
    x0 = np.array(x0, dtype=np.float64, ndmin=2)
    if x0.ndim != 2:
        raise ValueError("x0 must be a 2D array of shape (batch, n)")
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    n_rows, n = x0.shape
    c = float(opts.l1_weight)
    m = opts.memory
    gamma = opts.sufficient_decrease

    out_x = x0.copy()
    out_f = np.full(n_rows, np.nan)
    out_it = np.zeros(n_rows, dtype=np.int64)
    out_reason = np.full(n_rows, Termination.MAX_ITERS.value, dtype="<U17")
    if n_rows == 0:
        return BatchResult(out_x, out_f, out_it, out_reason)

    rows = np.arange(n_rows)
    x = x0.copy()
    f, g = fun(x, rows)
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    _check_finite(f, g)
    obj = f + c * np.abs(x).sum(axis=1)

    s_hist = np.zeros((m, n_rows, n))
    y_hist = np.zeros((m, n_rows, n))
    rho = np.zeros((m, n_rows))  # 0 marks an unused or skipped slot
    ys_last = np.zeros(n_rows)
    yy_last = np.ones(n_rows)
    alive = np.ones(n_rows, dtype=bool)
    n_done_since_compact = 0

    def finish(local: np.ndarray, reason: Termination, iters: int) -> None:
        orig = rows[local]
        out_x[orig] = x[local]
        out_f[orig] = obj[local]
        out_it[orig] = iters
        out_reason[orig] = reason.value
        alive[local] = False

    for it in range(opts.max_iters):
        pg = pseudo_gradient(x, g, c)
        live = np.flatnonzero(alive)

        # two-loop recursion on the pseudo-gradient
        q = pg.copy()
        alpha = np.zeros((m, x.shape[0]))
        order = [(it - 1 - j) % m for j in range(min(it, m))]
        for slot in order:
            a = rho[slot] * _rowdot(s_hist[slot], q)
            alpha[slot] = a
            q -= a[:, None] * y_hist[slot]
        # initial Hessian scaling; 1/||pg|| until a curvature pair is accepted
        pg_norm = np.sqrt(_rowdot(pg, pg))
        scale = np.where(
            ys_last > 0,
            ys_last / yy_last,
            np.where(pg_norm > 0, 1.0 / np.maximum(pg_norm, 1e-300), 1.0),
        )
        r = scale[:, None] * q
        for slot in reversed(order):
            b = rho[slot] * _rowdot(y_hist[slot], r)
            r += s_hist[slot] * (alpha[slot] - b)[:, None]
        d = -r
        d[d * pg >= 0] = 0.0

        dir_deriv = _rowdot(pg, d)
        stalled = alive & ~(dir_deriv < 0)
        if np.any(stalled):
            # zero pseudo-gradient (or no descent direction left): optimal
            finish(np.flatnonzero(stalled), Termination.TOLERANCE, it)
            n_done_since_compact += int(stalled.sum())
            live = np.flatnonzero(alive)
        if live.size == 0:
            break

        orthant = np.where(x != 0, np.sign(x), np.sign(-pg))
        step = np.ones(x.shape[0])
        pending = live.copy()
        x_new = x.copy()
        f_new = f.copy()
        g_new = g.copy()
        obj_new = obj.copy()
        failed = np.zeros(x.shape[0], dtype=bool)
        for _ in range(opts.line_search_max_steps):
            trial = x[pending] + step[pending, None] * d[pending]
            trial[np.sign(trial) != orthant[pending]] = 0.0
            ft, gt = fun(trial, rows[pending])
            ft = np.asarray(ft, dtype=np.float64)
            gt = np.asarray(gt, dtype=np.float64)
            _check_finite(ft, gt)
            objt = ft + c * np.abs(trial).sum(axis=1)
            bound = obj[pending] + gamma * _rowdot(pg[pending], trial - x[pending])
            ok = objt <= bound
            acc = pending[ok]
            x_new[acc] = trial[ok]
            f_new[acc] = ft[ok]
            g_new[acc] = gt[ok]
            obj_new[acc] = objt[ok]
            pending = pending[~ok]
            if pending.size == 0:
                break
            step[pending] *= opts.backtrack
        failed[pending] = True

        s = x_new - x
        y = g_new - g
        sy = _rowdot(s, y)
        yy = _rowdot(y, y)
        good = alive & ~failed & (sy > CURVATURE_EPS)
        slot = it % m
        s_hist[slot] = s
        y_hist[slot] = y
        rho[slot] = np.where(good, 1.0 / np.where(good, sy, 1.0), 0.0)
        ys_last = np.where(good, sy, ys_last)
        yy_last = np.where(good, yy, yy_last)

        obj_old = obj
        x, f, g, obj = x_new, f_new, g_new, obj_new

        if np.any(failed):
            finish(np.flatnonzero(failed), Termination.LINE_SEARCH_FAILURE, it + 1)
            n_done_since_compact += int(failed.sum())
        denom = np.maximum(np.abs(obj_old), np.finfo(float).tiny)
        small = alive & ((obj_old - obj) <= opts.tol * denom)
        if np.any(small):
            finish(np.flatnonzero(small), Termination.TOLERANCE, it + 1)
            n_done_since_compact += int(small.sum())

        if not alive.any():
            break
        if n_done_since_compact and alive.sum() <= compact_fraction * alive.size:
            keep = np.flatnonzero(alive)
            rows = rows[keep]
            x, f, g, obj = x[keep], f[keep], g[keep], obj[keep]
            s_hist = s_hist[:, keep]
            y_hist = y_hist[:, keep]
            rho = rho[:, keep]
            ys_last, yy_last = ys_last[keep], yy_last[keep]
            alive = np.ones(keep.size, dtype=bool)
            n_done_since_compact = 0
    else:
        live = np.flatnonzero(alive)
        if live.size:
            finish(live, Termination.MAX_ITERS, opts.max_iters)

    return BatchResult(out_x, out_f, out_it, out_reason)


def minimize(
    objective: Callable[[np.ndarray], "tuple[float, np.ndarray]"],
    x0,
    opts: SolverOptions,
) -> SolverResult:
    """Minimize ``objective(x) + opts.l1_weight * ||x||_1`` from ``x0``.

    ``objective`` returns the smooth value and its gradient. A failed line
    search is reported through ``termination_reason``, not raised.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    shape = x0.shape

    def batch_fun(xs, _rows):
        vals = np.empty(xs.shape[0])
        grads = np.empty_like(xs)
        for i, xi in enumerate(xs):
            v, gi = objective(xi.reshape(shape))
            vals[i] = v
            grads[i] = np.asarray(gi, dtype=np.float64).ravel()
        return vals, grads

    res = minimize_batch(batch_fun, x0.reshape(1, -1), opts)
    out = res.row(0)
    out.solution = out.solution.reshape(shape)
    return out


# ---------------------------------------------------------------------------
# Compiled path for least-squares smooth terms, f(x) = ||A x - b||^2.
# Same iteration as minimize_batch, one row at a time in a nogil kernel.

_REASONS = (Termination.TOLERANCE, Termination.MAX_ITERS, Termination.LINE_SEARCH_FAILURE)
_NON_FINITE = 3


@nb.njit(nogil=True, fastmath=True, cache=True)
def _ls_eval(A, b, x, r, g):
    m_rows, n = A.shape
    f = 0.0
    for j in range(n):
        g[j] = 0.0
    for i in range(m_rows):
        row = A[i]
        acc = 0.0
        for j in range(n):
            acc += row[j] * x[j]
        ri = acc - b[i]
        r[i] = ri
        f += ri * ri
        t = 2.0 * ri
        for j in range(n):
            g[j] += t * row[j]
    return f


@nb.njit(nogil=True, fastmath=True, cache=True)
def _dot(a, b):
    acc = 0.0
    for j in range(a.shape[0]):
        acc += a[j] * b[j]
    return acc


@nb.njit(nogil=True, fastmath=True, cache=True)
def _l1(a):
    acc = 0.0
    for j in range(a.shape[0]):
        acc += abs(a[j])
    return acc


@nb.njit(nogil=True, fastmath=True, cache=True)
def _finite(f, g):
    if not np.isfinite(f):
        return False
    for j in range(g.shape[0]):
        if not np.isfinite(g[j]):
            return False
    return True


@nb.njit(nogil=True, fastmath=True, cache=True)
def _owlqn_ls_row(A, b, x, c, m, max_iters, tol, ls_max, backtrack, gamma, curv_eps):
    """Solve one row in place in ``x``; returns (objective, iterations, code)."""
    n = x.shape[0]
    r = np.empty(A.shape[0])
    g = np.empty(n)
    gn = np.empty(n)
    xn = np.empty(n)
    pg = np.empty(n)
    q = np.empty(n)
    d = np.empty(n)
    orth = np.empty(n)
    s_hist = np.zeros((m, n))
    y_hist = np.zeros((m, n))
    rho = np.zeros(m)
    alpha = np.zeros(m)
    ys_last = 0.0
    yy_last = 1.0

    f = _ls_eval(A, b, x, r, g)
    if not _finite(f, g):
        return f, 0, _NON_FINITE
    obj = f + c * _l1(x)

    for it in range(max_iters):
        # pseudo-gradient
        for j in range(n):
            xj = x[j]
            gj = g[j]
            if c == 0.0:
                pg[j] = gj
            elif xj > 0.0:
                pg[j] = gj + c
            elif xj < 0.0:
                pg[j] = gj - c
            elif gj + c < 0.0:
                pg[j] = gj + c
            elif gj - c > 0.0:
                pg[j] = gj - c
            else:
                pg[j] = 0.0

        # two-loop recursion
        for j in range(n):
            q[j] = pg[j]
        k = min(it, m)
        for jj in range(k):
            slot = (it - 1 - jj) % m
            a = rho[slot] * _dot(s_hist[slot], q)
            alpha[slot] = a
            for j in range(n):
                q[j] -= a * y_hist[slot, j]
        pg_norm = np.sqrt(_dot(pg, pg))
        if ys_last > 0.0:
            scale = ys_last / yy_last
        elif pg_norm > 0.0:
            scale = 1.0 / pg_norm
        else:
            scale = 1.0
        for j in range(n):
            q[j] *= scale
        for jj in range(k - 1, -1, -1):
            slot = (it - 1 - jj) % m
            bcoef = rho[slot] * _dot(y_hist[slot], q)
            coef = alpha[slot] - bcoef
            for j in range(n):
                q[j] += coef * s_hist[slot, j]
        dd = 0.0
        for j in range(n):
            dj = -q[j]
            if dj * pg[j] >= 0.0:
                dj = 0.0
            d[j] = dj
            dd += pg[j] * dj
        if not dd < 0.0:
            return obj, it, 0

        for j in range(n):
            if x[j] > 0.0:
                orth[j] = 1.0
            elif x[j] < 0.0:
                orth[j] = -1.0
            elif pg[j] < 0.0:
                orth[j] = 1.0
            elif pg[j] > 0.0:
                orth[j] = -1.0
            else:
                orth[j] = 0.0

        step = 1.0
        accepted = False
        fn = f
        objn = obj
        for _ in range(ls_max):
            decrease = 0.0
            for j in range(n):
                v = x[j] + step * d[j]
                sv = 1.0 if v > 0.0 else (-1.0 if v < 0.0 else 0.0)
                if sv != orth[j]:
                    v = 0.0
                xn[j] = v
                decrease += pg[j] * (v - x[j])
            fn = _ls_eval(A, b, xn, r, gn)
            if not _finite(fn, gn):
                return fn, it, _NON_FINITE
            objn = fn + c * _l1(xn)
            if objn <= obj + gamma * decrease:
                accepted = True
                break
            step *= backtrack
        if not accepted:
            return obj, it + 1, 2

        slot = it % m
        sy = 0.0
        yy = 0.0
        for j in range(n):
            sj = xn[j] - x[j]
            yj = gn[j] - g[j]
            s_hist[slot, j] = sj
            y_hist[slot, j] = yj
            sy += sj * yj
            yy += yj * yj
        if sy > curv_eps:
            rho[slot] = 1.0 / sy
            ys_last = sy
            yy_last = yy
        else:
            rho[slot] = 0.0

        obj_old = obj
        for j in range(n):
            x[j] = xn[j]
            g[j] = gn[j]
        f = fn
        obj = objn
        if obj_old - obj <= tol * max(abs(obj_old), 2.2250738585072014e-308):
            return obj, it + 1, 0
    return obj, max_iters, 1


@nb.njit(nogil=True, cache=True)
def _owlqn_ls_rows(A, B, X, out_obj, out_it, out_code, c, m, max_iters, tol, ls_max, backtrack, gamma, curv_eps):
    for i in range(B.shape[0]):
        obj, iters, code = _owlqn_ls_row(
            A, B[i], X[i], c, m, max_iters, tol, ls_max, backtrack, gamma, curv_eps
        )
        out_obj[i] = obj
        out_it[i] = iters
        out_code[i] = code


def minimize_least_squares(
    A: np.ndarray,
    B: np.ndarray,
    opts: SolverOptions,
    *,
    x0: np.ndarray | None = None,
    workers: int = 1,
    chunk_size: int = 256,
) -> BatchResult:
    """OWL-QN on ``||A x - b||^2 + C ||x||_1`` for every row ``b`` of ``B``.

    Compiled counterpart of :func:`minimize_batch` for a least-squares smooth
    term with a shared matrix ``A`` (shape ``(M, N)``). Rows are processed in
    chunks by ``workers`` threads; each row's result is independent of the
    chunking and of the worker count.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(np.array(B, dtype=np.float64, ndmin=2))
    if B.shape[1] != A.shape[0]:
        raise ValueError(f"rows of B have length {B.shape[1]}, A has {A.shape[0]} rows")
    n_rows, n = B.shape[0], A.shape[1]
    if x0 is None:
        X = np.zeros((n_rows, n))
    else:
        X = np.array(np.broadcast_to(x0, (n_rows, n)), dtype=np.float64, order="C")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B)) and np.all(np.isfinite(X))):
        raise NonFiniteError("least-squares data and starting point must be finite")
    out_obj = np.empty(n_rows)
    out_it = np.zeros(n_rows, dtype=np.int64)
    out_code = np.zeros(n_rows, dtype=np.int64)
    params = (
        float(opts.l1_weight),
        int(opts.memory),
        int(opts.max_iters),
        float(opts.tol),
        int(opts.line_search_max_steps),
        float(opts.backtrack),
        float(opts.sufficient_decrease),
        CURVATURE_EPS,
    )

    def run(lo: int, hi: int) -> None:
        _owlqn_ls_rows(A, B[lo:hi], X[lo:hi], out_obj[lo:hi], out_it[lo:hi], out_code[lo:hi], *params)

    bounds = [(lo, min(lo + chunk_size, n_rows)) for lo in range(0, n_rows, chunk_size)]
    if workers <= 1 or len(bounds) <= 1:
        for lo, hi in bounds:
            run(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda b: run(*b), bounds))

    if np.any(out_code == _NON_FINITE):
        raise NonFiniteError("least-squares objective became non-finite")
    reasons = np.array([t.value for t in _REASONS], dtype="<U17")[out_code]
    return BatchResult(X, out_obj, out_it, reasons)
