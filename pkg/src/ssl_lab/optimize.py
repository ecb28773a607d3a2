"""Convex minimization and box-constrained least-squares utilities.

Everything here is deterministic: no randomness, fixed arithmetic order, so
repeated runs on the same inputs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError, NonFiniteInputError, NumericError

_EPS = float(np.finfo(float).eps)
_INV_STEP_CAP = 1e18
_STALL_WINDOW = 50
_STALL_GRAD_TOL = 1e-6
# Subgradient objectives may never drive the convention gradient small; an
# objective plateau over this window also counts as converged.
_PLATEAU_WINDOW = 120
_PLATEAU_RTOL = 1e-11


@dataclass
class SolverConfig:
    """Tolerances for the first-order solver."""

    grad_tol: float = 1e-9
    max_iters: int = 10000
    step_init: float = 1.0

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.step_init <= 0:
            raise ValueError("step_init must be positive")


def _finite_or_raise(value: float, what: str) -> float:
    if np.isnan(value):
        raise NumericError(f"{what} produced NaN")
    return value


def minimize_convex(objective, gradient, init, cfg: SolverConfig | None = None,
                    *, allow_stall: bool = False) -> np.ndarray:
    """Minimize a convex objective by accelerated descent with backtracking.

    Gradient steps use a backtracking line search with the sufficient-decrease
    condition ``f(p) <= f(y) - ||g||^2 / (2 L)``; Nesterov momentum with
    restart-on-increase keeps the iterate count practical on ill-conditioned
    quadratics while the accepted objective sequence stays monotone.

    Parameters
    ----------
    objective, gradient : callable
        Consistent value / gradient maps on weight vectors.
    init : array_like
        Starting point.
    cfg : SolverConfig, optional
    allow_stall : bool
        For objectives built on subgradients (hinge, absolute) the gradient
        norm may never reach ``grad_tol``; with this flag the solver also
        accepts an objective stall combined with a relaxed 1e-6 gradient
        test, returning the best iterate seen.

    Returns
    -------
    numpy.ndarray
        Point with gradient inf-norm below ``cfg.grad_tol`` (or the stall
        rule above).

    Raises
    ------
    ConvergenceError
        Iteration limit reached; carries the best iterate.
    NumericError
        Objective or gradient produced NaN.
    """
    cfg = cfg or SolverConfig()
    w = np.array(init, dtype=float)
    if not np.all(np.isfinite(w)):
        raise NonFiniteInputError("init must be finite")

    def f(v: np.ndarray) -> float:
        val = float(objective(v))
        if np.isnan(val):
            raise NumericError("objective produced NaN")
        return val

    def df(v: np.ndarray) -> np.ndarray:
        g = np.asarray(gradient(v), dtype=float)
        if np.any(np.isnan(g)):
            raise NumericError("gradient produced NaN")
        return g

    f_w = f(w)
    f_init = f_w
    best_w, best_f = w.copy(), f_w
    w_prev = w.copy()
    inv_step = 1.0 / cfg.step_init
    t_mom = 1.0
    since_improve = 0
    window_count, window_anchor = 0, best_f
    g_w = df(w)

    for _ in range(cfg.max_iters):
        if np.max(np.abs(g_w)) <= cfg.grad_tol:
            return w if f_w <= f_init else best_w
        if allow_stall:
            if (since_improve >= _STALL_WINDOW
                    and np.max(np.abs(g_w)) <= _STALL_GRAD_TOL):
                return best_w
            window_count += 1
            if window_count >= _PLATEAU_WINDOW:
                if best_f > window_anchor - _PLATEAU_RTOL * max(1.0, abs(window_anchor)):
                    return best_w
                window_count, window_anchor = 0, best_f

        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        beta = (t_mom - 1.0) / t_next
        if beta > 0.0:
            y = w + beta * (w - w_prev)
            f_y = f(y)
            if not np.isfinite(f_y):
                t_mom, w_prev = 1.0, w.copy()
                continue
            g_y = df(y)
        else:
            y, g_y, f_y = w, g_w, f_w

        gg = float(g_y @ g_y)
        if gg == 0.0 and beta == 0.0:
            return w if f_w <= f_init else best_w

        # Backtrack on the inverse step until the quadratic majorization
        # f(p) <= f(y) - ||g||^2 / (2 L) holds at p = y - g / L.  Once the
        # required decrease drops below float resolution of f, progress is
        # judged by the gradient norm instead.
        noise = 16.0 * _EPS * max(1.0, abs(f_y))
        cand, f_cand, g_cand = None, np.inf, None
        while inv_step <= _INV_STEP_CAP:
            p = y - g_y / inv_step
            f_p = f(p)
            if np.isfinite(f_p) and f_p <= f_y - 0.5 * gg / inv_step:
                cand, f_cand = p, f_p
                break
            if 0.5 * gg / inv_step < noise and np.isfinite(f_p):
                g_p = df(p)
                if float(g_p @ g_p) < gg:
                    cand, f_cand, g_cand = p, min(f_p, f_w), g_p
                    break
            inv_step *= 2.0

        if cand is None or f_cand > f_w + noise:
            # Either the majorization never held (kink) or momentum moved
            # uphill; drop momentum and retry plain descent from w, which is
            # guaranteed to decrease for smooth objectives.
            if beta > 0.0:
                t_mom, w_prev = 1.0, w.copy()
                continue
            if allow_stall:
                return best_w
            raise ConvergenceError(
                "line search failed to find a decrease (kinked objective?)",
                best=best_w, best_value=best_f)

        g_new = df(cand) if g_cand is None else g_cand
        # Barzilai-Borwein curvature estimate reseeds the step so the solver
        # recovers after kink-induced step collapses; the decrease is capped
        # per iteration so a kink zigzag does not re-climb the whole
        # backtracking ladder every step.
        dw = cand - w
        dg = g_new - g_w
        curv = float(dw @ dg)
        norm2 = float(dw @ dw)
        if curv > 0.0 and norm2 > 0.0:
            inv_step = min(max(curv / norm2, inv_step / 16.0, 1e-12),
                           _INV_STEP_CAP)
        else:
            inv_step = max(inv_step * 0.9, 1e-12)

        w_prev, w, f_w = w, cand, f_cand
        t_mom = t_next
        if f_w > best_f - 1e-14 * max(1.0, abs(best_f)):
            since_improve += 1
        else:
            since_improve = 0
        if f_w < best_f:
            best_w, best_f = w.copy(), f_w
        g_w = g_new

    if allow_stall:
        return best_w
    raise ConvergenceError(
        f"no convergence within {cfg.max_iters} iterations "
        f"(grad inf-norm {np.max(np.abs(g_w)):.3e})",
        best=best_w, best_value=best_f)


def check_gradient(objective, gradient, point, h: float = 1e-5) -> float:
    """Max relative error between analytic and centered finite-difference gradient."""
    if h <= 0:
        raise ValueError("h must be positive")
    p = np.array(point, dtype=float)
    g = np.asarray(gradient(p), dtype=float)
    worst = 0.0
    for i in range(p.size):
        e = np.zeros_like(p)
        e[i] = h
        fd = (float(objective(p + e)) - float(objective(p - e))) / (2.0 * h)
        rel = abs(g[i] - fd) / max(1.0, abs(g[i]))
        worst = max(worst, rel)
    return worst


def project_box(q) -> np.ndarray:
    """Clamp every entry to the unit interval [0, 1]."""
    arr = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInputError("entries must be finite")
    return np.clip(arr, 0.0, 1.0)


@dataclass
class BoxLsqResult:
    """Solution of ``min ||A q - b||^2`` over the unit box."""

    q: np.ndarray
    objective: float
    residual_inf: float
    converged: bool
    iters: int


def box_lsq(A, b, tol: float = 1e-12, max_iters: int = 100000,
            polish_every: int = 40) -> BoxLsqResult:
    """Minimize ``||A q - b||^2`` subject to ``0 <= q <= 1``.

    Projected gradient with exact line search along the projected-arc
    direction, warm-started at the clipped unconstrained solution.  A
    periodic polish step re-solves the least-squares problem on the current
    free set, which gives near-exact termination on desk-scale problems.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[1]
    G = A.T @ A
    c = A.T @ b

    q = np.clip(np.linalg.lstsq(A, b, rcond=None)[0], 0.0, 1.0)
    lipschitz = 2.0 * max(float(np.linalg.eigvalsh(G)[-1]), 1e-30)
    alpha = 1.0 / lipschitz

    def obj(v: np.ndarray) -> float:
        r = A @ v - b
        return float(r @ r)

    def grad(v: np.ndarray) -> np.ndarray:
        return 2.0 * (G @ v - c)

    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        g = grad(q)
        if np.max(np.abs(np.clip(q - g, 0.0, 1.0) - q)) <= tol:
            converged = True
            break

        d = np.clip(q - alpha * g, 0.0, 1.0) - q
        dGd = float(d @ (G @ d))
        if dGd <= 0.0:
            s = 1.0
        else:
            s = min(1.0, max(0.0, -float(g @ d) / (2.0 * dGd)))
        if s == 0.0:
            converged = True
            break
        q = q + s * d

        if it % polish_every == 0:
            g = grad(q)
            at_lo = q <= 1e-12
            at_hi = q >= 1.0 - 1e-12
            free = (~at_lo & ~at_hi) | (at_lo & (g < 0)) | (at_hi & (g > 0))
            if free.any() and free.sum() <= n:
                rhs = b - A[:, ~free] @ q[~free]
                sol = np.linalg.lstsq(A[:, free], rhs, rcond=None)[0]
                cand = q.copy()
                cand[free] = sol
                cand = np.clip(cand, 0.0, 1.0)
                if obj(cand) < obj(q):
                    q = cand

    r = A @ q - b
    return BoxLsqResult(q=q, objective=float(r @ r),
                        residual_inf=float(np.max(np.abs(r))) if r.size else 0.0,
                        converged=converged, iters=it)
