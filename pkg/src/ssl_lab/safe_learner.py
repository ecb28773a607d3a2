"""Worst-case labeling adversary and the pessimistic minimax learner.

The central quantity is the risk difference

    D(w, q) = R_semi(w, q) - R_semi(w_sup, q),

affine in the responsibilities ``q``.  A classifier is safe when
``max_q D(w, q) <= 0`` over the unit box, which by affinity is attained at a
vertex (a hard labeling).  The pessimistic learner minimizes that worst case;
since D is convex in ``w`` and affine in ``q`` over a compact box, the value
equals the maximin value, which is solved here by supergradient ascent on the
concave inner-minimum value function (closed-form normal equations in the
quadratic specialization).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .exceptions import (
    EnumerationSizeError,
    RankError,
    SaddleQualityError,
    UnsupportedLossError,
)
from .losses import LossSpec, get_loss
from .optimize import SolverConfig, box_lsq
from .risk import (
    LabeledDataset,
    RiskConfig,
    UnlabeledDataset,
    fit_semi,
    fit_supervised,
    risk_difference,
    supervised_risk,
)

_HARD_MODE_LIMIT = 24
IMPROVEMENT_THRESHOLD = -1e-8
GAP_ERROR_THRESHOLD = 1e-4


@dataclass(frozen=True)
class AdversaryResult:
    """Maximizer of the risk difference over labelings."""

    q_star: np.ndarray
    value: float
    attained_at_vertex: bool


@dataclass(frozen=True)
class QNewResult:
    """Labeling that makes the unlabeled part of the risk difference non-negative."""

    q: np.ndarray
    unlabeled_sum: float
    supervised_gap: float | None


@dataclass(frozen=True)
class MinimaxResult:
    """Saddle point of the pessimistic objective."""

    w_semi: np.ndarray
    q_star: np.ndarray
    value: float
    duality_gap: float
    improved: bool
    w_sup: np.ndarray


def _difference_coefficients(loss: LossSpec, w: np.ndarray, w_sup: np.ndarray,
                             unl: UnlabeledDataset) -> tuple[np.ndarray, np.ndarray]:
    """Per-object (A_i, B_i): loss changes at +x and -x between w and w_sup."""
    t_w = unl.X @ w
    t_s = unl.X @ w_sup
    A = loss.value_fn(t_w) - loss.value_fn(t_s)
    B = loss.value_fn(-t_w) - loss.value_fn(-t_s)
    return A, B


def adversary_max(loss: LossSpec, w, w_sup, data: LabeledDataset,
                  unl: UnlabeledDataset, cfg: RiskConfig,
                  mode: Literal["soft", "hard"] = "soft") -> AdversaryResult:
    """Worst-case labeling of the unlabeled data against classifier ``w``.

    ``soft`` exploits affinity of the risk difference in ``q``: each
    coefficient's sign decides its component independently, so the optimum is
    a vertex and there is no size limit.  ``hard`` enumerates all 2^U hard
    labelings (U <= 24) and evaluates the risk difference at each; both modes
    return the same value.
    """
    w = np.asarray(w, dtype=float)
    w_sup = np.asarray(w_sup, dtype=float)

    if mode == "soft":
        A, B = _difference_coefficients(loss, w, w_sup, unl)
        q = np.where(A - B >= 0.0, 1.0, 0.0)
    elif mode == "hard":
        if unl.n > _HARD_MODE_LIMIT:
            raise EnumerationSizeError(
                f"hard mode enumerates 2^U labelings; U={unl.n} exceeds "
                f"the limit of {_HARD_MODE_LIMIT}")
        best_val, best_q = -np.inf, None
        for bits in range(2 ** unl.n):
            vertex = np.array([(bits >> j) & 1 for j in range(unl.n)],
                              dtype=float)
            val = risk_difference(loss, w, w_sup, data, unl, vertex, cfg)
            if val > best_val:
                best_val, best_q = val, vertex
        q = best_q
    else:
        raise ValueError(f"mode must be 'soft' or 'hard', got {mode!r}")

    value = risk_difference(loss, w, w_sup, data, unl, q, cfg)
    return AdversaryResult(q_star=q, value=value, attained_at_vertex=True)


def construct_qnew(loss: LossSpec, w, w_sup, unl: UnlabeledDataset,
                   data: LabeledDataset | None = None,
                   cfg: RiskConfig | None = None) -> QNewResult:
    """Labeling under which ``w`` cannot beat ``w_sup`` (decreasing losses).

    For a decreasing loss, each object satisfies either ``A_i >= 0`` and
    ``B_i <= 0`` or the reverse; picking ``q_i = 1`` in the former case and
    ``0`` in the latter makes the unlabeled sum of the risk difference
    non-negative, so the difference is at least the supervised-risk gap.
    When ``data`` and ``cfg`` are given, that gap is computed and returned.
    """
    if not loss.decreasing:
        raise UnsupportedLossError(
            f"{loss.name} loss is not decreasing; the sign dichotomy behind "
            "this construction fails")
    w = np.asarray(w, dtype=float)
    w_sup = np.asarray(w_sup, dtype=float)
    A, B = _difference_coefficients(loss, w, w_sup, unl)
    q = np.where((A >= 0.0) & (B <= 0.0), 1.0, 0.0)
    unlabeled_sum = float(np.sum(q * A + (1.0 - q) * B))
    gap = None
    if data is not None and cfg is not None:
        gap = (supervised_risk(loss, w, data, cfg)
               - supervised_risk(loss, w_sup, data, cfg))
    return QNewResult(q=q, unlabeled_sum=unlabeled_sum, supervised_gap=gap)


def _assemble_result(loss: LossSpec, w_semi: np.ndarray, q: np.ndarray,
                     w_sup: np.ndarray, data: LabeledDataset,
                     unl: UnlabeledDataset, cfg: RiskConfig,
                     gap_tol: float,
                     solver: SolverConfig | None = None) -> MinimaxResult:
    if not loss.smooth and solver is not None:
        # Kinked inner solves can stall; a cold restart of the final inner
        # minimization keeps the reported value honest.
        w_alt = fit_semi(loss, data, unl, q, cfg, solver, init=w_sup)
        if (risk_difference(loss, w_alt, w_sup, data, unl, q, cfg)
                < risk_difference(loss, w_semi, w_sup, data, unl, q, cfg)):
            w_semi = w_alt
    value = risk_difference(loss, w_semi, w_sup, data, unl, q, cfg)
    outer = adversary_max(loss, w_semi, w_sup, data, unl, cfg, mode="soft")
    gap = abs(outer.value - value)
    result = MinimaxResult(w_semi=w_semi, q_star=q, value=value,
                           duality_gap=gap,
                           improved=value < IMPROVEMENT_THRESHOLD,
                           w_sup=w_sup)
    if gap > gap_tol:
        raise SaddleQualityError(
            f"duality gap {gap:.3e} exceeds the threshold {gap_tol:g}",
            result=result)
    return result


def minimax_fit(loss: LossSpec, data: LabeledDataset, unl: UnlabeledDataset,
                cfg: RiskConfig, solver: SolverConfig | None = None,
                *, ascent_max_iters: int = 2000,
                gap_tol: float = GAP_ERROR_THRESHOLD) -> MinimaxResult:
    """Pessimistic learner: minimize the worst-case risk difference.

    Solved through the equivalent maximin problem: projected supergradient
    ascent over the responsibility box on the concave value function
    ``V(q) = min_w D(w, q)``; each supergradient component is the difference
    of loss asymmetries ``phi(x@w) - phi(-x@w)`` between the inner minimizer
    and ``w_sup``.  Inner minimizations reuse the previous iterate as a warm
    start.  The ascent starts from the recovered responsibilities when they
    exist (already maximin-optimal: the value function attains its ceiling 0
    there), otherwise from the box-constrained least-squares solution of the
    stationarity system, which the ascent then polishes.

    The returned value is never positive beyond solver noise.  The duality
    gap reported is the spread between the soft adversary at ``w_semi`` and
    the maximin value; a gap above ``gap_tol`` raises
    :class:`SaddleQualityError` carrying the offending result.
    """
    from .responsibility import _stationarity_system, recover_q

    if cfg.lam <= 0:
        raise ValueError("minimax fitting requires lam > 0 for a strictly "
                         "convex inner problem")
    solver = solver or SolverConfig()
    w_sup = fit_supervised(loss, data, cfg, solver)
    t_sup = unl.X @ w_sup
    asym_sup = loss.value_fn(t_sup) - loss.value_fn(-t_sup)

    rec = recover_q(loss, w_sup, unl)
    if rec.feasible:
        q = rec.q
    else:
        q = box_lsq(*_stationarity_system(loss, w_sup, unl)).q
    w = fit_semi(loss, data, unl, q, cfg, solver, init=w_sup)
    value = risk_difference(loss, w, w_sup, data, unl, q, cfg)
    q_tol = 1e-9 if loss.smooth else 1e-6
    progress_tol = 1e-9 if loss.smooth else 1e-8
    if not loss.smooth:
        ascent_max_iters = min(ascent_max_iters, 400)
    step = 1.0
    history: list[float] = []

    for _ in range(ascent_max_iters):
        t = unl.X @ w
        g = (loss.value_fn(t) - loss.value_fn(-t)) - asym_sup
        if np.max(np.abs(np.clip(q + g, 0.0, 1.0) - q)) <= q_tol:
            break
        # Inexact inner solves on kinked losses yield endless microscopic
        # gains; a flat 20-step value window means the saddle is resolved.
        if (len(history) >= 20 and
                value - history[-20] < progress_tol * max(1.0, abs(value))):
            break

        s = step
        accepted = False
        while s > 1e-14:
            q_try = np.clip(q + s * g, 0.0, 1.0)
            if np.max(np.abs(q_try - q)) == 0.0:
                break
            w_try = fit_semi(loss, data, unl, q_try, cfg, solver, init=w)
            v_try = risk_difference(loss, w_try, w_sup, data, unl, q_try, cfg)
            if v_try >= value + 1e-4 * float(g @ (q_try - q)):
                q, w, value = q_try, w_try, v_try
                step = min(s * 2.0, 1e6)
                accepted = True
                break
            s *= 0.5
        if not accepted:
            break
        history.append(value)

    return _assemble_result(loss, w, q, w_sup, data, unl, cfg, gap_tol,
                            solver=solver)


def minimax_fit_quadratic(data: LabeledDataset, unl: UnlabeledDataset,
                          cfg: RiskConfig, *,
                          gap_tol: float = GAP_ERROR_THRESHOLD) -> MinimaxResult:
    """Exact pessimistic learner for the quadratic loss.

    The inner minimizer solves weighted normal equations whose Gram matrix
    ``H = X'X + Xu'Xu + lam*I`` does not depend on ``q``, so the maximin
    value function is the negated ``H``-inverse quadratic form of an affine
    residual and the outer problem is a box-constrained least-squares solve
    (projected gradient with exact line search).
    """
    quad = get_loss("quadratic")
    X, y, Xu = data.X, data.y, unl.X
    H = X.T @ X + Xu.T @ Xu + cfg.lam * np.eye(data.dim)
    H_sup = X.T @ X + cfg.lam * np.eye(data.dim)
    try:
        chol = np.linalg.cholesky(H)
        w_sup = np.linalg.solve(H_sup, X.T @ y)
    except np.linalg.LinAlgError as exc:
        raise RankError(
            "normal matrix is singular; provide lam > 0 or full-rank data"
        ) from exc

    # Stationarity residual of the combined objective at w_sup, as an affine
    # function of q, pre-whitened by the Cholesky factor of H.
    G = 2.0 * Xu.T
    v0 = -Xu.T @ (1.0 + Xu @ w_sup)
    A = np.linalg.solve(chol, G)
    b = np.linalg.solve(chol, -v0)

    sol = box_lsq(A, b, tol=1e-14)
    q = sol.q
    w_semi = np.linalg.solve(H, X.T @ y + Xu.T @ (2.0 * q - 1.0))
    return _assemble_result(quad, w_semi, q, w_sup, data, unl, cfg, gap_tol)
