"""Responsibilities that freeze the supervised solution, and feasibility tests.

For a decreasing loss every unlabeled point can be assigned a responsibility

    q = phi'(-x @ w_sup) / (phi'(x @ w_sup) + phi'(-x @ w_sup))

that zeroes its contribution to the semi-supervised gradient at ``w_sup``;
minimizing the semi-supervised risk with those responsibilities then returns
the supervised solution.  For losses that also increase the formula can leave
[0, 1], and whether *any* combined responsibility vector freezes ``w_sup``
becomes a box-constrained linear feasibility question, decided here
numerically and, for the quadratic loss, by closed-form conditions.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    InconclusiveFeasibilityError,
    KinkError,
    KinkWarning,
    UnsupportedLossError,
)
from .losses import LossKind, LossSpec
from .optimize import box_lsq
from .risk import LabeledDataset, RiskConfig, UnlabeledDataset, supervised_grad

# Dead band for the feasibility dichotomy: residuals at or below the lower
# threshold certify membership, above the upper threshold certify exclusion,
# anything between raises instead of guessing.
FEASIBLE_RESIDUAL = 1e-8
INFEASIBLE_RESIDUAL = 1e-6

_KINK_EPS = 1e-9
_ZERO_DERIV_EPS = 1e-12


class PerObjectOutcome(enum.Enum):
    UNIQUE = "unique"
    ANY_FEASIBLE = "any_feasible"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class RecoveryObject:
    """Per-object recovery outcome for one unlabeled row."""

    index: int
    decision_value: float
    outcome: PerObjectOutcome
    q: float | None
    kink_flagged: bool = False


@dataclass(frozen=True)
class RecoveryResult:
    """Outcome of the per-object responsibility recovery."""

    objects: tuple[RecoveryObject, ...]
    q: np.ndarray | None

    @property
    def feasible(self) -> bool:
        return self.q is not None


class FeasibilityRule(enum.Enum):
    GENERAL_LP = "general_lp"
    QUAD_WIDE = "quad_d_ge_u"
    QUAD_TALL_NORM = "quad_d_le_u_norm"
    OUTSIDE_MARGIN = "outside_margin"


@dataclass(frozen=True)
class FeasibilityVerdict:
    """Whether some responsibility vector freezes the supervised solution."""

    feasible: bool
    witness_q: np.ndarray | None
    residual: float
    rule_applied: FeasibilityRule


def _near_kink(t: float, kinks: tuple[float, ...]) -> bool:
    return any(abs(t - k) < _KINK_EPS or abs(-t - k) < _KINK_EPS
               for k in kinks)


def _solve_object(loss: LossSpec, t: float) -> tuple[PerObjectOutcome, float | None]:
    d_plus = float(loss.deriv_fn(np.asarray(t)))
    d_minus = float(loss.deriv_fn(np.asarray(-t)))
    den = d_plus + d_minus
    if abs(den) <= _ZERO_DERIV_EPS:
        if abs(d_plus) <= _ZERO_DERIV_EPS and abs(d_minus) <= _ZERO_DERIV_EPS:
            # Both derivatives vanish: any q works; report the canonical 1/2.
            return PerObjectOutcome.ANY_FEASIBLE, 0.5
        return PerObjectOutcome.INFEASIBLE, None
    q = d_minus / den
    if 0.0 <= q <= 1.0:
        return PerObjectOutcome.UNIQUE, q
    return PerObjectOutcome.INFEASIBLE, None


def recover_q(loss: LossSpec, w_sup, unl: UnlabeledDataset) -> RecoveryResult:
    """Per-object responsibilities that keep ``w_sup`` stationary.

    Returns a :class:`RecoveryResult` whose assembled ``q`` exists exactly
    when every object is feasible.  For decreasing losses this is always the
    case.  Decision values landing on a kink of a built-in loss are resolved
    with the declared subderivative convention and flagged with a
    :class:`KinkWarning`; for custom losses an unstable kink raises
    :class:`KinkError`.
    """
    w_sup = np.asarray(w_sup, dtype=float)
    decisions = unl.X @ w_sup
    objects: list[RecoveryObject] = []
    values: list[float] = []
    all_ok = True

    for i, t in enumerate(map(float, decisions)):
        flagged = _near_kink(t, loss.kinks)
        if flagged:
            if loss.kind is LossKind.CUSTOM:
                h = 1e-6
                lo = _solve_object(loss, t - h)
                hi = _solve_object(loss, t + h)
                mid = _solve_object(loss, t)
                if not (lo == hi == mid):
                    raise KinkError(
                        f"object {i}: decision value {t:.12g} sits on a kink "
                        "with no stable one-sided responsibility")
            else:
                warnings.warn(
                    f"object {i}: decision value {t:.12g} is on a kink of the "
                    f"{loss.name} loss; using the declared subderivative",
                    KinkWarning, stacklevel=2)
        outcome, q = _solve_object(loss, t)
        objects.append(RecoveryObject(index=i, decision_value=t,
                                      outcome=outcome, q=q,
                                      kink_flagged=flagged))
        if q is None:
            all_ok = False
        else:
            values.append(q)

    assembled = np.array(values) if all_ok else None
    return RecoveryResult(objects=tuple(objects), q=assembled)


def _stationarity_system(loss: LossSpec, w_sup: np.ndarray,
                         unl: UnlabeledDataset) -> tuple[np.ndarray, np.ndarray]:
    """Matrix A and vector b with A q - b the unlabeled gradient at w_sup."""
    t = unl.X @ w_sup
    d_plus = loss.deriv_fn(t)
    d_minus = loss.deriv_fn(-t)
    A = unl.X.T * (d_plus + d_minus)
    b = unl.X.T @ d_minus
    return A, b


def _box_feasibility(loss: LossSpec, w_sup: np.ndarray,
                     unl: UnlabeledDataset,
                     rule: FeasibilityRule) -> FeasibilityVerdict:
    A, b = _stationarity_system(loss, w_sup, unl)
    sol = box_lsq(A, b)
    residual = sol.residual_inf
    if residual <= FEASIBLE_RESIDUAL:
        return FeasibilityVerdict(True, sol.q, residual, rule)
    if residual > INFEASIBLE_RESIDUAL:
        return FeasibilityVerdict(False, None, residual, rule)
    raise InconclusiveFeasibilityError(
        f"stationarity residual {residual:.3e} falls between the feasible "
        f"({FEASIBLE_RESIDUAL:g}) and infeasible ({INFEASIBLE_RESIDUAL:g}) "
        "thresholds", residual=residual)


def in_constraint_set(loss: LossSpec, w_sup, data: LabeledDataset,
                      unl: UnlabeledDataset,
                      cfg: RiskConfig) -> FeasibilityVerdict:
    """Decide whether some ``q`` in the unit box freezes ``w_sup``.

    ``w_sup`` must be the fitted supervised solution; its supervised gradient
    is checked before the unlabeled stationarity system is examined.  For
    decreasing losses the per-object recovery already provides a witness and
    is tried first.
    """
    w_sup = np.asarray(w_sup, dtype=float)
    sup_norm = float(np.max(np.abs(supervised_grad(loss, w_sup, data, cfg))))
    if sup_norm > 1e-6:
        raise ValueError(
            f"w_sup is not a supervised stationary point "
            f"(gradient inf-norm {sup_norm:.3e})")

    rec = recover_q(loss, w_sup, unl)
    if rec.feasible:
        A, b = _stationarity_system(loss, w_sup, unl)
        residual = float(np.max(np.abs(A @ rec.q - b)))
        if residual <= FEASIBLE_RESIDUAL:
            return FeasibilityVerdict(True, rec.q, residual,
                                      FeasibilityRule.GENERAL_LP)

    return _box_feasibility(loss, w_sup, unl, FeasibilityRule.GENERAL_LP)


def quadratic_improvement_condition(unl: UnlabeledDataset,
                                    w_sup) -> FeasibilityVerdict:
    """Closed-form feasibility conditions for the quadratic loss.

    With ``d >= U`` and full-row-rank unlabeled data the stationarity system
    has the unique candidate ``q = (1 + X_u @ w_sup) / 2``, so membership
    reduces to that vector lying in the unit box.  With ``d <= U`` a decision
    vector of Euclidean norm above ``sqrt(U)`` certifies exclusion; below
    that, the norm test is silent and the general box solve decides.
    """
    from .losses import get_loss

    w_sup = np.asarray(w_sup, dtype=float)
    quad = get_loss("quadratic")
    t = unl.X @ w_sup
    U, d = unl.n, unl.dim

    if d >= U and np.linalg.matrix_rank(unl.X) == U:
        q_cand = 0.5 * (1.0 + t)
        if np.all(q_cand >= -1e-12) and np.all(q_cand <= 1.0 + 1e-12):
            q_cand = np.clip(q_cand, 0.0, 1.0)
            A, b = _stationarity_system(quad, w_sup, unl)
            residual = float(np.max(np.abs(A @ q_cand - b)))
            return FeasibilityVerdict(True, q_cand, residual,
                                      FeasibilityRule.QUAD_WIDE)
        sol = box_lsq(*_stationarity_system(quad, w_sup, unl))
        return FeasibilityVerdict(False, None, sol.residual_inf,
                                  FeasibilityRule.QUAD_WIDE)

    if d <= U and float(np.linalg.norm(t)) > np.sqrt(U):
        sol = box_lsq(*_stationarity_system(quad, w_sup, unl))
        return FeasibilityVerdict(False, None, sol.residual_inf,
                                  FeasibilityRule.QUAD_TALL_NORM)

    return _box_feasibility(quad, w_sup, unl, FeasibilityRule.GENERAL_LP)


def _has_outside_margin_signature(loss: LossSpec) -> bool:
    if loss.kind in (LossKind.QUADRATIC, LossKind.ABSOLUTE):
        return True
    if loss.kind is not LossKind.CUSTOM:
        return False
    # Sampled signature check: non-positive derivative up to margin 1,
    # strictly positive beyond it.
    below = np.linspace(-8.0, 1.0, 64)
    above = np.linspace(1.0 + 1e-6, 8.0, 64)
    return (np.all(loss.deriv_fn(below) <= 1e-12)
            and np.all(loss.deriv_fn(above) > 0.0))


def outside_margin_condition(loss: LossSpec, unl: UnlabeledDataset,
                             w_sup) -> bool:
    """True iff every unlabeled decision value has magnitude above 1.

    Only meaningful for losses whose derivative is non-positive up to margin
    1 and strictly positive beyond (quadratic, absolute); for those, a true
    result guarantees the safe semi-supervised solution moves away from
    ``w_sup``.
    """
    if not _has_outside_margin_signature(loss):
        raise UnsupportedLossError(
            f"{loss.name} loss does not increase beyond the margin; the "
            "outside-margin test does not apply")
    w_sup = np.asarray(w_sup, dtype=float)
    return bool(np.all(np.abs(unl.X @ w_sup) > 1.0))
