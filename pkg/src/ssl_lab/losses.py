"""Margin-based surrogate losses with chosen subderivatives.

Each loss is a convex function ``phi`` of the margin ``a = y * x @ w``.  A
:class:`LossSpec` bundles the value function, a deterministic choice of
subderivative, and monotonicity metadata used by the feasibility and safety
machinery.  Specs are immutable and safe to share between threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import LossValidationError, NonFiniteInputError


class LossKind(enum.Enum):
    LOGISTIC = "logistic"
    HINGE = "hinge"
    EXPONENTIAL = "exponential"
    QUADRATIC = "quadratic"
    ABSOLUTE = "absolute"
    CUSTOM = "custom"


@dataclass(frozen=True)
class LossSpec:
    """A convex margin loss with a deterministic subderivative choice.

    Attributes
    ----------
    kind : LossKind
        Which built-in this is, or CUSTOM.
    name : str
        Human-readable name, also the CLI selector for built-ins.
    value_fn, deriv_fn : callable
        Vectorized maps from margin to loss value / chosen subderivative.
    decreasing : bool
        True iff ``phi(a) >= phi(b)`` whenever ``a <= b``.
    smooth : bool
        False for losses with kinks; solvers relax their convergence test.
    kinks : tuple of float
        Margin values where ``phi`` is not differentiable.
    """

    kind: LossKind
    name: str
    value_fn: Callable[[np.ndarray], np.ndarray]
    deriv_fn: Callable[[np.ndarray], np.ndarray]
    decreasing: bool
    smooth: bool = True
    kinks: tuple[float, ...] = field(default=())


def _check_finite(a) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInputError("margin values must be finite")
    return arr


def eval_loss(loss: LossSpec, a) -> np.ndarray | float:
    """Evaluate ``phi`` at margin ``a`` (scalar or array)."""
    arr = _check_finite(a)
    out = loss.value_fn(arr)
    return float(out) if np.isscalar(a) or arr.ndim == 0 else out


def eval_deriv(loss: LossSpec, a) -> np.ndarray | float:
    """Evaluate the chosen subderivative of ``phi`` at margin ``a``."""
    arr = _check_finite(a)
    out = loss.deriv_fn(arr)
    return float(out) if np.isscalar(a) or arr.ndim == 0 else out


def _sigmoid(a: np.ndarray) -> np.ndarray:
    # Split the two tails so neither branch overflows.
    out = np.empty_like(a, dtype=float)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ez = np.exp(a[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _logistic_value(a: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, -a)


def _logistic_deriv(a: np.ndarray) -> np.ndarray:
    return -_sigmoid(-np.asarray(a, dtype=float))


def _hinge_value(a: np.ndarray) -> np.ndarray:
    return np.maximum(1.0 - a, 0.0)


def _hinge_deriv(a: np.ndarray) -> np.ndarray:
    # Convention at the kink a=1: return 0 (the point exerts no pull).
    return np.where(a < 1.0, -1.0, 0.0)


def _exponential_value(a: np.ndarray) -> np.ndarray:
    return np.exp(-a)


def _exponential_deriv(a: np.ndarray) -> np.ndarray:
    return -np.exp(-a)


def _quadratic_value(a: np.ndarray) -> np.ndarray:
    return (1.0 - a) ** 2


def _quadratic_deriv(a: np.ndarray) -> np.ndarray:
    return -2.0 * (1.0 - a)


def _absolute_value(a: np.ndarray) -> np.ndarray:
    return np.abs(1.0 - a)


def _absolute_deriv(a: np.ndarray) -> np.ndarray:
    # Convention at the kink a=1: return 0.
    return np.where(a < 1.0, -1.0, np.where(a > 1.0, 1.0, 0.0))


def _make_builtin(kind: LossKind) -> LossSpec:
    if kind is LossKind.LOGISTIC:
        # Unscaled log(1 + exp(-a)); any positive prefactor cancels in the
        # responsibility formula, so the plain form is used.
        return LossSpec(kind, "logistic", _logistic_value, _logistic_deriv,
                        decreasing=True, smooth=True)
    if kind is LossKind.HINGE:
        return LossSpec(kind, "hinge", _hinge_value, _hinge_deriv,
                        decreasing=True, smooth=False, kinks=(1.0,))
    if kind is LossKind.EXPONENTIAL:
        return LossSpec(kind, "exponential", _exponential_value,
                        _exponential_deriv, decreasing=True, smooth=True)
    if kind is LossKind.QUADRATIC:
        return LossSpec(kind, "quadratic", _quadratic_value, _quadratic_deriv,
                        decreasing=False, smooth=True)
    if kind is LossKind.ABSOLUTE:
        return LossSpec(kind, "absolute", _absolute_value, _absolute_deriv,
                        decreasing=False, smooth=False, kinks=(1.0,))
    raise ValueError(f"no built-in loss for {kind}")


_BUILTINS = {
    "logistic": _make_builtin(LossKind.LOGISTIC),
    "hinge": _make_builtin(LossKind.HINGE),
    "exponential": _make_builtin(LossKind.EXPONENTIAL),
    "quadratic": _make_builtin(LossKind.QUADRATIC),
    "absolute": _make_builtin(LossKind.ABSOLUTE),
}

BUILTIN_LOSS_NAMES = tuple(_BUILTINS)


def get_loss(name: str) -> LossSpec:
    """Look up a built-in loss by name ("logistic" | "hinge" | ...)."""
    try:
        return _BUILTINS[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown loss {name!r}; expected one of {', '.join(_BUILTINS)}"
        ) from None


def validate_loss(loss: LossSpec, n_samples: int = 400, span: float = 6.0,
                  seed: int = 0) -> None:
    """Sampling-based sanity checks for a loss spec.

    Verifies convexity on random triples, the declared ``decreasing`` flag,
    and agreement of the subderivative with centered finite differences away
    from declared kinks.  Raises :class:`LossValidationError` on failure.
    """
    rng = np.random.default_rng(seed)
    a = rng.uniform(-span, span, size=n_samples)
    b = rng.uniform(-span, span, size=n_samples)
    t = rng.uniform(0.0, 1.0, size=n_samples)

    mid = loss.value_fn(t * a + (1.0 - t) * b)
    chord = t * loss.value_fn(a) + (1.0 - t) * loss.value_fn(b)
    scale = np.maximum(1.0, np.abs(chord))
    if np.any(mid > chord + 1e-9 * scale):
        raise LossValidationError(f"loss {loss.name!r} failed convexity sampling")

    lo, hi = np.minimum(a, b), np.maximum(a, b)
    diffs = loss.value_fn(lo) - loss.value_fn(hi)
    if loss.decreasing:
        if np.any(diffs < -1e-12 * scale):
            raise LossValidationError(
                f"loss {loss.name!r} declared decreasing but increases somewhere")
        if np.any(loss.deriv_fn(a) > 1e-12):
            raise LossValidationError(
                f"loss {loss.name!r} declared decreasing but has positive derivative")
    else:
        if not np.any(diffs < -1e-9):
            raise LossValidationError(
                f"loss {loss.name!r} declared non-decreasing but no increase was found")

    keep = np.ones_like(a, dtype=bool)
    for k in loss.kinks:
        keep &= np.abs(a - k) > 1e-3
    pts = a[keep]
    h = 1e-5
    fd = (loss.value_fn(pts + h) - loss.value_fn(pts - h)) / (2.0 * h)
    an = loss.deriv_fn(pts)
    rel = np.abs(an - fd) / np.maximum(1.0, np.abs(an))
    if np.any(rel > 1e-5):
        raise LossValidationError(
            f"loss {loss.name!r}: derivative disagrees with finite differences "
            f"(max rel err {rel.max():.3e})")


def custom_loss(value_fn, deriv_fn, decreasing: bool, *, name: str = "custom",
                smooth: bool = True, kinks: tuple[float, ...] = (),
                validate: bool = True) -> LossSpec:
    """Wrap a user-supplied convex margin loss.

    The declared ``decreasing`` flag is validated by sampling, not trusted.
    """
    spec = LossSpec(LossKind.CUSTOM, name, value_fn, deriv_fn,
                    decreasing=decreasing, smooth=smooth, kinks=tuple(kinks))
    if validate:
        validate_loss(spec)
    return spec
