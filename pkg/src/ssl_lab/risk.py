"""Supervised and semi-supervised margin risks, their gradients, and fits.

The supervised risk is ``sum_i phi(y_i x_i @ w) + lam * ||w||^2``.  The
semi-supervised risk adds, for every unlabeled row, a responsibility-weighted
pair ``q * phi(x @ w) + (1 - q) * phi(-x @ w)``.  The regularizer is fixed to
the squared Euclidean norm so regularized objectives are strictly convex.

Datasets are plain matrices; they are treated as immutable after
construction.  Intercept handling happens at ingestion (see workbench): a
constant-1 column is appended there so the bias lives inside ``w`` and is
regularized like any other coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import FeasibilityError
from .losses import LossKind, LossSpec
from .optimize import SolverConfig, minimize_convex


@dataclass(frozen=True)
class LabeledDataset:
    """Design matrix ``X`` (L x d) with labels ``y`` in {-1, +1}^L."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError("X must be a matrix with at least one row")
        if y.shape != (X.shape[0],):
            raise ValueError("y must have one entry per row of X")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains NaN or Inf")
        if not np.all(np.abs(y) == 1.0):
            raise ValueError("labels must be exactly -1 or +1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class UnlabeledDataset:
    """Design matrix ``X`` (U x d) of unlabeled rows."""

    X: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError("X must be a matrix with at least one row")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains NaN or Inf")
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class RiskConfig:
    """Regularization weight; the regularizer itself is ||w||^2."""

    lam: float = 0.01

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be non-negative")


def as_responsibilities(q, n: int) -> np.ndarray:
    """Validate a responsibility vector: length ``n``, entries in [0, 1]."""
    arr = np.asarray(q, dtype=float)
    if arr.shape != (n,):
        raise FeasibilityError(f"responsibilities must have shape ({n},)")
    if not np.all(np.isfinite(arr)):
        raise FeasibilityError("responsibilities contain NaN or Inf")
    if arr.min(initial=0.0) < 0.0 or arr.max(initial=0.0) > 1.0:
        raise FeasibilityError("responsibilities must lie in [0, 1]")
    return arr


def _check_dim(w: np.ndarray, dim: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (dim,):
        raise ValueError(f"weights must have shape ({dim},)")
    return w


def supervised_risk(loss: LossSpec, w, data: LabeledDataset,
                    cfg: RiskConfig) -> float:
    """Labeled risk ``sum_i phi(y_i x_i @ w) + lam * ||w||^2``."""
    w = _check_dim(w, data.dim)
    margins = data.y * (data.X @ w)
    return float(np.sum(loss.value_fn(margins)) + cfg.lam * (w @ w))


def supervised_grad(loss: LossSpec, w, data: LabeledDataset,
                    cfg: RiskConfig) -> np.ndarray:
    """Gradient of the labeled risk at ``w`` (declared subderivatives at kinks)."""
    w = _check_dim(w, data.dim)
    margins = data.y * (data.X @ w)
    coeff = data.y * loss.deriv_fn(margins)
    return data.X.T @ coeff + 2.0 * cfg.lam * w


def semi_risk(loss: LossSpec, w, data: LabeledDataset,
              unl: UnlabeledDataset | None, q, cfg: RiskConfig) -> float:
    """Semi-supervised risk: labeled risk plus the responsibility-weighted
    unlabeled term.  ``unl=None`` degenerates to the supervised risk."""
    if unl is None:
        return supervised_risk(loss, w, data, cfg)
    if unl.dim != data.dim:
        raise ValueError("labeled and unlabeled dimensionalities differ")
    q = as_responsibilities(q, unl.n)
    w = _check_dim(w, data.dim)
    t = unl.X @ w
    # Masked products keep 0 * inf out when a loss value overflows at a
    # fully-assigned object (q exactly 0 or 1).
    unlabeled = np.sum(
        np.where(q > 0.0, q * loss.value_fn(t), 0.0)
        + np.where(q < 1.0, (1.0 - q) * loss.value_fn(-t), 0.0))
    return supervised_risk(loss, w, data, cfg) + float(unlabeled)


def semi_risk_grad(loss: LossSpec, w, data: LabeledDataset,
                   unl: UnlabeledDataset | None, q,
                   cfg: RiskConfig) -> np.ndarray:
    """Analytic gradient of :func:`semi_risk` with respect to ``w``."""
    if unl is None:
        return supervised_grad(loss, w, data, cfg)
    if unl.dim != data.dim:
        raise ValueError("labeled and unlabeled dimensionalities differ")
    q = as_responsibilities(q, unl.n)
    w = _check_dim(w, data.dim)
    t = unl.X @ w
    coeff = q * loss.deriv_fn(t) - (1.0 - q) * loss.deriv_fn(-t)
    return supervised_grad(loss, w, data, cfg) + unl.X.T @ coeff


def _require_unique_minimizer(loss: LossSpec, cfg: RiskConfig) -> None:
    # Hinge and absolute losses are not strictly convex on their own; a
    # positive ridge weight is what makes the minimizer unique.
    if cfg.lam <= 0 and loss.kind in (LossKind.HINGE, LossKind.ABSOLUTE):
        raise ValueError(
            f"{loss.name} loss needs lam > 0 for a unique minimizer")


def fit_supervised(loss: LossSpec, data: LabeledDataset, cfg: RiskConfig,
                   solver: SolverConfig | None = None,
                   init=None) -> np.ndarray:
    """Minimize the supervised risk; returns the stationary weight vector."""
    _require_unique_minimizer(loss, cfg)
    w0 = np.zeros(data.dim) if init is None else np.asarray(init, dtype=float)
    return minimize_convex(
        lambda w: supervised_risk(loss, w, data, cfg),
        lambda w: supervised_grad(loss, w, data, cfg),
        w0, solver or SolverConfig(), allow_stall=not loss.smooth)


def fit_semi(loss: LossSpec, data: LabeledDataset,
             unl: UnlabeledDataset | None, q, cfg: RiskConfig,
             solver: SolverConfig | None = None, init=None) -> np.ndarray:
    """Minimize the semi-supervised risk for fixed responsibilities ``q``."""
    if unl is None:
        return fit_supervised(loss, data, cfg, solver, init=init)
    _require_unique_minimizer(loss, cfg)
    as_responsibilities(q, unl.n)
    w0 = np.zeros(data.dim) if init is None else np.asarray(init, dtype=float)
    return minimize_convex(
        lambda w: semi_risk(loss, w, data, unl, q, cfg),
        lambda w: semi_risk_grad(loss, w, data, unl, q, cfg),
        w0, solver or SolverConfig(), allow_stall=not loss.smooth)


def risk_difference(loss: LossSpec, w, w_sup, data: LabeledDataset,
                    unl: UnlabeledDataset | None, q, cfg: RiskConfig) -> float:
    """Semi-supervised risk of ``w`` minus that of ``w_sup`` (affine in ``q``)."""
    return (semi_risk(loss, w, data, unl, q, cfg)
            - semi_risk(loss, w_sup, data, unl, q, cfg))


def concat_hard_labels(data: LabeledDataset, unl: UnlabeledDataset,
                       q) -> LabeledDataset:
    """Stack labeled rows with unlabeled rows labeled by a hard ``q``.

    Entries of ``q`` must be exactly 0 or 1; responsibility 1 maps to label
    +1.  Useful for checking that a vertex ``q`` reproduces the supervised
    risk on the fully-labeled concatenation.
    """
    q = as_responsibilities(q, unl.n)
    if not np.all((q == 0.0) | (q == 1.0)):
        raise FeasibilityError("q must be a hard labeling (entries 0 or 1)")
    X = np.vstack([data.X, unl.X])
    y = np.concatenate([data.y, 2.0 * q - 1.0])
    return LabeledDataset(X=X, y=y)
