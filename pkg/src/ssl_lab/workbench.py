"""Dataset generation, CSV ingestion, and the property-verification suites.

Ingestion appends a constant-1 intercept column, so the bias is a regular
(and regularized) coordinate of ``w`` and every formula stays in plain
``x @ w`` form.  Users who prefer an unregularized bias should pre-center
their data instead.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import CsvFormatError, SaddleQualityError
from .losses import LossSpec, get_loss
from .optimize import SolverConfig
from .responsibility import (
    FeasibilityRule,
    in_constraint_set,
    outside_margin_condition,
    quadratic_improvement_condition,
    recover_q,
)
from .risk import (
    LabeledDataset,
    RiskConfig,
    UnlabeledDataset,
    fit_semi,
    fit_supervised,
    risk_difference,
    semi_risk_grad,
    supervised_grad,
    supervised_risk,
)
from .safe_learner import (
    adversary_max,
    construct_qnew,
    minimax_fit,
    minimax_fit_quadratic,
)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SyntheticSpec:
    """Two-Gaussian-class generator: means at +/- mu, isotropic noise sigma."""

    d: int
    L: int
    U: int
    mu: tuple[float, ...] | float = 1.0
    sigma: float = 1.0
    balance: float = 0.5

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if self.L < 2:
            raise ValueError("L must be at least 2 (one example per class)")
        if self.U < 1:
            raise ValueError("U must be at least 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not 0.0 < self.balance < 1.0:
            raise ValueError("balance must be in (0, 1)")

    def mean_vector(self) -> np.ndarray:
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim == 0:
            mu = np.full(self.d, float(mu))
        if mu.shape != (self.d,):
            raise ValueError(f"mu must be a scalar or a length-{self.d} vector")
        return mu


class Suite(enum.Enum):
    RECOVER = "recover"
    ADVERSARY = "adversary"
    MINIMAX = "minimax"
    CONDITIONS = "conditions"
    ALL = "all"


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one suite run bit-for-bit."""

    loss_name: str = "logistic"
    lam: float = 0.01
    suite: Suite = Suite.ALL
    seed: int = 0
    synthetic: SyntheticSpec | None = None
    data_path: str | None = None
    out_path: str | None = None
    grad_tol: float = 1e-9
    max_iters: int = 10000
    instances: int = 3

    def solver(self) -> SolverConfig:
        return SolverConfig(grad_tol=self.grad_tol, max_iters=self.max_iters)

    def risk_config(self) -> RiskConfig:
        return RiskConfig(lam=self.lam)


def _append_intercept(X: np.ndarray) -> np.ndarray:
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _draw_labels(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    y = np.where(rng.uniform(size=n) < p, 1.0, -1.0)
    # Guarantee both classes are present.
    if np.all(y == y[0]):
        y[0] = -y[0]
    return y


def generate_synthetic(spec: SyntheticSpec,
                       seed: int) -> tuple[LabeledDataset, UnlabeledDataset]:
    """Sample a labeled/unlabeled pair from the two-Gaussian mixture.

    Deterministic given the seed; the intercept column is already appended.
    """
    rng = np.random.default_rng(seed)
    mu = spec.mean_vector()

    y = _draw_labels(rng, spec.L, spec.balance)
    X = y[:, None] * mu[None, :] + spec.sigma * rng.standard_normal(
        (spec.L, spec.d))

    y_u = np.where(rng.uniform(size=spec.U) < spec.balance, 1.0, -1.0)
    X_u = y_u[:, None] * mu[None, :] + spec.sigma * rng.standard_normal(
        (spec.U, spec.d))

    return (LabeledDataset(X=_append_intercept(X), y=y),
            UnlabeledDataset(X=_append_intercept(X_u)))


def generate_outside_margin(
        spec: SyntheticSpec, seed: int, loss: LossSpec, cfg: RiskConfig,
        solver: SolverConfig | None = None,
        decision_range: tuple[float, float] = (1.4, 3.0),
) -> tuple[LabeledDataset, UnlabeledDataset, np.ndarray]:
    """Labeled sample plus unlabeled rows placed strictly outside the margin.

    Fits the supervised solution on the labeled part, then constructs each
    unlabeled feature row so its decision value is a draw of magnitude inside
    ``decision_range``.  Returns (labeled, unlabeled, w_sup).
    """
    rng = np.random.default_rng(seed)
    mu = spec.mean_vector()
    y = _draw_labels(rng, spec.L, spec.balance)
    X = y[:, None] * mu[None, :] + spec.sigma * rng.standard_normal(
        (spec.L, spec.d))
    data = LabeledDataset(X=_append_intercept(X), y=y)

    w_sup = fit_supervised(loss, data, cfg, solver)
    w_feat, w_bias = w_sup[:-1], w_sup[-1]
    norm2 = float(w_feat @ w_feat)
    if norm2 < 1e-12:
        raise ValueError("supervised solution has no feature signal; cannot "
                         "place points relative to its margin")

    lo, hi = decision_range
    targets = rng.uniform(lo, hi, size=spec.U) * rng.choice(
        [-1.0, 1.0], size=spec.U)
    rows = []
    for tau in targets:
        noise = spec.sigma * rng.standard_normal(spec.d)
        noise -= (noise @ w_feat) / norm2 * w_feat
        rows.append((tau - w_bias) / norm2 * w_feat + noise)
    unl = UnlabeledDataset(X=_append_intercept(np.array(rows)))
    return data, unl, w_sup


_LABEL_TOKENS = {"+1": 1.0, "1": 1.0, "-1": -1.0}


def load_csv(path) -> tuple[LabeledDataset, UnlabeledDataset | None]:
    """Read a dataset file: header row, feature columns, label column last.

    Labels "+1"/"-1" mark labeled rows, "?" marks unlabeled ones.  The
    intercept column is appended after parsing.  Malformed content raises
    :class:`CsvFormatError` with the offending line number.
    """
    path = Path(path)
    labeled_rows, labels, unlabeled_rows = [], [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError("file is empty; expected a header row",
                                 line_number=1) from None
        width = len(header)
        if width < 2:
            raise CsvFormatError("expected at least one feature column and "
                                 "a label column", line_number=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise CsvFormatError(
                    f"expected {width} columns, found {len(row)}",
                    line_number=lineno)
            *feats, label = row
            try:
                values = [float(v) for v in feats]
            except ValueError as exc:
                raise CsvFormatError(f"bad feature value: {exc}",
                                     line_number=lineno) from None
            token = label.strip()
            if token == "?":
                unlabeled_rows.append(values)
            elif token in _LABEL_TOKENS:
                labeled_rows.append(values)
                labels.append(_LABEL_TOKENS[token])
            else:
                raise CsvFormatError(
                    f"label must be '+1', '-1' or '?', got {label!r}",
                    line_number=lineno)

    if not labeled_rows:
        raise CsvFormatError("no labeled rows found")
    data = LabeledDataset(X=_append_intercept(np.array(labeled_rows)),
                          y=np.array(labels))
    unl = None
    if unlabeled_rows:
        unl = UnlabeledDataset(X=_append_intercept(np.array(unlabeled_rows)))
    return data, unl


def write_csv(path, data: LabeledDataset,
              unl: UnlabeledDataset | None = None) -> None:
    """Write datasets in the :func:`load_csv` format (drops the intercept).

    Floats are emitted with 17 significant digits so a round trip is
    lossless.
    """
    path = Path(path)
    if not np.all(data.X[:, -1] == 1.0):
        raise ValueError("expected an intercept column (all ones) last")
    width = data.dim - 1
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(width)] + ["label"])
        for row, label in zip(data.X[:, :-1], data.y):
            writer.writerow([f"{v:.17g}" for v in row]
                            + ["+1" if label > 0 else "-1"])
        if unl is not None:
            for row in unl.X[:, :-1]:
                writer.writerow([f"{v:.17g}" for v in row] + ["?"])


@dataclass
class Report:
    """Suite outcome: per-instance records with pass/fail verdicts."""

    config: dict
    records: list[dict] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION
    created_at: str = ""

    def __post_init__(self):
        if not self.created_at:
            self.created_at = _dt.datetime.now(_dt.timezone.utc).isoformat()

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.records)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "created_at": self.created_at,
            "config": self.config,
            "passed": self.passed,
            "records": self.records,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=indent,
                          sort_keys=True)

    def canonical_json(self) -> str:
        """Reproducibility form: identical config+seed gives identical bytes."""
        doc = _jsonable(self.to_dict())
        doc.pop("created_at")
        return json.dumps(doc, indent=None, sort_keys=True,
                          separators=(",", ":"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, enum.Enum):
        return obj.value
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    return obj


def _load_instances(cfg: ExperimentConfig):
    """Yield (instance_id, seed, labeled, unlabeled) tuples for the run."""
    if cfg.data_path is not None:
        data, unl = load_csv(cfg.data_path)
        if unl is None:
            raise CsvFormatError("suite needs at least one unlabeled row")
        yield "csv:0", cfg.seed, data, unl
        return
    spec = cfg.synthetic or SyntheticSpec(d=3, L=24, U=6)
    for i in range(cfg.instances):
        seed = cfg.seed + i
        data, unl = generate_synthetic(spec, seed)
        yield f"synthetic:{i}", seed, data, unl


def _fit_smooth_optimum(loss, data, cfg, solver, unl=None, q=None):
    """Fit and report whether the declared-subderivative gradient vanished.

    Subgradient objectives can stall at a kinked optimum where the
    convention gradient stays bounded away from zero; records note this.
    """
    if unl is None:
        w = fit_supervised(loss, data, cfg, solver)
        g = supervised_grad(loss, w, data, cfg)
    else:
        w = fit_semi(loss, data, unl, q, cfg, solver)
        g = semi_risk_grad(loss, w, data, unl, q, cfg)
    gnorm = float(np.max(np.abs(g)))
    return w, gnorm, gnorm <= 10.0 * solver.grad_tol


def _record(records: list, instance: str, seed: int, prop: str,
            passed: bool, **details) -> None:
    records.append({
        "instance": instance,
        "seed": seed,
        "property": prop,
        "passed": bool(passed),
        "details": _jsonable(details),
    })


def _recover_suite(cfg, loss, records):
    rc, solver = cfg.risk_config(), cfg.solver()
    for instance, seed, data, unl in _load_instances(cfg):
        w_sup, gnorm, smooth_opt = _fit_smooth_optimum(loss, data, rc, solver)
        if loss.decreasing:
            if not smooth_opt:
                _record(records, instance, seed, "supervised_recovery", True,
                        skipped="kinked supervised optimum", sup_grad=gnorm)
                continue
            rec = recover_q(loss, w_sup, unl)
            grad = semi_risk_grad(loss, w_sup, data, unl, rec.q, rc)
            w_semi = fit_semi(loss, data, unl, rec.q, rc, solver, init=w_sup)
            err = float(np.max(np.abs(w_semi - w_sup)))
            ok = (rec.feasible and float(np.max(np.abs(grad))) < 1e-8
                  and err < 1e-6)
            _record(records, instance, seed, "supervised_recovery", ok,
                    q=rec.q, grad_inf=float(np.max(np.abs(grad))),
                    weight_error=err)
        else:
            verdict = in_constraint_set(loss, w_sup, data, unl, rc)
            _record(records, instance, seed, "constraint_set_membership", True,
                    feasible=verdict.feasible, residual=verdict.residual,
                    rule=verdict.rule_applied)


def _adversary_suite(cfg, loss, records):
    rc, solver = cfg.risk_config(), cfg.solver()
    for instance, seed, data, unl in _load_instances(cfg):
        w_sup, gnorm, smooth_opt = _fit_smooth_optimum(loss, data, rc, solver)
        rng = np.random.default_rng(seed + 10_000)
        delta = rng.standard_normal(data.dim)
        delta *= rng.uniform(1e-3, 1.0) / np.linalg.norm(delta)
        w = w_sup + delta

        if unl.n <= 10:
            soft = adversary_max(loss, w, w_sup, data, unl, rc, mode="soft")
            hard = adversary_max(loss, w, w_sup, data, unl, rc, mode="hard")
            _record(records, instance, seed, "vertex_attainment",
                    abs(soft.value - hard.value) <= 1e-12,
                    soft=soft.value, hard=hard.value)

        if loss.decreasing:
            if not smooth_opt:
                _record(records, instance, seed, "worst_case_positive_gap",
                        True, skipped="kinked supervised optimum")
                continue
            qn = construct_qnew(loss, w, w_sup, unl, data=data, cfg=rc)
            d_new = risk_difference(loss, w, w_sup, data, unl, qn.q, rc)
            ok = d_new > 0 and d_new >= qn.supervised_gap - 1e-10
            _record(records, instance, seed, "worst_case_positive_gap", ok,
                    difference=d_new, supervised_gap=qn.supervised_gap)


def _minimax_suite(cfg, loss, records):
    rc, solver = cfg.risk_config(), cfg.solver()
    quad = loss.kind.value == "quadratic"

    if loss.decreasing:
        iterator = _load_instances(cfg)
    else:
        spec = cfg.synthetic or SyntheticSpec(d=3, L=24, U=6)
        iterator = (
            (f"outside_margin:{i}", cfg.seed + i,
             *generate_outside_margin(spec, cfg.seed + i, loss, rc, solver)[:2])
            for i in range(cfg.instances))

    for instance, seed, data, unl in iterator:
        try:
            if quad:
                res = minimax_fit_quadratic(data, unl, rc)
            else:
                res = minimax_fit(loss, data, unl, rc, solver)
        except SaddleQualityError as exc:
            _record(records, instance, seed, "never_worse_ceiling", False,
                    error=str(exc))
            continue

        outer = adversary_max(loss, res.w_semi, res.w_sup, data, unl, rc)
        _record(records, instance, seed, "never_worse_ceiling",
                res.value <= 1e-10 and outer.value <= 1e-8,
                value=res.value, adversary=outer.value,
                duality_gap=res.duality_gap, improved=res.improved)

        if loss.decreasing:
            err = float(np.max(np.abs(res.w_semi - res.w_sup)))
            _record(records, instance, seed, "no_improvement_decreasing",
                    res.value >= -1e-9 and err <= 1e-6,
                    value=res.value, weight_error=err)
        else:
            moved = float(np.linalg.norm(res.w_semi - res.w_sup))
            _record(records, instance, seed, "improvement_outside_margin",
                    res.improved and res.value < -1e-8 and moved > 1e-6,
                    value=res.value, weight_shift=moved)
        if quad:
            _record(records, instance, seed, "sion_equality",
                    res.duality_gap < 1e-6, duality_gap=res.duality_gap)


def _conditions_suite(cfg, loss, records):
    rc, solver = cfg.risk_config(), cfg.solver()
    for instance, seed, data, unl in _load_instances(cfg):
        w_sup, gnorm, smooth_opt = _fit_smooth_optimum(loss, data, rc, solver)
        if loss.decreasing:
            if not smooth_opt:
                _record(records, instance, seed, "always_recoverable", True,
                        skipped="kinked supervised optimum")
                continue
            verdict = in_constraint_set(loss, w_sup, data, unl, rc)
            _record(records, instance, seed, "always_recoverable",
                    verdict.feasible, residual=verdict.residual)
            continue

        if loss.kind.value == "quadratic":
            closed = quadratic_improvement_condition(unl, w_sup)
            general = in_constraint_set(loss, w_sup, data, unl, rc)
            _record(records, instance, seed, "closed_form_agreement",
                    closed.feasible == general.feasible,
                    closed=closed.feasible, general=general.feasible,
                    rule=closed.rule_applied)
            if (closed.rule_applied is FeasibilityRule.QUAD_TALL_NORM
                    and not closed.feasible):
                res = minimax_fit_quadratic(data, unl, rc)
                _record(records, instance, seed, "norm_bound_improvement",
                        res.improved, value=res.value)

        outside = outside_margin_condition(loss, unl, w_sup)
        _record(records, instance, seed, "outside_margin_checked", True,
                outside=outside)


def run_suite(cfg: ExperimentConfig) -> Report:
    """Run the selected verification suite and collect a report.

    Every record names the property it asserts; the report's ``passed`` flag
    is the conjunction of all records.
    """
    loss = get_loss(cfg.loss_name)
    records: list[dict] = []
    suites = {
        Suite.RECOVER: [_recover_suite],
        Suite.ADVERSARY: [_adversary_suite],
        Suite.MINIMAX: [_minimax_suite],
        Suite.CONDITIONS: [_conditions_suite],
        Suite.ALL: [_recover_suite, _adversary_suite, _minimax_suite,
                    _conditions_suite],
    }
    for fn in suites[cfg.suite]:
        fn(cfg, loss, records)

    config_echo = {
        "loss": cfg.loss_name,
        "lambda": cfg.lam,
        "suite": cfg.suite.value,
        "seed": cfg.seed,
        "synthetic": _jsonable(cfg.synthetic) if cfg.synthetic else None,
        "data_path": cfg.data_path,
        "grad_tol": cfg.grad_tol,
        "max_iters": cfg.max_iters,
        "instances": cfg.instances,
    }
    return Report(config=config_echo, records=records)
