"""Command-line interface: ``ssl-lab <command> [options]``.

Exit codes: 0 on success, 1 when a suite assertion fails, 2 on usage or
data errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .exceptions import CsvFormatError, SaddleQualityError
from .losses import BUILTIN_LOSS_NAMES, get_loss
from .responsibility import (
    in_constraint_set,
    outside_margin_condition,
    quadratic_improvement_condition,
)
from .risk import fit_supervised, supervised_grad, supervised_risk
from .safe_learner import adversary_max, construct_qnew, minimax_fit, \
    minimax_fit_quadratic
from .workbench import (
    ExperimentConfig,
    Suite,
    SyntheticSpec,
    _jsonable,
    generate_synthetic,
    load_csv,
    run_suite,
)


def _parse_synthetic(text: str) -> SyntheticSpec:
    parts = text.split(",")
    if len(parts) != 5:
        raise argparse.ArgumentTypeError(
            "expected d,L,U,mu,sigma (e.g. 3,30,6,1.0,1.0)")
    try:
        d, L, U = int(parts[0]), int(parts[1]), int(parts[2])
        mu, sigma = float(parts[3]), float(parts[4])
        return SyntheticSpec(d=d, L=L, U=U, mu=mu, sigma=sigma)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--loss", choices=BUILTIN_LOSS_NAMES,
                        default="logistic")
    common.add_argument("--lambda", dest="lam", type=float, default=0.01,
                        help="ridge weight (default 0.01)")
    src = common.add_mutually_exclusive_group()
    src.add_argument("--data", metavar="CSV",
                     help="dataset file; '?' labels mark unlabeled rows")
    src.add_argument("--synthetic", type=_parse_synthetic,
                     metavar="d,L,U,mu,sigma",
                     help="two-Gaussian synthetic spec")
    common.add_argument("--seed", type=int, default=0,
                        help="RNG seed (env SSL_LAB_SEED overrides)")
    common.add_argument("--out", metavar="PATH",
                        help="write JSON here instead of stdout")
    common.add_argument("--grad-tol", type=float, default=1e-9)
    common.add_argument("--max-iters", type=int, default=10000)

    parser = argparse.ArgumentParser(
        prog="ssl-lab",
        description="margin-based risks, responsibilities, and the "
                    "worst-case-labeling safe learner")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in [
        ("fit", "fit the supervised classifier"),
        ("recover", "per-object responsibilities freezing the supervised fit"),
        ("adversary", "worst-case labeling against a perturbed classifier"),
        ("minimax", "pessimistic minimax learner"),
        ("conditions", "closed-form improvement conditions"),
        ("suite", "run a verification suite"),
    ]:
        p = sub.add_parser(name, parents=[common], help=blurb)
        if name == "suite":
            p.add_argument("--suite", choices=[s.value for s in Suite],
                           default="all")
            p.add_argument("--instances", type=int, default=3)
    return parser


def _load(args) -> tuple:
    if args.data is not None:
        data, unl = load_csv(args.data)
        if unl is None:
            raise CsvFormatError("need at least one unlabeled row ('?')")
        return data, unl
    spec = args.synthetic or SyntheticSpec(d=3, L=24, U=6)
    return generate_synthetic(spec, args.seed)


def _emit(args, payload: dict) -> None:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_fit(args) -> int:
    loss = get_loss(args.loss)
    cfg, solver = _risk_solver(args)
    data, _ = _load(args)
    w = fit_supervised(loss, data, cfg, solver)
    _emit(args, {
        "loss": args.loss,
        "lambda": args.lam,
        "w_sup": w,
        "risk": supervised_risk(loss, w, data, cfg),
        "grad_inf": float(np.max(np.abs(supervised_grad(loss, w, data, cfg)))),
    })
    return 0


def _cmd_recover(args) -> int:
    from .responsibility import recover_q

    loss = get_loss(args.loss)
    cfg, solver = _risk_solver(args)
    data, unl = _load(args)
    w = fit_supervised(loss, data, cfg, solver)
    rec = recover_q(loss, w, unl)
    verdict = in_constraint_set(loss, w, data, unl, cfg)
    _emit(args, {
        "loss": args.loss,
        "objects": [
            {"index": o.index, "decision_value": o.decision_value,
             "outcome": o.outcome.value, "q": o.q}
            for o in rec.objects
        ],
        "assembled_q": rec.q,
        "verdict": {"feasible": verdict.feasible,
                    "residual": verdict.residual,
                    "rule_applied": verdict.rule_applied.value,
                    "witness_q": verdict.witness_q},
    })
    return 0


def _cmd_adversary(args) -> int:
    loss = get_loss(args.loss)
    cfg, solver = _risk_solver(args)
    data, unl = _load(args)
    w_sup = fit_supervised(loss, data, cfg, solver)
    rng = np.random.default_rng(args.seed + 10_000)
    delta = rng.standard_normal(data.dim)
    delta *= 0.5 / np.linalg.norm(delta)
    w = w_sup + delta
    adv = adversary_max(loss, w, w_sup, data, unl, cfg, mode="soft")
    payload = {
        "loss": args.loss,
        "perturbation_norm": 0.5,
        "q_star": adv.q_star,
        "value": adv.value,
        "attained_at_vertex": adv.attained_at_vertex,
    }
    if loss.decreasing:
        qn = construct_qnew(loss, w, w_sup, unl, data=data, cfg=cfg)
        payload["q_new"] = qn.q
        payload["supervised_gap"] = qn.supervised_gap
    _emit(args, payload)
    return 0


def _cmd_minimax(args) -> int:
    loss = get_loss(args.loss)
    cfg, solver = _risk_solver(args)
    data, unl = _load(args)
    try:
        if loss.kind.value == "quadratic":
            res = minimax_fit_quadratic(data, unl, cfg)
        else:
            res = minimax_fit(loss, data, unl, cfg, solver)
    except SaddleQualityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _emit(args, {
        "loss": args.loss,
        "value": res.value,
        "improved": res.improved,
        "duality_gap": res.duality_gap,
        "w_semi": res.w_semi,
        "q_star": res.q_star,
    })
    return 0


def _cmd_conditions(args) -> int:
    loss = get_loss(args.loss)
    cfg, solver = _risk_solver(args)
    data, unl = _load(args)
    w_sup = fit_supervised(loss, data, cfg, solver)
    payload: dict = {"loss": args.loss}
    if loss.kind.value == "quadratic":
        verdict = quadratic_improvement_condition(unl, w_sup)
        payload["closed_form"] = {
            "feasible": verdict.feasible,
            "residual": verdict.residual,
            "rule_applied": verdict.rule_applied.value,
            "witness_q": verdict.witness_q,
        }
    if not loss.decreasing:
        payload["all_outside_margin"] = outside_margin_condition(
            loss, unl, w_sup)
    general = in_constraint_set(loss, w_sup, data, unl, cfg)
    payload["general"] = {
        "feasible": general.feasible,
        "residual": general.residual,
        "rule_applied": general.rule_applied.value,
    }
    _emit(args, payload)
    return 0


def _cmd_suite(args) -> int:
    cfg = ExperimentConfig(
        loss_name=args.loss, lam=args.lam, suite=Suite(args.suite),
        seed=args.seed, synthetic=args.synthetic, data_path=args.data,
        out_path=args.out, grad_tol=args.grad_tol, max_iters=args.max_iters,
        instances=args.instances)
    report = run_suite(cfg)
    text = report.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0 if report.passed else 1


def _risk_solver(args):
    from .optimize import SolverConfig
    from .risk import RiskConfig

    return (RiskConfig(lam=args.lam),
            SolverConfig(grad_tol=args.grad_tol, max_iters=args.max_iters))


_COMMANDS = {
    "fit": _cmd_fit,
    "recover": _cmd_recover,
    "adversary": _cmd_adversary,
    "minimax": _cmd_minimax,
    "conditions": _cmd_conditions,
    "suite": _cmd_suite,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    env_seed = os.environ.get("SSL_LAB_SEED")
    if env_seed is not None:
        try:
            args.seed = int(env_seed)
        except ValueError:
            print(f"error: SSL_LAB_SEED must be an integer, got {env_seed!r}",
                  file=sys.stderr)
            return 2
    try:
        return _COMMANDS[args.command](args)
    except (CsvFormatError, OSError, ValueError) as exc:
        line = getattr(exc, "line_number", None)
        where = f" (line {line})" if line else ""
        print(f"error: {exc}{where}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
