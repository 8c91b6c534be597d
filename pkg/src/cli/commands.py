"""
命令行入口：radius / apply / oracle / export-sdpa / minimax / diagnose-n.

退出码：0 成功，1 错误，2 仅给出上下界（l1 条件不满足），3 oracle 超出证书值。
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from src.cli.files import (
    CertificateFile,
    ProblemFile,
    dumps_certificate,
    encode_json,
    load_certificate,
    load_problem,
    problem_hash,
    write_certificate,
)
from src.core.dominance import DominanceProblem, n_ellipsoid_diagnostic
from src.core.ell1 import BEST_EFFORT, export_sdpa, l1_optimal_solve, minimax_linear
from src.core.errors import HashMismatch, InputError, IoFailure, RecoveryError
from src.core.linalg import gram
from src.core.oracle import OracleReport, l1_worstcase_vertex, sup_quadratic_two_ellipsoids
from src.core.recovery import ProblemSpec, RecoveryMap, Scenario, restrict_grams, solve_radius
from src.core.scenarios import (
    l2_inaccurate_problem,
    mixed_problem,
    solve_l2_inaccurate,
    solve_mixed,
    solve_two_space,
    two_space_problem,
)
from src.core.settings import RunSettings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BEST_EFFORT = 2
EXIT_UNSOUND = 3

# oracle 超出证书值的容许量
ORACLE_SLACK = 1e-6


def _emit(text: str, settings: RunSettings) -> None:
    if settings.json_out:
        try:
            Path(settings.json_out).write_text(text, encoding="utf-8")
        except OSError as e:
            raise IoFailure(f"cannot write {settings.json_out}: {e}") from e
        logger.info(f"[CLI] wrote {settings.json_out}")
    else:
        sys.stdout.write(text)


def _settings(args: argparse.Namespace, problem: Optional[ProblemFile] = None) -> RunSettings:
    tol = args.tol if args.tol is not None else (problem.tol if problem else None)
    seed = args.seed if args.seed is not None else (problem.seed if problem else None)
    return RunSettings.from_flags(
        tol=tol,
        budget=args.budget,
        seed=seed,
        full_m_table=getattr(args, "full_M_table", False),
        json_out=args.json_out,
    )


def _rows(M: np.ndarray) -> List[List[float]]:
    return np.asarray(M, dtype=float).tolist()


def _optional_list(values: np.ndarray) -> List[Optional[float]]:
    return [None if not np.isfinite(v) else float(v) for v in values]


def build_certificate(problem: ProblemFile, settings: RunSettings) -> CertificateFile:
    spec = problem.to_spec()
    fields: Dict[str, Any] = {"input_hash": problem_hash(problem), "scenario": problem.scenario}

    if problem.scenario == "exact":
        cert = solve_radius(spec, settings.tol)
        p = cert.params
        fields.update(radius_sq=cert.radius_sq, a_sharp=p.a, b_sharp=p.b, tau_sharp=p.tau,
                      psd_residual=p.psd_residual, extremal=cert.extremal, rmap=cert.map)
    elif problem.scenario == "l1":
        solution = l1_optimal_solve(
            spec, settings.tol, full_table=settings.full_m_table, workers=settings.workers
        )
        ws = solution.workspace
        c, d = ws.params[ws.k]
        p = ws.certs[ws.k]
        fields.update(
            a_sharp=p.a, b_sharp=p.b, c_sharp=c, d_sharp=d, tau_sharp=p.tau, psd_residual=p.psd_residual,
            verdict=solution.verdict, k=ws.k, lb=ws.lb.tolist(), condition_margin=ws.margin,
            lower_bound=float(ws.lb[ws.k]), upper_bound=float(np.max(ws.M[:, ws.k])),
            M_column=_optional_list(ws.M[:, ws.k]),
            M_table=[_optional_list(row) for row in ws.M] if settings.full_m_table else None,
            rmap=solution.result.map,
        )
        if solution.verdict != BEST_EFFORT:
            fields["radius_sq"] = solution.result.radius_sq
    else:
        solver = {"two-space": solve_two_space, "l2": solve_l2_inaccurate, "mixed": solve_mixed}[problem.scenario]
        result = solver(spec, settings.tol)
        p = result.params
        fields.update(radius_sq=result.radius_sq, a_sharp=result.a, b_sharp=result.b, c_sharp=result.c,
                      d_sharp=result.d, tau_sharp=p.tau, psd_residual=p.psd_residual,
                      extremal=result.extremal, rmap=result.map)

    rmap: RecoveryMap = fields.pop("rmap")
    extremal = fields.pop("extremal", None)
    return CertificateFile(
        **fields,
        limit_case=rmap.limit_case,
        D=_rows(rmap.D),
        QD=_rows(rmap.QD),
        extremal=None if extremal is None else np.asarray(extremal, dtype=float).tolist(),
    )


def cmd_radius(args: argparse.Namespace) -> int:
    problem = load_problem(args.problem)
    settings = _settings(args, problem)
    cert = build_certificate(problem, settings)
    if args.check:
        report = run_oracle(problem, cert, settings)
        cert = cert.model_copy(update={"oracle": {
            "value": report.best_value, "method": report.method,
            "samples": report.samples, "seed": report.seed,
        }})
    if cert.radius_sq is not None:
        logger.info(f"[CLI] radius^2 = {cert.radius_sq:.17g}")
    if settings.json_out:
        write_certificate(cert, settings.json_out)
    else:
        sys.stdout.write(dumps_certificate(cert))
    return EXIT_BEST_EFFORT if cert.verdict == BEST_EFFORT else EXIT_OK


def cmd_apply(args: argparse.Namespace) -> int:
    settings = _settings(args)
    cert = load_certificate(args.certificate)
    D = np.array(cert.D, dtype=float)
    rmap = RecoveryMap(D=D, QD=np.array(cert.QD, dtype=float), a=0.0, b=0.0)
    f_hat, q_hat = rmap.apply(np.array(args.y, dtype=float))
    _emit(encode_json({"f_hat": f_hat, "Qf_hat": q_hat}), settings)
    return EXIT_OK


def _dominance_for_oracle(problem: ProblemFile) -> DominanceProblem:
    spec = problem.to_spec()
    if problem.scenario == "two-space":
        return restrict_grams(two_space_problem(spec)[0])
    if problem.scenario == "l2":
        return restrict_grams(l2_inaccurate_problem(spec)[0].spec)
    if problem.scenario == "mixed":
        return restrict_grams(mixed_problem(spec)[0].spec)
    return restrict_grams(spec)


def run_oracle(problem: ProblemFile, cert: CertificateFile, settings: RunSettings) -> OracleReport:
    if problem.scenario == "l1":
        return l1_worstcase_vertex(np.array(cert.QD, dtype=float), problem.to_spec(),
                                   settings.budget, settings.seed)
    dp = _dominance_for_oracle(problem)
    return sup_quadratic_two_ellipsoids(dp.A, dp.B, dp.C, dp.basis, settings.budget, settings.seed)


def cmd_oracle(args: argparse.Namespace) -> int:
    problem = load_problem(args.problem)
    settings = _settings(args, problem)
    cert = load_certificate(args.certificate)
    digest = problem_hash(problem)
    if cert.input_hash != digest:
        raise HashMismatch(f"certificate was issued for {cert.input_hash[:12]}, problem hashes to {digest[:12]}")
    certified = cert.value
    if certified is None:
        raise InputError("certificate carries no certified value")
    report = run_oracle(problem, cert, settings)
    gap = certified - report.best_value
    sound = report.best_value <= certified * (1.0 + ORACLE_SLACK) + ORACLE_SLACK * settings.tol
    _emit(encode_json({
        "oracle_value": report.best_value,
        "certificate_value": certified,
        "gap": gap,
        "method": report.method,
        "samples": report.samples,
        "seed": report.seed,
        "sound": sound,
    }), settings)
    if not sound:
        logger.error(f"[CLI] oracle value {report.best_value:.12g} exceeds certificate {certified:.12g}")
        return EXIT_UNSOUND
    return EXIT_OK


def _l1_spec(problem: ProblemFile, command: str) -> ProblemSpec:
    if problem.scenario != "l1":
        raise InputError(f"{command} needs scenario 'l1', got {problem.scenario!r}")
    return problem.to_spec()


def cmd_export_sdpa(args: argparse.Namespace) -> int:
    problem = load_problem(args.problem)
    spec = _l1_spec(problem, "export-sdpa")
    export_sdpa(spec, None, args.out)
    return EXIT_OK


def cmd_minimax(args: argparse.Namespace) -> int:
    problem = load_problem(args.problem)
    settings = _settings(args, problem)
    spec = _l1_spec(problem, "minimax")
    solution = l1_optimal_solve(spec, settings.tol, workers=settings.workers)
    ws = solution.workspace
    result = minimax_linear(spec, ws, iters=args.iters)
    _emit(encode_json({
        "input_hash": problem_hash(problem),
        "value": result.value,
        "lower_bound": float(np.max(ws.lb)),
        "upper_bound": float(np.max(ws.M[:, ws.k])),
        "iterations": result.iterations,
        "converged": result.converged,
        "D": result.D,
    }), settings)
    return EXIT_OK


def cmd_diagnose_n(args: argparse.Namespace) -> int:
    problem = load_problem(args.problem)
    settings = _settings(args, problem)
    spec = problem.to_spec()
    if not isinstance(spec, ProblemSpec) or spec.scenario != Scenario.EXACT:
        raise InputError("diagnose-n works on exact-data problems")
    N = spec.nullspace
    mats = [np.array(F, dtype=float) for F in problem.forms] if problem.forms else [spec.R, spec.S]
    report = n_ellipsoid_diagnostic([gram(F @ N) for F in mats], gram(spec.Q @ N))
    _emit(encode_json({
        "verdict": report.verdict,
        "coeffs": report.coeffs,
        "inf_value": report.inf_value,
        "sup_candidate": report.sup_candidate,
        "deviation": report.deviation,
        "form_values": report.form_values,
        "h": N @ report.h,
    }), settings)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="solver tolerance (default 1e-9)")
    common.add_argument("--budget", type=int, default=None, help="oracle sample budget (default 10000)")
    common.add_argument("--seed", type=int, default=None, help="oracle seed (default 42)")
    common.add_argument("--json-out", type=str, default=None, help="write JSON here instead of stdout")
    common.add_argument("--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="orecover", description="Optimal recovery certificates")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("radius", parents=[common], help="radius of information and optimal map")
    p.add_argument("problem")
    p.add_argument("--full-M-table", dest="full_M_table", action="store_true", help="l1: compute every M entry")
    p.add_argument("--check", action="store_true", help="attach a brute-force oracle report")
    p.set_defaults(func=cmd_radius)

    p = sub.add_parser("apply", parents=[common], help="apply a certificate's map to data")
    p.add_argument("certificate")
    p.add_argument("y", type=float, nargs="*")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("oracle", parents=[common], help="brute-force cross-check of a certificate")
    p.add_argument("problem")
    p.add_argument("certificate")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("export-sdpa", parents=[common], help="write the l1 linear-map SDP (.dat-s)")
    p.add_argument("problem")
    p.add_argument("out")
    p.set_defaults(func=cmd_export_sdpa)

    p = sub.add_parser("minimax", parents=[common], help="l1: minimize the worst case over linear maps")
    p.add_argument("problem")
    p.add_argument("--iters", type=int, default=200)
    p.set_defaults(func=cmd_minimax)

    p = sub.add_parser("diagnose-n", parents=[common], help="S-lemma diagnostic for several ellipsoids")
    p.add_argument("problem")
    p.set_defaults(func=cmd_diagnose_n)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.getLogger().setLevel(logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.func(args)
    except RecoveryError as e:
        logger.error(f"[CLI] {type(e).__name__}: {e}")
        return EXIT_ERROR
    except ValidationError as e:
        logger.error(f"[CLI] invalid flags: {e}")
        return EXIT_ERROR
