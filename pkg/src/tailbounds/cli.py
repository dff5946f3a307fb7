"""Batch front end: load measure/sampler JSON, run the evaluators, emit reports.

Exit codes: 0 all requested checks hold, 1 input or usage error, 2 at least
one mathematical violation.  Rows that cannot be evaluated for a content
reason (a singular covariance behind an inverse bound, an uncentered measure
behind a centered-only bound) become "skipped: ..." rows and do not fail the
process.  All randomness flows from --seed; reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace

import numpy as np

from .bounds import (
    CHEN,
    EUCLIDEAN,
    GRENANDER,
    INEQUALITIES,
    RAO_FORWARD,
    RAO_INVERSE,
    REPORT_FIELDS,
    SCALAR,
    mc_tail,
    report_to_row,
    rows_to_csv,
    rows_to_json,
    sort_rows,
    sweep,
)
from .covop import build, cauchy_estimate, invert, load_operator
from .errors import CenteringError, NotPositiveDefiniteError, TailboundsError
from .hilbert import (
    bound_equivalence,
    hilbert_covariance,
    inverse_norm_pair,
    isometry_pushforward_moment,
    riesz,
    verify_ST_equals_SH,
)
from .measure import (
    load_measure,
    load_sampler,
    quantize,
    quantize_points,
    save_measure,
)
from .space import ROLE_DUAL, ROLE_PRIMAL, conjugate_exponent, p_norm, p_norm_rows

COMMANDS = ("verify", "sweep", "quantize", "mc", "reduce")
FORMATS = ("json", "csv")
DEFAULT_SEED = 0
MAX_GRID_POINTS = 10_000
REDUCE_TOL = 1e-12

SKIP_NOT_PD = "skipped: not positive definite"
SKIP_NOT_CENTERED = "skipped: not centered"
SKIP_NEEDS_P2 = "skipped: stated for p = 2"
SKIP_NEEDS_DIM1 = "skipped: needs dim = 1"

HILBERT_ONLY = (EUCLIDEAN, GRENANDER, CHEN, RAO_FORWARD, RAO_INVERSE)


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 by default, which collides with the
    # exit-code contract (2 means a mathematical violation here)
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass(frozen=True)
class RunConfig:
    """Validated invocation: one command, one input, one epsilon set."""

    command: str
    input_path: str
    epsilons: tuple = ()
    inequality: str = "all"
    fmt: str = "json"
    out: str | None = None
    seed: int = DEFAULT_SEED
    dual_input: str | None = None
    operator_path: str | None = None
    statistic: str | None = None
    draws: int = 10_000
    n_samples: int = 0
    resolution: float = 0.0

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"command must be one of {COMMANDS}, got {self.command!r}")
        if self.fmt not in FORMATS:
            raise UsageError(f"format must be one of {FORMATS}, got {self.fmt!r}")
        if self.seed < 0:
            raise UsageError(f"seed must be a nonnegative integer, got {self.seed}")
        if len(self.epsilons) > MAX_GRID_POINTS:
            raise UsageError(f"grid is limited to {MAX_GRID_POINTS} points")
        for value in self.epsilons:
            if not (value > 0.0 and np.isfinite(value)):
                raise UsageError(f"epsilon values must be positive, got {value}")
        if any(b <= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise UsageError("epsilon grid must be strictly ascending")


def parse_grid(text: str) -> tuple:
    """Parse start:stop:points,log|lin into an ascending tuple of epsilons."""
    head, sep, mode = text.partition(",")
    parts = head.split(":")
    if not sep or mode not in ("log", "lin") or len(parts) != 3:
        raise UsageError(f"grid must look like start:stop:points,log|lin, got {text!r}")
    try:
        start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"grid must look like start:stop:points,log|lin, got {text!r}")
    if points < 1 or points > MAX_GRID_POINTS:
        raise UsageError(f"grid points must be in 1..{MAX_GRID_POINTS}, got {points}")
    if not (0.0 < start <= stop):
        raise UsageError(f"grid needs 0 < start <= stop, got {start}..{stop}")
    if points == 1:
        return (start,)
    if mode == "log":
        values = np.geomspace(start, stop, points)
    else:
        values = np.linspace(start, stop, points)
    return tuple(float(v) for v in values)


def _epsilons_from_args(args) -> tuple:
    if getattr(args, "grid", None):
        return parse_grid(args.grid)
    if getattr(args, "epsilon", None) is not None:
        return (float(args.epsilon),)
    raise UsageError("one of --epsilon or --grid is required")


def _skip_row(inequality: str, epsilon: float, reason: str) -> dict:
    return {
        "inequality": inequality,
        "epsilon": float(epsilon),
        "lhs": None,
        "ci_halfwidth": None,
        "rhs": None,
        "holds": True,
        "slack": None,
        "method": reason,
    }


def _static_skip_reason(inequality: str, measure) -> str | None:
    if inequality == SCALAR and measure.space.dim != 1:
        return SKIP_NEEDS_DIM1
    if inequality in HILBERT_ONLY and measure.space.p != 2.0:
        return SKIP_NEEDS_P2
    return None


def _emit(config: RunConfig, text: str) -> None:
    if config.out:
        with open(config.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _finish_rows(config: RunConfig, rows: list) -> int:
    rows = sort_rows(rows)
    text = rows_to_csv(rows) if config.fmt == "csv" else rows_to_json(rows)
    _emit(config, text)
    violations = [row for row in rows if not row["holds"]]
    for row in violations:
        cells = ", ".join(f"{name}={row[name]}" for name in REPORT_FIELDS)
        sys.stderr.write(f"violation: {cells}\n")
    return 2 if violations else 0


def cmd_verify(config: RunConfig) -> int:
    measure = load_measure(config.input_path)
    if measure.role != ROLE_PRIMAL:
        raise ValueError("verify expects a primal measure as input")
    if config.inequality == "all":
        names = INEQUALITIES
    elif config.inequality in INEQUALITIES:
        names = (config.inequality,)
    else:
        raise UsageError(
            f"--inequality must be 'all' or one of {INEQUALITIES}, got {config.inequality!r}"
        )
    if config.dual_input:
        pstar = load_measure(config.dual_input)
    else:
        # default functional sample: the same atoms read as functionals
        pstar = replace(measure, role=ROLE_DUAL)

    rows: list = []
    for name in names:
        reason = _static_skip_reason(name, measure)
        if reason is not None:
            if config.inequality == "all":
                continue  # "all" means all applicable
            rows.extend(_skip_row(name, eps, reason) for eps in config.epsilons)
            continue
        try:
            reports = sweep(name, measure, config.epsilons, pstar=pstar)
        except NotPositiveDefiniteError:
            rows.extend(_skip_row(name, eps, SKIP_NOT_PD) for eps in config.epsilons)
            continue
        except CenteringError:
            rows.extend(_skip_row(name, eps, SKIP_NOT_CENTERED) for eps in config.epsilons)
            continue
        rows.extend(report_to_row(report) for report in reports)
    return _finish_rows(config, rows)


def cmd_mc(config: RunConfig) -> int:
    sampler = load_sampler(config.input_path)
    operator = None
    if config.statistic in ("quad_S", "mahalanobis_S"):
        if not config.operator_path:
            raise UsageError(f"statistic {config.statistic!r} needs --operator")
        operator = load_operator(config.operator_path)
    rows: list = []
    for epsilon in config.epsilons:
        if config.statistic == "mahalanobis_S":
            try:
                prepared = invert(operator)
            except NotPositiveDefiniteError:
                rows.append(_skip_row("banach_mahalanobis", epsilon, SKIP_NOT_PD))
                continue
        else:
            prepared = operator
        report = mc_tail(
            sampler, config.statistic, prepared, epsilon, config.draws, seed=config.seed
        )
        rows.append(report_to_row(report))
    return _finish_rows(config, rows)


def cmd_quantize(config: RunConfig) -> int:
    sampler = replace(load_sampler(config.input_path), seed=config.seed)
    delta = config.resolution
    n = config.n_samples
    snapped = quantize(sampler, n, delta)

    p = sampler.space.p
    dim = sampler.space.dim
    raw = sampler.draw_block(0, n)
    rng = np.random.default_rng(config.seed)
    functional = rng.standard_normal(dim)
    functional /= p_norm(functional, conjugate_exponent(p))

    def error_stats(resolution: float) -> dict:
        grid = quantize_points(raw, resolution)
        return {
            "resolution": resolution,
            "max_error": float(p_norm_rows(grid - raw, p).max()),
            "error_bound": resolution * dim ** (1.0 / p),
            "shrink_ok": bool(np.all(np.abs(grid) <= np.abs(raw))),
        }

    coarse = quantize(sampler, n, delta, merge=False)
    fine = quantize(sampler, n, delta / 2.0, merge=False)
    lhs, rhs, holds = cauchy_estimate(coarse, fine, functional)
    report = {
        "n_samples": n,
        "quantization": error_stats(delta),
        "halved": error_stats(delta / 2.0),
        "cauchy": {
            "functional": functional.tolist(),
            "lhs": lhs,
            "rhs": rhs,
            "holds": holds,
        },
    }
    report_text = json.dumps(report, indent=2) + "\n"
    if config.out:
        save_measure(snapped, config.out)
        with open(config.out + ".report.json", "w") as fh:
            fh.write(report_text)
    else:
        sys.stdout.write(json.dumps(snapped.to_dict(), indent=2) + "\n")
        sys.stderr.write(report_text)
    ok = (
        report["quantization"]["shrink_ok"]
        and report["halved"]["shrink_ok"]
        and report["quantization"]["max_error"] <= report["quantization"]["error_bound"]
        and report["halved"]["max_error"] <= report["halved"]["error_bound"]
        and holds
    )
    return 0 if ok else 2


def cmd_reduce(config: RunConfig) -> int:
    measure = load_measure(config.input_path)
    transport = riesz(measure.space)  # raises on p != 2, naming the rule
    operator = build(measure)
    matrix_gap = float(
        np.abs(operator.matrix - hilbert_covariance(measure, transport)).max()
    )
    operator_gap = verify_ST_equals_SH(measure, transport, seed=config.seed)
    direct_norm, alternate_norm = inverse_norm_pair(measure, transport)
    norm_scale = max(abs(direct_norm), abs(alternate_norm), 1.0)
    moment_lhs, moment_rhs, moment_equal = isometry_pushforward_moment(measure, transport)

    entries = []
    failures = []
    if matrix_gap > REDUCE_TOL * max(1.0, float(np.abs(operator.matrix).max())):
        failures.append(f"operator matrices differ by {matrix_gap!r}")
    if operator_gap > REDUCE_TOL:
        failures.append(f"quadratic forms differ by {operator_gap!r} relative")
    if abs(direct_norm - alternate_norm) > REDUCE_TOL * norm_scale:
        failures.append("inverse norms differ between routes")
    if not moment_equal:
        failures.append("moment transport identity fails")
    for epsilon in config.epsilons:
        result = bound_equivalence(measure, epsilon)
        entry = {
            "epsilon": epsilon,
            "forward": {
                "banach_lhs": result.forward_banach.lhs,
                "hilbert_lhs": result.forward_hilbert.lhs,
                "banach_rhs": result.forward_banach.rhs,
                "hilbert_rhs": result.forward_hilbert.rhs,
                "rhs_deviation": result.forward_rhs_deviation,
                "lhs_deviation": result.forward_lhs_deviation,
                "boundary": result.forward_boundary,
            },
            "inverse": {
                "banach_lhs": result.inverse_banach.lhs,
                "hilbert_lhs": result.inverse_hilbert.lhs,
                "banach_rhs": result.inverse_banach.rhs,
                "hilbert_rhs": result.inverse_hilbert.rhs,
                "rhs_deviation": result.inverse_rhs_deviation,
                "lhs_deviation": result.inverse_lhs_deviation,
                "boundary": result.inverse_boundary,
            },
        }
        entries.append(entry)
        for side in ("forward", "inverse"):
            if entry[side]["rhs_deviation"] > REDUCE_TOL:
                failures.append(f"{side} RHS deviates at epsilon {epsilon}")
            # on a boundary collision the events differ by construction,
            # so only the RHS equality is asserted there
            if not entry[side]["boundary"] and entry[side]["lhs_deviation"] > REDUCE_TOL:
                failures.append(f"{side} LHS deviates at epsilon {epsilon}")

    document = {
        "dim": measure.space.dim,
        "n_atoms": measure.n_atoms,
        "matrix_max_abs_gap": matrix_gap,
        "operator_identity_max_relative_gap": operator_gap,
        "inverse_norm_direct": direct_norm,
        "inverse_norm_alternate": alternate_norm,
        "moment_transport": {"lhs": moment_lhs, "rhs": moment_rhs, "equal": moment_equal},
        "equivalence": entries,
        "failures": failures,
    }
    _emit(config, json.dumps(document, indent=2) + "\n")
    for failure in failures:
        sys.stderr.write(f"violation: {failure}\n")
    return 2 if failures else 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="tailbounds", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    def add_common(sub, grid=True):
        sub.add_argument("--input", required=True, help="input JSON path")
        sub.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed, default 0")
        sub.add_argument("--format", choices=FORMATS, default="json", dest="fmt")
        sub.add_argument("--out", default=None, help="output path (default stdout)")
        if grid:
            group = sub.add_mutually_exclusive_group()
            group.add_argument("--epsilon", type=float, default=None)
            group.add_argument("--grid", default=None, help="start:stop:points,log|lin")

    verify = commands.add_parser("verify", help="evaluate inequalities on a measure")
    add_common(verify)
    verify.add_argument("--inequality", default="all", help="name or 'all'")
    verify.add_argument("--dual-input", default=None, help="dual measure JSON for banach_dual")

    sweep_cmd = commands.add_parser("sweep", help="same as verify, meant for grids")
    add_common(sweep_cmd)
    sweep_cmd.add_argument("--inequality", default="all", help="name or 'all'")
    sweep_cmd.add_argument("--dual-input", default=None, help="dual measure JSON for banach_dual")

    mc = commands.add_parser("mc", help="Monte Carlo tail frequencies from a sampler")
    add_common(mc)
    mc.add_argument("--statistic", required=True, choices=("norm", "quad_S", "mahalanobis_S"))
    mc.add_argument("--operator", default=None, dest="operator_path", help="operator JSON")
    mc.add_argument("--draws", type=int, default=10_000)

    quant = commands.add_parser("quantize", help="grid-quantize sampler draws to a measure")
    add_common(quant, grid=False)
    quant.add_argument("--samples", type=int, required=True, dest="n_samples")
    quant.add_argument("--resolution", type=float, required=True)

    reduce_cmd = commands.add_parser("reduce", help="check the p = 2 reduction identities")
    add_common(reduce_cmd)
    return parser


def config_from_args(args) -> RunConfig:
    epsilons: tuple = ()
    if args.command != "quantize":
        epsilons = _epsilons_from_args(args)
    return RunConfig(
        command=args.command,
        input_path=args.input,
        epsilons=epsilons,
        inequality=getattr(args, "inequality", "all"),
        fmt=args.fmt,
        out=args.out,
        seed=args.seed,
        dual_input=getattr(args, "dual_input", None),
        operator_path=getattr(args, "operator_path", None),
        statistic=getattr(args, "statistic", None),
        draws=getattr(args, "draws", 10_000),
        n_samples=getattr(args, "n_samples", 0),
        resolution=getattr(args, "resolution", 0.0),
    )


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        config = config_from_args(parser.parse_args(argv))
        handlers = {
            "verify": cmd_verify,
            "sweep": cmd_verify,
            "mc": cmd_mc,
            "quantize": cmd_quantize,
            "reduce": cmd_reduce,
        }
        return handlers[config.command](config)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 1
    except (TailboundsError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
