"""Command-line front end.

``fdejacobi converge`` runs a truncation sweep and writes an error table;
``fdejacobi solve`` tabulates ``u_N`` and ``q_N`` for a single ``N``.

Exit status: 0 on success, 2 for configuration errors, 3 for numerical
failures and 4 for I/O errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import ErrorReport, Prediction, convergence_rate, error_report, predicted_rates
from .errors import ConfigError, DomainError, NumericalFailure, PreconditionError
from .problems import ExampleConfig, load_custom
from .quadrature import MAX_ORDER
from .solver import ProblemSpec, SpectralSolution, assemble, read_cache, write_cache

log = logging.getLogger("fdejacobi")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
EMIT_CHOICES = ("csv", "json", "dat")


class StageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ExampleConfig | Path
    N_list: tuple[int, ...]
    n_quad: int | None = None
    grid_size: int = 4096
    out_dir: Path = Path(".")
    emit: frozenset[str] = field(default_factory=lambda: frozenset({"csv", "json"}))
    cache: Path | None = None

    def __post_init__(self) -> None:
        if not self.N_list:
            raise ConfigError("N list is empty")
        if any(n < 1 for n in self.N_list):
            raise ConfigError("truncation levels must be positive")
        if any(b <= a for a, b in zip(self.N_list, self.N_list[1:])):
            raise ConfigError("N list must be strictly increasing")
        if self.n_quad is not None:
            if self.n_quad < 2 * max(self.N_list):
                raise ConfigError(
                    f"--nquad {self.n_quad} is below 2 * max(N) = {2 * max(self.N_list)}"
                )
            if self.n_quad > MAX_ORDER:
                raise ConfigError(f"--nquad may not exceed {MAX_ORDER}")
        if self.grid_size < 1:
            raise ConfigError("--grid must be positive")
        unknown = set(self.emit) - set(EMIT_CHOICES)
        if unknown:
            raise ConfigError(f"unknown --emit format(s): {', '.join(sorted(unknown))}")

    @property
    def quad_order(self) -> int:
        if self.n_quad is not None:
            return self.n_quad
        return min(MAX_ORDER, max(2 * max(self.N_list), 128))

    def build_problem(self) -> ProblemSpec:
        if isinstance(self.problem, ExampleConfig):
            return self.problem.build()
        return load_custom(self.problem)


def parse_N(text: str) -> tuple[int, ...]:
    """``"30,32,34"`` or ``"30..38:2"`` (inclusive; step defaults to 1)."""
    text = text.strip()
    try:
        if ".." in text:
            span, _, step = text.partition(":")
            lo, hi = (int(v) for v in span.split(".."))
            step_n = int(step) if step else 1
            if step_n <= 0:
                raise ConfigError(f"range step must be positive in {text!r}")
            return tuple(range(lo, hi + 1, step_n))
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"cannot parse N list {text!r}") from None


def _read_config_file(path: str) -> dict[str, str]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    values: dict[str, str] = {}
    for lineno, line in enumerate(lines, 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}, line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in body.split("=", 1))
        values[key.lstrip("-").replace("-", "_").lower()] = value
    return values


_CONFIG_KEYS = {
    "example", "problem", "alpha", "r", "beta", "n", "nquad", "grid", "out", "emit", "cache",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdejacobi",
        description="Jacobi spectral solver for two-sided fractional diffusion problems.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    src = common.add_argument_group("problem")
    src.add_argument("--example", choices=("1", "2"), help="built-in example")
    src.add_argument("--problem", help="custom problem file (key = value)")
    src.add_argument("--alpha", type=float, help="order in (1, 2)")
    src.add_argument("--r", type=float, help="left/right weighting in [0, 1]")
    src.add_argument("--beta", type=float, help="give beta instead of r")
    run = common.add_argument_group("run")
    run.add_argument("--N", dest="N", help="truncation levels: '30,32' or '30..38:2'")
    run.add_argument("--nquad", type=int, help="Gauss-Jacobi order for f coefficients")
    run.add_argument("--grid", type=int, help="intervals of the uniform evaluation grid")
    run.add_argument("--out", help="output directory (default: current)")
    run.add_argument("--emit", help="comma list from csv, json, dat")
    run.add_argument("--cache", help="coefficient cache file, read if valid and rewritten")
    run.add_argument("--config", help="file of key = value defaults; flags override it")

    sub.add_parser("converge", parents=[common], help="error table over a sweep of N")
    sub.add_parser("solve", parents=[common], help="tabulate u_N and q_N for one N")
    return parser


def _merge(args: argparse.Namespace) -> dict[str, str | float | int | None]:
    settings: dict[str, str | float | int | None] = {}
    if args.config:
        for key, value in _read_config_file(args.config).items():
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            settings[key] = value
    flag_map = {
        "example": args.example, "problem": args.problem, "alpha": args.alpha,
        "r": args.r, "beta": args.beta, "n": args.N, "nquad": args.nquad,
        "grid": args.grid, "out": args.out, "emit": args.emit, "cache": args.cache,
    }
    # a flag also overrides the config key it is an alternative to
    rivals = {"r": "beta", "beta": "r", "example": "problem", "problem": "example"}
    for a, b in (("r", "beta"), ("example", "problem")):
        if flag_map[a] is not None and flag_map[b] is not None:
            raise ConfigError(f"--{a} and --{b} are mutually exclusive")
    for key, value in flag_map.items():
        if value is not None:
            settings[key] = value
            if key in rivals:
                settings.pop(rivals[key], None)
    return settings


def _float(settings, key) -> float | None:
    value = settings.get(key)
    if value is None:
        return None
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {value!r}") from None


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    s = _merge(args)
    solve = args.command == "solve"
    if ("example" in s) == ("problem" in s):
        raise ConfigError("choose exactly one of --example and --problem")
    r, beta = _float(s, "r"), _float(s, "beta")
    if r is not None and not 0.0 <= r <= 1.0:
        raise ConfigError(f"r must lie in [0, 1], got {r}")
    if "example" in s:
        if str(s["example"]) not in ("1", "2"):
            raise ConfigError(f"--example must be 1 or 2, got {s['example']!r}")
        alpha = _float(s, "alpha")
        if alpha is None:
            raise ConfigError("--alpha is required with --example")
        problem: ExampleConfig | Path = ExampleConfig(f"example{s['example']}", alpha, r, beta)
    else:
        if any(v is not None for v in (s.get("alpha"), r, beta)):
            raise ConfigError("--alpha, --r and --beta come from the problem file with --problem")
        problem = Path(str(s["problem"]))
    if "n" not in s:
        raise ConfigError("--N is required")
    N_list = parse_N(str(s["n"]))
    if solve and len(N_list) != 1:
        raise ConfigError("solve takes a single N")
    default_emit = "csv" if solve else "csv,json"
    emit = frozenset(e.strip() for e in str(s.get("emit", default_emit)).split(",") if e.strip())

    def integer(key, default):
        value = s.get(key, default)
        try:
            return None if value is None else int(value)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {value!r}") from None

    return ExperimentConfig(
        problem=problem,
        N_list=N_list,
        n_quad=integer("nquad", None),
        grid_size=integer("grid", 512 if solve else 4096),
        out_dir=Path(str(s.get("out", "."))),
        emit=emit,
        cache=Path(str(s["cache"])) if "cache" in s else None,
    )


def _solutions(config: ExperimentConfig, problem: ProblemSpec) -> list[SpectralSolution]:
    """Assemble every level in the sweep from one set of ``f`` coefficients.

    The coefficients at the largest ``N`` contain those of every smaller level
    (same rule, same basis), so a single quadrature pass serves the sweep and
    a cache written from it reproduces a cold run bit for bit.
    """
    n_max, n_quad = max(config.N_list), config.quad_order
    f_coeffs = None
    if config.cache is not None and config.cache.exists():
        try:
            cached = read_cache(config.cache)
        except ConfigError as exc:
            log.warning("ignoring cache: %s", exc)
        else:
            r_work = problem.r if problem.r >= 0.5 else 1.0 - problem.r
            if cached.matches(problem.alpha, r_work, problem.name, n_max, n_quad):
                f_coeffs = cached.f_coeffs
                log.info("using cached coefficients from %s", config.cache)
            else:
                log.info("cache %s does not match this run; recomputing", config.cache)
    try:
        top = assemble(problem, n_max, n_quad, f_coeffs=f_coeffs)
    except (NumericalFailure, DomainError) as exc:
        raise StageError(f"assemble N={n_max}", exc) from exc
    if config.cache is not None and f_coeffs is None:
        try:
            write_cache(config.cache, top)
        except OSError as exc:
            raise StageError("write cache", exc) from exc
    sols = []
    for N in config.N_list:
        try:
            sols.append(top if N == n_max else assemble(problem, N, n_quad, f_coeffs=top.f_coeffs))
        except (NumericalFailure, DomainError) as exc:
            raise StageError(f"assemble N={N}", exc) from exc
    return sols


def _sci(value: float) -> str:
    return f"{value:.2E}"


@dataclass(frozen=True)
class ConvergenceResult:
    problem: ProblemSpec
    beta: float
    n_quad: int
    grid_size: int
    reports: tuple[ErrorReport, ...]
    kappas: dict[str, list[float]]
    prediction: Prediction | None


def run_convergence(config: ExperimentConfig) -> ConvergenceResult:
    try:
        problem = config.build_problem()
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    sols = _solutions(config, problem)
    reports = []
    for sol in sols:
        try:
            reports.append(error_report(sol, problem, grid_size=config.grid_size))
        except (NumericalFailure, DomainError, PreconditionError) as exc:
            raise StageError(f"errors N={sol.N}", exc) from exc
        log.info("N=%d done", sol.N)
    Ns = [rep.N for rep in reports]
    kappas: dict[str, list[float]] = {"q": [], "u": [], "u_inf": []}
    if len(Ns) > 1:
        try:
            kappas = {
                "q": convergence_rate([r.err_q for r in reports], Ns),
                "u": convergence_rate([r.err_u for r in reports], Ns),
                "u_inf": convergence_rate([r.err_u_inf for r in reports], Ns),
            }
        except DomainError as exc:
            raise StageError("rates", exc) from exc
    beta = sols[0].beta
    prediction = None
    if problem.singular_power is not None:
        prediction = predicted_rates(problem.alpha, beta, problem.singular_power, problem.singular_power)
    return ConvergenceResult(
        problem, beta, config.quad_order, config.grid_size, tuple(reports), kappas, prediction
    )


def format_table(result: ConvergenceResult) -> str:
    rows = ["N,err_q,kappa_q,err_u,kappa_u,err_uinf,kappa_uinf"]
    for k, rep in enumerate(result.reports):
        if k == 0:
            kq = ku = ki = ""
        else:
            kq, ku, ki = (f"{result.kappas[c][k - 1]:.2f}" for c in ("q", "u", "u_inf"))
        rows.append(
            f"{rep.N},{_sci(rep.err_q)},{kq},{_sci(rep.err_u)},{ku},{_sci(rep.err_u_inf)},{ki}"
        )
    pred = result.prediction
    if pred is None:
        rows.append("Pred.,,,,,,")
    else:
        # the u-rate assumes constant K; flag it otherwise
        star = "*" if result.problem.K_constant is None else ""
        rows.append(f"Pred.,,{pred.q:.2f},,{pred.u:.2f}{star},,{pred.u_inf:.2f}")
    return "\n".join(rows) + "\n"


def format_report(result: ConvergenceResult) -> str:
    p = result.problem
    pred = result.prediction
    doc = {
        "problem": p.name,
        "alpha": p.alpha,
        "r": p.r,
        "beta": result.beta,
        "n_quad": result.n_quad,
        "grid_size": result.grid_size,
        "constant_K": p.K_constant is not None,
        "rows": [
            {"N": rep.N, "err_q": rep.err_q, "err_u": rep.err_u, "err_u_inf": rep.err_u_inf}
            for rep in result.reports
        ],
        "kappa": result.kappas,
        "predicted": None
        if pred is None
        else {
            "j_max": pred.j_max,
            "q": pred.q,
            "u": pred.u,
            "u_inf": pred.u_inf,
            "u_inf_note": "bound is known to be suboptimal; observed rates are higher",
        },
        "determinism": "no randomness; identical inputs give identical output",
        "version": __version__,
    }
    # repr-based float output round-trips every double exactly
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _write_outputs(out_dir: Path, files: dict[str, str]) -> None:
    for name, text in files.items():
        try:
            _write_atomic(out_dir / name, text)
        except OSError as exc:
            raise StageError(f"write {name}", exc) from exc


def solve_table(sol: SpectralSolution, grid_size: int) -> list[tuple[float, float, float | None]]:
    x = np.linspace(0.0, 1.0, grid_size + 1)
    u = sol.u(x)
    q = np.full_like(x, np.nan)
    q[1:-1] = sol.q(x[1:-1])
    return [
        (float(xi), float(ui), None if math.isnan(qi) else float(qi))
        for xi, ui, qi in zip(x, u, q)
    ]


def run_solve(config: ExperimentConfig) -> SpectralSolution:
    try:
        problem = config.build_problem()
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    return _solutions(config, problem)[0]


def _cmd_converge(config: ExperimentConfig) -> None:
    result = run_convergence(config)
    table = format_table(result)
    files = {}
    if "csv" in config.emit:
        files["table.csv"] = table
    if "json" in config.emit:
        files["report.json"] = format_report(result)
    if "dat" in config.emit:
        lines = [f"{r.N} {r.err_q!r} {r.err_u!r} {r.err_u_inf!r}" for r in result.reports]
        files["table.dat"] = "# N err_q err_u err_uinf\n" + "\n".join(lines) + "\n"
    _write_outputs(config.out_dir, files)
    sys.stdout.write(table)


def _cmd_solve(config: ExperimentConfig) -> None:
    sol = run_solve(config)
    rows = solve_table(sol, config.grid_size)
    files = {}
    if "csv" in config.emit:
        body = "\n".join(
            f"{x!r},{u!r}," + ("" if q is None else repr(q)) for x, u, q in rows
        )
        files["solution.csv"] = "x,u_N,q_N\n" + body + "\n"
    if "dat" in config.emit:
        files["solution.dat"] = "# x u_N\n" + "\n".join(f"{x!r} {u!r}" for x, u, _ in rows) + "\n"
    if "json" in config.emit:
        doc = {
            "problem": sol.problem.name, "alpha": sol.alpha, "r": sol.r, "beta": sol.beta,
            "N": sol.N, "n_quad": sol.n_quad, "c_minus2": sol.c_minus2,
            "x": [x for x, _, _ in rows], "u_N": [u for _, u, _ in rows],
        }
        files["solution.json"] = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    _write_outputs(config.out_dir, files)
    mid = sol.u(0.5)
    sys.stdout.write(f"N={sol.N} beta={sol.beta:.6f} c_-2={sol.c_minus2:.6e} u_N(0.5)={mid:.10e}\n")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        config = config_from_args(args)
        if args.command == "converge":
            _cmd_converge(config)
        else:
            _cmd_solve(config)
    except ConfigError as exc:
        print(f"fdejacobi: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        cause = exc.cause
        print(f"fdejacobi: {exc.stage} failed: {cause}", file=sys.stderr)
        if isinstance(cause, OSError):
            return EXIT_IO
        if isinstance(cause, (DomainError, PreconditionError)):
            return EXIT_CONFIG
        return EXIT_NUMERIC
    except NumericalFailure as exc:
        print(f"fdejacobi: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"fdejacobi: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"fdejacobi: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
