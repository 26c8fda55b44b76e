"""Benchmark problems with known solutions, and user-defined problem files."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Literal

import numpy as np

from .errors import ConfigError, DomainError, ParseError
from .solver import PowerSum, ProblemSpec, beta_from_r, r_from_beta
from .specfun import hyp2f1

__all__ = [
    "ExampleConfig",
    "delta",
    "example1",
    "example2",
    "parse_expression",
    "load_custom",
]


def _resolve_r(alpha: float, r: float | None, beta: float | None) -> float:
    if (r is None) == (beta is None):
        raise ConfigError("exactly one of r and beta must be given")
    if r is None:
        return r_from_beta(alpha, beta)
    return r


def delta(alpha: float) -> float:
    """Normalising cubic ``alpha^3 - 9 alpha^2 + 26 alpha - 24`` of the first example."""
    return alpha**3 - 9 * alpha**2 + 26 * alpha - 24


def example1(alpha: float, r: float | None = None, *, beta: float | None = None) -> ProblemSpec:
    """Constant diffusivity, flux ``q = -6x + 6x^2``.

    The exact ``u`` carries the kernel correction
    ``x^beta 2F1(1 - alpha + beta, beta; beta + 1; x)``, normalised so that
    ``u(1) = 0``.
    """
    r = _resolve_r(alpha, r, beta)
    b = beta_from_r(alpha, r) if r < 1.0 else alpha - 1.0
    scale = 6.0 / (math.gamma(2.0 - alpha) * delta(alpha))
    lin, const = 2 * alpha - 8, (alpha - 3) * (alpha - 4)
    f = PowerSum(
        (
            (r * scale * lin, 3.0 - alpha, 0.0),
            (r * scale * const, 2.0 - alpha, 0.0),
            (-(1 - r) * scale * lin, 0.0, 3.0 - alpha),
            (-(1 - r) * scale * const, 0.0, 2.0 - alpha),
        )
    )
    ha, hc = 1.0 - alpha + b, b + 1.0
    at_one = hyp2f1(ha, b, hc, 1.0)

    def exact_u(x):
        x = np.asarray(x, dtype=float)
        return (3 * x**2 - 2 * x**3 - x**b * hyp2f1(ha, b, hc, x) / at_one)[()]

    def exact_q(x):
        x = np.asarray(x, dtype=float)
        return -6.0 * x + 6.0 * x**2

    return ProblemSpec(
        alpha, r, f, 1.0, exact_u, exact_q,
        singular_power=2.0 - alpha, name="example1",
    )


def example2(alpha: float, r: float | None = None, *, beta: float | None = None) -> ProblemSpec:
    """Diffusivity ``1 + x^2`` with ``u = x^2 (1-x)^2``."""
    r = _resolve_r(alpha, r, beta)
    g = math.gamma
    left = (-480, 144, -36, 12, -2)
    right = (-480, 336, -132, 32, -4)
    terms = []
    for k, (cl, cr) in enumerate(zip(left, right)):
        power = 6.0 - k - alpha
        terms.append((r * cl / g(power + 1.0), power, 0.0))
        terms.append(((1 - r) * cr / g(power + 1.0), 0.0, power))
    f = PowerSum(tuple(terms))

    def K(x):
        return 1.0 + np.asarray(x, dtype=float) ** 2

    def exact_u(x):
        x = np.asarray(x, dtype=float)
        return x**2 * (1 - x) ** 2

    def exact_q(x):
        x = np.asarray(x, dtype=float)
        return -2.0 * (1 + x**2) * x * (1 - x) * (1 - 2 * x)

    return ProblemSpec(
        alpha, r, f, K, exact_u, exact_q, K_min=1.0, K_max=2.0,
        singular_power=2.0 - alpha, name="example2",
    )


_BUILDERS = {"example1": example1, "example2": example2}


@dataclass(frozen=True)
class ExampleConfig:
    """A built-in problem selected by name, with either ``r`` or ``beta``."""

    example_id: Literal["example1", "example2"]
    alpha: float
    r: float | None = None
    beta: float | None = None

    def __post_init__(self) -> None:
        if self.example_id not in _BUILDERS:
            raise ConfigError(f"unknown example {self.example_id!r}")
        if not 1.0 < self.alpha < 2.0:
            raise ConfigError(f"alpha must lie in (1, 2), got {self.alpha}")
        if (self.r is None) == (self.beta is None):
            raise ConfigError("exactly one of r and beta must be given")

    def build(self) -> ProblemSpec:
        return _BUILDERS[self.example_id](self.alpha, self.r, beta=self.beta)


# ---------------------------------------------------------------------------
# expression grammar
#
#   expr   := term (('+' | '-') term)*
#   term   := unary (('*' | '/') unary)*
#   unary  := ('+' | '-') unary | power
#   power  := atom ('^' unary)?
#   atom   := NUMBER | 'x' | 'pi' | '(' expr ')'
#
# '^' is right-associative and binds tighter than unary minus on its left,
# so -x^2 means -(x^2).
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(.))")


@dataclass(frozen=True)
class _Tok:
    kind: str  # "num", "name", "op", "end"
    text: str
    col: int


def _tokenize(src: str, line: int, col0: int) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            break
        col = col0 + m.start(m.lastindex)
        if m.group(1):
            toks.append(_Tok("num", m.group(1), col))
        elif m.group(2):
            toks.append(_Tok("name", m.group(2), col))
        elif m.group(3):
            ch = m.group(3)
            if ch not in "+-*/^()":
                raise ParseError(f"unexpected character {ch!r}", line, col)
            toks.append(_Tok("op", ch, col))
        pos = m.end()
    toks.append(_Tok("end", "", col0 + len(src.rstrip())))
    return toks


# Parsed expressions are small trees of tuples. Leaves: ("num", v), ("x",).
Node = tuple


class _Parser:
    def __init__(self, src: str, line: int, col0: int):
        self.toks = _tokenize(src, line, col0)
        self.i = 0
        self.line = line

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, msg: str, tok: _Tok | None = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(msg, self.line, tok.col)

    def parse(self) -> Node:
        node = self.expr()
        if self.peek().kind != "end":
            raise self.fail(f"unexpected {self.peek().text!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = self.take().text
            node = (op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek().text in ("*", "/") and self.peek().kind == "op":
            op = self.take().text
            node = (op, node, self.unary())
        return node

    def unary(self) -> Node:
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("+", "-"):
            self.take()
            inner = self.unary()
            return inner if tok.text == "+" else ("neg", inner)
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.take()
            return ("^", base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.take()
        if tok.kind == "num":
            return ("num", float(tok.text))
        if tok.kind == "name":
            if tok.text == "x":
                return ("x",)
            if tok.text == "pi":
                return ("num", math.pi)
            raise self.fail(f"unknown name {tok.text!r}", tok)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            close = self.take()
            if close.text != ")":
                raise self.fail("expected ')'", close)
            return node
        if tok.kind == "end":
            raise self.fail("unexpected end of expression", tok)
        raise self.fail(f"unexpected {tok.text!r}", tok)


def _eval(node: Node, x: np.ndarray):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "x":
        return x
    if kind == "neg":
        return -_eval(node[1], x)
    a, b = _eval(node[1], x), _eval(node[2], x)
    if kind == "+":
        return a + b
    if kind == "-":
        return a - b
    if kind == "*":
        return a * b
    if kind == "/":
        return a / b
    return np.power(a, b)


def _is_constant(node: Node) -> bool:
    if node[0] == "x":
        return False
    if node[0] == "num":
        return True
    return all(_is_constant(child) for child in node[1:])


def _power_terms(node: Node) -> list[tuple[float, float, float]] | None:
    """Rewrite ``node`` as ``sum c x^p (1-x)^q`` when that is easy to see.

    Handles sums, differences and products of constants, ``x``, ``(1 - x)``
    and constant powers of those. Anything else returns ``None`` and the
    expression is treated as an opaque callable.
    """
    kind = node[0]
    if _is_constant(node):
        return [(float(_eval(node, np.array(0.0))), 0.0, 0.0)]
    if kind == "x":
        return [(1.0, 1.0, 0.0)]
    if kind == "neg":
        inner = _power_terms(node[1])
        return None if inner is None else [(-c, p, q) for c, p, q in inner]
    if kind in ("+", "-"):
        a, b = _power_terms(node[1]), _power_terms(node[2])
        if a is None or b is None:
            return None
        sign = 1.0 if kind == "+" else -1.0
        if kind == "-" and a == [(1.0, 0.0, 0.0)] and b == [(1.0, 1.0, 0.0)]:
            return [(1.0, 0.0, 1.0)]
        return a + [(sign * c, p, q) for c, p, q in b]
    if kind == "*":
        a, b = _power_terms(node[1]), _power_terms(node[2])
        if a is None or b is None:
            return None
        return [(ca * cb, pa + pb, qa + qb) for ca, pa, qa in a for cb, pb, qb in b]
    if kind == "/" and _is_constant(node[2]):
        a = _power_terms(node[1])
        d = float(_eval(node[2], np.array(0.0)))
        return None if a is None or d == 0.0 else [(c / d, p, q) for c, p, q in a]
    if kind == "^" and _is_constant(node[2]):
        base = _power_terms(node[1])
        e = float(_eval(node[2], np.array(0.0)))
        if base is not None and len(base) == 1 and base[0][0] > 0:
            c, p, q = base[0]
            return [(c**e, p * e, q * e)]
    return None


@dataclass(frozen=True)
class Expression:
    """A parsed arithmetic expression in ``x``; vectorised when called."""

    source: str
    tree: Node

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            val = _eval(self.tree, x)
        return np.broadcast_to(np.asarray(val, dtype=float), x.shape).copy()[()]

    @property
    def is_constant(self) -> bool:
        return _is_constant(self.tree)

    def as_power_sum(self) -> PowerSum | None:
        terms = _power_terms(self.tree)
        if terms is None:
            return None
        merged: dict[tuple[float, float], float] = {}
        for c, p, q in terms:
            merged[(p, q)] = merged.get((p, q), 0.0) + c
        return PowerSum(tuple((c, p, q) for (p, q), c in merged.items() if c != 0.0))


def parse_expression(src: str, *, line: int = 1, column: int = 1) -> Expression:
    """Parse ``src``; ``line`` and ``column`` locate it in a larger file."""
    return Expression(src.strip(), _Parser(src, line, column).parse())


_KEYS = {"alpha", "r", "beta", "K", "f", "exact_u", "exact_q", "f_coeffs_path", "name"}


def _read_coeff_table(path: Path) -> np.ndarray:
    rows: dict[int, float] = {}
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read coefficient table {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        try:
            rows[int(parts[0])] = float(parts[1])
        except (IndexError, ValueError):
            raise ParseError("expected 'i f_i'", lineno, 1) from None
    if sorted(rows) != list(range(len(rows))):
        raise ConfigError(f"{path}: coefficient indices must run 0, 1, 2, ... without gaps")
    return np.array([rows[i] for i in range(len(rows))])


def load_custom(path: str | Path) -> ProblemSpec:
    """Read a ``key = value`` problem file.

    Keys: ``alpha``, exactly one of ``r`` and ``beta``, ``K``, and either ``f``
    or ``f_coeffs_path`` (a table of ``i f_i`` lines, relative paths resolved
    against the problem file). ``exact_u``, ``exact_q`` and ``name`` are
    optional. Values other than ``name`` and ``f_coeffs_path`` are arithmetic
    expressions in ``x`` using ``+ - * / ^``, parentheses and ``pi``. Lines
    starting with ``#`` are comments.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read problem file {path}: {exc}") from exc

    raw: dict[str, tuple[str, int, int]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", lineno, len(line) - len(line.lstrip()) + 1)
        key, value = line.split("=", 1)
        key = key.strip()
        if key not in _KEYS:
            raise ParseError(f"unknown key {key!r}", lineno, line.index(key) + 1)
        if key in raw:
            raise ParseError(f"duplicate key {key!r}", lineno, line.index(key) + 1)
        raw[key] = (value, lineno, line.index("=") + 2)

    def expr(key: str) -> Expression | None:
        if key not in raw:
            return None
        value, lineno, col = raw[key]
        return parse_expression(value, line=lineno, column=col)

    def number(key: str) -> float | None:
        e = expr(key)
        if e is None:
            return None
        if not e.is_constant:
            value, lineno, col = raw[key]
            col += len(value) - len(value.lstrip())
            raise ParseError(f"{key} must be a constant", lineno, col)
        return float(e(0.0))

    alpha = number("alpha")
    if alpha is None:
        raise ConfigError(f"{path}: missing mandatory key 'alpha'")
    if not 1.0 < alpha < 2.0:
        raise ConfigError(f"{path}: alpha must lie in (1, 2), got {alpha}")
    r_val, beta_val = number("r"), number("beta")
    try:
        r = _resolve_r(alpha, r_val, beta_val)
    except DomainError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    K_expr = expr("K")
    if K_expr is None:
        raise ConfigError(f"{path}: missing mandatory key 'K'")
    K: float | Callable
    if K_expr.is_constant:
        K = float(K_expr(0.0))
        K_min = K_max = K
    else:
        K = K_expr
        screen = K_expr(np.linspace(0.0, 1.0, 1001))
        K_min, K_max = float(np.min(screen)), float(np.max(screen))
        if not np.all(np.isfinite(screen)):
            raise ConfigError(f"{path}: K is not finite on [0, 1]")
    if not K_min > 0.0:
        raise ConfigError(f"{path}: K must be positive on [0, 1] (minimum found {K_min:g})")

    f_expr = expr("f")
    f_coeffs = None
    if "f_coeffs_path" in raw:
        table = Path(raw["f_coeffs_path"][0].strip())
        if not table.is_absolute():
            table = path.parent / table
        f_coeffs = _read_coeff_table(table)
    if f_expr is None and f_coeffs is None:
        raise ConfigError(f"{path}: one of 'f' and 'f_coeffs_path' is required")
    if f_expr is not None and f_coeffs is not None:
        raise ConfigError(f"{path}: give 'f' or 'f_coeffs_path', not both")

    f: Callable
    singular = None
    if f_expr is None:
        f = _table_only
    else:
        as_sum = f_expr.as_power_sum()
        f = as_sum if as_sum is not None and as_sum.terms else f_expr
        if isinstance(f, PowerSum):
            singular = f.least_power

    name = raw["name"][0].strip() if "name" in raw else path.stem
    try:
        return ProblemSpec(
            alpha, r, f, K, expr("exact_u"), expr("exact_q"),
            K_min=K_min, K_max=K_max, f_coeffs=f_coeffs,
            singular_power=singular, name=name,
        )
    except DomainError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _table_only(x):
    raise DomainError("f was supplied as Jacobi coefficients only; its values are unavailable")
