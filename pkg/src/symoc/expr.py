"""Symbolic expression trees for control-problem data.

Grammar (used by :func:`parse` and reproduced by ``str()``)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' factor)?
    base   := number | name | name '(' expr ')' | '(' expr ')' | '-' base

Names match ``[a-zA-Z][a-zA-Z0-9]*``; the known functions are sin, cos,
tan, atan, exp, ln and sqrt.  ``^`` is right-associative.  Numbers accept
decimal and scientific notation.

Evaluation is deterministic and strict about domains: division by zero,
ln of a non-positive value, sqrt of a negative value, a negative base
raised to a non-integer power, and any non-finite intermediate result all
raise :class:`DomainError` naming the offending subexpression.  Expression
equality is decided numerically (see :func:`value_equal`), never through
canonical forms.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

FUNCTIONS = ("sin", "cos", "tan", "atan", "exp", "ln", "sqrt")

_UNARY = ("neg",) + FUNCTIONS
_BINARY = ("add", "sub", "mul", "div", "pow")


class ExprError(Exception):
    """Base class for expression failures."""


class ParseError(ExprError):
    """Raised on malformed input; ``position`` is a 0-based offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"syntax error at offset {position}: {message}")
        self.position = position


class EvalError(ExprError):
    """Base class for evaluation failures."""


class UnboundVariableError(EvalError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable '{name}'")
        self.name = name


class DomainError(EvalError):
    def __init__(self, message: str, source: str = ""):
        if source:
            message = f"{message} in '{source}'"
        super().__init__(message)
        self.source = source


@dataclass(frozen=True)
class Expr:
    """Immutable expression node; build with :func:`parse` or the helpers."""

    kind: str
    args: tuple["Expr", ...] = ()
    value: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.kind == "const":
            object.__setattr__(self, "value", float(self.value))

    # -- construction sugar -------------------------------------------------

    def __add__(self, other):
        return Expr("add", (self, _coerce(other)))

    def __radd__(self, other):
        return Expr("add", (_coerce(other), self))

    def __sub__(self, other):
        return Expr("sub", (self, _coerce(other)))

    def __rsub__(self, other):
        return Expr("sub", (_coerce(other), self))

    def __mul__(self, other):
        return Expr("mul", (self, _coerce(other)))

    def __rmul__(self, other):
        return Expr("mul", (_coerce(other), self))

    def __truediv__(self, other):
        return Expr("div", (self, _coerce(other)))

    def __rtruediv__(self, other):
        return Expr("div", (_coerce(other), self))

    def __pow__(self, other):
        return Expr("pow", (self, _coerce(other)))

    def __rpow__(self, other):
        return Expr("pow", (_coerce(other), self))

    def __neg__(self):
        return Expr("neg", (self,))

    def __pos__(self):
        return self

    # -- queries ------------------------------------------------------------

    def variables(self) -> frozenset[str]:
        """Names of all variables occurring in the tree."""
        out: set[str] = set()
        stack = [self]
        while stack:
            e = stack.pop()
            if e.kind == "var":
                out.add(e.name)
            else:
                stack.extend(e.args)
        return frozenset(out)

    # -- operations ---------------------------------------------------------

    def eval(self, env: dict[str, float]) -> float:
        """Evaluate numerically; raises EvalError subclasses on failure."""
        return _eval(self, env)

    def diff(self, name: str) -> "Expr":
        """Partial derivative with respect to ``name`` (unsimplified)."""
        return _diff(self, name)

    def subst(self, bindings: dict[str, "Expr | float"]) -> "Expr":
        """Simultaneous substitution of variables; replacements are not
        re-substituted into."""
        coerced = {k: _coerce(v) for k, v in bindings.items()}
        return _subst(self, coerced)

    def simplify(self) -> "Expr":
        """Light value-preserving cleanup: constant folding plus 0/1
        identities.  Idempotent; never widens the domain restrictions it
        cannot see."""
        return _simplify(self)

    def __str__(self) -> str:
        return _to_str(self, 0)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"<Expr {self}>"


def _coerce(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float)):
        return Expr("const", value=float(v))
    raise TypeError(f"cannot use {type(v).__name__} as an expression")


# -- constructors -----------------------------------------------------------

def const(v: float) -> Expr:
    return Expr("const", value=float(v))


def var(name: str) -> Expr:
    return Expr("var", name=name)


def sin(e: Expr) -> Expr:
    return Expr("sin", (_coerce(e),))


def cos(e: Expr) -> Expr:
    return Expr("cos", (_coerce(e),))


def tan(e: Expr) -> Expr:
    return Expr("tan", (_coerce(e),))


def atan(e: Expr) -> Expr:
    return Expr("atan", (_coerce(e),))


def exp(e: Expr) -> Expr:
    return Expr("exp", (_coerce(e),))


def ln(e: Expr) -> Expr:
    return Expr("ln", (_coerce(e),))


def sqrt(e: Expr) -> Expr:
    return Expr("sqrt", (_coerce(e),))


ZERO = const(0.0)
ONE = const(1.0)


# -- parsing ----------------------------------------------------------------

def parse(text: str) -> Expr:
    """Parse ``text`` against the module grammar."""
    parser = _Parser(text)
    e = parser.parse_expr()
    parser.expect_end()
    return e


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r\n":
            self.pos += 1

    def _peek(self) -> str:
        self._skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect_end(self):
        if self._peek():
            raise ParseError(f"unexpected '{self._peek()}'", self.pos)

    def parse_expr(self) -> Expr:
        e = self.parse_term()
        while True:
            c = self._peek()
            if c == "+":
                self.pos += 1
                e = Expr("add", (e, self.parse_term()))
            elif c == "-":
                self.pos += 1
                e = Expr("sub", (e, self.parse_term()))
            else:
                return e

    def parse_term(self) -> Expr:
        e = self.parse_factor()
        while True:
            c = self._peek()
            if c == "*":
                self.pos += 1
                e = Expr("mul", (e, self.parse_factor()))
            elif c == "/":
                self.pos += 1
                e = Expr("div", (e, self.parse_factor()))
            else:
                return e

    def parse_factor(self) -> Expr:
        e = self.parse_base()
        if self._peek() == "^":
            self.pos += 1
            return Expr("pow", (e, self.parse_factor()))
        return e

    def parse_base(self) -> Expr:
        c = self._peek()
        if not c:
            raise ParseError("expected an operand", self.pos)
        if c == "-":
            self.pos += 1
            return Expr("neg", (self.parse_base(),))
        if c == "(":
            self.pos += 1
            e = self.parse_expr()
            if self._peek() != ")":
                raise ParseError("expected ')'", self.pos)
            self.pos += 1
            return e
        if c.isdigit() or c == ".":
            return self._number()
        if c.isalpha():
            return self._name_or_call()
        raise ParseError(f"unexpected '{c}'", self.pos)

    def _number(self) -> Expr:
        start = self.pos
        t = self.text
        n = len(t)
        while self.pos < n and t[self.pos].isdigit():
            self.pos += 1
        if self.pos < n and t[self.pos] == ".":
            self.pos += 1
            while self.pos < n and t[self.pos].isdigit():
                self.pos += 1
        if self.pos < n and t[self.pos] in "eE":
            mark = self.pos
            self.pos += 1
            if self.pos < n and t[self.pos] in "+-":
                self.pos += 1
            if self.pos < n and t[self.pos].isdigit():
                while self.pos < n and t[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = mark  # "2e" is the number 2 followed by a name
        raw = t[start:self.pos]
        try:
            return const(float(raw))
        except ValueError:
            raise ParseError(f"bad number '{raw}'", start) from None

    def _name_or_call(self) -> Expr:
        start = self.pos
        t = self.text
        while self.pos < len(t) and t[self.pos].isalnum():
            self.pos += 1
        name = t[start:self.pos]
        if self._peek() == "(":
            if name not in FUNCTIONS:
                raise ParseError(f"unknown function '{name}'", start)
            self.pos += 1
            arg = self.parse_expr()
            if self._peek() != ")":
                raise ParseError("expected ')'", self.pos)
            self.pos += 1
            return Expr(name, (arg,))
        return var(name)


# -- printing ---------------------------------------------------------------

def _format_number(v: float) -> str:
    if v == math.floor(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _prec(e: Expr) -> float:
    k = e.kind
    if k == "const":
        return 1.5 if e.value < 0 else 4.0
    if k in ("var",) or k in FUNCTIONS:
        return 4.0
    if k == "pow":
        return 3.0
    if k in ("mul", "div"):
        return 2.0
    if k == "neg":
        return 1.5
    return 1.0  # add, sub


def _child(e: Expr, required: float) -> str:
    s = _to_str(e, required)
    return s


def _to_str(e: Expr, required: float) -> str:
    k = e.kind
    if k == "const":
        s = _format_number(abs(e.value)) if e.value < 0 else _format_number(e.value)
        if e.value < 0:
            s = "-" + s
    elif k == "var":
        s = e.name
    elif k in FUNCTIONS:
        s = f"{k}({_to_str(e.args[0], 0.0)})"
    elif k == "neg":
        s = "-" + _child(e.args[0], 3.5)
    elif k == "add":
        s = f"{_child(e.args[0], 1.0)} + {_child(e.args[1], 2.0)}"
    elif k == "sub":
        s = f"{_child(e.args[0], 1.0)} - {_child(e.args[1], 2.0)}"
    elif k == "mul":
        s = f"{_child(e.args[0], 2.0)}*{_child(e.args[1], 3.0)}"
    elif k == "div":
        s = f"{_child(e.args[0], 2.0)}/{_child(e.args[1], 3.0)}"
    elif k == "pow":
        s = f"{_child(e.args[0], 4.0)}^{_child(e.args[1], 3.0)}"
    else:  # pragma: no cover
        raise ExprError(f"unknown node kind '{k}'")
    if _prec(e) < required:
        return f"({s})"
    return s


# -- evaluation -------------------------------------------------------------

def _is_integral(v: float) -> bool:
    return math.isfinite(v) and v == math.floor(v)


def _apply(kind: str, a: float, b: float | None = None, source: str = "") -> float:
    """Apply one operation with the shared domain rules."""
    try:
        if kind == "neg":
            r = -a
        elif kind == "sin":
            r = math.sin(a)
        elif kind == "cos":
            r = math.cos(a)
        elif kind == "tan":
            r = math.tan(a)
        elif kind == "atan":
            r = math.atan(a)
        elif kind == "exp":
            r = math.exp(a)
        elif kind == "ln":
            if a <= 0.0:
                raise DomainError(f"ln of non-positive value {a!r}", source)
            r = math.log(a)
        elif kind == "sqrt":
            if a < 0.0:
                raise DomainError(f"sqrt of negative value {a!r}", source)
            r = math.sqrt(a)
        elif kind == "add":
            r = a + b
        elif kind == "sub":
            r = a - b
        elif kind == "mul":
            r = a * b
        elif kind == "div":
            if b == 0.0:
                raise DomainError("division by zero", source)
            r = a / b
        elif kind == "pow":
            if _is_integral(b):
                if a == 0.0 and b < 0.0:
                    raise DomainError("zero base with negative exponent", source)
            elif not a > 0.0:
                raise DomainError(
                    f"base {a!r} with non-integer exponent {b!r}", source)
            r = math.pow(a, b)
        else:  # pragma: no cover
            raise ExprError(f"unknown operation '{kind}'")
    except OverflowError:
        raise DomainError("non-finite result (overflow)", source) from None
    except ValueError:  # pragma: no cover - domain rules pre-empt libm
        raise DomainError("math domain error", source) from None
    if not math.isfinite(r):
        raise DomainError("non-finite result (overflow)", source)
    return r


def _eval(e: Expr, env: dict[str, float]) -> float:
    k = e.kind
    if k == "const":
        return e.value
    if k == "var":
        try:
            return float(env[e.name])
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if k in _UNARY:
        a = _eval(e.args[0], env)
        return _apply(k, a, source=str(e))
    a = _eval(e.args[0], env)
    b = _eval(e.args[1], env)
    return _apply(k, a, b, source=str(e))


# -- differentiation --------------------------------------------------------

def _diff(e: Expr, name: str) -> Expr:
    k = e.kind
    if k == "const":
        return ZERO
    if k == "var":
        return ONE if e.name == name else ZERO
    if k == "neg":
        return -_diff(e.args[0], name)
    if k == "add":
        return _diff(e.args[0], name) + _diff(e.args[1], name)
    if k == "sub":
        return _diff(e.args[0], name) - _diff(e.args[1], name)
    if k == "mul":
        u, v = e.args
        return u * _diff(v, name) + _diff(u, name) * v
    if k == "div":
        u, v = e.args
        return (_diff(u, name) * v - u * _diff(v, name)) / (v ** const(2.0))
    if k == "pow":
        u, v = e.args
        du = _diff(u, name)
        dv = _diff(v, name)
        if v.kind == "const":
            return const(v.value) * u ** const(v.value - 1.0) * du
        if u.kind == "const":
            return e * ln(u) * dv
        return e * (dv * ln(u) + v * du / u)
    u = e.args[0]
    du = _diff(u, name)
    if k == "sin":
        return cos(u) * du
    if k == "cos":
        return -sin(u) * du
    if k == "tan":
        return du / cos(u) ** const(2.0)
    if k == "atan":
        return du / (ONE + u ** const(2.0))
    if k == "exp":
        return exp(u) * du
    if k == "ln":
        return du / u
    if k == "sqrt":
        return du / (const(2.0) * sqrt(u))
    raise ExprError(f"unknown node kind '{k}'")  # pragma: no cover


# -- substitution -----------------------------------------------------------

def _subst(e: Expr, bindings: dict[str, Expr]) -> Expr:
    if e.kind == "var":
        return bindings.get(e.name, e)
    if e.kind == "const":
        return e
    return Expr(e.kind, tuple(_subst(a, bindings) for a in e.args),
                e.value, e.name)


# -- simplification ---------------------------------------------------------

def _try_fold(kind: str, a: float, b: float | None = None) -> Expr | None:
    try:
        return const(_apply(kind, a, b))
    except EvalError:
        return None


def _gather(e: Expr, kind: str, out: list[Expr]):
    if e.kind == kind:
        _gather(e.args[0], kind, out)
        _gather(e.args[1], kind, out)
    else:
        out.append(e)


def _chain(kind: str, items: list[Expr]) -> Expr:
    acc = items[0]
    for it in items[1:]:
        acc = Expr(kind, (acc, it))
    return acc


def _simplify(e: Expr) -> Expr:
    k = e.kind
    if k in ("const", "var"):
        return e
    args = tuple(_simplify(a) for a in e.args)

    if k == "neg":
        (a,) = args
        if a.kind == "const":
            return const(-a.value)
        if a.kind == "neg":
            return a.args[0]
        return Expr("neg", args)

    if k in FUNCTIONS:
        (a,) = args
        if a.kind == "const":
            folded = _try_fold(k, a.value)
            if folded is not None:
                return folded
        return Expr(k, args)

    a, b = args

    if k == "add":
        terms: list[Expr] = []
        _gather(Expr("add", (a, b)), "add", terms)
        csum = math.fsum(t.value for t in terms if t.kind == "const")
        rest = [t for t in terms if t.kind != "const"]
        if not rest:
            return const(csum)
        chain = _chain("add", rest)
        if csum == 0.0:
            return chain
        if csum < 0.0:
            return Expr("sub", (chain, const(-csum)))
        return Expr("add", (chain, const(csum)))

    if k == "sub":
        if a.kind == "const" and b.kind == "const":
            return const(a.value - b.value)
        if b.kind == "const" and b.value == 0.0:
            return a
        if a.kind == "const" and a.value == 0.0:
            return _simplify(Expr("neg", (b,)))
        return Expr("sub", (a, b))

    if k == "mul":
        factors: list[Expr] = []
        _gather(Expr("mul", (a, b)), "mul", factors)
        coeff = 1.0
        rest = []
        for f in factors:
            if f.kind == "const":
                coeff *= f.value
            else:
                rest.append(f)
        if coeff == 0.0 or not rest:
            return const(coeff)
        if coeff == 1.0:
            return _chain("mul", rest)
        if coeff == -1.0:
            return _simplify(Expr("neg", (_chain("mul", rest),)))
        return _chain("mul", [const(coeff)] + rest)

    if k == "div":
        if a.kind == "const" and b.kind == "const" and b.value != 0.0:
            folded = _try_fold("div", a.value, b.value)
            if folded is not None:
                return folded
        if b.kind == "const" and b.value == 1.0:
            return a
        if b.kind == "const" and b.value == -1.0:
            return _simplify(Expr("neg", (a,)))
        if a.kind == "const" and a.value == 0.0 and \
                not (b.kind == "const" and b.value == 0.0):
            return ZERO
        return Expr("div", (a, b))

    if k == "pow":
        if a.kind == "const" and b.kind == "const":
            folded = _try_fold("pow", a.value, b.value)
            if folded is not None:
                return folded
        if b.kind == "const":
            if b.value == 0.0:
                return ONE
            if b.value == 1.0:
                return a
        if a.kind == "const" and a.value == 1.0:
            return ONE
        return Expr("pow", (a, b))

    raise ExprError(f"unknown node kind '{k}'")  # pragma: no cover


# -- numeric equality -------------------------------------------------------

def value_equal(a: Expr, b: Expr, names=None, n: int = 100,
                rel: float = 1e-10, seed: int = 20260823,
                box: tuple[float, float] = (-2.0, 2.0)) -> bool:
    """Decide expression equality numerically: ``n`` random environments
    (singular draws are re-drawn), agreement within ``rel`` relative to
    ``1 + max(|a|, |b|)``."""
    if names is None:
        names = sorted(a.variables() | b.variables())
    else:
        names = list(names)
    rng = random.Random(seed)
    lo, hi = box
    done = 0
    attempts = 0
    while done < n:
        attempts += 1
        if attempts > 50 * n:
            raise ExprError("could not find enough non-singular sample points")
        env = {nm: rng.uniform(lo, hi) for nm in names}
        try:
            va = a.eval(env)
            vb = b.eval(env)
        except EvalError:
            continue
        if abs(va - vb) > rel * (1.0 + max(abs(va), abs(vb))):
            return False
        done += 1
    return True
