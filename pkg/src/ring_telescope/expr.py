"""Expression trees for nested sums and products, with a parser and printer.

Grammar (case-insensitive function names)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := postfix (('^' | '**') unary)?
    postfix := atom '!'*
    atom    := INTEGER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Functions: ``Binomial(a, b)``, ``Factorial(a)``, ``Sum(i, lo, hi, body)``,
``Product(i, lo, hi, body)``.

Sums and products follow the convention sum_{i=a}^{b} = -sum_{i=b+1}^{a-1} when
b < a - 1 (and the reciprocal for products), which keeps
``S(k+1) - S(k) = body(k+1)`` valid for every k.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .errors import ParseError, PoleEncountered, ScopeError, UnsupportedExpression


class Expr:
    """Base class of all expression nodes."""

    def __str__(self):
        return to_text(self)

    # arithmetic sugar for building trees in Python
    def __add__(self, o):
        return Add(self, _wrap(o))

    def __radd__(self, o):
        return Add(_wrap(o), self)

    def __sub__(self, o):
        return Sub(self, _wrap(o))

    def __rsub__(self, o):
        return Sub(_wrap(o), self)

    def __mul__(self, o):
        return Mul(self, _wrap(o))

    def __rmul__(self, o):
        return Mul(_wrap(o), self)

    def __truediv__(self, o):
        return Div(self, _wrap(o))

    def __rtruediv__(self, o):
        return Div(_wrap(o), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, o):
        return Pow(self, _wrap(o))


def _wrap(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, Fraction)):
        return Num(Fraction(v))
    if isinstance(v, str):
        return Sym(v)
    raise TypeError(f"cannot convert {type(v).__name__} to an expression")


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Sym(Expr):
    name: str


@dataclass(frozen=True)
class Add(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Sub(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Mul(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Div(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Neg(Expr):
    a: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exp: Expr


@dataclass(frozen=True)
class Binomial(Expr):
    upper: Expr
    lower: Expr


@dataclass(frozen=True)
class Factorial(Expr):
    arg: Expr


@dataclass(frozen=True)
class Sum(Expr):
    var: str
    lo: Expr
    hi: Expr
    body: Expr


@dataclass(frozen=True)
class Product(Expr):
    var: str
    lo: Expr
    hi: Expr
    body: Expr


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|[-+*/^(),!]))")
_FUNCS = {"binomial": "binomial", "binom": "binomial", "factorial": "factorial",
          "sum": "sum", "product": "product", "prod": "product"}


class _Parser:
    def __init__(self, text: str, scope: set[str] | None):
        self.text = text
        self.toks = []
        pos = 0
        text_len = len(text.rstrip())
        while pos < text_len:
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ParseError(f"unexpected character {text[pos:pos + 1]!r}", pos)
            start = m.start(m.lastindex)
            if m.group(1):
                self.toks.append(("num", m.group(1), start))
            elif m.group(2):
                self.toks.append(("name", m.group(2), start))
            else:
                self.toks.append(("op", m.group(3), start))
            pos = m.end()
        self.i = 0
        self.open = scope is None
        self.scope = [set(scope or ())]

    def peek(self, value=None):
        if self.i >= len(self.toks):
            return None
        t = self.toks[self.i]
        if value is not None and t[1] != value:
            return None
        return t

    def pos(self):
        return self.toks[self.i][2] if self.i < len(self.toks) else len(self.text)

    def take(self, value=None):
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of input" + (f", expected {value!r}" if value else ""), self.pos())
        if value is not None and t[1] != value:
            raise ParseError(f"expected {value!r}, found {t[1]!r}", t[2])
        self.i += 1
        return t

    def parse(self) -> Expr:
        if not self.toks:
            raise ParseError("empty expression", 0)
        e = self.expr()
        if self.i != len(self.toks):
            t = self.toks[self.i]
            raise ParseError(f"unexpected token {t[1]!r}", t[2])
        return e

    def expr(self):
        e = self.term()
        while self.peek("+") or self.peek("-"):
            op = self.take()[1]
            r = self.term()
            e = Add(e, r) if op == "+" else Sub(e, r)
        return e

    def term(self):
        e = self.unary()
        while self.peek("*") or self.peek("/"):
            op = self.take()[1]
            r = self.unary()
            if op == "*":
                e = Mul(e, r)
            elif isinstance(e, Num) and isinstance(r, Num) and e.value.denominator == 1 and r.value != 0:
                e = Num(e.value / r.value)
            else:
                e = Div(e, r)
        return e

    def unary(self):
        if self.peek("-"):
            self.take()
            inner = self.unary()
            if isinstance(inner, Num):
                return Num(-inner.value)
            return Neg(inner)
        if self.peek("+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.postfix()
        if self.peek("^") or self.peek("**"):
            self.take()
            return Pow(base, self.unary())
        return base

    def postfix(self):
        e = self.atom()
        while self.peek("!"):
            self.take()
            e = Factorial(e)
        return e

    def atom(self):
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of input", self.pos())
        kind, val, pos = t
        if kind == "num":
            self.take()
            return Num(Fraction(int(val)))
        if kind == "op" and val == "(":
            self.take()
            e = self.expr()
            self.take(")")
            return e
        if kind == "name":
            self.take()
            if self.peek("("):
                return self.call(val, pos)
            if not self.open and not any(val in s for s in self.scope):
                raise ScopeError(f"undeclared name {val!r} at position {pos}")
            return Sym(val)
        raise ParseError(f"unexpected token {val!r}", pos)

    def call(self, name, pos):
        fn = _FUNCS.get(name.lower())
        if fn is None:
            raise ParseError(f"unknown function {name!r}", pos)
        self.take("(")
        if fn in ("sum", "product"):
            t = self.take()
            if t[0] != "name":
                raise ParseError("expected a bound variable name", t[2])
            var = t[1]
            if any(var in s for s in self.scope):
                raise ScopeError(f"bound variable {var!r} shadows a name in scope (position {t[2]})")
            self.take(",")
            lo = self.expr()
            self.take(",")
            hi = self.expr()
            self.take(",")
            self.scope.append({var})
            body = self.expr()
            self.scope.pop()
            self.take(")")
            return (Sum if fn == "sum" else Product)(var, lo, hi, body)
        args = [self.expr()]
        while self.peek(","):
            self.take()
            args.append(self.expr())
        self.take(")")
        want = 2 if fn == "binomial" else 1
        if len(args) != want:
            raise ParseError(f"{name} takes {want} argument(s), got {len(args)}", pos)
        return Binomial(*args) if fn == "binomial" else Factorial(args[0])


def parse_expression(text: str, names=("k",)) -> Expr:
    """Parse ``text``; ``names`` are the free names allowed (variable and parameters).

    With ``names=None`` every free name is accepted (see :func:`free_symbols`).

    Examples
    ========

    >>> from ring_telescope.expr import parse_expression
    >>> print(parse_expression("(-1)^k*Binomial(n,k)^(-1)*Sum(i,0,k-1,Binomial(n,i))", ("k", "n")))
    (-1)^k*Binomial(n,k)^(-1)*Sum(i,0,k - 1,Binomial(n,i))
    """
    return _Parser(text, None if names is None else set(names)).parse()


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

def _prec(e: Expr) -> int:
    if isinstance(e, (Add, Sub)):
        return 1
    if isinstance(e, (Mul, Div)):
        return 2
    if isinstance(e, Neg):
        return 3
    if isinstance(e, Pow):
        return 4
    if isinstance(e, Num):
        if e.value.denominator != 1:
            return 2
        return 3 if e.value < 0 else 6
    if isinstance(e, Factorial):
        return 5
    return 6


def _paren(e: Expr, need: int) -> str:
    s = to_text(e)
    return f"({s})" if _prec(e) < need else s


def to_text(e: Expr) -> str:
    """Render in the input grammar (re-parseable)."""
    if isinstance(e, Num):
        v = e.value
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Add):
        return f"{_paren(e.a, 1)} + {_paren(e.b, 2)}"
    if isinstance(e, Sub):
        return f"{_paren(e.a, 1)} - {_paren(e.b, 2)}"
    if isinstance(e, Mul):
        return f"{_paren(e.a, 2)}*{_paren(e.b, 3)}"
    if isinstance(e, Div):
        return f"{_paren(e.a, 2)}/{_paren(e.b, 3)}"
    if isinstance(e, Neg):
        return f"-{_paren(e.a, 2)}"
    if isinstance(e, Pow):
        return f"{_paren(e.base, 5)}^{_paren(e.exp, 6)}"
    if isinstance(e, Factorial):
        return f"Factorial({to_text(e.arg)})"
    if isinstance(e, Binomial):
        return f"Binomial({to_text(e.upper)},{to_text(e.lower)})"
    if isinstance(e, (Sum, Product)):
        head = "Sum" if isinstance(e, Sum) else "Product"
        return f"{head}({e.var},{to_text(e.lo)},{to_text(e.hi)},{to_text(e.body)})"
    raise TypeError(f"unknown node {e!r}")


# ---------------------------------------------------------------------------
# structural helpers
# ---------------------------------------------------------------------------

def free_symbols(e: Expr) -> set[str]:
    if isinstance(e, Num):
        return set()
    if isinstance(e, Sym):
        return {e.name}
    if isinstance(e, (Sum, Product)):
        return free_symbols(e.lo) | free_symbols(e.hi) | (free_symbols(e.body) - {e.var})
    out = set()
    for ch in _children(e):
        out |= free_symbols(ch)
    return out


def _children(e: Expr):
    if isinstance(e, (Add, Sub, Mul, Div)):
        return (e.a, e.b)
    if isinstance(e, Neg):
        return (e.a,)
    if isinstance(e, Pow):
        return (e.base, e.exp)
    if isinstance(e, Binomial):
        return (e.upper, e.lower)
    if isinstance(e, Factorial):
        return (e.arg,)
    if isinstance(e, (Sum, Product)):
        return (e.lo, e.hi, e.body)
    return ()


def _fresh(base: str, avoid: set[str]) -> str:
    i = 1
    while f"{base}{i}" in avoid:
        i += 1
    return f"{base}{i}"


def substitute(e: Expr, mapping: dict) -> Expr:
    """Capture-avoiding substitution of free names."""
    mapping = {k: _wrap(v) for k, v in mapping.items()}
    if not mapping:
        return e
    if isinstance(e, Num):
        return e
    if isinstance(e, Sym):
        return mapping.get(e.name, e)
    if isinstance(e, (Sum, Product)):
        lo, hi = substitute(e.lo, mapping), substitute(e.hi, mapping)
        inner = {k: v for k, v in mapping.items() if k != e.var}
        var, body = e.var, e.body
        incoming = set()
        for v in inner.values():
            incoming |= free_symbols(v)
        if var in incoming:
            new = _fresh(var, incoming | free_symbols(body) | set(inner))
            body = substitute(body, {var: Sym(new)})
            var = new
        return type(e)(var, lo, hi, substitute(body, inner))
    if isinstance(e, (Add, Sub, Mul, Div)):
        return type(e)(substitute(e.a, mapping), substitute(e.b, mapping))
    if isinstance(e, Neg):
        return Neg(substitute(e.a, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), substitute(e.exp, mapping))
    if isinstance(e, Binomial):
        return Binomial(substitute(e.upper, mapping), substitute(e.lower, mapping))
    if isinstance(e, Factorial):
        return Factorial(substitute(e.arg, mapping))
    raise TypeError(f"unknown node {e!r}")


# constructors that fold trivial cases ------------------------------------------

def add(*xs: Expr) -> Expr:
    terms = [x for x in xs if not (isinstance(x, Num) and x.value == 0)]
    if not terms:
        return Num(Fraction(0))
    out = terms[0]
    for t in terms[1:]:
        if isinstance(t, Neg):
            out = Sub(out, t.a)
        elif isinstance(t, Num) and t.value < 0:
            out = Sub(out, Num(-t.value))
        else:
            out = Add(out, t)
    return out


def mul(*xs: Expr) -> Expr:
    factors = []
    sign = 1
    for x in xs:
        if isinstance(x, Num):
            if x.value == 0:
                return Num(Fraction(0))
            if x.value == 1:
                continue
            if x.value == -1:
                sign = -sign
                continue
        factors.append(x)
    if not factors:
        return Num(Fraction(sign))
    out = factors[0]
    for f in factors[1:]:
        out = Mul(out, f)
    if sign < 0:
        if isinstance(factors[0], Num):
            out = Num(-factors[0].value)
            for f in factors[1:]:
                out = Mul(out, f)
            return out
        return Neg(out)
    return out


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(b, Num) and b.value == 1:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value / b.value)
    return Div(a, b)


def power(base: Expr, e: int) -> Expr:
    if e == 1:
        return base
    if e == 0:
        return Num(Fraction(1))
    return Pow(base, Num(Fraction(e)))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _as_int(v, what: str) -> int:
    if isinstance(v, Fraction):
        if v.denominator != 1:
            raise UnsupportedExpression(f"{what} must be an integer, got {v}")
        return int(v)
    if hasattr(v, "is_number"):
        if not v.is_number():
            raise UnsupportedExpression(f"{what} must be a concrete integer, got {v}")
        return _as_int(v.to_fraction(), what)
    return int(v)


def evaluate(e: Expr, env: dict, ctx=None):
    """Exact value of ``e``.

    With ``ctx`` (an exact_arith Context) names that are parameters of ``ctx`` and
    missing from ``env`` stay symbolic and the result is a RatFun; otherwise all
    free names must be bound and the result is a ``Fraction``.
    """
    ev = _Eval(ctx)
    return ev(e, {k: ev.lift(v) for k, v in env.items()})


class _Eval:
    def __init__(self, ctx):
        self.ctx = ctx

    def lift(self, v):
        if self.ctx is None:
            return Fraction(v)
        from .exact_arith import RatFun
        return RatFun.coerce(self.ctx, v)

    def __call__(self, e, env):
        if isinstance(e, Num):
            return self.lift(e.value)
        if isinstance(e, Sym):
            if e.name in env:
                return env[e.name]
            if self.ctx is not None and e.name in self.ctx.params:
                return self.ctx.var_rf(e.name)
            raise ScopeError(f"no value for {e.name!r}")
        if isinstance(e, Add):
            return self(e.a, env) + self(e.b, env)
        if isinstance(e, Sub):
            return self(e.a, env) - self(e.b, env)
        if isinstance(e, Mul):
            a = self(e.a, env)
            if a == 0:
                # still evaluate the other factor so poles are reported consistently
                self(e.b, env)
                return a
            return a * self(e.b, env)
        if isinstance(e, Div):
            a, b = self(e.a, env), self(e.b, env)
            if b == 0:
                raise PoleEncountered(env.get("k"), f"division by zero in {to_text(e)}")
            return a / b
        if isinstance(e, Neg):
            return -self(e.a, env)
        if isinstance(e, Pow):
            base = self(e.base, env)
            n = _as_int(self(e.exp, env), "exponent")
            if n < 0 and base == 0:
                raise PoleEncountered(env.get("k"), f"zero to a negative power in {to_text(e)}")
            return base ** n
        if isinstance(e, Factorial):
            n = _as_int(self(e.arg, env), "factorial argument")
            if n < 0:
                raise PoleEncountered(env.get("k"), f"factorial of negative integer {n}")
            out = 1
            for i in range(2, n + 1):
                out *= i
            return self.lift(out)
        if isinstance(e, Binomial):
            top = self(e.upper, env)
            m = _as_int(self(e.lower, env), "binomial lower argument")
            if m < 0:
                return self.lift(0)
            out = self.lift(1)
            for i in range(m):
                out = out * (top - i)
            fact = 1
            for i in range(2, m + 1):
                fact *= i
            return out / fact
        if isinstance(e, (Sum, Product)):
            lo = _as_int(self(e.lo, env), "lower bound")
            hi = _as_int(self(e.hi, env), "upper bound")
            is_sum = isinstance(e, Sum)
            acc = self.lift(0 if is_sum else 1)
            inner = dict(env)
            if hi >= lo - 1:
                rng, invert = range(lo, hi + 1), False
            else:
                rng, invert = range(hi + 1, lo), True
            for i in rng:
                inner[e.var] = self.lift(i)
                v = self(e.body, inner)
                acc = acc + v if is_sum else acc * v
            if invert:
                if is_sum:
                    acc = -acc
                else:
                    if acc == 0:
                        raise PoleEncountered(lo, f"empty-range inversion of a vanishing product {to_text(e)}")
                    acc = 1 / acc
            return acc
        raise TypeError(f"unknown node {e!r}")


def _linear(e: Expr):
    """Coefficients {name or 1: Fraction} if e is a linear combination of names, else None."""
    if isinstance(e, Num):
        return {1: e.value}
    if isinstance(e, Sym):
        return {e.name: Fraction(1)}
    if isinstance(e, (Add, Sub)):
        a, b = _linear(e.a), _linear(e.b)
        if a is None or b is None:
            return None
        out = dict(a)
        s = 1 if isinstance(e, Add) else -1
        for key, v in b.items():
            out[key] = out.get(key, 0) + s * v
        return out
    if isinstance(e, Neg):
        a = _linear(e.a)
        return None if a is None else {key: -v for key, v in a.items()}
    if isinstance(e, Mul):
        a, b = _linear(e.a), _linear(e.b)
        if a is None or b is None:
            return None
        for x, y in ((a, b), (b, a)):
            if set(x) <= {1}:
                c = x.get(1, Fraction(0))
                return {key: c * v for key, v in y.items()}
    return None


def _order(e: Expr, acc: list):
    if isinstance(e, Sym):
        if e.name not in acc:
            acc.append(e.name)
    for ch in _children(e):
        _order(ch, acc)
    return acc


def tidy(e: Expr) -> Expr:
    """Collect linear subexpressions such as ``n - (b + 1) + 1`` into ``n - b``."""
    lin = _linear(e) if not isinstance(e, (Num, Sym)) else None
    if lin is not None and isinstance(e, Mul) and isinstance(e.a, Num) and isinstance(e.b, (Add, Sub)):
        return Mul(e.a, tidy(e.b))
    if lin is not None:
        names = [nm for nm in _order(e, []) if lin.get(nm)]
        terms = []
        for nm in names:
            c = lin[nm]
            terms.append((1 if c > 0 else -1, Sym(nm) if abs(c) == 1 else Mul(Num(abs(c)), Sym(nm))))
        c0 = lin.get(1, Fraction(0))
        if c0:
            terms.append((1 if c0 > 0 else -1, Num(abs(c0))))
        if not terms:
            return Num(Fraction(0))
        out = terms[0][1] if terms[0][0] > 0 else (Num(-terms[0][1].value) if isinstance(terms[0][1], Num) else Neg(terms[0][1]))
        for s, t in terms[1:]:
            out = Add(out, t) if s > 0 else Sub(out, t)
        return out
    if isinstance(e, (Add, Sub, Mul, Div)):
        return type(e)(tidy(e.a), tidy(e.b))
    if isinstance(e, Neg):
        return Neg(tidy(e.a))
    if isinstance(e, Pow):
        return Pow(tidy(e.base), tidy(e.exp))
    if isinstance(e, Binomial):
        return Binomial(tidy(e.upper), tidy(e.lower))
    if isinstance(e, Factorial):
        return Factorial(tidy(e.arg))
    if isinstance(e, (Sum, Product)):
        return type(e)(e.var, tidy(e.lo), tidy(e.hi), tidy(e.body))
    return e
