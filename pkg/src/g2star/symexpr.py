"""Canonical exact expressions: sums of c * x^alpha * exp(L(x)).

The function class is deliberately tiny.  Coefficients c live in
Q(sqrt 2), alpha is a 7-index monomial, and L is a rational linear form
in x1..x7.  The class is closed under +, *, d/dx_k, antidifferentiation
in each variable, and division by units c*exp(L), which is everything
the verification pipeline needs.

Expressions are canonical maps (Monomial, LinForm) -> QSqrt2 with no
zero coefficients stored, so equality is map equality and is_zero is
emptiness.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import NamedTuple, Sequence

from .qsqrt2 import ONE, ZERO, QSqrt2

NVAR = 7

_SQRT2_FLOAT = 1.4142135623730951


class Monomial(NamedTuple):
    powers: tuple  # 7 non-negative ints

    @staticmethod
    def make(powers: Sequence[int]) -> "Monomial":
        t = tuple(int(p) for p in powers)
        if len(t) != NVAR or any(p < 0 for p in t):
            raise ValueError("monomial needs 7 non-negative exponents")
        return Monomial(t)

    @property
    def degree(self) -> int:
        return sum(self.powers)


class LinForm(NamedTuple):
    coeffs: tuple  # 7 Fractions

    @staticmethod
    def make(coeffs: Sequence) -> "LinForm":
        t = tuple(Fraction(c) for c in coeffs)
        if len(t) != NVAR:
            raise ValueError("linear form needs 7 coefficients")
        return LinForm(t)

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def at(self, pt: Sequence[Fraction]) -> Fraction:
        return sum((c * Fraction(p) for c, p in zip(self.coeffs, pt)), Fraction(0))


MONO_ONE = Monomial.make((0,) * NVAR)
LIN_ZERO = LinForm.make((0,) * NVAR)

TermKey = tuple  # (Monomial, LinForm)


class Expr:
    """Canonical finite sum of c * x^alpha * exp(L)."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict | None = None):
        object.__setattr__(self, "terms", dict(terms) if terms else {})

    def __setattr__(self, name, value):
        raise AttributeError("Expr is immutable")

    # -- constructors --------------------------------------------------

    @staticmethod
    def const(c) -> "Expr":
        cq = QSqrt2.coerce(c)
        return Expr({(MONO_ONE, LIN_ZERO): cq}) if cq else Expr()

    @staticmethod
    def var(k: int) -> "Expr":
        if not 1 <= k <= NVAR:
            raise ValueError(f"variable index {k} out of range 1..{NVAR}")
        powers = tuple(1 if i == k - 1 else 0 for i in range(NVAR))
        return Expr({(Monomial(powers), LIN_ZERO): ONE})

    @staticmethod
    def exp(lin: LinForm) -> "Expr":
        return Expr({(MONO_ONE, lin): ONE})

    @staticmethod
    def from_terms(items) -> "Expr":
        acc: dict = {}
        for key, c in items:
            cq = acc.get(key, ZERO) + c
            if cq:
                acc[key] = cq
            elif key in acc:
                del acc[key]
        return Expr(acc)

    # -- predicates ----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, Expr):
            return self.terms == other.terms
        if isinstance(other, (int, Fraction, QSqrt2)):
            return self.terms == Expr.const(other).terms
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def depends_on(self, k: int) -> bool:
        """True if x_k appears in any monomial or exponential."""
        i = k - 1
        return any(
            mono.powers[i] != 0 or lin.coeffs[i] != 0 for mono, lin in self.terms
        )

    def as_unit(self):
        """Return (c, LinForm) if this is a unit c*exp(L), else None."""
        if len(self.terms) != 1:
            return None
        (mono, lin), c = next(iter(self.terms.items()))
        if mono != MONO_ONE:
            return None
        return c, lin

    def constant_value(self) -> QSqrt2:
        """The value of a constant Expr; error if not constant."""
        if not self.terms:
            return ZERO
        if len(self.terms) == 1 and (MONO_ONE, LIN_ZERO) in self.terms:
            return self.terms[(MONO_ONE, LIN_ZERO)]
        raise ValueError("expression is not constant")

    # -- ring operations -----------------------------------------------

    def __add__(self, other) -> "Expr":
        o = _coerce_expr(other)
        if not self.terms:
            return o
        if not o.terms:
            return self
        acc = dict(self.terms)
        for key, c in o.terms.items():
            s = acc.get(key, ZERO) + c
            if s:
                acc[key] = s
            elif key in acc:
                del acc[key]
        return Expr(acc)

    __radd__ = __add__

    def __neg__(self) -> "Expr":
        return Expr({key: -c for key, c in self.terms.items()})

    def __sub__(self, other) -> "Expr":
        return self + (-_coerce_expr(other))

    def __rsub__(self, other) -> "Expr":
        return _coerce_expr(other) + (-self)

    def __mul__(self, other) -> "Expr":
        o = _coerce_expr(other)
        if not self.terms or not o.terms:
            return Expr()
        acc: dict = {}
        for (m1, l1), c1 in self.terms.items():
            for (m2, l2), c2 in o.terms.items():
                key = (
                    Monomial(tuple(a + b for a, b in zip(m1.powers, m2.powers))),
                    LinForm(tuple(a + b for a, b in zip(l1.coeffs, l2.coeffs))),
                )
                c = acc.get(key, ZERO) + c1 * c2
                if c:
                    acc[key] = c
                elif key in acc:
                    del acc[key]
        return Expr(acc)

    __rmul__ = __mul__

    def pow_nat(self, n: int) -> "Expr":
        if not isinstance(n, int) or n < 0:
            raise ValueError("pow_nat needs a non-negative integer exponent")
        out = Expr.const(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    __pow__ = pow_nat

    # -- calculus --------------------------------------------------------

    def ddx(self, k: int) -> "Expr":
        """Exact partial derivative with respect to x_k."""
        i = k - 1
        out: list = []
        for (mono, lin), c in self.terms.items():
            n = mono.powers[i]
            if n:
                dm = Monomial(
                    tuple(p - 1 if j == i else p for j, p in enumerate(mono.powers))
                )
                out.append(((dm, lin), c * n))
            lam = lin.coeffs[i]
            if lam:
                out.append(((mono, lin), c * lam))
        return Expr.from_terms(out)

    def antiderivative(self, k: int) -> "Expr":
        """An exact antiderivative in x_k (integration constant zero).

        Polynomial terms use the power rule.  Terms x^n * exp(lam*x)
        integrate by parts n times:

            exp(lam x) * sum_{i=0..n} (-1)^i (n!/(n-i)!) x^(n-i) / lam^(i+1)
        """
        i = k - 1
        out: list = []
        for (mono, lin), c in self.terms.items():
            n = mono.powers[i]
            lam = lin.coeffs[i]
            if lam == 0:
                nm = Monomial(
                    tuple(p + 1 if j == i else p for j, p in enumerate(mono.powers))
                )
                out.append(((nm, lin), c / (n + 1)))
                continue
            falling = 1
            for step in range(n + 1):
                if step:
                    falling *= n - step + 1
                coeff = c * Fraction((-1) ** step * falling, 1) / QSqrt2(lam ** (step + 1))
                nm = Monomial(
                    tuple(n - step if j == i else p for j, p in enumerate(mono.powers))
                )
                out.append(((nm, lin), coeff))
        return Expr.from_terms(out)

    def divide_unit(self, u: "Expr") -> "Expr":
        """Exact division by a unit u = c * exp(L)."""
        unit = u.as_unit() if isinstance(u, Expr) else None
        if unit is None:
            raise ValueError(
                "divisor is not a unit c*exp(L); use ExprFraction for general quotients"
            )
        c, lin = unit
        if not c:
            raise ZeroDivisionError("division by the zero expression")
        cinv = c.inverse()
        out = {}
        for (mono, l), coeff in self.terms.items():
            key = (mono, LinForm(tuple(a - b for a, b in zip(l.coeffs, lin.coeffs))))
            out[key] = coeff * cinv
        return Expr(out)

    # -- evaluation ------------------------------------------------------

    def eval_exact(self, pt: Sequence) -> QSqrt2:
        """Evaluate at a rational point where every exponential is exp(0)."""
        point = [Fraction(p) for p in pt]
        if len(point) != NVAR:
            raise ValueError("point needs 7 coordinates")
        total = ZERO
        for (mono, lin), c in self.terms.items():
            if lin.at(point) != 0:
                raise ValueError(
                    "transcendental evaluation: exp argument nonzero at point; use eval_float"
                )
            v = Fraction(1)
            for p, e in zip(point, mono.powers):
                if e:
                    v *= p**e
            total = total + c * v
        return total

    def eval_float(self, pt: Sequence[float]) -> float:
        if len(pt) != NVAR:
            raise ValueError("point needs 7 coordinates")
        total = 0.0
        for (mono, lin), c in self.terms.items():
            v = float(c.a) + float(c.b) * _SQRT2_FLOAT
            for p, e in zip(pt, mono.powers):
                if e:
                    v *= float(p) ** e
            arg = 0.0
            for p, l in zip(pt, lin.coeffs):
                if l:
                    arg += float(l) * float(p)
            if arg:
                v *= math.exp(arg)
            total += v
        return total

    # -- rendering -------------------------------------------------------

    def __str__(self) -> str:
        return render(self)

    def __repr__(self) -> str:
        return f"Expr<{render(self)}>"


def _coerce_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction, QSqrt2)):
        return Expr.const(x)
    raise TypeError(f"cannot coerce {type(x).__name__} into Expr")


EXPR_ZERO = Expr()
EXPR_ONE = Expr.const(1)


class ExprFraction:
    """A quotient num/den of expressions, den nonzero.

    Only unit denominators are ever produced by the geometry pipeline
    (frame pivots stay in the unit group), so reduction means clearing
    a unit denominator; no polynomial gcd is attempted.
    """

    __slots__ = ("num", "den")

    def __init__(self, num: Expr, den: Expr = EXPR_ONE):
        if den.is_zero():
            raise ZeroDivisionError("ExprFraction denominator is zero")
        unit = den.as_unit()
        if unit is not None and den != EXPR_ONE:
            num = num.divide_unit(den)
            den = EXPR_ONE
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __setattr__(self, name, value):
        raise AttributeError("ExprFraction is immutable")

    def is_expr(self) -> bool:
        return self.den == EXPR_ONE

    def to_expr(self) -> Expr:
        if not self.is_expr():
            raise ValueError("denominator is not a unit")
        return self.num

    def __add__(self, other: "ExprFraction") -> "ExprFraction":
        o = other if isinstance(other, ExprFraction) else ExprFraction(_coerce_expr(other))
        return ExprFraction(self.num * o.den + o.num * self.den, self.den * o.den)

    def __mul__(self, other: "ExprFraction") -> "ExprFraction":
        o = other if isinstance(other, ExprFraction) else ExprFraction(_coerce_expr(other))
        return ExprFraction(self.num * o.num, self.den * o.den)

    def __neg__(self) -> "ExprFraction":
        return ExprFraction(-self.num, self.den)

    def __eq__(self, other) -> bool:
        if isinstance(other, ExprFraction):
            return (self.num * other.den) == (other.num * self.den)
        return NotImplemented

    def __hash__(self):
        return hash((self.num, self.den))

    def eval_float(self, pt: Sequence[float]) -> float:
        return self.num.eval_float(pt) / self.den.eval_float(pt)

    def __repr__(self) -> str:
        return f"ExprFraction<({render(self.num)}) / ({render(self.den)})>"


# ----------------------------------------------------------------------
# Rendering.  The output must re-parse to the same canonical Expr, so
# the renderer sticks to the fixture grammar and avoids the one trap in
# it: '^' binds tighter than a leading '-', so a negative leading term
# like -x4^2 is emitted as -1*x4^2.
# ----------------------------------------------------------------------


def _render_fraction(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _render_linform(lin: LinForm) -> str:
    parts: list[str] = []
    for i, c in enumerate(lin.coeffs):
        if not c:
            continue
        mag = abs(c)
        piece = f"x{i + 1}" if mag == 1 else f"{_render_fraction(mag)}*x{i + 1}"
        if not parts:
            parts.append(piece if c > 0 else "-" + piece)
        else:
            parts.append(("+ " if c > 0 else "- ") + piece)
    return " ".join(parts)


def _term_pieces(mono: Monomial, lin: LinForm) -> list[str]:
    pieces = [
        f"x{i + 1}" if e == 1 else f"x{i + 1}^{e}"
        for i, e in enumerate(mono.powers)
        if e
    ]
    if not lin.is_zero():
        pieces.append(f"exp({_render_linform(lin)})")
    return pieces


def render(e: Expr) -> str:
    """Canonical textual form; parse(render(e)) == e."""
    if not e.terms:
        return "0"
    out: list[str] = []
    for mono, lin in sorted(e.terms, key=lambda k: (k[1].coeffs, k[0].powers)):
        c = e.terms[(mono, lin)]
        pieces = _term_pieces(mono, lin)
        if c.a and c.b:
            # Compound coefficients carry their own signs inside parens.
            sign = 1
            pieces.insert(0, f"({c})")
        elif c.b:
            sign = 1 if c.b > 0 else -1
            b = abs(c.b)
            pieces.insert(0, "sqrt2" if b == 1 else f"{_render_fraction(b)}*sqrt2")
        else:
            sign = 1 if c.a > 0 else -1
            a = abs(c.a)
            if a != 1 or not pieces:
                pieces.insert(0, _render_fraction(a))
        body = "*".join(pieces)
        if not out:
            if sign < 0:
                head = pieces[0]
                if "^" in head.split("*", 1)[0] and not head.startswith("("):
                    body = "1*" + body
                out.append("-" + body)
            else:
                out.append(body)
        else:
            out.append(("+ " if sign > 0 else "- ") + body)
    return " ".join(out)


# ----------------------------------------------------------------------
# Parsing.
#
# expr   := term (('+'|'-') term)*
# term   := factor ('*' factor)*
# factor := base ('^' nat)? ('/' (nat | 'sqrt2'))?
# base   := nat | 'sqrt2' | 'x1'..'x7' | 'exp' '(' linear-expr ')'
#         | '(' expr ')' | '-' base
# ----------------------------------------------------------------------


class ParseError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens: list[tuple[str, str, int]] = []
        self._scan()
        self.idx = 0

    def _scan(self):
        text = self.text
        i = 0
        while i < len(text):
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            if ch.isdigit():
                j = i
                while j < len(text) and text[j].isdigit():
                    j += 1
                self.tokens.append(("int", text[i:j], i))
                i = j
                continue
            if ch.isalpha():
                j = i
                while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                self.tokens.append(("name", text[i:j], i))
                i = j
                continue
            if ch in "+-*/^()":
                self.tokens.append((ch, ch, i))
                i += 1
                continue
            raise ParseError(f"unexpected character {ch!r}", i)
        self.tokens.append(("end", "", len(text)))

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.idx]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def expect(self, kind: str) -> tuple[str, str, int]:
        tok = self.take()
        if tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[1]!r}", tok[2])
        return tok


def _linform_of(e: Expr, pos: int) -> LinForm:
    coeffs = [Fraction(0)] * NVAR
    for (mono, lin), c in e.terms.items():
        if not lin.is_zero() or mono.degree != 1 or not c.is_rational:
            raise ParseError(
                "exp argument must be a rational linear form in x1..x7", pos
            )
        i = mono.powers.index(1)
        coeffs[i] = c.a
    return LinForm(tuple(coeffs))


class _Parser:
    def __init__(self, text: str):
        self.toks = _Tokenizer(text)

    def parse(self) -> Expr:
        e = self._expr()
        tok = self.toks.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected trailing input {tok[1]!r}", tok[2])
        return e

    def _expr(self) -> Expr:
        node = self._term()
        while self.toks.peek()[0] in ("+", "-"):
            op = self.toks.take()[0]
            rhs = self._term()
            node = node + rhs if op == "+" else node - rhs
        return node

    def _term(self) -> Expr:
        node = self._factor()
        while self.toks.peek()[0] == "*":
            self.toks.take()
            node = node * self._factor()
        return node

    def _factor(self) -> Expr:
        node = self._base()
        if self.toks.peek()[0] == "^":
            self.toks.take()
            tok = self.toks.peek()
            if tok[0] != "int":
                raise ParseError("exponent must be a natural number", tok[2])
            self.toks.take()
            node = node.pow_nat(int(tok[1]))
        if self.toks.peek()[0] == "/":
            self.toks.take()
            tok = self.toks.take()
            if tok[0] == "int" and int(tok[1]) != 0:
                node = node * Expr.const(Fraction(1, int(tok[1])))
            elif tok == ("name", "sqrt2", tok[2]):
                node = node * Expr.const(QSqrt2(0, Fraction(1, 2)))
            else:
                raise ParseError("divisor must be a nonzero natural or sqrt2", tok[2])
        return node

    def _base(self) -> Expr:
        tok = self.toks.take()
        kind, value, pos = tok
        if kind == "int":
            return Expr.const(int(value))
        if kind == "-":
            return -self._base()
        if kind == "(":
            e = self._expr()
            self.toks.expect(")")
            return e
        if kind == "name":
            if value == "sqrt2":
                return Expr.const(QSqrt2(0, 1))
            if value == "exp":
                self.toks.expect("(")
                inner_pos = self.toks.peek()[2]
                arg = self._expr()
                self.toks.expect(")")
                lin = _linform_of(arg, inner_pos)
                return EXPR_ONE if lin.is_zero() else Expr.exp(lin)
            if (
                len(value) == 2
                and value[0] == "x"
                and value[1].isdigit()
                and 1 <= int(value[1]) <= NVAR
            ):
                return Expr.var(int(value[1]))
            raise ParseError(f"unknown name {value!r}", pos)
        raise ParseError(f"unexpected token {value!r}", pos)


def parse(text: str) -> Expr:
    """Parse the fixture/CLI expression grammar into a canonical Expr."""
    return _Parser(text).parse()
