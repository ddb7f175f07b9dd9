"""Normal-form PDE systems for metrics with parabolic-type holonomy.

Each supported holonomy class comes with an adapted coframe whose coefficient
functions must satisfy a first-order PDE system.  This module knows, for every
system, the slot schema (which coefficient functions exist and which variables
they may depend on), the residuals that vanish exactly when the coframe has the
claimed holonomy reduction, and, where the system can be solved by quadrature
or is given in closed form, a synthesizer that builds a full solution from free
input functions.
"""

from enum import Enum
from fractions import Fraction

from .geometry import Coframe
from .qsqrt2 import QSqrt2
from .symexpr import EXPR_ONE, EXPR_ZERO, Expr

NVAR = 7

SQRT2 = Expr.const(QSqrt2(0, 1))
INV_SQRT2 = Expr.const(QSqrt2(0, Fraction(1, 2)))
TWO_SQRT2 = Expr.const(QSqrt2(0, 2))
HALF = Expr.const(Fraction(1, 2))
X = {k: Expr.var(k) for k in range(1, NVAR + 1)}


def C(a, b=0):
    return Expr.const(QSqrt2(Fraction(a), Fraction(b)))


class SystemId(Enum):
    P1 = "P1"
    T2B = "T2B"
    T2C00 = "T2C00"
    T2C10 = "T2C10"
    T2C11 = "T2C11"
    T3B = "T3B"
    T4B0 = "T4B0"
    T4B1 = "T4B1"


class SchemaError(ValueError):
    pass


class DependenceError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


class UnsupportedSystemError(ValueError):
    pass


# Slot name -> variables the slot may depend on (1-indexed).
SCHEMAS = {
    SystemId.P1: {
        "f": (5, 6, 7),
        "q2": (2, 3, 4, 5, 6, 7),
        "s2": (2, 3, 4, 5, 6, 7),
        "q3": (2, 3, 4, 5, 6, 7),
        "s3": (2, 3, 4, 5, 6, 7),
        "q4": (5, 6, 7),
        "r5": (1, 2, 3, 4, 5, 6, 7),
        "r6": (1, 2, 3, 4, 5, 6, 7),
        "r7": (1, 2, 3, 4, 5, 6, 7),
    },
    SystemId.T2B: {
        "p": (5, 6),
        "q2": (3, 4, 5, 6, 7),
        "q3": (5, 6, 7),
        "r5": (1, 2, 3, 4, 5, 6, 7),
        "r6": (2, 3, 4, 5, 6, 7),
        "r7": (4, 5, 6, 7),
    },
    SystemId.T2C00: {
        "p": (5, 6, 7),
        "q": (5, 6, 7),
        "q2": (3, 5, 6),
        "q3": (4, 5, 6),
        "q4": (5, 6, 7),
        "r5": (1, 2, 3, 4, 5, 6, 7),
        "r6": (2, 3, 5, 6, 7),
        "r7": (3, 4, 5, 6, 7),
    },
    SystemId.T2C10: {
        "p": (5, 6, 7),
        "q2": (3, 5, 6, 7),
        "q3": (4, 5, 6, 7),
        "q4": (5, 6, 7),
        "r5": (1, 2, 3, 4, 5, 6, 7),
        "r6": (2, 3, 4, 5, 6, 7),
        "r7": (3, 4, 5, 6, 7),
    },
    SystemId.T2C11: {
        "q2": (3, 4, 5, 6, 7),
        "q3": (4, 5, 6, 7),
        "q4": (5, 6, 7),
        "s": (4, 5, 6, 7),
        "r5": (1, 2, 3, 4, 5, 6, 7),
        "r6": (2, 3, 4, 5, 6, 7),
        "r7": (3, 4, 5, 6, 7),
    },
    SystemId.T3B: {
        "p": (5, 6),
        "q2": (5, 6, 7),
        "q3": (5, 6, 7),
        "r5": (1, 2, 3, 4, 5, 6, 7),
        "r6": (2, 4, 5, 6, 7),
        "r7": (4, 5, 6, 7),
    },
    SystemId.T4B0: {
        "p": (5, 6),
        "q": (5, 6, 7),
        "r5": (2, 4, 5, 6, 7),
        "r6": (3, 5, 6, 7),
        "r7": (4, 5, 6, 7),
    },
    SystemId.T4B1: {
        "q2": (4, 5, 6, 7),
        "q3": (5, 6, 7),
        "r5": (2, 3, 4, 5, 6, 7),
        "r6": (3, 4, 5, 6, 7),
        "r7": (4, 5, 6, 7),
    },
}

# Holonomy algebra each system certifies containment in.
SYSTEM_ALGEBRA = {
    SystemId.P1: ("p1", None),
    SystemId.T2B: ("2b", None),
    SystemId.T2C00: ("2c", (0, 0)),
    SystemId.T2C10: ("2c", (1, 0)),
    SystemId.T2C11: ("2c", (1, 1)),
    SystemId.T3B: ("3b", None),
    SystemId.T4B0: ("4b", 0),
    SystemId.T4B1: ("4b", 1),
}


class FunctionBundle:
    """The named coefficient functions of one adapted coframe."""

    __slots__ = ("system", "functions")

    def __init__(self, system: SystemId, functions: dict, check: bool = True):
        schema = SCHEMAS[system]
        fns = {k: v for k, v in functions.items()}
        unknown = sorted(set(fns) - set(schema))
        missing = sorted(set(schema) - set(fns))
        if unknown or missing:
            raise SchemaError(
                f"{system.value} slots: unknown {unknown}, missing {missing}"
            )
        object.__setattr__(self, "system", system)
        object.__setattr__(self, "functions", fns)
        if check:
            bad = dependence_violations(system, fns)
            if bad:
                report = "; ".join(f"{slot} depends on x{k}" for slot, k in bad)
                raise DependenceError(report)

    def __setattr__(self, name, value):
        raise AttributeError("FunctionBundle is immutable")

    def __getitem__(self, slot: str) -> Expr:
        return self.functions[slot]

    def __eq__(self, other) -> bool:
        if isinstance(other, FunctionBundle):
            return self.system is other.system and self.functions == other.functions
        return NotImplemented

    def coframe(self) -> Coframe:
        return coframe(self)


def dependence_violations(system: SystemId, fns: dict) -> list:
    """(slot, variable) pairs where a slot depends on a forbidden variable."""
    out = []
    for slot, allowed in SCHEMAS[system].items():
        e = fns[slot]
        for k in range(1, NVAR + 1):
            if k not in allowed and e.depends_on(k):
                out.append((slot, k))
    return out


def _rows_with_b1(fns, rest) -> Coframe:
    Z = EXPR_ZERO
    I1 = EXPR_ONE
    rows = [[I1, Z, Z, Z, fns["r5"], fns["r6"], fns["r7"]]]
    rows.extend(rest)
    return Coframe(rows)


def coframe(fns: FunctionBundle) -> Coframe:
    """The adapted coframe of the bundle, rows b^1..b^7 in coordinate basis."""
    Z = EXPR_ZERO
    I1 = EXPR_ONE
    s = fns.system
    if s is SystemId.P1:
        rest = [
            [Z, I1, Z, Z, Z, fns["q2"], fns["s2"]],
            [Z, Z, I1, Z, Z, fns["q3"], fns["s3"]],
            [Z, Z, Z, I1, Z, fns["q4"], Z],
            [Z, Z, Z, Z, fns["f"], Z, Z],
            [Z, Z, Z, Z, Z, I1, Z],
            [Z, Z, Z, Z, Z, Z, I1],
        ]
    elif s in (SystemId.T2B, SystemId.T3B):
        rest = [
            [Z, I1, Z, Z, Z, fns["q2"], Z],
            [Z, Z, I1, Z, Z, fns["q3"], Z],
            [Z, Z, Z, I1, Z, Z, Z],
            [Z, Z, Z, Z, I1, Z, Z],
            [Z, Z, Z, Z, fns["p"], I1, Z],
            [Z, Z, Z, Z, Z, Z, I1],
        ]
    elif s is SystemId.T2C00:
        rest = [
            [Z, I1, Z, Z, Z, fns["q2"], Z],
            [Z, Z, I1, Z, Z, fns["q3"], Z],
            [Z, Z, Z, I1, fns["q"], fns["q4"], Z],
            [Z, Z, Z, Z, I1, Z, Z],
            [Z, Z, Z, Z, Z, I1, Z],
            [Z, Z, Z, Z, fns["p"], Z, I1],
        ]
    elif s is SystemId.T2C10:
        rest = [
            [Z, I1, Z, Z, Z, fns["q2"], Z],
            [Z, Z, I1, Z, Z, fns["q3"], Z],
            [Z, Z, Z, I1, Z, fns["q4"], Z],
            [Z, Z, Z, Z, I1, Z, Z],
            [Z, Z, Z, Z, Z, I1, Z],
            [Z, Z, Z, Z, fns["p"], Z, I1],
        ]
    elif s is SystemId.T2C11:
        rest = [
            [Z, I1, Z, Z, Z, fns["q2"], fns["s"]],
            [Z, Z, I1, Z, Z, fns["q3"], Z],
            [Z, Z, Z, I1, Z, fns["q4"], Z],
            [Z, Z, Z, Z, I1, Z, Z],
            [Z, Z, Z, Z, Z, I1, Z],
            [Z, Z, Z, Z, Z, Z, I1],
        ]
    elif s is SystemId.T4B0:
        rest = [
            [Z, I1, Z, Z, Z, Z, Z],
            [Z, Z, I1, Z, Z, fns["q"], Z],
            [Z, Z, Z, I1, Z, Z, Z],
            [Z, Z, Z, Z, I1, Z, Z],
            [Z, Z, Z, Z, Z, I1, Z],
            [Z, Z, Z, Z, fns["p"], Z, I1],
        ]
    elif s is SystemId.T4B1:
        rest = [
            [Z, I1, Z, Z, Z, fns["q2"], Z],
            [Z, Z, I1, Z, Z, fns["q3"], Z],
            [Z, Z, Z, I1, Z, Z, Z],
            [Z, Z, Z, Z, I1, Z, Z],
            [Z, Z, Z, Z, Z, I1, Z],
            [Z, Z, Z, Z, Z, Z, I1],
        ]
    else:
        raise UnsupportedSystemError(f"no coframe builder for {s}")
    return _rows_with_b1(fns.functions, rest)


def check_integrability_2b(q2: Expr) -> Expr:
    """Residual of the compatibility condition the 2(b) quadrature needs."""
    if q2.depends_on(1) or q2.depends_on(2):
        raise DependenceError("q2 may only depend on x3..x7")
    return q2.ddx(4).ddx(4) - C(2) * q2.ddx(3).ddx(7)


def _residuals_p1(f):
    D = lambda e, k: e.ddx(k)
    fr = f.functions
    q2, s2, q3, s3, q4 = fr["q2"], fr["s2"], fr["q3"], fr["s3"], fr["q4"]
    r5, r6, r7, fn = fr["r5"], fr["r6"], fr["r7"], fr["f"]
    lf6 = D(fn, 6).divide_unit(fn)
    lf7 = D(fn, 7).divide_unit(fn)
    d = s2 - q3
    qj = {2: q2, 3: q3, 4: q4}
    sj = {2: s2, 3: s3}

    def V6(e):
        total = D(e, 6)
        for j in (2, 3, 4):
            total = total - qj[j] * D(e, j)
        return total

    def V7(e):
        total = D(e, 7)
        for j in (2, 3):
            total = total - sj[j] * D(e, j)
        return total

    r6_lhs = D(r6, 4) + TWO_SQRT2 * (V6(s2) - V7(q2)) + D(q4, 5).divide_unit(fn)
    r7_lhs = D(r7, 4) + TWO_SQRT2 * (V6(s3) - V7(q3))
    transport = D(r6, 7) - D(r7, 6) + D(r7, 1) * r6 - D(r6, 1) * r7
    for j in (2, 3, 4):
        transport = transport + D(r7, j) * qj[j]
    for j in (2, 3):
        transport = transport - D(r6, j) * sj[j]
    return [
        ("s2q3_x2", D(d, 2)),
        ("s2q3_x3", D(d, 3)),
        ("s2q3_x4", D(d, 4) + D(q4, 7)),
        ("r6_x1", D(r6, 1) - lf6),
        ("trace_x6", lf6 - D(q2, 2) - D(q3, 3)),
        ("r7_x1", D(r7, 1) - lf7),
        ("trace_x7", lf7 - D(q3, 2) - D(s3, 3)),
        ("r6_x2", D(r6, 2) + SQRT2 * D(q3, 4)),
        ("r7_x2", D(r7, 2) + SQRT2 * D(s3, 4)),
        ("r6_x3", D(r6, 3) - SQRT2 * D(q2, 4)),
        ("r7_x3", D(r7, 3) - SQRT2 * (D(q3, 4) - D(q4, 7))),
        ("r6_x4", r6_lhs),
        ("r7_x4", r7_lhs),
        ("r5_x1", D(r5, 1) + INV_SQRT2 * fn * D(q4, 7)),
        ("r5_x2", D(r5, 2) + HALF * INV_SQRT2 * fn * D(r7, 4)),
        ("r5_x3", D(r5, 3) + HALF * INV_SQRT2 * D(q4, 5) - HALF * INV_SQRT2 * fn * D(r6, 4)),
        ("r5_x4", D(r5, 4) - INV_SQRT2 * fn * transport - INV_SQRT2 * (D(q3, 5) - D(s2, 5))),
    ]


def _residuals_t2b(f):
    D = lambda e, k: e.ddx(k)
    fr = f.functions
    p, q2, q3 = fr["p"], fr["q2"], fr["q3"]
    r5, r6, r7 = fr["r5"], fr["r6"], fr["r7"]
    p6 = D(p, 6)
    return [
        ("q3_x7", D(q3, 7) + p6),
        ("r5_x1", D(r5, 1) + p6),
        ("r5_x2", D(r5, 2) - p6 * (EXPR_ONE - p)),
        ("r6_x2", D(r6, 2) + p6),
        ("r7_x4", D(r7, 4) + TWO_SQRT2 * p6),
        ("r6_x3", D(r6, 3) - D(q2, 3) * p - SQRT2 * D(q2, 4)),
        ("r6_x4", D(r6, 4) - D(q2, 4) * p - TWO_SQRT2 * D(q2, 7)),
        ("r5_x3", D(r5, 3) - (D(q2, 3) * p + SQRT2 * D(q2, 4)) * p - D(q2, 7)),
        (
            "r5_x4",
            D(r5, 4)
            - INV_SQRT2 * (D(r6, 7) - D(r7, 6) + C(3) * D(q2, 7) * p + D(q3, 5))
            - D(q2, 4) * p * p,
        ),
    ]


def _bars_t2c00(fr):
    D = lambda e, k: e.ddx(k)
    p, q = fr["p"], fr["q"]
    a = D(D(p, 6), 7)
    phat = D(p, 7)
    b = phat - a * X[6]
    pbar = p - phat * X[7]
    qbar = q + INV_SQRT2 * a * X[7] * X[7] + SQRT2 * D(pbar, 6) * X[7]
    q2bar = fr["q2"] - C(2) * a * X[3] * X[6] - C(2) * b * X[3]
    q3bar = fr["q3"] - TWO_SQRT2 * phat * X[4]
    q4bar = fr["q4"] - TWO_SQRT2 * phat * X[7]
    r5bar = (
        fr["r5"]
        + phat * (C(3) * X[1] + p * X[3])
        - (a * X[7] + D(pbar, 6)) * (X[2] - SQRT2 * p * X[4])
    )
    r6bar = fr["r6"] + C(4) * phat * X[2] + D(pbar, 6) * X[3] + a * X[3] * X[7]
    r7bar = (
        fr["r7"] + phat * X[3] + SQRT2 * D(pbar, 6) * X[4] + SQRT2 * a * X[4] * X[7]
    )
    return {
        "a": a,
        "b": b,
        "phat": phat,
        "pbar": pbar,
        "qbar": qbar,
        "q2bar": q2bar,
        "q3bar": q3bar,
        "q4bar": q4bar,
        "r5bar": r5bar,
        "r6bar": r6bar,
        "r7bar": r7bar,
    }


def _residuals_t2c00(f):
    D = lambda e, k: e.ddx(k)
    fr = f.functions
    bars = _bars_t2c00(fr)
    a, b, phat, pbar = bars["a"], bars["b"], bars["phat"], bars["pbar"]
    qbar, q3bar, q4bar = bars["qbar"], bars["q3bar"], bars["q4bar"]
    out = [
        ("p_x7x7", D(fr["p"], 7).ddx(7)),
        ("p_x6x6x7", a.ddx(6)),
        ("q_x7", D(bars["qbar"], 7)),
        ("q2_x3", D(bars["q2bar"], 3)),
        ("q3_x4", D(q3bar, 4)),
        ("q4_x7", D(q4bar, 7)),
    ]
    for k in (1, 2, 3, 4):
        out.append((f"r5_x{k}", D(bars["r5bar"], k)))
    for k in (2, 3):
        out.append((f"r6_x{k}", D(bars["r6bar"], k)))
    for k in (3, 4):
        out.append((f"r7_x{k}", D(bars["r7bar"], k)))
    aprime = D(a, 5)
    bprime = D(b, 5)
    curl_rhs = (
        phat * (C(2) * a * X[7] * X[7] + q3bar + TWO_SQRT2 * qbar)
        + SQRT2 * q4bar * (a * X[7] + D(pbar, 6))
        - D(q3bar, 5)
    )
    out.extend(
        [
            (
                "pbar_x6x6",
                D(pbar, 6).ddx(6)
                - C(2)
                * (
                    a * a * X[6] * X[6]
                    + (C(2) * a * b - aprime) * X[6]
                    + b * b
                    - bprime
                ),
            ),
            ("q4bar_x5", D(q4bar, 5) - D(qbar, 6) - TWO_SQRT2 * phat * pbar),
            ("r6bar_r7bar", D(bars["r6bar"], 7) - D(bars["r7bar"], 6) - curl_rhs),
        ]
    )
    return out


def _bars_t2c10(fr):
    D = lambda e, k: e.ddx(k)
    p = fr["p"]
    p6, p7 = D(p, 6), D(p, 7)
    q2bar = fr["q2"] - C(2) * p7 * X[3]
    q3bar = fr["q3"] - TWO_SQRT2 * p7 * X[4]
    r6bar = (
        fr["r6"] + C(4) * p7 * X[2] + p6 * X[3] - SQRT2 * D(q2bar, 7) * X[4]
    )
    r7bar = fr["r7"] + p7 * X[3] + TWO_SQRT2 * p6 * X[4]
    quad = C(2) * D(p, 5).ddx(7) + D(p, 6).ddx(6) - C(2) * p7 * p7
    lin = INV_SQRT2 * (
        D(r6bar, 7)
        - D(r7bar, 6)
        - TWO_SQRT2 * p6 * fr["q4"]
        - p7 * q3bar
        - C(3) * p6 * p
        + D(q3bar, 5)
    )
    r5bar = (
        fr["r5"]
        + C(3) * p7 * X[1]
        - p6 * X[2]
        + p7 * p * X[3]
        - quad * X[4] * X[4]
        - lin * X[4]
    )
    return {
        "q2bar": q2bar,
        "q3bar": q3bar,
        "r5bar": r5bar,
        "r6bar": r6bar,
        "r7bar": r7bar,
    }


def _residuals_t2c10(f):
    D = lambda e, k: e.ddx(k)
    fr = f.functions
    p, q4 = fr["p"], fr["q4"]
    bars = _bars_t2c10(fr)
    out = [
        ("p_x7x7", D(p, 7).ddx(7)),
        ("q2_x3", D(fr["q2"], 3) - C(2) * D(p, 7)),
        ("q3_x4", D(fr["q3"], 4) - TWO_SQRT2 * D(p, 7)),
        ("q3bar_x7", D(bars["q3bar"], 7) + D(p, 6)),
        ("q4_x7", D(q4, 7) - TWO_SQRT2 * D(p, 7)),
        (
            "q2bar_x7",
            SQRT2 * D(bars["q2bar"], 7) - D(q4, 5) + TWO_SQRT2 * D(p, 7) * p,
        ),
    ]
    for k in (1, 2, 3, 4):
        out.append((f"r5_x{k}", D(bars["r5bar"], k)))
    for k in (2, 3, 4):
        out.append((f"r6_x{k}", D(bars["r6bar"], k)))
    for k in (3, 4):
        out.append((f"r7_x{k}", D(bars["r7bar"], k)))
    return out


def _bars_t2c11(fr):
    D = lambda e, k: e.ddx(k)
    q4 = fr["q4"]
    a = D(q4, 7)
    q3bar = fr["q3"] - C(Fraction(2, 3)) * a * X[4]
    b = D(q3bar, 7)
    sbar = fr["s"] + C(Fraction(1, 3)) * a * X[4]
    q2bar = (
        fr["q2"]
        - C(0, Fraction(1, 3)) * a * X[3]
        - C(0, Fraction(1, 3)) * D(a, 7) * X[4] * X[4]
        - SQRT2 * b * X[4]
    )
    r7bar = (
        fr["r7"]
        + C(0, Fraction(1, 3)) * a * X[3]
        - C(0, Fraction(2, 3)) * D(a, 7) * X[4] * X[4]
        - TWO_SQRT2 * b * X[4]
    )
    r6_lin = (
        TWO_SQRT2 * (-D(sbar, 6) + D(q2bar, 7) - C(Fraction(1, 3)) * a * q4)
        - D(q4, 5)
    )
    r6bar = (
        fr["r6"]
        + C(0, Fraction(2, 3)) * a * X[2]
        - C(Fraction(4, 3)) * D(a, 7) * X[3] * X[4]
        - C(2) * b * X[3]
        - C(Fraction(4, 9)) * D(a, 7).ddx(7) * X[4] ** 3
        - (C(0, Fraction(1, 3)) * D(a, 6) + C(2) * D(b, 7)) * X[4] * X[4]
        - r6_lin * X[4]
    )
    r5_x3coeff = (
        INV_SQRT2 * D(q4, 5)
        + D(sbar, 6)
        - D(q2bar, 7)
        + C(Fraction(1, 3)) * a * q4
    )
    r5_lin = (
        INV_SQRT2 * (D(r6bar, 7) - D(r7bar, 6) - D(sbar, 5) + D(q3bar, 5))
        + C(2) * b * q4
        - C(Fraction(1, 3)) * q3bar * a
        + C(Fraction(2, 3)) * sbar
    )
    r5bar = (
        fr["r5"]
        + INV_SQRT2 * a * X[1]
        + C(Fraction(2, 3)) * D(a, 7) * X[2] * X[4]
        + b * X[2]
        - C(0, Fraction(1, 6)) * D(a, 7) * X[3] * X[3]
        - C(0, Fraction(1, 3)) * D(a, 7).ddx(7) * X[3] * X[4] * X[4]
        - (C(Fraction(1, 3)) * D(a, 6) + SQRT2 * D(b, 7)) * X[3] * X[4]
        + r5_x3coeff * X[3]
        - C(0, Fraction(1, 18)) * D(a, 7).ddx(7).ddx(7) * X[4] ** 4
        - (C(0, Fraction(1, 3)) * D(b, 7).ddx(7) - C(Fraction(1, 9)) * D(a, 6).ddx(7)) * X[4] ** 3
        - (
            -D(sbar, 6).ddx(7)
            + D(q2bar, 7).ddx(7)
            + C(Fraction(1, 3)) * D(a, 7) * q4
            - C(Fraction(5, 9)) * a * a
            - D(b, 6)
        )
        * X[4]
        * X[4]
        - r5_lin * X[4]
    )
    return {
        "a": a,
        "b": b,
        "sbar": sbar,
        "q2bar": q2bar,
        "q3bar": q3bar,
        "r5bar": r5bar,
        "r6bar": r6bar,
        "r7bar": r7bar,
    }


def _residuals_t2c11(f):
    D = lambda e, k: e.ddx(k)
    bars = _bars_t2c11(f.functions)
    out = [
        ("q3_x4", D(bars["q3bar"], 4)),
        ("s_x4", D(bars["sbar"], 4)),
        ("q2_x3", D(bars["q2bar"], 3)),
        ("q2_x4", D(bars["q2bar"], 4)),
        ("r7_x3", D(bars["r7bar"], 3)),
        ("r7_x4", D(bars["r7bar"], 4)),
    ]
    for k in (2, 3, 4):
        out.append((f"r6_x{k}", D(bars["r6bar"], k)))
    for k in (1, 2, 3, 4):
        out.append((f"r5_x{k}", D(bars["r5bar"], k)))
    return out


def _residuals_t3b(f):
    D = lambda e, k: e.ddx(k)
    fr = f.functions
    p, q2, q3 = fr["p"], fr["q2"], fr["q3"]
    r5, r6, r7 = fr["r5"], fr["r6"], fr["r7"]
    p6 = D(p, 6)
    return [
        ("q3_x7", D(q3, 7) + p6),
        ("r5_x1", D(r5, 1) + p6),
        ("r5_x2", D(r5, 2) - p6 * (EXPR_ONE - p)),
        ("r5_x3", D(r5, 3) - D(q2, 7)),
        (
            "r5_x4",
            D(r5, 4)
            - INV_SQRT2 * (D(r6, 7) - D(r7, 6) + C(3) * D(q2, 7) * p + D(q3, 5)),
        ),
        ("r6_x2", D(r6, 2) + p6),
        ("r6_x4", D(r6, 4) - TWO_SQRT2 * D(q2, 7)),
        ("r7_x4", D(r7, 4) + TWO_SQRT2 * p6),
    ]


def _residuals_t4b0(f):
    D = lambda e, k: e.ddx(k)
    fr = f.functions
    p, q = fr["p"], fr["q"]
    r5, r6, r7 = fr["r5"], fr["r6"], fr["r7"]
    p6 = D(p, 6)
    return [
        ("q_x7", D(q, 7) + p6),
        ("r5_x2", D(r5, 2) - p6),
        (
            "r5_x4",
            D(r5, 4)
            - INV_SQRT2 * (D(r6, 7) - D(r7, 6) - C(3) * p6 * p + D(q, 5)),
        ),
        ("r6_x3", D(r6, 3) + p6),
        ("r7_x4", D(r7, 4) + TWO_SQRT2 * p6),
    ]


def _residuals_t4b1(f):
    D = lambda e, k: e.ddx(k)
    fr = f.functions
    q2, q3 = fr["q2"], fr["q3"]
    r5, r6, r7 = fr["r5"], fr["r6"], fr["r7"]
    a3 = D(q3, 7)
    return [
        ("q2_x4", D(q2, 4) - SQRT2 * a3),
        ("r5_x2", D(r5, 2) + a3),
        ("r5_x3", TWO_SQRT2 * D(r5, 3) - D(r6, 4)),
        ("r5_x4", SQRT2 * D(r5, 4) - D(r6, 7) + D(r7, 6) - D(q3, 5)),
        ("r6_x3", D(r6, 3) - C(2) * a3),
        ("r6_x4", D(r6, 4) - TWO_SQRT2 * D(q2, 7)),
        ("r7_x4", D(r7, 4) - TWO_SQRT2 * a3),
    ]


_RESIDUALS = {
    SystemId.P1: _residuals_p1,
    SystemId.T2B: _residuals_t2b,
    SystemId.T2C00: _residuals_t2c00,
    SystemId.T2C10: _residuals_t2c10,
    SystemId.T2C11: _residuals_t2c11,
    SystemId.T3B: _residuals_t3b,
    SystemId.T4B0: _residuals_t4b0,
    SystemId.T4B1: _residuals_t4b1,
}


def residuals(fns: FunctionBundle) -> list:
    """Named residual expressions; the bundle solves its system iff all vanish."""
    return _RESIDUALS[fns.system](fns)


def residual_report(fns: FunctionBundle) -> list:
    """(name, is_zero, rendered expr or None) per residual, in order."""
    from .symexpr import render

    out = []
    for name, e in residuals(fns):
        if e.is_zero():
            out.append((name, True, None))
        else:
            out.append((name, False, render(e)))
    return out


# Free input slots of each synthesizer, with their permitted variables.
FREE_SLOTS = {
    SystemId.T2B: {"p": (5, 6), "q2": (3, 4, 5, 6, 7), "q3bar": (5, 6), "r7bar": (5, 6, 7)},
    SystemId.T2C00: {
        "a": (5,),
        "b": (5,),
        "qbar": (5, 6),
        "q2bar": (5, 6),
        "q3bar": (5, 6),
        "r5bar": (5, 6, 7),
        "r6bar": (5, 6, 7),
    },
    SystemId.T2C10: {
        "p": (5, 6, 7),
        "r5bar": (5, 6, 7),
        "r6bar": (5, 6, 7),
        "r7bar": (5, 6, 7),
    },
    SystemId.T2C11: {
        "q4": (5, 6, 7),
        "q3bar": (5, 6, 7),
        "sbar": (5, 6, 7),
        "q2bar": (5, 6, 7),
        "r5bar": (5, 6, 7),
        "r6bar": (5, 6, 7),
        "r7bar": (5, 6, 7),
    },
    SystemId.T3B: {
        "p": (5, 6),
        "q2": (5, 6, 7),
        "q3bar": (5, 6),
        "r5hat": (5, 6, 7),
        "r6hat": (5, 6, 7),
        "r7hat": (5, 6, 7),
    },
    SystemId.T4B0: {
        "p": (5, 6),
        "qbar": (5, 6),
        "r5bar": (5, 6, 7),
        "r6bar": (5, 6, 7),
        "r7bar": (5, 6, 7),
    },
    SystemId.T4B1: {
        "q3": (5, 6, 7),
        "q2bar": (5, 6, 7),
        "r5bar": (5, 6, 7),
        "r6bar": (5, 6, 7),
        "r7bar": (5, 6, 7),
    },
}

# Integration-constant slots accepted by synthesize, with permitted variables.
CONSTANT_SLOTS = {
    SystemId.T2B: {"r5bar": (5, 6, 7), "r6bar": (5, 6, 7)},
    SystemId.T2C00: {
        "pbar_lin": (5,),
        "pbar_const": (5,),
        "q4bar": (6,),
        "r7bar": (5, 7),
    },
    SystemId.T2C10: {"q3bar": (5, 6), "q4": (5, 6), "q2bar": (5, 6)},
    SystemId.T2C11: {},
    SystemId.T3B: {},
    SystemId.T4B0: {},
    SystemId.T4B1: {},
}


def _check_slots(kind, given: dict, allowed: dict):
    unknown = sorted(set(given) - set(allowed))
    if unknown:
        raise SchemaError(f"unknown {kind} slots {unknown}")
    bad = []
    for slot, e in given.items():
        for k in range(1, NVAR + 1):
            if k not in allowed[slot] and e.depends_on(k):
                bad.append((slot, k))
    if bad:
        report = "; ".join(f"{kind} {slot} depends on x{k}" for slot, k in bad)
        raise DependenceError(report)


def _synthesize_t2b(free, const):
    D = lambda e, k: e.ddx(k)
    p, q2 = free["p"], free["q2"]
    enb = check_integrability_2b(q2)
    if not enb.is_zero():
        raise PreconditionError("integrability: (q2)_x4x4 != 2 (q2)_x3x7")
    p6 = D(p, 6)
    q3 = -p6 * X[7] + free["q3bar"]
    r7bar = free["r7bar"]

    rhs_a = D(q2, 3) * p + SQRT2 * D(q2, 4)
    rhs_b = D(q2, 4) * p + TWO_SQRT2 * D(q2, 7)
    F = rhs_a.antiderivative(3)
    G = rhs_b - D(F, 4)
    if G.depends_on(3):
        raise PreconditionError("quadrature for r6 left an x3 dependence")
    r6bar = F + G.antiderivative(4) + const.get("r6bar", EXPR_ZERO)

    rhs_c = rhs_a * p + D(q2, 7)
    rhs_d = (
        INV_SQRT2 * (D(r6bar, 7) - D(r7bar, 6) + C(3) * D(q2, 7) * p + D(q3, 5))
        + C(2) * D(p6, 6) * X[4]
        + D(q2, 4) * p * p
    )
    F5 = rhs_c.antiderivative(3)
    G5 = rhs_d - D(F5, 4)
    if G5.depends_on(3):
        raise PreconditionError("quadrature for r5 left an x3 dependence")
    r5bar = F5 + G5.antiderivative(4) + const.get("r5bar", EXPR_ZERO)

    return {
        "p": p,
        "q2": q2,
        "q3": q3,
        "r5": -p6 * X[1] + p6 * (EXPR_ONE - p) * X[2] + r5bar,
        "r6": -p6 * X[2] + r6bar,
        "r7": -TWO_SQRT2 * p6 * X[4] + r7bar,
    }


def _synthesize_t2c00(free, const):
    D = lambda e, k: e.ddx(k)
    a, b = free["a"], free["b"]
    qbar, q2bar, q3bar = free["qbar"], free["q2bar"], free["q3bar"]
    r5bar, r6bar = free["r5bar"], free["r6bar"]
    phat = a * X[6] + b
    curv = C(2) * (
        a * a * X[6] * X[6] + (C(2) * a * b - D(a, 5)) * X[6] + b * b - D(b, 5)
    )
    pbar = (
        curv.antiderivative(6).antiderivative(6)
        + const.get("pbar_lin", EXPR_ZERO) * X[6]
        + const.get("pbar_const", EXPR_ZERO)
    )
    q4bar = (D(qbar, 6) + TWO_SQRT2 * phat * pbar).antiderivative(5) + const.get(
        "q4bar", EXPR_ZERO
    )
    curl_rhs = (
        phat * (C(2) * a * X[7] * X[7] + q3bar + TWO_SQRT2 * qbar)
        + SQRT2 * q4bar * (a * X[7] + D(pbar, 6))
        - D(q3bar, 5)
    )
    r7bar = (D(r6bar, 7) - curl_rhs).antiderivative(6) + const.get(
        "r7bar", EXPR_ZERO
    )

    p = phat * X[7] + pbar
    return {
        "p": p,
        "q": -INV_SQRT2 * a * X[7] * X[7] - SQRT2 * D(pbar, 6) * X[7] + qbar,
        "q2": C(2) * a * X[3] * X[6] + C(2) * b * X[3] + q2bar,
        "q3": TWO_SQRT2 * phat * X[4] + q3bar,
        "q4": TWO_SQRT2 * phat * X[7] + q4bar,
        "r5": -phat * (C(3) * X[1] + p * X[3])
        + (a * X[7] + D(pbar, 6)) * (X[2] - SQRT2 * p * X[4])
        + r5bar,
        "r6": -C(4) * phat * X[2] - D(pbar, 6) * X[3] - a * X[3] * X[7] + r6bar,
        "r7": -phat * X[3]
        - SQRT2 * D(pbar, 6) * X[4]
        - SQRT2 * a * X[4] * X[7]
        + r7bar,
    }


def _synthesize_t2c10(free, const):
    D = lambda e, k: e.ddx(k)
    p = free["p"]
    if not D(p, 7).ddx(7).is_zero():
        raise PreconditionError("p must be linear in x7: p_x7x7 != 0")
    p6, p7 = D(p, 6), D(p, 7)
    q3bar = (-p6).antiderivative(7) + const.get("q3bar", EXPR_ZERO)
    q4 = (TWO_SQRT2 * p7).antiderivative(7) + const.get("q4", EXPR_ZERO)
    q2bar = INV_SQRT2 * (D(q4, 5) - TWO_SQRT2 * p7 * p).antiderivative(7) + const.get(
        "q2bar", EXPR_ZERO
    )
    r5bar, r6bar, r7bar = free["r5bar"], free["r6bar"], free["r7bar"]
    quad = C(2) * D(p, 5).ddx(7) + D(p, 6).ddx(6) - C(2) * p7 * p7
    lin = INV_SQRT2 * (
        D(r6bar, 7)
        - D(r7bar, 6)
        - TWO_SQRT2 * p6 * q4
        - p7 * q3bar
        - C(3) * p6 * p
        + D(q3bar, 5)
    )
    return {
        "p": p,
        "q2": C(2) * p7 * X[3] + q2bar,
        "q3": TWO_SQRT2 * p7 * X[4] + q3bar,
        "q4": q4,
        "r5": -C(3) * p7 * X[1]
        + p6 * X[2]
        - p7 * p * X[3]
        + quad * X[4] * X[4]
        + lin * X[4]
        + r5bar,
        "r6": -C(4) * p7 * X[2] - p6 * X[3] + SQRT2 * D(q2bar, 7) * X[4] + r6bar,
        "r7": -p7 * X[3] - TWO_SQRT2 * p6 * X[4] + r7bar,
    }


def _synthesize_t2c11(free, const):
    D = lambda e, k: e.ddx(k)
    q4, q3bar, sbar = free["q4"], free["q3bar"], free["sbar"]
    q2bar = free["q2bar"]
    r5bar, r6bar, r7bar = free["r5bar"], free["r6bar"], free["r7bar"]
    a = D(q4, 7)
    b = D(q3bar, 7)
    r6_lin = (
        TWO_SQRT2 * (-D(sbar, 6) + D(q2bar, 7) - C(Fraction(1, 3)) * a * q4)
        - D(q4, 5)
    )
    r6 = (
        -C(0, Fraction(2, 3)) * a * X[2]
        + C(Fraction(4, 3)) * D(a, 7) * X[3] * X[4]
        + C(2) * b * X[3]
        + C(Fraction(4, 9)) * D(a, 7).ddx(7) * X[4] ** 3
        + (C(0, Fraction(1, 3)) * D(a, 6) + C(2) * D(b, 7)) * X[4] * X[4]
        + r6_lin * X[4]
        + r6bar
    )
    r7 = (
        -C(0, Fraction(1, 3)) * a * X[3]
        + C(0, Fraction(2, 3)) * D(a, 7) * X[4] * X[4]
        + TWO_SQRT2 * b * X[4]
        + r7bar
    )
    r5_x3coeff = (
        INV_SQRT2 * D(q4, 5)
        + D(sbar, 6)
        - D(q2bar, 7)
        + C(Fraction(1, 3)) * a * q4
    )
    r5_lin = (
        INV_SQRT2 * (D(r6bar, 7) - D(r7bar, 6) - D(sbar, 5) + D(q3bar, 5))
        + C(2) * b * q4
        - C(Fraction(1, 3)) * q3bar * a
        + C(Fraction(2, 3)) * sbar
    )
    r5 = (
        -INV_SQRT2 * a * X[1]
        - C(Fraction(2, 3)) * D(a, 7) * X[2] * X[4]
        - b * X[2]
        + C(0, Fraction(1, 6)) * D(a, 7) * X[3] * X[3]
        + C(0, Fraction(1, 3)) * D(a, 7).ddx(7) * X[3] * X[4] * X[4]
        + (C(Fraction(1, 3)) * D(a, 6) + SQRT2 * D(b, 7)) * X[3] * X[4]
        - r5_x3coeff * X[3]
        + C(0, Fraction(1, 18)) * D(a, 7).ddx(7).ddx(7) * X[4] ** 4
        + (C(0, Fraction(1, 3)) * D(b, 7).ddx(7) - C(Fraction(1, 9)) * D(a, 6).ddx(7)) * X[4] ** 3
        + (
            -D(sbar, 6).ddx(7)
            + D(q2bar, 7).ddx(7)
            + C(Fraction(1, 3)) * D(a, 7) * q4
            - C(Fraction(5, 9)) * a * a
            - D(b, 6)
        )
        * X[4]
        * X[4]
        + r5_lin * X[4]
        + r5bar
    )
    return {
        "q2": C(0, Fraction(1, 3)) * a * X[3]
        + C(0, Fraction(1, 3)) * D(a, 7) * X[4] * X[4]
        + SQRT2 * b * X[4]
        + q2bar,
        "q3": C(Fraction(2, 3)) * a * X[4] + q3bar,
        "q4": q4,
        "s": -C(Fraction(1, 3)) * a * X[4] + sbar,
        "r5": r5,
        "r6": r6,
        "r7": r7,
    }


def _synthesize_t3b(free, const):
    D = lambda e, k: e.ddx(k)
    p, q2, q3bar = free["p"], free["q2"], free["q3bar"]
    r5hat, r6hat, r7hat = free["r5hat"], free["r6hat"], free["r7hat"]
    p6 = D(p, 6)
    q3 = -p6 * X[7] + q3bar
    return {
        "p": p,
        "q2": q2,
        "q3": q3,
        "r5": -p6 * X[1]
        + p6 * (EXPR_ONE - p) * X[2]
        + D(q2, 7) * X[3]
        + INV_SQRT2
        * (C(3) * D(q2, 7) * p + D(q3, 5) + D(r6hat, 7) - D(r7hat, 6))
        * X[4]
        + (D(q2, 7).ddx(7) + D(p6, 6)) * X[4] * X[4]
        + r5hat,
        "r6": -p6 * X[2] + TWO_SQRT2 * D(q2, 7) * X[4] + r6hat,
        "r7": -TWO_SQRT2 * p6 * X[4] + r7hat,
    }


def _synthesize_t4b0(free, const):
    D = lambda e, k: e.ddx(k)
    p, qbar = free["p"], free["qbar"]
    r5bar, r6bar, r7bar = free["r5bar"], free["r6bar"], free["r7bar"]
    p6 = D(p, 6)
    return {
        "p": p,
        "q": -p6 * X[7] + qbar,
        "r5": p6 * X[2]
        + INV_SQRT2
        * (
            D(r6bar, 7)
            - D(r7bar, 6)
            - C(3) * p6 * p
            - D(p6, 5) * X[7]
            + D(qbar, 5)
        )
        * X[4]
        + D(p6, 6) * X[4] * X[4]
        + r5bar,
        "r6": -p6 * X[3] + r6bar,
        "r7": -TWO_SQRT2 * p6 * X[4] + r7bar,
    }


def _synthesize_t4b1(free, const):
    D = lambda e, k: e.ddx(k)
    q3, q2bar = free["q3"], free["q2bar"]
    r5bar, r6bar, r7bar = free["r5bar"], free["r6bar"], free["r7bar"]
    a3 = D(q3, 7)
    return {
        "q2": SQRT2 * a3 * X[4] + q2bar,
        "q3": q3,
        "r5": -a3 * X[2]
        + SQRT2 * D(a3, 7) * X[3] * X[4]
        + D(q2bar, 7) * X[3]
        + C(0, Fraction(1, 3)) * D(a3, 7).ddx(7) * X[4] ** 3
        + (D(q2bar, 7).ddx(7) - D(a3, 6)) * X[4] * X[4]
        + INV_SQRT2 * (D(r6bar, 7) - D(r7bar, 6) + D(q3, 5)) * X[4]
        + r5bar,
        "r6": C(2) * a3 * X[3]
        + C(2) * D(a3, 7) * X[4] * X[4]
        + TWO_SQRT2 * D(q2bar, 7) * X[4]
        + r6bar,
        "r7": TWO_SQRT2 * a3 * X[4] + r7bar,
    }


_SYNTHESIZERS = {
    SystemId.T2B: _synthesize_t2b,
    SystemId.T2C00: _synthesize_t2c00,
    SystemId.T2C10: _synthesize_t2c10,
    SystemId.T2C11: _synthesize_t2c11,
    SystemId.T3B: _synthesize_t3b,
    SystemId.T4B0: _synthesize_t4b0,
    SystemId.T4B1: _synthesize_t4b1,
}


def synthesize(system: SystemId, free: dict, constants: dict = None) -> FunctionBundle:
    """Build a full solution bundle from free input functions.

    Integration constants default to zero; pass `constants` to override the
    slots listed in CONSTANT_SLOTS for the system.
    """
    if system is SystemId.P1:
        raise UnsupportedSystemError(
            "unsupported: no constructive scheme for the full parabolic system"
        )
    schema = FREE_SLOTS[system]
    missing = sorted(set(schema) - set(free))
    if missing:
        raise SchemaError(f"missing free slots {missing}")
    _check_slots("free", free, schema)
    const = dict(constants or {})
    _check_slots("constant", const, CONSTANT_SLOTS[system])
    fns = _SYNTHESIZERS[system](free, const)
    bundle = FunctionBundle(system, fns)
    bad = [name for name, e in residuals(bundle) if not e.is_zero()]
    if bad:
        raise AssertionError(f"synthesized bundle violates residuals {bad}")
    return bundle


def extract_free(fns: FunctionBundle) -> dict:
    """Recover the synthesizer's free input slots from a full bundle."""
    D = lambda e, k: e.ddx(k)
    fr = fns.functions
    s = fns.system
    if s is SystemId.T2B:
        p6 = D(fr["p"], 6)
        return {
            "p": fr["p"],
            "q2": fr["q2"],
            "q3bar": fr["q3"] + p6 * X[7],
            "r7bar": fr["r7"] + TWO_SQRT2 * p6 * X[4],
        }
    if s is SystemId.T2C00:
        bars = _bars_t2c00(fr)
        return {
            "a": bars["a"],
            "b": bars["b"],
            "qbar": bars["qbar"],
            "q2bar": bars["q2bar"],
            "q3bar": bars["q3bar"],
            "r5bar": bars["r5bar"],
            "r6bar": bars["r6bar"],
        }
    if s is SystemId.T2C10:
        bars = _bars_t2c10(fr)
        return {
            "p": fr["p"],
            "r5bar": bars["r5bar"],
            "r6bar": bars["r6bar"],
            "r7bar": bars["r7bar"],
        }
    if s is SystemId.T2C11:
        bars = _bars_t2c11(fr)
        return {
            "q4": fr["q4"],
            "q3bar": bars["q3bar"],
            "sbar": bars["sbar"],
            "q2bar": bars["q2bar"],
            "r5bar": bars["r5bar"],
            "r6bar": bars["r6bar"],
            "r7bar": bars["r7bar"],
        }
    if s is SystemId.T3B:
        p6 = D(fr["p"], 6)
        q2 = fr["q2"]
        r6hat = fr["r6"] + p6 * X[2] - TWO_SQRT2 * D(q2, 7) * X[4]
        r7hat = fr["r7"] + TWO_SQRT2 * p6 * X[4]
        q3 = fr["q3"]
        r5hat = (
            fr["r5"]
            + p6 * X[1]
            - p6 * (EXPR_ONE - fr["p"]) * X[2]
            - D(q2, 7) * X[3]
            - INV_SQRT2
            * (C(3) * D(q2, 7) * fr["p"] + D(q3, 5) + D(r6hat, 7) - D(r7hat, 6))
            * X[4]
            - (D(q2, 7).ddx(7) + D(p6, 6)) * X[4] * X[4]
        )
        return {
            "p": fr["p"],
            "q2": q2,
            "q3bar": q3 + p6 * X[7],
            "r5hat": r5hat,
            "r6hat": r6hat,
            "r7hat": r7hat,
        }
    if s is SystemId.T4B0:
        p6 = D(fr["p"], 6)
        qbar = fr["q"] + p6 * X[7]
        r6bar = fr["r6"] + p6 * X[3]
        r7bar = fr["r7"] + TWO_SQRT2 * p6 * X[4]
        r5bar = (
            fr["r5"]
            - p6 * X[2]
            - INV_SQRT2
            * (
                D(r6bar, 7)
                - D(r7bar, 6)
                - C(3) * p6 * fr["p"]
                - D(p6, 5) * X[7]
                + D(qbar, 5)
            )
            * X[4]
            - D(p6, 6) * X[4] * X[4]
        )
        return {
            "p": fr["p"],
            "qbar": qbar,
            "r5bar": r5bar,
            "r6bar": r6bar,
            "r7bar": r7bar,
        }
    if s is SystemId.T4B1:
        q3, q2 = fr["q3"], fr["q2"]
        a3 = D(q3, 7)
        q2bar = q2 - SQRT2 * a3 * X[4]
        r7bar = fr["r7"] - TWO_SQRT2 * a3 * X[4]
        r6bar = (
            fr["r6"]
            - C(2) * a3 * X[3]
            - C(2) * D(a3, 7) * X[4] * X[4]
            - TWO_SQRT2 * D(q2bar, 7) * X[4]
        )
        r5bar = (
            fr["r5"]
            + a3 * X[2]
            - SQRT2 * D(a3, 7) * X[3] * X[4]
            - D(q2bar, 7) * X[3]
            - C(0, Fraction(1, 3)) * D(a3, 7).ddx(7) * X[4] ** 3
            - (D(q2bar, 7).ddx(7) - D(a3, 6)) * X[4] * X[4]
            - INV_SQRT2 * (D(r6bar, 7) - D(r7bar, 6) + D(q3, 5)) * X[4]
        )
        return {
            "q3": q3,
            "q2bar": q2bar,
            "r5bar": r5bar,
            "r6bar": r6bar,
            "r7bar": r7bar,
        }
    raise UnsupportedSystemError(f"no free-slot extraction for {s}")
