import math
import random
from fractions import Fraction

import numpy as np
import pytest

from g2star.geometry import (
    ORIGIN,
    Coframe,
    OneForm,
    TwoForm,
    UnsupportedCoframeError,
    christoffels,
    curvature,
    curvature_operator,
    eval_matrix,
    exterior_derivative,
    frame_inverse,
    is_g_skew,
    koszul_connection,
    levi_civita,
    metric_components,
    metric_compatibility_residuals,
    metric_inverse,
    nabla2_R,
    nabla_R,
    signature_at,
    structure_equation_residuals,
)
from g2star.lie_g2star import bracket, decompose_h
from g2star.qsqrt2 import ONE, ZERO, QSqrt2
from g2star.symexpr import EXPR_ONE, EXPR_ZERO, Expr, LinForm, Monomial, parse

E = parse
Z = EXPR_ZERO
I1 = EXPR_ONE
HALF = Expr.const(Fraction(1, 2))

# Coefficient functions of the worked parabolic-holonomy metric.
FUNCS = {
    "q2": E("-sqrt2*x4"),
    "q3": E("sqrt2*(x5/2 - x6) + (-x4 + x5 + x7/sqrt2)*x6*exp(-x7)"),
    "q4": E("x5 - 2*x6 + x6*exp(-x7)"),
    "s2": Z,
    "s3": E("x3 - x4/sqrt2"),
    "r5": E("x4*(x6 - 1)*exp(-x7)/sqrt2 + x7 + (x1*x6 - x3)/sqrt2 - x4^2*exp(x7)"),
    "r6": E("(-x4 + x5 + sqrt2*x6 - x7/sqrt2 + sqrt2*x2*x6)*exp(-x7) + exp(-2*x7) - 2*x3"),
    "r7": E("x1 + x2"),
    "f": E("exp(x7)"),
}


def parabolic_coframe(fn) -> Coframe:
    q2, q3, q4, s2, s3 = fn["q2"], fn["q3"], fn["q4"], fn["s2"], fn["s3"]
    r5, r6, r7, f = fn["r5"], fn["r6"], fn["r7"], fn["f"]
    return Coframe(
        [
            [I1, Z, Z, Z, r5, r6, r7],
            [Z, I1, Z, Z, Z, q2, s2],
            [Z, Z, I1, Z, Z, q3, s3],
            [Z, Z, Z, I1, Z, q4, Z],
            [Z, Z, Z, Z, f, Z, Z],
            [Z, Z, Z, Z, Z, I1, Z],
            [Z, Z, Z, Z, Z, Z, I1],
        ]
    )


COFRAME = parabolic_coframe(FUNCS)
THETA = levi_civita(COFRAME)
CURV = curvature(COFRAME, THETA)


def test_flat_coframe():
    flat = Coframe.identity()
    theta = levi_civita(flat)
    assert all(
        not x for k in range(1, 8) for row in theta.coord(k) for x in row
    )
    assert curvature(flat, theta).is_zero()
    g = metric_components(flat)
    from g2star.lie_g2star import GRAM

    assert [[x.constant_value() for x in row] for row in g] == GRAM
    assert signature_at(flat) == (4, 3)


def test_frame_inverse_identity():
    inv = frame_inverse(Coframe.identity())
    for i in range(7):
        for j in range(7):
            assert inv[i][j].to_expr() == (I1 if i == j else Z)


def test_frame_inverse_clears_exponential_pivot():
    inv = COFRAME.inverse()
    assert inv[4][4] == E("exp(-x7)")
    # B * Binv = identity, exactly.
    for i in range(7):
        for j in range(7):
            total = Z
            for t in range(7):
                total = total + COFRAME.B[i][t] * inv[t][j]
            assert total == (I1 if i == j else Z)


def test_frame_inverse_rejects_non_unit_pivot():
    B = [list(row) for row in Coframe.identity().B]
    B[4][4] = Expr.var(5)
    with pytest.raises(UnsupportedCoframeError, match="unit pivot"):
        Coframe(B).inverse()


def test_exterior_derivative_examples():
    dx1 = OneForm([I1, Z, Z, Z, Z, Z, Z])
    assert exterior_derivative(dx1).is_zero()
    q4 = FUNCS["q4"]
    w = OneForm([Z, Z, Z, Z, Z, q4, Z])
    d = exterior_derivative(w)
    assert d.get(5, 6) == q4.ddx(5)
    assert d.get(6, 7) == -q4.ddx(7)
    assert d.get(1, 2).is_zero()


def test_exterior_derivative_is_leibniz_and_nilpotent():
    rng = random.Random(12)
    for _ in range(5):
        fn = _random_expr(rng, [1, 2, 5, 7])
        gn = _random_expr(rng, [2, 3, 6])
        df = OneForm([fn.ddx(k) for k in range(1, 8)])
        assert exterior_derivative(df).is_zero()
        w = OneForm([gn if k == 3 else Z for k in range(7)])
        lhs = exterior_derivative(w.scale(fn))
        rhs = df.wedge(w) + exterior_derivative(w).scale(fn)
        assert all(lhs.get(a, b) == rhs.get(a, b) for a in range(1, 8) for b in range(1, 8))


def test_metric_entry_and_signature():
    g = metric_components(COFRAME)
    assert g[4][4] == Expr.const(2) * FUNCS["r5"] * FUNCS["f"]
    assert signature_at(COFRAME) == (4, 3)
    ginv = metric_inverse(COFRAME)
    for i in range(7):
        for j in range(7):
            total = Z
            for t in range(7):
                total = total + g[i][t] * ginv[t][j]
            assert total == (I1 if i == j else Z)


def _random_expr(rng, vars_allowed, nterms=3):
    items = []
    for _ in range(nterms):
        powers = [0] * 7
        for _ in range(rng.randint(1, 2)):
            powers[rng.choice(vars_allowed) - 1] += 1
        c = QSqrt2(rng.randint(-3, 3), rng.randint(-1, 1))
        items.append(((Monomial(tuple(powers)), LinForm((Fraction(0),) * 7)), c))
    return Expr.from_terms(items)


def _random_ansatz(rng):
    lin = [Fraction(0)] * 7
    for i in (4, 5, 6):
        lin[i] = Fraction(rng.randint(-2, 2))
    return {
        "q2": _random_expr(rng, [2, 3, 4, 5, 6, 7]),
        "q3": _random_expr(rng, [2, 3, 4, 5, 6, 7]),
        "s2": _random_expr(rng, [2, 3, 4, 5, 6, 7]),
        "s3": _random_expr(rng, [2, 3, 4, 5, 6, 7]),
        "q4": _random_expr(rng, [5, 6, 7]),
        "r5": _random_expr(rng, [1, 2, 3, 4, 5, 6, 7]),
        "r6": _random_expr(rng, [1, 2, 3, 4, 5, 6, 7]),
        "r7": _random_expr(rng, [1, 2, 3, 4, 5, 6, 7]),
        "f": Expr.exp(LinForm(tuple(lin))),
    }


def _expected_connection_rows(c: Coframe, fn) -> dict:
    """The nine displayed connection components for the parabolic ansatz."""
    q2, q3, q4, s2, s3 = fn["q2"], fn["q3"], fn["q4"], fn["s2"], fn["s3"]
    r5, r6, r7, f = fn["r5"], fn["r6"], fn["r7"], fn["f"]
    b = c.row
    D = lambda e, k: e.ddx(k)
    du = lambda e: e.divide_unit(f)
    qj = {2: q2, 3: q3, 4: q4}
    sj = {2: s2, 3: s3}
    out = {}
    for i in (2, 3):
        r = (r6, r7)[i - 2]
        out[(i, 1)] = b(5).scale(HALF * (D(r, 1) - du(D(f, 4 + i))))
    out[(1, 1)] = (
        b(5).scale(du(D(r5, 1)))
        + b(6).scale(HALF * (du(D(f, 6)) + D(r6, 1)))
        + b(7).scale(HALF * (du(D(f, 7)) + D(r7, 1)))
    )
    for i in (2, 3):
        out[(1, i)] = (
            b(5).scale(du(D(r5, i)))
            + b(6).scale(HALF * D(r6, i))
            + b(7).scale(HALF * D(r7, i))
        )
    out[(2, 2)] = (
        b(5).scale(HALF * D(r6, 2))
        + b(6).scale(D(q2, 2))
        + b(7).scale(HALF * (D(s2, 2) + D(q3, 2)))
    )
    out[(3, 3)] = (
        b(5).scale(HALF * D(r7, 3))
        + b(6).scale(HALF * (D(s2, 3) + D(q3, 3)))
        + b(7).scale(D(s3, 3))
    )
    out[(1, 4)] = (
        b(5).scale(du(D(r5, 4)))
        + b(6).scale(HALF * du(D(q4, 5)) + HALF * D(r6, 4))
        + b(7).scale(HALF * D(r7, 4))
    )
    out[(2, 4)] = (
        b(5).scale(HALF * D(r6, 4) - HALF * du(D(q4, 5)))
        + b(6).scale(D(q2, 4))
        + b(7).scale(HALF * (-D(q4, 7) + D(s2, 4) + D(q3, 4)))
    )
    out[(3, 4)] = (
        b(5).scale(HALF * D(r7, 4))
        + b(6).scale(HALF * (D(q4, 7) + D(s2, 4) + D(q3, 4)))
        + b(7).scale(D(s3, 4))
    )
    big5 = D(r6, 7) - D(r7, 6) + D(r7, 1) * r6 - D(r6, 1) * r7
    for j in (2, 3, 4):
        big5 = big5 + D(r7, j) * qj[j]
    for j in (2, 3):
        big5 = big5 - D(r6, j) * sj[j]
    big5 = big5 - du(D(s2, 5)) + du(D(q3, 5))
    big6 = D(s2, 6) - D(q2, 7)
    big7 = D(s3, 6) - D(q3, 7)
    for j in (2, 3, 4):
        big6 = big6 - D(s2, j) * qj[j]
        big7 = big7 - D(s3, j) * qj[j]
    for j in (2, 3):
        big6 = big6 + D(q2, j) * sj[j]
        big7 = big7 + D(q3, j) * sj[j]
    out[(2, 7)] = (
        b(2).scale(-HALF * D(s2 - q3, 2))
        + b(3).scale(-HALF * D(s2 - q3, 3))
        + b(4).scale(-HALF * (D(s2 - q3, 4) + D(q4, 7)))
        + b(5).scale(HALF * big5)
        + b(6).scale(-big6)
        + b(7).scale(-big7)
    )
    return out


@pytest.mark.parametrize("seed", [17, 40])
def test_connection_matches_displayed_components(seed):
    rng = random.Random(seed)
    fn = _random_ansatz(rng)
    c = parabolic_coframe(fn)
    theta = levi_civita(c)
    for (i, j), expected in _expected_connection_rows(c, fn).items():
        assert theta.one_forms[i - 1][j - 1] == expected, (i, j)


def test_connection_displays_on_worked_example():
    for (i, j), expected in _expected_connection_rows(COFRAME, FUNCS).items():
        assert THETA.one_forms[i - 1][j - 1] == expected, (i, j)


def test_koszul_route_agrees():
    for c in (COFRAME, parabolic_coframe(_random_ansatz(random.Random(4)))):
        t1 = levi_civita(c)
        t2 = koszul_connection(c)
        for k in range(1, 8):
            assert t1.coord(k) == t2.coord(k)


def test_structure_equations_and_compatibility():
    for res in structure_equation_residuals(COFRAME, THETA):
        assert res.is_zero()
    for res in metric_compatibility_residuals(THETA):
        assert all(not x for row in res for x in row)


def test_curvature_values_at_origin():
    p56, res56 = decompose_h(curvature_operator(CURV, COFRAME, 5, 6))
    assert all(not x for row in res56 for x in row)
    minus_inv_sqrt2 = QSqrt2(0, Fraction(-1, 2))
    assert p56.A == ((minus_inv_sqrt2, ZERO), (ZERO, ZERO))
    assert p56.u == (ZERO, QSqrt2(Fraction(-1, 2)))

    p57, res57 = decompose_h(curvature_operator(CURV, COFRAME, 5, 7))
    assert all(not x for row in res57 for x in row)
    assert p57.A == ((ZERO, ZERO), (-ONE, ZERO))
    assert p57.u == (QSqrt2(Fraction(1, 2)), ZERO)


def test_curvature_bracket_identity():
    R56 = curvature_operator(CURV, COFRAME, 5, 6)
    R57 = curvature_operator(CURV, COFRAME, 5, 7)
    p, _ = decompose_h(bracket(R56, R57))
    inv_sqrt2 = QSqrt2(0, Fraction(1, 2))
    p57, _ = decompose_h(R57)
    # A and u slots of the displayed identity; the rest is unconstrained.
    for i in range(2):
        for j in range(2):
            assert p.A[i][j] == inv_sqrt2 * p57.A[i][j]
    assert p.u == (inv_sqrt2 * QSqrt2(Fraction(-1, 2)), ZERO)


def test_nabla_R_value_at_origin():
    p, res = decompose_h(nabla_R(CURV, THETA, COFRAME, 5, 5, 6))
    assert all(not x for row in res for x in row)
    inv_sqrt2 = QSqrt2(0, Fraction(1, 2))
    assert p.A == (
        (ZERO, -inv_sqrt2),
        (ONE - inv_sqrt2 * QSqrt2(Fraction(1, 2)), ZERO),
    )


def _rational_points(rng, n, zero_vars=(7,)):
    pts = []
    for _ in range(n):
        pt = [Fraction(rng.randint(-2, 2), rng.randint(1, 3)) for _ in range(7)]
        for z in zero_vars:
            pt[z - 1] = Fraction(0)
        pts.append(tuple(pt))
    return pts


def test_curvature_operators_are_g_skew_and_bianchi1():
    rng = random.Random(8)
    pts = [ORIGIN] + _rational_points(rng, 9)
    for pt in pts:
        ops = {}
        for k in range(1, 8):
            for l in range(k + 1, 8):
                M = curvature_operator(CURV, COFRAME, k, l, pt)
                ops[(k, l)] = M
                assert is_g_skew(M)

        def op(i, j):
            if i < j:
                return ops[(i, j)]
            return [[-x for x in row] for row in ops[(j, i)]]

        for i, j, k in ((1, 2, 3), (4, 5, 6), (5, 6, 7), (2, 4, 6)):
            for r in range(7):
                total = (
                    op(i, j)[r][k - 1] + op(j, k)[r][i - 1] + op(k, i)[r][j - 1]
                )
                assert total == ZERO


def test_second_bianchi_at_origin():
    for z, k, l in ((4, 5, 6), (5, 6, 7), (1, 5, 6), (2, 5, 7), (4, 6, 7)):
        m1 = nabla_R(CURV, THETA, COFRAME, z, k, l)
        m2 = nabla_R(CURV, THETA, COFRAME, k, l, z)
        m3 = nabla_R(CURV, THETA, COFRAME, l, z, k)
        for i in range(7):
            for j in range(7):
                assert m1[i][j] + m2[i][j] + m3[i][j] == ZERO


def test_christoffels_match_finite_differences():
    rng = random.Random(23)
    gamma = christoffels(COFRAME)
    g = metric_components(COFRAME)
    h = 1e-5
    for _ in range(10):
        pt = [rng.uniform(-0.3, 0.3) for _ in range(7)]

        def g_at(q):
            return np.array([[x.eval_float(q) for x in row] for row in g])

        dg = []
        for k in range(7):
            up = list(pt)
            dn = list(pt)
            up[k] += h
            dn[k] -= h
            dg.append((g_at(up) - g_at(dn)) / (2 * h))
        ginv = np.linalg.inv(g_at(pt))
        for _ in range(12):
            i, j, l = rng.randint(0, 6), rng.randint(0, 6), rng.randint(0, 6)
            num = 0.0
            for s in range(7):
                num += 0.5 * ginv[l][s] * (dg[i][j][s] + dg[j][i][s] - dg[s][i][j])
            sym = gamma[i][l][j].eval_float(pt)
            assert math.isclose(num, sym, rel_tol=1e-6, abs_tol=1e-6)


def test_second_covariant_derivative_ricci_identity():
    # nabla^2_{X,Y} - nabla^2_{Y,X} applied to R equals the curvature
    # endomorphism acting as a derivation on R's slots.
    for (z2, z1, k, l) in ((5, 6, 5, 7), (4, 5, 5, 6)):
        lhs = nabla2_R(CURV, THETA, COFRAME, z2, z1, k, l)
        rhs_swap = nabla2_R(CURV, THETA, COFRAME, z1, z2, k, l)
        diff = [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(lhs, rhs_swap)]
        P = curvature_operator(CURV, COFRAME, z2, z1)
        T = curvature_operator(CURV, COFRAME, k, l)
        expect = [
            [
                sum((P[i][m] * T[m][j] - T[i][m] * P[m][j] for m in range(7)), ZERO)
                for j in range(7)
            ]
            for i in range(7)
        ]
        for m in range(1, 8):
            if P[m - 1][k - 1]:
                Rml = curvature_operator(CURV, COFRAME, m, l)
                expect = [
                    [e - P[m - 1][k - 1] * x for e, x in zip(re, rx)]
                    for re, rx in zip(expect, Rml)
                ]
            if P[m - 1][l - 1]:
                Rkm = curvature_operator(CURV, COFRAME, k, m)
                expect = [
                    [e - P[m - 1][l - 1] * x for e, x in zip(re, rx)]
                    for re, rx in zip(expect, Rkm)
                ]
        assert diff == expect
