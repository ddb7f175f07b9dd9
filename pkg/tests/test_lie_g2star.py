import random
from itertools import combinations

import numpy as np
import pytest

from g2star.lie_g2star import (
    GRAM,
    OMEGA,
    HParams,
    SubalgebraSpec,
    act_on_threeform,
    bracket,
    bracket_closure,
    catalogue,
    decompose_h,
    h,
    h_matrix,
    is_in_g2star,
    is_in_so43,
    m_space,
    subspace_equal,
    zero_matrix,
)
from g2star.qsqrt2 import ONE, ZERO, QSqrt2, mat_identity, mat_is_zero, rank_exact


def _random_params(rng) -> HParams:
    r = lambda: QSqrt2(rng.randint(-4, 4), rng.randint(-2, 2))
    return HParams.make(((r(), r()), (r(), r())), r(), (r(), r()), (r(), r()))


def test_h_of_identity_is_the_expected_diagonal():
    M = h(A=((1, 0), (0, 1)))
    diag = [M[i][i] for i in range(7)]
    assert diag == [QSqrt2(d) for d in (2, 1, 1, 0, -2, -1, -1)]
    off = [M[i][j] for i in range(7) for j in range(7) if i != j]
    assert all(not x for x in off)


def test_h_of_zero_is_zero():
    assert mat_is_zero(h())


def test_decompose_roundtrip():
    rng = random.Random(2)
    for _ in range(20):
        p = _random_params(rng)
        q, residual = decompose_h(h_matrix(p))
        assert q == p
        assert mat_is_zero(residual)


def test_decompose_rejects_lower_left():
    E21 = zero_matrix()
    E21[1][0] = ONE
    _, residual = decompose_h(E21)
    assert not mat_is_zero(residual)


def test_bracket_u_u():
    lhs = bracket(h(u=(1, 0)), h(u=(0, 1)))
    assert lhs == h(v=2)


def test_bracket_v_u():
    lhs = bracket(h(v=1), h(u=(1, 0)))
    assert lhs == h(y=(-3, 0))


def test_bracket_self_vanishes():
    rng = random.Random(3)
    X = h_matrix(_random_params(rng))
    assert mat_is_zero(bracket(X, X))


def test_m_bracket_display():
    rng = random.Random(4)
    for _ in range(20):
        p = _random_params(rng)
        q = _random_params(rng)
        X = h(v=p.v, u=p.u, y=p.y)
        Y = h(v=q.v, u=q.u, y=q.y)
        theta = p.u[0] * q.u[1] - p.u[1] * q.u[0]
        expected = h(v=2 * theta, y=(
            3 * (q.v * p.u[0] - p.v * q.u[0]),
            3 * (q.v * p.u[1] - p.v * q.u[1]),
        ))
        assert bracket(X, Y) == expected


def test_gl2_action_display():
    rng = random.Random(5)
    for _ in range(20):
        p = _random_params(rng)
        q = _random_params(rng)
        A = p.A
        X = h(A=A)
        Y = h(v=q.v, u=q.u, y=q.y)
        tr = A[0][0] + A[1][1]
        Au = (
            A[0][0] * q.u[0] + A[0][1] * q.u[1],
            A[1][0] * q.u[0] + A[1][1] * q.u[1],
        )
        Ay_tr = (
            A[0][0] * q.y[0] + A[0][1] * q.y[1] + tr * q.y[0],
            A[1][0] * q.y[0] + A[1][1] * q.y[1] + tr * q.y[1],
        )
        assert bracket(X, Y) == h(v=tr * q.v, u=Au, y=Ay_tr)


def test_jacobi_identity():
    rng = random.Random(6)
    for _ in range(100):
        X, Y, Z = (h_matrix(_random_params(rng)) for _ in range(3))
        total = bracket(X, bracket(Y, Z))
        total = [
            [a + b for a, b in zip(r1, r2)]
            for r1, r2 in zip(total, bracket(Y, bracket(Z, X)))
        ]
        total = [
            [a + b for a, b in zip(r1, r2)]
            for r1, r2 in zip(total, bracket(Z, bracket(X, Y)))
        ]
        assert mat_is_zero(total)


def test_h_closed_under_bracket():
    rng = random.Random(7)
    for _ in range(20):
        X = h_matrix(_random_params(rng))
        Y = h_matrix(_random_params(rng))
        _, residual = decompose_h(bracket(X, Y))
        assert mat_is_zero(residual)


def test_parabolic_annihilates_omega():
    for X in catalogue("p1").basis:
        assert is_in_g2star(X)
        assert is_in_so43(X)


def test_identity_scales_omega():
    acted = act_on_threeform(mat_identity(7), OMEGA)
    assert acted == act_on_threeform(mat_identity(7), OMEGA)
    for key, c in OMEGA.coeffs.items():
        assert acted.coeffs[key] == -3 * c


def test_stabilizer_dimension_is_14():
    rows = []
    for i, j, k in combinations(range(1, 8), 3):
        row = []
        for m in range(1, 8):
            for n in range(1, 8):
                c = ZERO
                if n == i:
                    c = c + OMEGA.get(m, j, k)
                if n == j:
                    c = c + OMEGA.get(i, m, k)
                if n == k:
                    c = c + OMEGA.get(i, j, m)
                row.append(-c)
        rows.append(row)
    assert 49 - rank_exact(rows) == 14
    # Float cross-check of the same rank computation.
    A = np.array([[float(x) for x in row] for row in rows])
    sv = np.linalg.svd(A, compute_uv=False)
    assert int(np.sum(sv > 1e-8)) == 49 - 14


def test_so43_counterexamples():
    assert not is_in_so43(mat_identity(7))
    assert not is_in_so43(GRAM)


def test_m_subspace_dimensions():
    for i in (0, 1):
        for j in (0, 1):
            assert len(m_space(i, j)) == i + j + 2


DIMENSIONS = [
    ("p1", None, 9),
    ("sl2_m", None, 8),
    ("gl2_m", None, 9),
    ("co2_m", None, 7),
    # Upper-triangular 2x2 matrices form a 3-dimensional algebra, so the
    # semidirect sum with the 5-dimensional nilradical has dimension 8.
    ("b2_m", None, 8),
    ("b2hat_m", None, 7),
    ("d_m", None, 7),
    ("Ca_m", 1, 6),
    ("S_m", None, 6),
    ("s_lambda_m", 2, 7),
    ("diag1mu_m", 0, 6),
    ("N_m", None, 6),
    ("2b", None, 6),
    ("2c", (0, 0), 4),
    ("2c", (1, 0), 5),
    ("2c", (1, 1), 6),
    ("3b", None, 5),
    ("4b", 0, 4),
    ("4b", 1, 5),
    ("m", None, 5),
]


@pytest.mark.parametrize("name,params,dim", DIMENSIONS)
def test_catalogue_dimensions(name, params, dim):
    spec = catalogue(name, params)
    assert spec.dim == dim
    for X in spec.basis:
        assert is_in_g2star(X)
        assert is_in_so43(X)


def test_catalogue_rejects_bad_input():
    with pytest.raises(ValueError, match="unknown"):
        catalogue("q17")
    with pytest.raises(ValueError, match="mu"):
        catalogue("diag1mu_m", 2)
    with pytest.raises(ValueError, match="j"):
        catalogue("4b", 3)
    with pytest.raises(ValueError, match="i, j"):
        catalogue("2c", (0, 1))


def test_m_is_three_step_nilpotent():
    m = catalogue("m")
    y_span = SubalgebraSpec("y", None, m_space(0, 0)[-2:], check=False)
    for X in m.basis:
        for Y in m.basis:
            d2 = bracket(X, Y)
            for Z in m.basis:
                d3 = bracket(Z, d2)
                assert y_span.contains(d3)
                for W in m.basis:
                    assert mat_is_zero(bracket(W, d3))


def test_closure_of_nothing_is_trivial():
    assert bracket_closure([]).dim == 0
    assert catalogue("trivial").dim == 0


def test_closure_reproduces_catalogue():
    p1 = catalogue("p1")
    assert subspace_equal(p1, bracket_closure(p1.basis))


def test_closure_from_generators():
    # u-generators alone bracket-generate all of m.
    gens = [h(u=(1, 0)), h(u=(0, 1)), h(v=1)]
    closed = bracket_closure(gens)
    assert subspace_equal(closed, catalogue("m"))


def test_subspace_equal_discriminates():
    assert not subspace_equal(catalogue("2c", (0, 0)), catalogue("2c", (1, 0)))
    spec = catalogue("3b")
    reordered = SubalgebraSpec("3b-r", None, list(reversed(spec.basis)))
    assert subspace_equal(spec, reordered)
    assert subspace_equal(catalogue("p1"), catalogue("gl2_m"))
