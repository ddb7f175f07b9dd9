"""The algebraic side: split G2 as a stabilizer, and the Type-I catalogue.

The ambient setup is R^7 with the 3-form

    omega = sqrt2*(e^167 + e^235) + e^145 - e^246 - e^347

whose stabilizer algebra is a split real form of g2 inside so(4,3) for
the metric 2(e1.e5 + e2.e6 + e3.e7) - (e4)^2.  The maximal parabolic
h^I is parametrized by h(A, v, u, y) with A in gl(2,R), v in R and
u, y in R^2; every subalgebra in the Type-I catalogue lives inside it.

All linear algebra here is exact over Q(sqrt 2) on 49-dimensional
flattened matrices, so dimensions and closure claims are certificates.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from typing import Iterable, NamedTuple, Sequence

from .qsqrt2 import (
    ONE,
    SQRT2,
    ZERO,
    Matrix,
    QSqrt2,
    in_row_span,
    mat_add,
    mat_mul,
    mat_sub,
    rank_exact,
    row_space_basis,
)

N7 = 7


def zero_matrix(n: int = N7) -> Matrix:
    return [[ZERO] * n for _ in range(n)]


def flatten(M: Matrix) -> list:
    return [x for row in M for x in row]


# ----------------------------------------------------------------------
# The defining 3-form and metric.
# ----------------------------------------------------------------------


class ThreeForm:
    """Alternating 3-form on R^7, stored on sorted index triples."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: dict):
        clean = {}
        for key, c in coeffs.items():
            i, j, k = key
            if not (1 <= i < j < k <= N7):
                raise ValueError(f"triple {key} must be strictly increasing in 1..7")
            cq = QSqrt2.coerce(c)
            if cq:
                clean[(i, j, k)] = cq
        object.__setattr__(self, "coeffs", clean)

    def __setattr__(self, name, value):
        raise AttributeError("ThreeForm is immutable")

    def get(self, i: int, j: int, k: int) -> QSqrt2:
        """Coefficient with antisymmetry applied; 0 on repeated indices."""
        if i == j or j == k or i == k:
            return ZERO
        idx = (i, j, k)
        sign = 1
        # Sort the triple with a bubble pass, tracking the permutation sign.
        a, b, c = idx
        if a > b:
            a, b, sign = b, a, -sign
        if b > c:
            b, c, sign = c, b, -sign
        if a > b:
            a, b, sign = b, a, -sign
        val = self.coeffs.get((a, b, c), ZERO)
        return val if sign == 1 else -val

    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, other) -> bool:
        if isinstance(other, ThreeForm):
            return self.coeffs == other.coeffs
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.coeffs.items()))


OMEGA = ThreeForm(
    {
        (1, 6, 7): SQRT2,
        (2, 3, 5): SQRT2,
        (1, 4, 5): ONE,
        (2, 4, 6): -ONE,
        (3, 4, 7): -ONE,
    }
)


def metric_gram() -> Matrix:
    """Gram matrix of 2(e1.e5 + e2.e6 + e3.e7) - (e4)^2."""
    G = zero_matrix()
    for i, j in ((1, 5), (2, 6), (3, 7)):
        G[i - 1][j - 1] = ONE
        G[j - 1][i - 1] = ONE
    G[3][3] = -ONE
    return G


GRAM = metric_gram()


def act_on_threeform(X: Matrix, phi: ThreeForm) -> ThreeForm:
    """Derivation action: (X.phi)(a,b,c) = -phi(Xa,b,c) - phi(a,Xb,c) - phi(a,b,Xc)."""
    out = {}
    for i, j, k in combinations(range(1, N7 + 1), 3):
        total = ZERO
        for m in range(1, N7 + 1):
            total = total + X[m - 1][i - 1] * phi.get(m, j, k)
            total = total + X[m - 1][j - 1] * phi.get(i, m, k)
            total = total + X[m - 1][k - 1] * phi.get(i, j, m)
        if total:
            out[(i, j, k)] = -total
    return ThreeForm(out)


def is_in_g2star(X: Matrix) -> bool:
    return act_on_threeform(X, OMEGA).is_zero()


def is_in_so43(X: Matrix) -> bool:
    Xt = [list(col) for col in zip(*X)]
    skew = mat_add(mat_mul(Xt, GRAM), mat_mul(GRAM, X))
    return all(not x for row in skew for x in row)


# ----------------------------------------------------------------------
# The h(A, v, u, y) parametrization of the maximal parabolic.
# ----------------------------------------------------------------------


class HParams(NamedTuple):
    A: tuple  # ((a1, a2), (a3, a4)) of QSqrt2
    v: QSqrt2
    u: tuple  # (u1, u2)
    y: tuple  # (y1, y2)

    @staticmethod
    def make(A=((0, 0), (0, 0)), v=0, u=(0, 0), y=(0, 0)) -> "HParams":
        q = QSqrt2.coerce
        return HParams(
            ((q(A[0][0]), q(A[0][1])), (q(A[1][0]), q(A[1][1]))),
            q(v),
            (q(u[0]), q(u[1])),
            (q(y[0]), q(y[1])),
        )

    def is_zero(self) -> bool:
        return not (
            any(x for row in self.A for x in row)
            or self.v
            or any(self.u)
            or any(self.y)
        )


def h_matrix(params: HParams) -> Matrix:
    (a1, a2), (a3, a4) = params.A
    v = params.v
    u1, u2 = params.u
    y1, y2 = params.y
    tr = a1 + a4
    s = SQRT2
    return [
        [tr, -u2, u1, s * v, ZERO, -y1, -y2],
        [ZERO, a1, a2, s * u1, y1, ZERO, v],
        [ZERO, a3, a4, s * u2, y2, -v, ZERO],
        [ZERO, ZERO, ZERO, ZERO, s * v, s * u1, s * u2],
        [ZERO, ZERO, ZERO, ZERO, -tr, ZERO, ZERO],
        [ZERO, ZERO, ZERO, ZERO, u2, -a1, -a3],
        [ZERO, ZERO, ZERO, ZERO, -u1, -a2, -a4],
    ]


def h(A=((0, 0), (0, 0)), v=0, u=(0, 0), y=(0, 0)) -> Matrix:
    return h_matrix(HParams.make(A, v, u, y))


def decompose_h(M: Matrix) -> tuple[HParams, Matrix]:
    """Read off h-pattern parameters; residual = M - h_matrix(params).

    The residual is zero exactly when M lies in the parabolic.
    """
    half = QSqrt2(0, Fraction(1, 2))  # 1/sqrt2
    params = HParams(
        ((M[1][1], M[1][2]), (M[2][1], M[2][2])),
        M[0][3] * half,
        (M[3][5] * half, M[3][6] * half),
        (-M[0][5], -M[0][6]),
    )
    return params, mat_sub(M, h_matrix(params))


def bracket(X: Matrix, Y: Matrix) -> Matrix:
    return mat_sub(mat_mul(X, Y), mat_mul(Y, X))


# ----------------------------------------------------------------------
# Subalgebra catalogue.
# ----------------------------------------------------------------------


class SubalgebraSpec:
    """A named subalgebra of the parabolic with an exact basis."""

    __slots__ = ("name", "params", "basis", "_rows")

    def __init__(self, name: str, params, basis: list, check: bool = True):
        self.name = name
        self.params = params
        self.basis = [
            [[QSqrt2.coerce(x) for x in row] for row in M] for M in basis
        ]
        rows = [flatten(M) for M in self.basis]
        if check and rows:
            if rank_exact(rows) != len(rows):
                raise ValueError(f"{name}: basis is linearly dependent")
        self._rows = row_space_basis(rows)
        if check:
            for i, X in enumerate(self.basis):
                for Y in self.basis[i + 1 :]:
                    if not self.contains(bracket(X, Y)):
                        raise ValueError(f"{name}: not closed under bracket")

    @property
    def dim(self) -> int:
        return len(self._rows)

    def contains(self, X: Matrix) -> bool:
        return in_row_span(self._rows, flatten(X))

    def __repr__(self) -> str:
        p = f", {self.params!r}" if self.params is not None else ""
        return f"SubalgebraSpec({self.name!r}{p}, dim={self.dim})"


def subspace_equal(S1: SubalgebraSpec, S2: SubalgebraSpec) -> bool:
    return (
        S1.dim == S2.dim
        and all(S2.contains(X) for X in S1.basis)
        and all(S1.contains(X) for X in S2.basis)
    )


def bracket_closure(gens: Iterable[Matrix], name: str = "closure") -> SubalgebraSpec:
    """Smallest bracket-closed subspace containing the generators."""
    basis: list[Matrix] = []
    rows: list = []
    queue = [[[QSqrt2.coerce(x) for x in row] for row in M] for M in gens]
    while queue:
        X = queue.pop()
        if in_row_span(rows, flatten(X)):
            continue
        for Y in basis:
            queue.append(bracket(X, Y))
        basis.append(X)
        rows = row_space_basis(rows + [flatten(X)])
    return SubalgebraSpec(name, None, basis, check=False)


# gl(2) pieces used by the catalogue, in (A, label) form.
_GL2 = {
    "sl2": [((1, 0), (0, -1)), ((0, 1), (0, 0)), ((0, 0), (1, 0))],
    "gl2": [((1, 0), (0, 0)), ((0, 1), (0, 0)), ((0, 0), (1, 0)), ((0, 0), (0, 1))],
    "co2": [((1, 0), (0, 1)), ((0, -1), (1, 0))],
    "b2": [((1, 0), (0, 0)), ((0, 1), (0, 0)), ((0, 0), (0, 1))],
    "b2hat": [((1, 0), (0, 1)), ((0, 1), (0, 0))],
    "d": [((1, 0), (0, 0)), ((0, 0), (0, 1))],
    "N": [((0, 1), (0, 0))],
    "S": [((1, 1), (0, 1))],
}

MAT_N = ((0, 1), (0, 0))


def m_space(i: int = 1, j: int = 1) -> list:
    """Basis of m(i,j,2): the v part (i=1), the u1 part (j=1), both y parts."""
    if i not in (0, 1) or j not in (0, 1):
        raise ValueError("m(i,j,2) needs i, j in {0, 1}")
    out = []
    if i:
        out.append(h(v=1))
    if j:
        out.append(h(u=(1, 0)))
    out.append(h(y=(1, 0)))
    out.append(h(y=(0, 1)))
    return out


def _m_full() -> list:
    return [h(v=1), h(u=(1, 0)), h(u=(0, 1)), h(y=(1, 0)), h(y=(0, 1))]


CATALOGUE_NAMES = (
    "p1",
    "sl2_m",
    "gl2_m",
    "co2_m",
    "b2_m",
    "b2hat_m",
    "d_m",
    "Ca_m",
    "S_m",
    "s_lambda_m",
    "diag1mu_m",
    "N_m",
    "2b",
    "2c",
    "3b",
    "4b",
    "m",
)

# Which catalogue entries take a parameter, and a short description.
CATALOGUE_PARAMS = {
    "Ca_m": "a (scalar)",
    "s_lambda_m": "lambda (scalar)",
    "diag1mu_m": "mu (scalar in [-1, 1])",
    "2c": "(i, j) in {(0,0), (1,0), (1,1)}",
    "4b": "j in {0, 1}",
}


def catalogue(name: str, params=None) -> SubalgebraSpec:
    """Construct a catalogue subalgebra by name, validating closure."""
    if name == "p1":
        basis = [h(A=A) for A in _GL2["gl2"]] + _m_full()
    elif name == "m":
        basis = _m_full()
    elif name == "trivial":
        basis = []
    elif name.endswith("_m") and name[:-2] in _GL2:
        basis = [h(A=A) for A in _GL2[name[:-2]]] + _m_full()
    elif name == "Ca_m":
        if params is None:
            raise ValueError("Ca_m needs the parameter a")
        a = QSqrt2.coerce(params)
        basis = [h(A=((a, -1), (1, a)))] + _m_full()
    elif name == "s_lambda_m":
        if params is None:
            raise ValueError("s_lambda_m needs the parameter lambda")
        lam = QSqrt2.coerce(params)
        basis = [h(A=((lam, 0), (0, lam - 1))), h(A=MAT_N)] + _m_full()
    elif name == "diag1mu_m":
        if params is None:
            raise ValueError("diag1mu_m needs the parameter mu")
        mu = QSqrt2.coerce(params)
        if mu < -1 or mu > 1:
            raise ValueError("diag1mu_m needs mu in [-1, 1]")
        basis = [h(A=((1, 0), (0, mu)))] + _m_full()
    elif name == "2b":
        basis = [h(A=((1, 0), (0, 0)), u=(0, 1)), h(A=MAT_N)] + m_space(1, 1)
    elif name == "2c":
        if params not in ((0, 0), (1, 0), (1, 1)):
            raise ValueError("2c needs (i, j) in {(0,0), (1,0), (1,1)}")
        i, j = params
        basis = [h(A=((2, 0), (0, 1))), h(A=MAT_N, u=(0, 1))] + m_space(i, j)
    elif name == "3b":
        basis = [h(A=((1, 0), (0, 0)), u=(0, 1))] + m_space(1, 1)
    elif name == "4b":
        if params not in (0, 1):
            raise ValueError("4b needs j in {0, 1}")
        basis = [h(A=MAT_N, u=(0, 1))] + m_space(1, params)
    else:
        raise ValueError(f"unknown catalogue name {name!r}")
    return SubalgebraSpec(name, params, basis)
