"""Exact pseudo-Riemannian geometry for unit-pivot coframes.

A metric enters as a coframe matrix B with Expr entries, b^i = sum_j
B[i][j] dx_j, and the metric is g = B^T G B for the constant frame
Gram matrix G of signature (4,3).  Everything downstream — Christoffel
symbols, the connection form theta^i_j = b^i(nabla b_j), curvature
operators R(b_k, b_l) and their covariant derivatives — is computed
exactly in the Expr class.

Christoffel symbols are computed in coordinates from the metric
formula and then converted to the frame; a second, independent route
through the Koszul formula on frame structure functions is provided
for cross-checking.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from typing import Sequence

from .qsqrt2 import ONE, ZERO, QSqrt2, inertia_symmetric
from .symexpr import EXPR_ONE, EXPR_ZERO, NVAR, Expr, ExprFraction

ORIGIN = (Fraction(0),) * NVAR

# The constant frame Gram matrix: <b_i, b_j> pairs (1,5), (2,6), (3,7)
# give 1, and <b_4, b_4> = -1.  It squares to the identity.
_PAIR = {1: 5, 5: 1, 2: 6, 6: 2, 3: 7, 7: 3}


def _gram_entry(i: int, j: int) -> QSqrt2:
    if i == j == 4:
        return -ONE
    return ONE if _PAIR.get(i) == j else ZERO


GRAM_SIGNS = [[_gram_entry(i, j) for j in range(1, 8)] for i in range(1, 8)]

# Single home of the curvature sign convention: R = dtheta + theta^theta
# with this overall sign, fixed by the worked examples' printed values.
CURVATURE_SIGN = 1


class OneForm:
    """A 1-form sum_k coeffs[k] dx_{k+1} with Expr coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[Expr]):
        cs = tuple(coeffs)
        if len(cs) != NVAR:
            raise ValueError("OneForm needs 7 components")
        object.__setattr__(self, "coeffs", cs)

    def __setattr__(self, name, value):
        raise AttributeError("OneForm is immutable")

    def component(self, k: int) -> Expr:
        return self.coeffs[k - 1]

    def __add__(self, other: "OneForm") -> "OneForm":
        return OneForm([a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other: "OneForm") -> "OneForm":
        return OneForm([a - b for a, b in zip(self.coeffs, other.coeffs)])

    def scale(self, e) -> "OneForm":
        return OneForm([e * a for a in self.coeffs])

    def wedge(self, other: "OneForm") -> "TwoForm":
        comps = {}
        for a, b in combinations(range(1, NVAR + 1), 2):
            c = self.coeffs[a - 1] * other.coeffs[b - 1] - self.coeffs[b - 1] * other.coeffs[a - 1]
            if c:
                comps[(a, b)] = c
        return TwoForm(comps)

    def is_zero(self) -> bool:
        return all(not c for c in self.coeffs)

    def __eq__(self, other) -> bool:
        if isinstance(other, OneForm):
            return self.coeffs == other.coeffs
        return NotImplemented

    def __hash__(self):
        return hash(self.coeffs)


ZERO_ONE_FORM = OneForm([EXPR_ZERO] * NVAR)


class TwoForm:
    """A 2-form over the 21 ordered pairs dx_(a,b), a < b."""

    __slots__ = ("comps",)

    def __init__(self, comps: dict):
        clean = {}
        for (a, b), c in comps.items():
            if not 1 <= a < b <= NVAR:
                raise ValueError(f"pair {(a, b)} must be increasing in 1..7")
            if c:
                clean[(a, b)] = c
        object.__setattr__(self, "comps", clean)

    def __setattr__(self, name, value):
        raise AttributeError("TwoForm is immutable")

    def get(self, a: int, b: int) -> Expr:
        if a == b:
            return EXPR_ZERO
        if a < b:
            return self.comps.get((a, b), EXPR_ZERO)
        return -self.comps.get((b, a), EXPR_ZERO)

    def __add__(self, other: "TwoForm") -> "TwoForm":
        out = dict(self.comps)
        for key, c in other.comps.items():
            out[key] = out.get(key, EXPR_ZERO) + c
        return TwoForm(out)

    def __sub__(self, other: "TwoForm") -> "TwoForm":
        out = dict(self.comps)
        for key, c in other.comps.items():
            out[key] = out.get(key, EXPR_ZERO) - c
        return TwoForm(out)

    def scale(self, e: Expr) -> "TwoForm":
        return TwoForm({key: e * c for key, c in self.comps.items()})

    def is_zero(self) -> bool:
        return not self.comps

    def __eq__(self, other) -> bool:
        if isinstance(other, TwoForm):
            return self.comps == other.comps
        return NotImplemented


def exterior_derivative(w: OneForm) -> TwoForm:
    comps = {}
    for a, b in combinations(range(1, NVAR + 1), 2):
        c = w.coeffs[b - 1].ddx(a) - w.coeffs[a - 1].ddx(b)
        if c:
            comps[(a, b)] = c
    return TwoForm(comps)


class UnsupportedCoframeError(ValueError):
    """The coframe has a non-unit elimination pivot."""


class Coframe:
    """A coframe b^i = sum_j B[i][j] dx_j with unit elimination pivots."""

    __slots__ = ("B", "_cache")

    def __init__(self, B: Sequence[Sequence[Expr]]):
        rows = [tuple(row) for row in B]
        if len(rows) != NVAR or any(len(r) != NVAR for r in rows):
            raise ValueError("coframe matrix must be 7x7")
        object.__setattr__(self, "B", rows)
        object.__setattr__(self, "_cache", {})

    def __setattr__(self, name, value):
        raise AttributeError("Coframe is immutable (caches live in _cache)")

    def row(self, i: int) -> OneForm:
        return OneForm(self.B[i - 1])

    @staticmethod
    def identity() -> "Coframe":
        return Coframe(
            [[EXPR_ONE if i == j else EXPR_ZERO for j in range(NVAR)] for i in range(NVAR)]
        )

    def inverse(self) -> list:
        """B^{-1} as an Expr matrix, via unit-pivot elimination."""
        if "inv" not in self._cache:
            self._cache["inv"] = _invert_unit_pivot(self.B)
        return self._cache["inv"]


def _invert_unit_pivot(B) -> list:
    n = NVAR
    aug = [list(B[i]) + [EXPR_ONE if i == j else EXPR_ZERO for j in range(n)] for i in range(n)]
    done: list = []
    rows = list(range(n))
    for col in range(n):
        pos = next(
            (r for r in rows if aug[r][col] and aug[r][col].as_unit() is not None),
            None,
        )
        if pos is None:
            raise UnsupportedCoframeError(
                "coframe outside supported class: no unit pivot in column "
                f"{col + 1}"
            )
        rows.remove(pos)
        pivot = aug[pos][col]
        aug[pos] = [x.divide_unit(pivot) for x in aug[pos]]
        for r in range(n):
            if r != pos and aug[r][col]:
                factor = aug[r][col]
                aug[r] = [x - factor * y for x, y in zip(aug[r], aug[pos])]
        done.append((col, pos))
    inv = [[EXPR_ZERO] * n for _ in range(n)]
    for col, pos in done:
        inv[col] = aug[pos][n:]
    return inv


def frame_inverse(c: Coframe) -> list:
    """B^{-1} as ExprFraction entries (unit denominators clear to 1)."""
    return [[ExprFraction(x) for x in row] for row in c.inverse()]


def metric_components(c: Coframe) -> list:
    """Coordinate metric g = B^T G B, a symmetric Expr matrix."""
    if "g" in c._cache:
        return c._cache["g"]
    B = c.B
    g = [[EXPR_ZERO] * NVAR for _ in range(NVAR)]
    for a in range(NVAR):
        for b in range(a, NVAR):
            total = EXPR_ZERO
            for i, j in ((1, 5), (2, 6), (3, 7)):
                total = total + B[i - 1][a] * B[j - 1][b] + B[j - 1][a] * B[i - 1][b]
            total = total - B[3][a] * B[3][b]
            g[a][b] = total
            g[b][a] = total
    c._cache["g"] = g
    return g


def metric_inverse(c: Coframe) -> list:
    """g^{-1} = B^{-1} G B^{-T}, exact."""
    if "ginv" in c._cache:
        return c._cache["ginv"]
    Binv = c.inverse()
    ginv = [[EXPR_ZERO] * NVAR for _ in range(NVAR)]
    for a in range(NVAR):
        for b in range(a, NVAR):
            total = EXPR_ZERO
            for i, j in ((1, 5), (2, 6), (3, 7)):
                total = total + Binv[a][i - 1] * Binv[b][j - 1] + Binv[a][j - 1] * Binv[b][i - 1]
            total = total - Binv[a][3] * Binv[b][3]
            ginv[a][b] = total
            ginv[b][a] = total
    c._cache["ginv"] = ginv
    return ginv


def signature_at(c: Coframe, pt=ORIGIN) -> tuple:
    """Metric signature at pt, ordered (negative, positive) to match the
    catalogue labels."""
    g = metric_components(c)
    gval = [[x.eval_exact(pt) for x in row] for row in g]
    pos, neg, zero = inertia_symmetric(gval)
    if zero:
        raise ValueError("metric is degenerate at the point")
    return (neg, pos)


def christoffels(c: Coframe) -> list:
    """Gam[k][l][m] = Gamma^l_{km}, coordinate Christoffel symbols.

    Gamma^l_{ij} = 1/2 sum_s ginv[l][s] (dg_i[j][s] + dg_j[i][s] - dg_s[i][j]).
    """
    if "gamma" in c._cache:
        return c._cache["gamma"]
    g = metric_components(c)
    ginv = metric_inverse(c)
    dg = [[[g[i][j].ddx(k + 1) for j in range(NVAR)] for i in range(NVAR)] for k in range(NVAR)]
    half = QSqrt2(Fraction(1, 2))
    gamma = [[[EXPR_ZERO] * NVAR for _ in range(NVAR)] for _ in range(NVAR)]
    for i in range(NVAR):
        for j in range(i, NVAR):
            for l in range(NVAR):
                total = EXPR_ZERO
                for s in range(NVAR):
                    if ginv[l][s]:
                        term = dg[i][j][s] + dg[j][i][s] - dg[s][i][j]
                        if term:
                            total = total + ginv[l][s] * term
                total = half * total
                gamma[i][l][j] = total
                gamma[j][l][i] = total
    c._cache["gamma"] = gamma
    return gamma


def _mat_mul_expr(A, B) -> list:
    n = len(A)
    out = [[EXPR_ZERO] * n for _ in range(n)]
    for i in range(n):
        Ai = A[i]
        for j in range(n):
            total = EXPR_ZERO
            for t in range(n):
                if Ai[t] and B[t][j]:
                    total = total + Ai[t] * B[t][j]
            out[i][j] = total
    return out


def _mat_add_expr(A, B) -> list:
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(A, B)]


def _mat_sub_expr(A, B) -> list:
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(A, B)]


class ConnectionForm:
    """theta^i_j = b^i(nabla b_j): 7x7 OneForms, frame indices."""

    __slots__ = ("coord_matrices", "one_forms", "_cache")

    def __init__(self, coord_matrices: list):
        object.__setattr__(self, "coord_matrices", coord_matrices)
        object.__setattr__(
            self,
            "one_forms",
            [
                [
                    OneForm([coord_matrices[k][i][j] for k in range(NVAR)])
                    for j in range(NVAR)
                ]
                for i in range(NVAR)
            ],
        )
        object.__setattr__(self, "_cache", {})

    def __setattr__(self, name, value):
        raise AttributeError("ConnectionForm is immutable")

    def coord(self, k: int) -> list:
        """theta(d/dx_k) as an Expr matrix."""
        return self.coord_matrices[k - 1]

    def frame_matrix(self, c: Coframe, z: int) -> list:
        """theta(b_z) as an Expr matrix."""
        key = ("frame", z)
        if key not in self._cache:
            Binv = c.inverse()
            out = [[EXPR_ZERO] * NVAR for _ in range(NVAR)]
            for a in range(NVAR):
                coeff = Binv[a][z - 1]
                if not coeff:
                    continue
                T = self.coord_matrices[a]
                for i in range(NVAR):
                    for j in range(NVAR):
                        if T[i][j]:
                            out[i][j] = out[i][j] + coeff * T[i][j]
            self._cache[key] = out
        return self._cache[key]


def levi_civita(c: Coframe) -> ConnectionForm:
    """The Levi-Civita connection form of the coframe metric.

    theta^i_j(d_k) = sum_l B[i][l] (d_k Binv[l][j] + sum_m Gamma^l_{km} Binv[m][j]).
    """
    if "theta" in c._cache:
        return c._cache["theta"]
    B = [list(row) for row in c.B]
    Binv = c.inverse()
    gamma = christoffels(c)
    mats = []
    for k in range(NVAR):
        dBinv = [[Binv[l][j].ddx(k + 1) for j in range(NVAR)] for l in range(NVAR)]
        inner = _mat_add_expr(dBinv, _mat_mul_expr(gamma[k], Binv))
        mats.append(_mat_mul_expr(B, inner))
    theta = ConnectionForm(mats)
    c._cache["theta"] = theta
    return theta


def koszul_connection(c: Coframe) -> ConnectionForm:
    """Independent route: Koszul formula on frame structure functions.

    With constant frame metric G, 2<nabla_{b_i} b_j, b_k> =
    c_{kij} - c_{ijk} + c_{jki} where c_{kij} = <[b_i, b_j], b_k>.
    """
    B = c.B
    Binv = c.inverse()
    # [b_i, b_j]^m in coordinates.
    dBinv = [
        [[Binv[m][i].ddx(p + 1) for i in range(NVAR)] for m in range(NVAR)]
        for p in range(NVAR)
    ]
    cm = [[[EXPR_ZERO] * NVAR for _ in range(NVAR)] for _ in range(NVAR)]
    for i in range(NVAR):
        for j in range(i + 1, NVAR):
            for m in range(NVAR):
                total = EXPR_ZERO
                for p in range(NVAR):
                    if Binv[p][i] and dBinv[p][m][j]:
                        total = total + Binv[p][i] * dBinv[p][m][j]
                    if Binv[p][j] and dBinv[p][m][i]:
                        total = total - Binv[p][j] * dBinv[p][m][i]
                cm[i][j][m] = total
                cm[j][i][m] = -total
    # Frame components c^k_{ij}, then lower with G.
    ck = [[[EXPR_ZERO] * NVAR for _ in range(NVAR)] for _ in range(NVAR)]
    for i in range(NVAR):
        for j in range(NVAR):
            for k in range(NVAR):
                total = EXPR_ZERO
                for m in range(NVAR):
                    if B[k][m] and cm[i][j][m]:
                        total = total + B[k][m] * cm[i][j][m]
                ck[i][j][k] = total

    def lower(k: int, i: int, j: int) -> Expr:
        # c_{kij} = sum_m G[k][m] c^m_{ij}; G has one entry per row.
        if k == 3:
            return -ck[i][j][3]
        return ck[i][j][_PAIR[k + 1] - 1]

    half = QSqrt2(Fraction(1, 2))
    # <nabla_{b_i} b_j, b_k>, then raise with G to frame components.
    frame_theta = [[[EXPR_ZERO] * NVAR for _ in range(NVAR)] for _ in range(NVAR)]
    for i in range(NVAR):
        for j in range(NVAR):
            for k in range(NVAR):
                w = half * (lower(k, i, j) - lower(i, j, k) + lower(j, k, i))
                frame_theta[i][j][k] = w
    # theta^m_j(b_i) = sum_k G[m][k] <nabla_{b_i} b_j, b_k>.
    theta_b = [[[EXPR_ZERO] * NVAR for _ in range(NVAR)] for _ in range(NVAR)]
    for i in range(NVAR):
        for j in range(NVAR):
            for m in range(NVAR):
                if m == 3:
                    theta_b[i][m][j] = -frame_theta[i][j][3]
                else:
                    theta_b[i][m][j] = frame_theta[i][j][_PAIR[m + 1] - 1]
    # Convert to coordinate matrices: theta(d_p) = sum_i B[i][p] theta(b_i).
    mats = []
    for p in range(NVAR):
        out = [[EXPR_ZERO] * NVAR for _ in range(NVAR)]
        for i in range(NVAR):
            coeff = B[i][p]
            if not coeff:
                continue
            for m in range(NVAR):
                for j in range(NVAR):
                    if theta_b[i][m][j]:
                        out[m][j] = out[m][j] + coeff * theta_b[i][m][j]
        mats.append(out)
    return ConnectionForm(mats)


class CurvatureField:
    """R = dtheta + theta ^ theta as a 7x7 matrix of TwoForms."""

    __slots__ = ("pair_matrices", "two_forms", "_cache")

    def __init__(self, pair_matrices: dict):
        object.__setattr__(self, "pair_matrices", pair_matrices)
        tf = []
        for i in range(NVAR):
            row = []
            for j in range(NVAR):
                comps = {}
                for key, M in pair_matrices.items():
                    if M[i][j]:
                        comps[key] = M[i][j]
                row.append(TwoForm(comps))
            tf.append(row)
        object.__setattr__(self, "two_forms", tf)
        object.__setattr__(self, "_cache", {})

    def __setattr__(self, name, value):
        raise AttributeError("CurvatureField is immutable")

    def pair(self, a: int, b: int) -> list:
        """R(d_a, d_b) as an Expr matrix (frame endomorphism indices)."""
        if a == b:
            return [[EXPR_ZERO] * NVAR for _ in range(NVAR)]
        if a < b:
            return self.pair_matrices.get((a, b), [[EXPR_ZERO] * NVAR for _ in range(NVAR)])
        M = self.pair(b, a)
        return [[-x for x in row] for row in M]

    def is_zero(self) -> bool:
        return all(
            not x for M in self.pair_matrices.values() for row in M for x in row
        )

    def frame_function(self, c: Coframe, k: int, l: int) -> list:
        """R(b_k, b_l) as an Expr matrix function."""
        key = ("frame", k, l)
        if key in self._cache:
            return self._cache[key]
        Binv = c.inverse()
        out = [[EXPR_ZERO] * NVAR for _ in range(NVAR)]
        for (a, b), M in self.pair_matrices.items():
            coeff = Binv[a - 1][k - 1] * Binv[b - 1][l - 1] - Binv[b - 1][k - 1] * Binv[a - 1][l - 1]
            if not coeff:
                continue
            for i in range(NVAR):
                for j in range(NVAR):
                    if M[i][j]:
                        out[i][j] = out[i][j] + coeff * M[i][j]
        self._cache[key] = out
        return out


def curvature(c: Coframe, theta: ConnectionForm | None = None) -> CurvatureField:
    """Curvature R(d_a, d_b) = d_a theta_b - d_b theta_a + [theta_a, theta_b]."""
    if "curv" in c._cache:
        return c._cache["curv"]
    if theta is None:
        theta = levi_civita(c)
    pair_matrices = {}
    for a, b in combinations(range(1, NVAR + 1), 2):
        Ta = theta.coord(a)
        Tb = theta.coord(b)
        M = _mat_sub_expr(
            [[x.ddx(a) for x in row] for row in Tb],
            [[x.ddx(b) for x in row] for row in Ta],
        )
        M = _mat_add_expr(M, _mat_sub_expr(_mat_mul_expr(Ta, Tb), _mat_mul_expr(Tb, Ta)))
        if CURVATURE_SIGN != 1:
            M = [[-x for x in row] for row in M]
        if any(x for row in M for x in row):
            pair_matrices[(a, b)] = M
    field = CurvatureField(pair_matrices)
    c._cache["curv"] = field
    return field


def eval_matrix(M, pt) -> list:
    return [[x.eval_exact(pt) for x in row] for row in M]


def curvature_operator(Rf: CurvatureField, c: Coframe, k: int, l: int, pt=ORIGIN) -> list:
    """R(b_k, b_l) at pt as an exact 7x7 matrix."""
    Binv_at = eval_matrix(c.inverse(), pt)
    out = [[ZERO] * NVAR for _ in range(NVAR)]
    for (a, b), M in Rf.pair_matrices.items():
        coeff = (
            Binv_at[a - 1][k - 1] * Binv_at[b - 1][l - 1]
            - Binv_at[b - 1][k - 1] * Binv_at[a - 1][l - 1]
        )
        if not coeff:
            continue
        for i in range(NVAR):
            row = M[i]
            for j in range(NVAR):
                if row[j]:
                    out[i][j] = out[i][j] + coeff * row[j].eval_exact(pt)
    return out


def _qmat_mul(A, B):
    n = len(A)
    return [
        [sum((A[i][t] * B[t][j] for t in range(n)), ZERO) for j in range(n)]
        for i in range(n)
    ]


def _qmat_commutator(A, B):
    AB = _qmat_mul(A, B)
    BA = _qmat_mul(B, A)
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(AB, BA)]


def _frame_derivative(c: Coframe, M, z: int) -> list:
    """b_z applied entrywise: sum_a Binv[a][z] d_a M."""
    Binv = c.inverse()
    out = [[EXPR_ZERO] * NVAR for _ in range(NVAR)]
    for a in range(NVAR):
        coeff = Binv[a][z - 1]
        if not coeff:
            continue
        for i in range(NVAR):
            for j in range(NVAR):
                d = M[i][j].ddx(a + 1)
                if d:
                    out[i][j] = out[i][j] + coeff * d
    return out


def nabla_R(
    Rf: CurvatureField,
    theta: ConnectionForm,
    c: Coframe,
    z: int,
    k: int,
    l: int,
    pt=ORIGIN,
) -> list:
    """(nabla_{b_z} R)(b_k, b_l) at pt, exact.

    Leibniz form: derivative of the endomorphism R(b_k, b_l) along b_z,
    a theta(b_z) commutator on the endomorphism slot, and corrections
    for nabla_{b_z} b_k and nabla_{b_z} b_l in the argument slots.
    """
    Rkl_fn = Rf.frame_function(c, k, l)
    deriv = eval_matrix(_frame_derivative(c, Rkl_fn, z), pt)
    theta_z = eval_matrix(theta.frame_matrix(c, z), pt)
    Rkl = curvature_operator(Rf, c, k, l, pt)
    out = [
        [x + y for x, y in zip(ra, rb)]
        for ra, rb in zip(deriv, _qmat_commutator(theta_z, Rkl))
    ]
    for m in range(1, NVAR + 1):
        coef_k = theta_z[m - 1][k - 1]
        if coef_k:
            Rml = curvature_operator(Rf, c, m, l, pt)
            out = [
                [x - coef_k * y for x, y in zip(ra, rb)] for ra, rb in zip(out, Rml)
            ]
        coef_l = theta_z[m - 1][l - 1]
        if coef_l:
            Rkm = curvature_operator(Rf, c, k, m, pt)
            out = [
                [x - coef_l * y for x, y in zip(ra, rb)] for ra, rb in zip(out, Rkm)
            ]
    return out


def nabla_R_function(
    Rf: CurvatureField, theta: ConnectionForm, c: Coframe, z: int, k: int, l: int
) -> list:
    """(nabla_{b_z} R)(b_k, b_l) as an Expr matrix function (cached)."""
    key = ("nabla", z, k, l)
    if key in Rf._cache:
        return Rf._cache[key]
    Rkl_fn = Rf.frame_function(c, k, l)
    theta_z = theta.frame_matrix(c, z)
    out = _mat_add_expr(
        _frame_derivative(c, Rkl_fn, z),
        _mat_sub_expr(_mat_mul_expr(theta_z, Rkl_fn), _mat_mul_expr(Rkl_fn, theta_z)),
    )
    for m in range(1, NVAR + 1):
        coef_k = theta_z[m - 1][k - 1]
        if coef_k:
            Rml = Rf.frame_function(c, m, l)
            out = [
                [x - coef_k * y for x, y in zip(ra, rb)] for ra, rb in zip(out, Rml)
            ]
        coef_l = theta_z[m - 1][l - 1]
        if coef_l:
            Rkm = Rf.frame_function(c, k, m)
            out = [
                [x - coef_l * y for x, y in zip(ra, rb)] for ra, rb in zip(out, Rkm)
            ]
    Rf._cache[key] = out
    return out


def nabla2_R(
    Rf: CurvatureField,
    theta: ConnectionForm,
    c: Coframe,
    z2: int,
    z1: int,
    k: int,
    l: int,
    pt=ORIGIN,
) -> list:
    """(nabla_{b_z2} nabla R)(b_z1; b_k, b_l) at pt, exact."""
    fn = nabla_R_function(Rf, theta, c, z1, k, l)
    deriv = eval_matrix(_frame_derivative(c, fn, z2), pt)
    theta_z2 = eval_matrix(theta.frame_matrix(c, z2), pt)
    val = eval_matrix(fn, pt)
    out = [
        [x + y for x, y in zip(ra, rb)]
        for ra, rb in zip(deriv, _qmat_commutator(theta_z2, val))
    ]
    for m in range(1, NVAR + 1):
        for pos, idx in ((0, z1), (1, k), (2, l)):
            coef = theta_z2[m - 1][idx - 1]
            if coef:
                shifted = [z1, k, l]
                shifted[pos] = m
                corr = nabla_R(Rf, theta, c, shifted[0], shifted[1], shifted[2], pt)
                out = [
                    [x - coef * y for x, y in zip(ra, rb)]
                    for ra, rb in zip(out, corr)
                ]
    return out


# ----------------------------------------------------------------------
# Residual checks used by tests and the verification pipeline.
# ----------------------------------------------------------------------


def structure_equation_residuals(c: Coframe, theta: ConnectionForm) -> list:
    """db^i + sum_j theta^i_j ^ b^j for each i (zero for torsion-free)."""
    out = []
    for i in range(1, NVAR + 1):
        total = exterior_derivative(c.row(i))
        for j in range(1, NVAR + 1):
            w = theta.one_forms[i - 1][j - 1]
            if not w.is_zero():
                total = total + w.wedge(c.row(j))
        out.append(total)
    return out


def metric_compatibility_residuals(theta: ConnectionForm) -> list:
    """theta^T G + G theta per coordinate direction (zero when metric)."""
    out = []
    for k in range(1, NVAR + 1):
        T = theta.coord(k)
        res = [[EXPR_ZERO] * NVAR for _ in range(NVAR)]
        for i in range(NVAR):
            for j in range(NVAR):
                total = EXPR_ZERO
                for m in range(NVAR):
                    if GRAM_SIGNS[m][j] and T[m][i]:
                        total = total + GRAM_SIGNS[m][j] * T[m][i]
                    if GRAM_SIGNS[i][m] and T[m][j]:
                        total = total + GRAM_SIGNS[i][m] * T[m][j]
                res[i][j] = total
        out.append(res)
    return out


def is_g_skew(M) -> bool:
    """Does the frame endomorphism M satisfy M^T G + G M = 0?"""
    for i in range(NVAR):
        for j in range(NVAR):
            total = ZERO
            for m in range(NVAR):
                if GRAM_SIGNS[m][j]:
                    total = total + M[m][i] * GRAM_SIGNS[m][j]
                if GRAM_SIGNS[i][m]:
                    total = total + GRAM_SIGNS[i][m] * M[m][j]
            if total != ZERO:
                return False
    return True
