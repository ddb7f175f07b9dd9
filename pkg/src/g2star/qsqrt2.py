"""Exact arithmetic in Q(sqrt 2) and dense exact linear algebra.

Everything in this module is exact: scalars are `a + b*sqrt(2)` with
rational `a`, `b` (arbitrary precision), and the elimination routines
pivot on exact nonzero tests.  Q(sqrt 2) is a field, so the only
degenerate case anywhere is division by zero.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence, Union

Rational = Fraction

RationalLike = Union[int, Fraction]
QLike = Union[int, Fraction, "QSqrt2"]


class QSqrt2:
    """An element a + b*sqrt(2) of the quadratic field Q(sqrt 2)."""

    __slots__ = ("a", "b")

    def __init__(self, a: RationalLike = 0, b: RationalLike = 0):
        object.__setattr__(self, "a", a if type(a) is Fraction else Fraction(a))
        object.__setattr__(self, "b", b if type(b) is Fraction else Fraction(b))

    def __setattr__(self, name, value):
        raise AttributeError("QSqrt2 is immutable")

    # -- constructors -------------------------------------------------

    @staticmethod
    def coerce(x: QLike) -> "QSqrt2":
        if isinstance(x, QSqrt2):
            return x
        if isinstance(x, (int, Fraction)):
            return QSqrt2(x)
        raise TypeError(f"cannot coerce {type(x).__name__} into QSqrt2")

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other: QLike):
        if not isinstance(other, (int, Fraction, QSqrt2)):
            return NotImplemented
        o = QSqrt2.coerce(other)
        return QSqrt2(self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __sub__(self, other: QLike):
        if not isinstance(other, (int, Fraction, QSqrt2)):
            return NotImplemented
        o = QSqrt2.coerce(other)
        return QSqrt2(self.a - o.a, self.b - o.b)

    def __rsub__(self, other: QLike) -> "QSqrt2":
        return QSqrt2.coerce(other) - self

    def __mul__(self, other: QLike):
        if not isinstance(other, (int, Fraction, QSqrt2)):
            return NotImplemented
        o = QSqrt2.coerce(other)
        return QSqrt2(self.a * o.a + 2 * self.b * o.b, self.a * o.b + self.b * o.a)

    __rmul__ = __mul__

    def __neg__(self) -> "QSqrt2":
        return QSqrt2(-self.a, -self.b)

    def inverse(self) -> "QSqrt2":
        # (a + b sqrt2)^-1 = (a - b sqrt2) / (a^2 - 2 b^2); the norm is
        # nonzero for nonzero elements because sqrt 2 is irrational.
        norm = self.a * self.a - 2 * self.b * self.b
        if norm == 0:
            raise ZeroDivisionError("division by zero in QSqrt2")
        return QSqrt2(self.a / norm, -self.b / norm)

    def __truediv__(self, other: QLike) -> "QSqrt2":
        return self * QSqrt2.coerce(other).inverse()

    def __rtruediv__(self, other: QLike) -> "QSqrt2":
        return QSqrt2.coerce(other) * self.inverse()

    def __pow__(self, n: int) -> "QSqrt2":
        if not isinstance(n, int):
            raise TypeError("QSqrt2 powers must be integers")
        if n < 0:
            return self.inverse() ** (-n)
        out = ONE
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # -- predicates and ordering --------------------------------------

    def __bool__(self) -> bool:
        return bool(self.a) or bool(self.b)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction, QSqrt2)):
            o = QSqrt2.coerce(other)
            return self.a == o.a and self.b == o.b
        return NotImplemented

    def __hash__(self):
        if not self.b:
            return hash(self.a)
        return hash((self.a, self.b))

    def sign(self) -> int:
        """Exact sign of the real number a + b*sqrt(2)."""
        if self.a == 0 and self.b == 0:
            return 0
        if self.a >= 0 and self.b >= 0:
            return 1
        if self.a <= 0 and self.b <= 0:
            return -1
        # Mixed signs: compare a^2 with 2 b^2; the sign follows the
        # component that dominates in absolute value.
        if self.a * self.a > 2 * self.b * self.b:
            return 1 if self.a > 0 else -1
        return 1 if self.b > 0 else -1

    def __lt__(self, other: QLike) -> bool:
        return (self - QSqrt2.coerce(other)).sign() < 0

    def __le__(self, other: QLike) -> bool:
        return (self - QSqrt2.coerce(other)).sign() <= 0

    def __gt__(self, other: QLike) -> bool:
        return (self - QSqrt2.coerce(other)).sign() > 0

    def __ge__(self, other: QLike) -> bool:
        return (self - QSqrt2.coerce(other)).sign() >= 0

    @property
    def is_rational(self) -> bool:
        return self.b == 0

    # -- conversion and rendering --------------------------------------

    def __float__(self) -> float:
        return float(self.a) + float(self.b) * 1.4142135623730951

    def __str__(self) -> str:
        return render_qsqrt2(self)

    def __repr__(self) -> str:
        return f"QSqrt2({self.a!r}, {self.b!r})"


ZERO = QSqrt2(0)
ONE = QSqrt2(1)
SQRT2 = QSqrt2(0, 1)
HALF_SQRT2 = QSqrt2(0, Fraction(1, 2))  # 1/sqrt2


def _render_fraction(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def render_qsqrt2(x: QSqrt2) -> str:
    """Render as `p/q + r/s*sqrt2`, omitting zero terms."""
    if not x:
        return "0"
    parts = []
    if x.a:
        parts.append(_render_fraction(x.a))
    if x.b:
        if x.b == 1:
            s = "sqrt2"
        elif x.b == -1:
            s = "-sqrt2"
        else:
            s = f"{_render_fraction(x.b)}*sqrt2"
        if parts and not s.startswith("-"):
            parts.append("+ " + s)
        elif parts:
            parts.append("- " + s.lstrip("-"))
        else:
            parts.append(s)
    return " ".join(parts)


# ----------------------------------------------------------------------
# Exact dense linear algebra over QSqrt2.
#
# Matrices are plain lists of lists of QSqrt2.  These routines are used
# for everything rank-like in the package: the subalgebra catalogue
# dimension table, bracket closures, operator decompositions.
# ----------------------------------------------------------------------

Matrix = list  # list[list[QSqrt2]]
Vector = list  # list[QSqrt2]


class InconsistentSystem(ValueError):
    """Raised by solve_exact when no exact solution exists."""


def mat(rows: Iterable[Iterable[QLike]]) -> Matrix:
    return [[QSqrt2.coerce(x) for x in row] for row in rows]


def mat_identity(n: int) -> Matrix:
    return [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]


def mat_mul(A: Matrix, B: Matrix) -> Matrix:
    n, k, m = len(A), len(B), len(B[0])
    if len(A[0]) != k:
        raise ValueError("dimension mismatch in mat_mul")
    out = []
    for i in range(n):
        row = []
        Ai = A[i]
        for j in range(m):
            s = ZERO
            for t in range(k):
                if Ai[t] and B[t][j]:
                    s = s + Ai[t] * B[t][j]
            row.append(s)
        out.append(row)
    return out


def mat_sub(A: Matrix, B: Matrix) -> Matrix:
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(A, B)]


def mat_add(A: Matrix, B: Matrix) -> Matrix:
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(A, B)]


def mat_scale(c: QLike, A: Matrix) -> Matrix:
    cq = QSqrt2.coerce(c)
    return [[cq * x for x in row] for row in A]


def mat_transpose(A: Matrix) -> Matrix:
    return [list(col) for col in zip(*A)]


def mat_is_zero(A: Matrix) -> bool:
    return all(not x for row in A for x in row)


def _echelonize(M: Matrix) -> tuple[Matrix, list[int]]:
    """Row-reduce a copy of M; returns (reduced rows, pivot columns).

    Reduced rows are in echelon form with unit pivots and zeros above
    and below each pivot.  Pivot choice is the first exact-nonzero
    entry scanning columns left to right (no magnitude heuristics are
    meaningful in exact arithmetic).
    """
    rows = [list(r) for r in M]
    nrows = len(rows)
    ncols = len(rows[0]) if nrows else 0
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        pivot_row = None
        for i in range(r, nrows):
            if rows[i][c]:
                pivot_row = i
                break
        if pivot_row is None:
            continue
        rows[r], rows[pivot_row] = rows[pivot_row], rows[r]
        inv = rows[r][c].inverse()
        rows[r] = [x * inv for x in rows[r]]
        for i in range(nrows):
            if i != r and rows[i][c]:
                factor = rows[i][c]
                rows[i] = [x - factor * y for x, y in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return rows[:r], pivots


def rank_exact(M: Matrix) -> int:
    if not M:
        return 0
    return len(_echelonize(M)[1])


def solve_exact(M: Matrix, rhs: Sequence[Sequence[QLike]] | Sequence[QLike]) -> Matrix:
    """Solve M x = rhs exactly.

    rhs may be a vector (list of scalars) or a matrix of column right
    hand sides; the result has matching shape.  Underdetermined systems
    return a particular solution with free variables set to zero.
    Raises InconsistentSystem when no solution exists.
    """
    vector_rhs = rhs and not isinstance(rhs[0], (list, tuple))
    bcols: Matrix
    if vector_rhs:
        bcols = [[QSqrt2.coerce(x)] for x in rhs]
    else:
        bcols = [[QSqrt2.coerce(x) for x in row] for row in rhs]
    nrows = len(M)
    ncols = len(M[0]) if nrows else 0
    if len(bcols) != nrows:
        raise ValueError("dimension mismatch in solve_exact")
    m = len(bcols[0]) if bcols else 0
    aug = [list(M[i]) + list(bcols[i]) for i in range(nrows)]
    reduced, pivots = _echelonize(aug)
    sol = [[ZERO] * m for _ in range(ncols)]
    for row, p in zip(reduced, pivots):
        if p >= ncols:
            raise InconsistentSystem("solve_exact: inconsistent system")
        for j in range(m):
            sol[p][j] = row[ncols + j]
    # Rows past the pivots are zero by construction; a pivot in the rhs
    # block was already rejected above.
    if vector_rhs:
        return [row[0] for row in sol]
    return sol


def kernel_basis(M: Matrix) -> list[Vector]:
    """Basis of the exact nullspace {v : M v = 0}."""
    if not M:
        return []
    ncols = len(M[0])
    reduced, pivots = _echelonize(M)
    pivot_set = set(pivots)
    free = [c for c in range(ncols) if c not in pivot_set]
    basis = []
    for fc in free:
        v = [ZERO] * ncols
        v[fc] = ONE
        for row, p in zip(reduced, pivots):
            v[p] = -row[fc]
        basis.append(v)
    return basis


def invert_exact(M: Matrix) -> Matrix:
    n = len(M)
    if any(len(row) != n for row in M):
        raise ValueError("invert_exact requires a square matrix")
    aug = [list(M[i]) + [ONE if i == j else ZERO for j in range(n)] for i in range(n)]
    reduced, pivots = _echelonize(aug)
    if pivots != list(range(n)):
        raise InconsistentSystem("matrix is singular")
    return [row[n:] for row in reduced]


def row_space_basis(rows: Iterable[Vector]) -> Matrix:
    """Echelon basis of the span of the given row vectors."""
    rows = [list(r) for r in rows]
    if not rows:
        return []
    return _echelonize(rows)[0]


def in_row_span(basis: Matrix, v: Vector) -> bool:
    """Is v in the span of the given echelon basis rows?"""
    if not basis:
        return all(not x for x in v)
    stacked = [list(r) for r in basis]
    return rank_exact(stacked + [list(v)]) == len(stacked)


def inertia_symmetric(M: Matrix) -> tuple[int, int, int]:
    """Exact inertia (n_pos, n_neg, n_zero) of a symmetric matrix.

    Computed by congruence diagonalization over the ordered field
    Q(sqrt 2); Sylvester's law makes the counts basis independent.
    """
    n = len(M)
    A = [list(row) for row in M]
    for i in range(n):
        for j in range(n):
            if A[i][j] != A[j][i]:
                raise ValueError("inertia_symmetric requires a symmetric matrix")
    pos = neg = zero = 0
    idx = list(range(n))
    while idx:
        # Find a nonzero diagonal entry, creating one if necessary.
        d = next((i for i in idx if A[i][i]), None)
        if d is None:
            pair = next(
                ((i, j) for i in idx for j in idx if i != j and A[i][j]), None
            )
            if pair is None:
                zero += len(idx)
                break
            i, j = pair
            # Congruence by adding row/col j to row/col i turns the
            # zero diagonal entry into 2*A[i][j] != 0.
            for k in range(n):
                A[i][k] = A[i][k] + A[j][k]
            for k in range(n):
                A[k][i] = A[k][i] + A[k][j]
            d = i
        s = A[d][d].sign()
        if s > 0:
            pos += 1
        else:
            neg += 1
        idx.remove(d)
        pivot = A[d][d]
        for i in list(idx):
            if A[i][d]:
                factor = A[i][d] / pivot
                for k in range(n):
                    A[i][k] = A[i][k] - factor * A[d][k]
                for k in range(n):
                    A[k][i] = A[k][i] - factor * A[k][d]
    return pos, neg, zero
