"""Two-sided holonomy certificates for coframe metrics.

The exact side has two halves.  ``containment`` checks that the connection
form takes values in a claimed subalgebra identically in x, by decomposing
each coordinate matrix theta(d_k) over the claimed basis and requiring a
zero residual.  ``lower_bound`` builds the bracket closure of curvature
operators and their covariant derivatives at a point, which is a certified
lower bound for the holonomy algebra.  ``verify`` combines both into a
verdict: the claim is exact iff the connection is contained and the lower
bound reaches the claimed dimension.

``numeric_holonomy`` is an independent floating-point oracle: it parallel
transports a frame around small coordinate-plane loops with an RK4
integrator and estimates the holonomy dimension from the span of the
transport logarithms.  It is advisory only and never overrides the exact
verdict.
"""

from __future__ import annotations

import re
from itertools import combinations
from typing import NamedTuple

import numpy as np
from scipy.linalg import logm

from .geometry import (
    NVAR,
    ORIGIN,
    Coframe,
    ConnectionForm,
    curvature,
    curvature_operator,
    levi_civita,
    nabla2_R,
    nabla_R,
)
from .lie_g2star import SubalgebraSpec, bracket_closure, flatten
from .qsqrt2 import _echelonize, mat_is_zero
from .symexpr import Expr, render

__all__ = [
    "ContainmentWitness",
    "HolonomyVerdict",
    "LoopSpec",
    "NumericHolonomy",
    "containment",
    "default_loops",
    "lower_bound",
    "numeric_holonomy",
    "operator_value",
    "span_residuals",
    "transport_log",
    "verify",
]


class ContainmentWitness(NamedTuple):
    """First entry of theta(d_k) that fails to decompose over the claim."""

    direction: int
    entry: tuple[int, int]
    residual: str


class HolonomyVerdict(NamedTuple):
    claimed: SubalgebraSpec
    containment_ok: bool
    witness: ContainmentWitness | None
    generated: SubalgebraSpec
    generators: tuple[tuple[int, str], ...]
    order_used: int
    generation_ok: bool
    equal: bool
    note: str


def containment(
    c: Coframe, spec: SubalgebraSpec, theta: ConnectionForm | None = None
) -> tuple[bool, ContainmentWitness | None]:
    """Does the connection form take values in spec, identically in x?

    Since the basis matrices are constant, a matrix of functions lies in
    their span iff subtracting the combination read off at the reduced
    basis' pivot positions leaves zero.  The check is exact; the witness
    reports the first residual entry that is not the zero expression.
    """
    if theta is None:
        theta = levi_civita(c)
    rows = [flatten(M) for M in spec.basis]
    reduced, pivots = _echelonize(rows) if rows else ([], [])
    for k in range(1, NVAR + 1):
        Tk = theta.coord(k)
        flat = [Tk[i][j] for i in range(NVAR) for j in range(NVAR)]
        resid = list(flat)
        for row, p in zip(reduced, pivots):
            coeff = flat[p]
            if not coeff:
                continue
            for idx, val in enumerate(row):
                if val:
                    resid[idx] = resid[idx] - coeff * Expr.const(val)
        for idx, e in enumerate(resid):
            if e:
                i, j = divmod(idx, NVAR)
                return False, ContainmentWitness(k, (i + 1, j + 1), render(e))
    return True, None


def _generate(
    c: Coframe, pt, max_order: int, stop_dim: int | None
) -> tuple[SubalgebraSpec, list[tuple[int, str]], int]:
    """Bracket closure of curvature terms at pt, by increasing order.

    Candidates are scanned in a fixed order: the 21 operators R(b_k, b_l),
    then first covariant derivatives, then second.  A candidate is kept
    only if it enlarges the current closure, and the scan stops as soon as
    the closure reaches stop_dim, so higher derivatives are computed only
    when the cheaper terms do not already generate enough.
    """
    if not 0 <= max_order <= 2:
        raise ValueError("max_order must be 0, 1 or 2")
    theta = levi_civita(c)
    Rf = curvature(c)
    if Rf.is_zero():
        # All covariant derivatives of a vanishing curvature field vanish.
        return bracket_closure([], name="lower_bound"), [], 0
    gens: list = []
    labels: list[tuple[int, str]] = []
    closure = bracket_closure([], name="lower_bound")
    order_used = 0

    def add(M, order: int, label: str) -> None:
        nonlocal closure, order_used
        if mat_is_zero(M) or closure.contains(M):
            return
        gens.append(M)
        labels.append((order, label))
        closure = bracket_closure(gens, name="lower_bound")
        order_used = max(order_used, order)

    def done() -> bool:
        return stop_dim is not None and closure.dim >= stop_dim

    pairs = list(combinations(range(1, NVAR + 1), 2))
    for k, l in pairs:
        if done():
            return closure, labels, order_used
        add(curvature_operator(Rf, c, k, l, pt), 0, f"R{k}{l}")
    if max_order >= 1:
        for z in range(1, NVAR + 1):
            for k, l in pairs:
                if done():
                    return closure, labels, order_used
                add(nabla_R(Rf, theta, c, z, k, l, pt), 1, f"nR{z}_{k}{l}")
    if max_order >= 2:
        for z2 in range(1, NVAR + 1):
            for z1 in range(1, NVAR + 1):
                for k, l in pairs:
                    if done():
                        return closure, labels, order_used
                    add(
                        nabla2_R(Rf, theta, c, z2, z1, k, l, pt),
                        2,
                        f"n2R{z2}{z1}_{k}{l}",
                    )
    return closure, labels, order_used


def operator_value(c: Coframe, opid: str, pt=ORIGIN) -> list:
    """Evaluate an operator named like a generator label, exactly.

    R<k><l> is R(b_k, b_l); nR<z>_<kl> its covariant derivative along
    b_z; n2R<z2><z1>_<kl> the second derivative.
    """
    theta = levi_civita(c)
    Rf = curvature(c)
    if m := re.fullmatch(r"R([1-7])([1-7])", opid):
        k, l = (int(g) for g in m.groups())
        return curvature_operator(Rf, c, k, l, pt)
    if m := re.fullmatch(r"nR([1-7])_([1-7])([1-7])", opid):
        z, k, l = (int(g) for g in m.groups())
        return nabla_R(Rf, theta, c, z, k, l, pt)
    if m := re.fullmatch(r"n2R([1-7])([1-7])_([1-7])([1-7])", opid):
        z2, z1, k, l = (int(g) for g in m.groups())
        return nabla2_R(Rf, theta, c, z2, z1, k, l, pt)
    raise ValueError(f"unrecognized operator id {opid!r}")


def lower_bound(c: Coframe, pt=ORIGIN, max_order: int = 1) -> SubalgebraSpec:
    """Bracket closure of all curvature terms up to max_order at pt.

    By the Ambrose-Singer theorem this subalgebra is contained in the
    holonomy algebra, so its dimension is a certified lower bound.
    """
    closure, _, _ = _generate(c, pt, max_order, stop_dim=None)
    return closure


def verify(
    c: Coframe, claimed: SubalgebraSpec, max_order: int = 2, pt=ORIGIN
) -> HolonomyVerdict:
    """Certify holonomy(c) = claimed, or report which half failed.

    Containment gives holonomy <= claimed; the generated closure gives
    holonomy >= closure.  Both certificates are exact, so equality of the
    closure dimension with the claimed dimension pins the holonomy algebra.
    The generation scan stops at the first order that suffices, and the
    verdict records that order together with the generators it used.
    """
    theta = levi_civita(c)
    ok, witness = containment(c, claimed, theta)
    generated, labels, order_used = _generate(c, pt, max_order, stop_dim=claimed.dim)
    inside = all(claimed.contains(X) for X in generated.basis)
    generation_ok = generated.dim >= claimed.dim
    equal = ok and inside and generated.dim == claimed.dim
    if equal:
        note = ""
    elif not ok and generation_ok:
        note = "holonomy strictly larger than claimed"
    elif ok and not generation_ok:
        note = (
            f"curvature terms generate dimension {generated.dim} of "
            f"{claimed.dim} at order {max_order}"
        )
    else:
        note = "containment fails and curvature terms do not reach the claim"
    return HolonomyVerdict(
        claimed=claimed,
        containment_ok=ok,
        witness=witness,
        generated=generated,
        generators=tuple(labels),
        order_used=order_used,
        generation_ok=generation_ok,
        equal=equal,
        note=note,
    )


# ----------------------------------------------------------------------
# Numeric oracle: parallel transport around small loops.
# ----------------------------------------------------------------------

ORIGIN_F = (0.0,) * NVAR


class LoopSpec(NamedTuple):
    """A square loop in a coordinate plane, traversed counterclockwise."""

    plane: tuple[int, int]
    center: tuple = ORIGIN_F
    side: float = 1e-2


class NumericHolonomy(NamedTuple):
    dimension: int
    logs: tuple
    singular_values: tuple


def default_loops(side: float = 1e-2, center=ORIGIN_F) -> list[LoopSpec]:
    """One loop per coordinate plane: the 21 pairs a < b."""
    return [
        LoopSpec((a, b), tuple(float(x) for x in center), float(side))
        for a, b in combinations(range(1, NVAR + 1), 2)
    ]


def _theta_entries(theta: ConnectionForm) -> list:
    """Nonzero entries of each theta(d_k) for fast float evaluation."""
    out = []
    for k in range(1, NVAR + 1):
        M = theta.coord(k)
        out.append(
            [(i, j, M[i][j]) for i in range(NVAR) for j in range(NVAR) if M[i][j]]
        )
    return out


def _theta_at(entries, k: int, pt) -> np.ndarray:
    A = np.zeros((NVAR, NVAR))
    for i, j, e in entries[k - 1]:
        A[i, j] = e.eval_float(pt)
    return A


def _edge(entries, T: np.ndarray, start, direction: int, sign: float, length: float, steps: int) -> np.ndarray:
    """RK4 for T' = -theta(gamma')T along one axis-parallel edge."""
    h = length / steps
    x = np.array(start, dtype=float)

    def rhs(offset, M):
        pt = x.copy()
        pt[direction - 1] += sign * offset
        return -sign * _theta_at(entries, direction, pt) @ M

    for _ in range(steps):
        k1 = rhs(0.0, T)
        k2 = rhs(h / 2, T + (h / 2) * k1)
        k3 = rhs(h / 2, T + (h / 2) * k2)
        k4 = rhs(h, T + h * k3)
        T = T + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        x[direction - 1] += sign * h
    return T


def _transport(entries, loop: LoopSpec, steps: int) -> np.ndarray:
    a, b = loop.plane
    s = loop.side
    base = np.array(loop.center, dtype=float)

    def corner(da, db):
        p = base.copy()
        p[a - 1] += da * s / 2
        p[b - 1] += db * s / 2
        return p

    T = np.eye(NVAR)
    T = _edge(entries, T, corner(-1, -1), a, +1.0, s, steps)
    T = _edge(entries, T, corner(+1, -1), b, +1.0, s, steps)
    T = _edge(entries, T, corner(+1, +1), a, -1.0, s, steps)
    T = _edge(entries, T, corner(-1, +1), b, -1.0, s, steps)
    return T


def transport_log(c: Coframe, loop: LoopSpec, steps: int = 16) -> np.ndarray:
    """Logarithm of the parallel transport around one loop.

    The transport must stay near the identity (Frobenius distance < 0.5)
    for the matrix logarithm to be trustworthy; shrink the loop otherwise.
    """
    if loop.side <= 0:
        raise ValueError("loop side must be positive")
    a, b = loop.plane
    if not (1 <= a < b <= NVAR):
        raise ValueError("loop plane must be a pair 1 <= a < b <= 7")
    theta = levi_civita(c)
    entries = _theta_entries(theta)
    T = _transport(entries, loop, steps)
    if not np.all(np.isfinite(T)):
        raise ValueError("transport integration diverged")
    if np.linalg.norm(T - np.eye(NVAR)) >= 0.5:
        raise ValueError("transport is not near the identity; shrink the loop side")
    L = logm(T)
    return np.real(L) if np.iscomplexobj(L) else L


def numeric_holonomy(
    c: Coframe,
    loops: list[LoopSpec] | None = None,
    steps: int = 16,
    rank_rtol: float = 1e-7,
    richardson: bool = False,
) -> NumericHolonomy:
    """Estimated holonomy dimension from transport logarithms.

    Each logarithm is close to side^2 times a curvature operator, so the
    logs are normalized by side^2 before the rank estimate.  When
    richardson is set, each log is refined by Richardson extrapolation
    from sides s and s/2, cancelling the next-order term.  Advisory only:
    the exact verdict from verify never defers to this estimate.
    """
    if loops is None:
        loops = default_loops()
    logs = []
    for loop in loops:
        A = transport_log(c, loop, steps) / loop.side**2
        if richardson:
            # The side^2-normalized log has an O(side) error term, so the
            # first-order extrapolation from sides s and s/2 cancels it.
            half = loop._replace(side=loop.side / 2)
            Ah = transport_log(c, half, steps) / half.side**2
            A = 2.0 * Ah - A
        logs.append(A)
    if not logs:
        return NumericHolonomy(0, (), ())
    stacked = np.array([L.flatten() for L in logs])
    sv = np.linalg.svd(stacked, compute_uv=False)
    top = sv[0] if len(sv) else 0.0
    if top <= 1e-10:
        dim = 0
    else:
        dim = int(np.sum(sv > rank_rtol * top))
    return NumericHolonomy(dim, tuple(logs), tuple(float(x) for x in sv))


def span_residuals(logs, mats, negligible: float = 1e-8) -> list[float]:
    """Sup-norm residual of each normalized log against the span of mats.

    mats are exact matrices (entries convertible to float); each log is
    scaled to unit sup norm and projected by least squares, so a small
    residual means the log lies in the float image of the exact span.
    Logs below the negligible threshold are integration noise around a
    zero transport and count as residual 0.
    """
    basis = np.array(
        [[float(x) for row in M for x in row] for M in mats], dtype=float
    ).T if mats else np.zeros((NVAR * NVAR, 0))
    out = []
    for L in logs:
        v = np.asarray(L, dtype=float).flatten()
        scale = np.abs(v).max()
        if scale < negligible:
            out.append(0.0)
            continue
        v = v / scale
        coef, *_ = np.linalg.lstsq(basis, v, rcond=None)
        out.append(float(np.abs(basis @ coef - v).max()))
    return out
