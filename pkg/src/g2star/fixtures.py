"""Built-in metric fixtures and the fixture file format.

A fixture file is UTF-8 text: a ``system`` line naming the normal-form
system, a ``claim`` line naming the holonomy algebra (with parameters in
parentheses when the catalogue entry takes them), a ``point`` line with
seven rationals, one ``fn`` line per function slot, and optional
``expect`` lines pinning entries of curvature operators at the point.
``#`` starts a comment.  ``save`` writes a canonical rendering;
``load(save(f))`` reproduces the fixture exactly and saved files
round-trip byte for byte.

Expected-operator lines name the operator (``R56``, ``nR5_56``) and one
decomposition slot (``A11`` ... ``A22``, ``v``, ``u1``, ``u2``, ``y1``,
``y2``).  Slots without a line are unconstrained; verification reports
them as unchecked rather than comparing against a guessed value.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

from .lie_g2star import CATALOGUE_NAMES, SubalgebraSpec, catalogue
from .pde_normal_forms import (
    SCHEMAS,
    FunctionBundle,
    SystemId,
    dependence_violations,
)
from .qsqrt2 import QSqrt2, mat_is_zero, render_qsqrt2
from .symexpr import Expr, ParseError, parse, render

__all__ = [
    "ExpectedOperator",
    "FixtureError",
    "MetricFixture",
    "REGISTRY_NAMES",
    "data_dir",
    "expected_mismatches",
    "find",
    "load",
    "parse_fixture",
    "registry",
    "render_fixture",
    "save",
    "slot_value",
]

SLOT_PATHS = ("A11", "A12", "A21", "A22", "v", "u1", "u2", "y1", "y2")

OPID_RE = re.compile(r"R[1-7][1-7]|nR[1-7]_[1-7][1-7]|n2R[1-7][1-7]_[1-7][1-7]")

# Fixtures shipped with the package, in report order: the eight worked
# examples with expected operator values, then the twelve family
# instances whose verification rests on the closure check alone.
REGISTRY_NAMES = (
    "p1",
    "2b",
    "2c00",
    "2c10",
    "2c11",
    "3b",
    "4b0",
    "4b1",
    "sl2",
    "b2",
    "d",
    "S",
    "b2hat",
    "co2",
    "Ca1",
    "diag1m1",
    "diag10",
    "diag1h",
    "slam0",
    "slam2",
)


class FixtureError(ValueError):
    """A fixture file failed to parse or validate."""


class ExpectedOperator(NamedTuple):
    """Pinned entries of one operator's decomposition; absent slots are
    unconstrained."""

    opid: str
    entries: tuple


@dataclass(frozen=True)
class MetricFixture:
    name: str
    system: SystemId
    functions: FunctionBundle
    claim_name: str
    claim_params: object
    point: tuple
    expected: tuple = field(default_factory=tuple)

    def claim(self) -> SubalgebraSpec:
        return catalogue(self.claim_name, self.claim_params)

    def coframe(self):
        return self.functions.coframe()


def _fail(lineno: int, msg: str) -> FixtureError:
    return FixtureError(f"line {lineno}: {msg}")


def _parse_rational(token: str, lineno: int, what: str) -> Fraction:
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError):
        raise _fail(lineno, f"{what}: {token!r} is not a rational") from None


def _parse_claim(rest: str, lineno: int) -> tuple[str, object]:
    m = re.fullmatch(r"([A-Za-z0-9_]+)(?:\(([^)]*)\))?", rest)
    if not m:
        raise _fail(lineno, f"bad claim {rest!r}")
    name = m.group(1)
    if name != "trivial" and name not in CATALOGUE_NAMES:
        raise _fail(lineno, f"unknown algebra {name!r}")
    params: object = None
    if m.group(2) is not None:
        vals = []
        for tok in m.group(2).split(","):
            q = _parse_rational(tok.strip(), lineno, "claim parameter")
            vals.append(int(q) if q.denominator == 1 else q)
        params = vals[0] if len(vals) == 1 else tuple(vals)
    try:
        catalogue(name, params)
    except ValueError as exc:
        raise _fail(lineno, f"claim rejected: {exc}") from None
    return name, params


def _parse_constant(text: str, lineno: int) -> QSqrt2:
    try:
        e = parse(text)
    except ParseError as exc:
        raise _fail(lineno, f"bad value: {exc}") from None
    if any(e.depends_on(k) for k in range(1, 8)):
        raise _fail(lineno, f"expected a constant, got {text!r}")
    return e.eval_exact((Fraction(0),) * 7)


def parse_fixture(text: str, name: str) -> MetricFixture:
    """Parse fixture file text; diagnostics carry 1-based line numbers."""
    system = None
    claim = None
    point = None
    fns: dict[str, Expr] = {}
    fn_lines: dict[str, int] = {}
    expected: dict[str, dict[str, QSqrt2]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, _, rest = line.partition(" ")
        rest = rest.strip()
        if keyword == "system":
            if system is not None:
                raise _fail(lineno, "duplicate system line")
            try:
                system = SystemId(rest)
            except ValueError:
                raise _fail(lineno, f"unknown system {rest!r}") from None
        elif keyword == "claim":
            if claim is not None:
                raise _fail(lineno, "duplicate claim line")
            claim = _parse_claim(rest, lineno)
        elif keyword == "point":
            if point is not None:
                raise _fail(lineno, "duplicate point line")
            toks = rest.split()
            if len(toks) != 7:
                raise _fail(lineno, f"point needs 7 rationals, got {len(toks)}")
            point = tuple(
                _parse_rational(t, lineno, "point coordinate") for t in toks
            )
        elif keyword == "fn":
            if system is None:
                raise _fail(lineno, "fn before system line")
            slot, eq, body = (p.strip() for p in rest.partition("="))
            if eq != "=" or not body:
                raise _fail(lineno, "fn needs the form `fn <slot> = <expression>`")
            if slot not in SCHEMAS[system]:
                allowed = ", ".join(SCHEMAS[system])
                raise _fail(lineno, f"unknown slot {slot!r}; {system.value} has {allowed}")
            if slot in fns:
                raise _fail(lineno, f"duplicate fn line for {slot!r}")
            try:
                fns[slot] = parse(body)
            except ParseError as exc:
                raise _fail(lineno, f"bad expression for {slot}: {exc}") from None
            fn_lines[slot] = lineno
        elif keyword == "expect":
            m = re.fullmatch(r"(\S+)\s+(\S+)\s*=\s*(.+)", rest)
            if not m:
                raise _fail(lineno, "expect needs `expect <opid> <slot> = <value>`")
            opid, slot, value = m.groups()
            if not OPID_RE.fullmatch(opid):
                raise _fail(lineno, f"bad operator id {opid!r}")
            if slot not in SLOT_PATHS:
                raise _fail(lineno, f"bad slot {slot!r}; use one of {', '.join(SLOT_PATHS)}")
            ops = expected.setdefault(opid, {})
            if slot in ops:
                raise _fail(lineno, f"duplicate expect for {opid} {slot}")
            ops[slot] = _parse_constant(value, lineno)
        else:
            raise _fail(lineno, f"unknown directive {keyword!r}")
    end = text.count("\n") + 1
    if system is None:
        raise _fail(end, "missing system line")
    if claim is None:
        raise _fail(end, "missing claim line")
    if point is None:
        raise _fail(end, "missing point line")
    missing = [s for s in SCHEMAS[system] if s not in fns]
    if missing:
        raise _fail(end, f"missing fn lines for: {', '.join(missing)}")
    for slot, k in dependence_violations(system, fns):
        allowed = ", ".join(f"x{v}" for v in SCHEMAS[system][slot])
        raise _fail(
            fn_lines[slot], f"{slot} depends on x{k}; allowed variables: {allowed}"
        )
    bundle = FunctionBundle(system, fns)
    ops = tuple(
        ExpectedOperator(
            opid,
            tuple((s, v) for s, v in sorted(e.items(), key=lambda kv: SLOT_PATHS.index(kv[0]))),
        )
        for opid, e in expected.items()
    )
    return MetricFixture(name, system, bundle, claim[0], claim[1], point, ops)


def _render_params(params) -> str:
    if params is None:
        return ""
    if isinstance(params, tuple):
        return "(" + ",".join(str(p) for p in params) + ")"
    return f"({params})"


def render_fixture(f: MetricFixture) -> str:
    """Canonical text for a fixture; save uses this verbatim."""
    lines = [
        f"system {f.system.value}",
        f"claim {f.claim_name}{_render_params(f.claim_params)}",
        "point " + " ".join(str(x) for x in f.point),
    ]
    for slot in SCHEMAS[f.system]:
        lines.append(f"fn {slot} = {render(f.functions[slot])}")
    for op in f.expected:
        for slot, value in op.entries:
            lines.append(f"expect {op.opid} {slot} = {render_qsqrt2(value)}")
    return "\n".join(lines) + "\n"


def load(path) -> MetricFixture:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise FixtureError(f"cannot read {p}: {exc}") from None
    try:
        return parse_fixture(text, p.stem)
    except FixtureError as exc:
        raise FixtureError(f"{p}: {exc}") from None


def save(f: MetricFixture, path) -> None:
    Path(path).write_text(render_fixture(f), encoding="utf-8")


def data_dir() -> Path:
    return Path(__file__).parent / "data"


_REGISTRY: list[MetricFixture] | None = None


def registry() -> list[MetricFixture]:
    """All built-in fixtures, one per worked example or family instance."""
    global _REGISTRY
    if _REGISTRY is None:
        _REGISTRY = [load(data_dir() / f"{name}.fix") for name in REGISTRY_NAMES]
    return list(_REGISTRY)


def _search_dirs() -> list[Path]:
    dirs = [data_dir()]
    extra = os.environ.get("HOLONOMY_FIXTURE_DIR")
    if extra:
        dirs.extend(Path(d) for d in extra.split(os.pathsep) if d)
    return dirs


def find(name: str) -> MetricFixture:
    """Fixture by name: built-ins (registry plus `flat`) and any
    directories named by the HOLONOMY_FIXTURE_DIR environment variable."""
    for d in _search_dirs():
        candidate = d / f"{name}.fix"
        if candidate.exists():
            return load(candidate)
    known = ", ".join(list(REGISTRY_NAMES) + ["flat"])
    raise FixtureError(f"no fixture named {name!r}; built-ins: {known}")


def slot_value(params, slot: str) -> QSqrt2:
    """Entry of an HParams decomposition addressed by a slot path."""
    if slot.startswith("A"):
        return params.A[int(slot[1]) - 1][int(slot[2]) - 1]
    if slot == "v":
        return params.v
    if slot in ("u1", "u2"):
        return params.u[int(slot[1]) - 1]
    if slot in ("y1", "y2"):
        return params.y[int(slot[1]) - 1]
    raise ValueError(f"bad slot path {slot!r}")


def expected_mismatches(f: MetricFixture) -> list[tuple]:
    """Compare every pinned operator entry against the computed value.

    Returns (opid, slot, expected, computed) rows for entries that
    disagree; empty means every constrained slot matches exactly.
    Unconstrained slots are never compared.
    """
    from .holonomy import operator_value  # deferred: pulls in numpy/scipy
    from .lie_g2star import decompose_h

    c = f.coframe()
    rows = []
    for op in f.expected:
        params, residual = decompose_h(operator_value(c, op.opid, f.point))
        if not mat_is_zero(residual):
            raise FixtureError(
                f"operator {op.opid} of {f.name!r} is not in the model subalgebra"
            )
        for slot, want in op.entries:
            got = slot_value(params, slot)
            if got != want:
                rows.append((op.opid, slot, want, got))
    return rows
