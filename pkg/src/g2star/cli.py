"""Command-line driver for the exact holonomy verification pipeline.

Subcommands
-----------
verify
    Full two-sided check of one fixture, a user metric file, or every
    built-in fixture: normal-form residuals, connection containment in
    the claimed subalgebra, pinned operator entries, and the bracket
    closure of curvature terms up to a derivative order.
synthesize
    Solve a quadrature system from a partial fixture holding only the
    free input slots (plus optional `constant` lines for integration
    constants) and write the completed fixture.
curvature
    Print the model-subalgebra decomposition of one curvature operator.
list-algebras
    Print the subalgebra catalogue with exact dimensions.
numeric
    Floating-point cross-check: parallel-transport logarithms around
    small coordinate loops and the rank of their span.

Exit codes: 0 success, 1 verification failure, 2 input error.  Progress
is written to stderr; reports go to stdout as text or stable-ordered,
schema-versioned JSON.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from fractions import Fraction
from pathlib import Path

from .fixtures import (
    OPID_RE,
    SLOT_PATHS,
    ExpectedOperator,
    FixtureError,
    MetricFixture,
    _fail,
    _parse_claim,
    _parse_constant,
    _parse_rational,
    find,
    load,
    registry,
    save,
    slot_value,
)
from .holonomy import (
    default_loops,
    numeric_holonomy,
    operator_value,
    verify,
)
from .lie_g2star import (
    CATALOGUE_NAMES,
    CATALOGUE_PARAMS,
    bracket_closure,
    catalogue,
    decompose_h,
)
from .pde_normal_forms import (
    CONSTANT_SLOTS,
    FREE_SLOTS,
    SystemId,
    UnsupportedSystemError,
    residuals,
    synthesize,
)
from .qsqrt2 import mat_is_zero, render_qsqrt2
from .symexpr import ParseError, parse, render

SCHEMA_VERSION = 1

# Parameter samples used when a catalogue family is listed without an
# explicit parameter; dimensions do not depend on the sample.
_LIST_SAMPLES = {
    "Ca_m": (1,),
    "s_lambda_m": (0,),
    "diag1mu_m": (0,),
    "2c": ((0, 0), (1, 0), (1, 1)),
    "4b": (0, 1),
}


class InputError(Exception):
    """Bad command input; maps to exit code 2."""


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


def _params_text(params) -> str:
    if params is None:
        return ""
    if isinstance(params, tuple):
        return "(" + ",".join(str(p) for p in params) + ")"
    return f"({params})"


# ---------------------------------------------------------------------------
# verify


def _closure_dims_by_order(c, verdict, pt) -> list:
    dims = []
    for order in range(verdict.order_used + 1):
        mats = [
            operator_value(c, label, pt)
            for o, label in verdict.generators
            if o <= order
        ]
        dims.append(bracket_closure(mats, name="report").dim)
    return dims


def _operator_rows(f: MetricFixture, c, pt) -> tuple[list, bool]:
    rows = []
    all_ok = True
    for op in f.expected:
        params, resid = decompose_h(operator_value(c, op.opid, pt))
        in_model = mat_is_zero(resid)
        all_ok &= in_model
        entries = []
        for slot, want in op.entries:
            got = slot_value(params, slot)
            ok = in_model and got == want
            all_ok &= ok
            entries.append(
                {
                    "slot": slot,
                    "expected": render_qsqrt2(want),
                    "computed": render_qsqrt2(got),
                    "ok": ok,
                }
            )
        pinned = {slot for slot, _ in op.entries}
        rows.append(
            {
                "op": op.opid,
                "in_model": in_model,
                "entries": entries,
                "unchecked": [s for s in SLOT_PATHS if s not in pinned],
            }
        )
    return rows, all_ok


def fixture_report(f: MetricFixture, max_order: int, point=None) -> dict:
    """All checks for one fixture as a JSON-ready mapping."""
    pt = f.point if point is None else point
    res_rows = [
        {"name": name, "zero": e.is_zero(), "value": render(e)}
        for name, e in residuals(f.functions)
    ]
    residuals_ok = all(r["zero"] for r in res_rows)

    c = f.coframe()
    claim = f.claim()
    verdict = verify(c, claim, max_order=max_order, pt=pt)

    if point is None:
        op_rows, ops_ok = _operator_rows(f, c, pt)
        ops_skipped = False
    else:
        # Pinned entries hold at the file's own point; comparing them at
        # an override point would manufacture failures.
        op_rows, ops_ok, ops_skipped = [], True, bool(f.expected)

    equal = residuals_ok and ops_ok and verdict.equal
    notes = []
    if not residuals_ok:
        bad = [r["name"] for r in res_rows if not r["zero"]]
        notes.append("nonzero normal-form residuals: " + ", ".join(bad))
    if not ops_ok:
        notes.append("pinned operator entries disagree")
    if not verdict.equal and verdict.note:
        notes.append(verdict.note)

    witness = None
    if verdict.witness is not None:
        witness = {
            "direction": verdict.witness.direction,
            "entry": list(verdict.witness.entry),
            "residual": verdict.witness.residual,
        }
    return {
        "name": f.name,
        "system": f.system.value,
        "claim": f.claim_name + _params_text(f.claim_params),
        "claim_dim": claim.dim,
        "point": [str(x) for x in pt],
        "max_order": max_order,
        "residuals_ok": residuals_ok,
        "residuals": res_rows,
        "containment_ok": verdict.containment_ok,
        "containment_witness": witness,
        "operators_ok": ops_ok,
        "operators_skipped": ops_skipped,
        "operators": op_rows,
        "closure": {
            "dim": verdict.generated.dim,
            "order_used": verdict.order_used,
            "dims_by_order": _closure_dims_by_order(c, verdict, pt),
            "generators": [
                {"order": o, "label": label} for o, label in verdict.generators
            ],
        },
        "equal": equal,
        "notes": notes,
    }


def _print_report_text(r: dict, out) -> None:
    print(
        f"fixture {r['name']}: system {r['system']}, "
        f"claim {r['claim']} (dim {r['claim_dim']}), "
        f"point ({', '.join(r['point'])})",
        file=out,
    )
    n = len(r["residuals"])
    k = sum(1 for row in r["residuals"] if row["zero"])
    print(f"  residuals: {k} of {n} identically zero", file=out)
    for row in r["residuals"]:
        if not row["zero"]:
            print(f"    {row['name']} = {row['value']}", file=out)
    if r["containment_ok"]:
        print("  containment: connection lies in the claim", file=out)
    else:
        w = r["containment_witness"]
        print(
            f"  containment: FAILS in direction {w['direction']} at entry "
            f"({w['entry'][0]},{w['entry'][1]}): residual {w['residual']}",
            file=out,
        )
    if r["operators_skipped"]:
        print("  operators: skipped (pinned at the file's own point)", file=out)
    for op in r["operators"]:
        bad = [e for e in op["entries"] if not e["ok"]]
        status = "ok" if (op["in_model"] and not bad) else "MISMATCH"
        print(
            f"  operator {op['op']}: {status} "
            f"({len(op['entries'])} pinned, {len(op['unchecked'])} unchecked)",
            file=out,
        )
        if not op["in_model"]:
            print("    value is outside the model subalgebra", file=out)
        for e in bad:
            print(
                f"    {e['slot']}: expected {e['expected']}, got {e['computed']}",
                file=out,
            )
    cl = r["closure"]
    gens = " ".join(g["label"] for g in cl["generators"])
    print(
        f"  closure: dim {cl['dim']} of {r['claim_dim']}; "
        f"dims by order {cl['dims_by_order']}; generators: {gens}",
        file=out,
    )
    verdict = "equal" if r["equal"] else "FAILED (" + "; ".join(r["notes"]) + ")"
    print(f"  verdict: {verdict}", file=out)


def cmd_verify(args) -> int:
    if args.all:
        targets = registry()
    elif args.fixture is not None:
        targets = [find(args.fixture)]
    else:
        targets = [load(args.metric)]
    point = None
    if args.point is not None:
        point = tuple(Fraction(tok) for tok in args.point)

    reports = []
    for f in targets:
        _progress(f"verifying {f.name} ...")
        reports.append(fixture_report(f, args.max_order, point))
    all_equal = all(r["equal"] for r in reports)

    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "verify",
        "max_order": args.max_order,
        "fixtures": reports,
        "all_equal": all_equal,
    }
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    else:
        for r in reports:
            _print_report_text(r, sys.stdout)
        n_ok = sum(1 for r in reports if r["equal"])
        print(f"{n_ok} of {len(reports)} fixtures verified equal")
    return 0 if all_equal else 1


# ---------------------------------------------------------------------------
# synthesize


def _parse_partial(text: str, system_flag):
    """Partial fixture: free-slot `fn` lines and `constant` lines."""
    system = system_flag
    claim = None
    point = None
    free: dict = {}
    const: dict = {}
    expected: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, _, rest = line.partition(" ")
        rest = rest.strip()
        if keyword == "system":
            declared = SystemId(rest)
            if system is not None and declared is not system:
                raise _fail(
                    lineno,
                    f"file declares system {declared.value}, "
                    f"--system says {system.value}",
                )
            system = declared
        elif keyword == "claim":
            claim = _parse_claim(rest, lineno)
        elif keyword == "point":
            toks = rest.split()
            if len(toks) != 7:
                raise _fail(lineno, f"point needs 7 rationals, got {len(toks)}")
            point = tuple(
                _parse_rational(t, lineno, "point coordinate") for t in toks
            )
        elif keyword in ("fn", "constant"):
            if system is None:
                raise _fail(lineno, f"{keyword} before the system is known")
            if system not in FREE_SLOTS:
                raise UnsupportedSystemError(
                    f"unsupported: no constructive scheme for {system.value}"
                )
            table = FREE_SLOTS[system] if keyword == "fn" else CONSTANT_SLOTS[system]
            dest = free if keyword == "fn" else const
            slot, eq, body = (p.strip() for p in rest.partition("="))
            if eq != "=" or not body:
                raise _fail(lineno, f"{keyword} needs `{keyword} <slot> = <expression>`")
            if slot not in table:
                allowed = ", ".join(table) or "none"
                raise _fail(
                    lineno,
                    f"unknown {keyword} slot {slot!r}; "
                    f"{system.value} accepts: {allowed}",
                )
            if slot in dest:
                raise _fail(lineno, f"duplicate {keyword} line for {slot!r}")
            try:
                dest[slot] = parse(body)
            except ParseError as exc:
                raise _fail(lineno, f"bad expression for {slot}: {exc}") from None
        elif keyword == "expect":
            m = re.fullmatch(r"(\S+)\s+(\S+)\s*=\s*(.+)", rest)
            if not m:
                raise _fail(lineno, "expect needs `expect <opid> <slot> = <value>`")
            opid, slot, value = m.groups()
            if not OPID_RE.fullmatch(opid):
                raise _fail(lineno, f"bad operator id {opid!r}")
            if slot not in SLOT_PATHS:
                raise _fail(lineno, f"bad slot {slot!r}")
            expected.setdefault(opid, {})[slot] = _parse_constant(value, lineno)
        else:
            raise _fail(lineno, f"unknown directive {keyword!r}")
    if system is None:
        raise InputError("no system: pass --system or add a system line")
    if claim is None:
        raise InputError("partial fixture needs a claim line for the output")
    if point is None:
        point = (Fraction(0),) * 7
    ops = tuple(
        ExpectedOperator(
            opid,
            tuple(
                (s, v)
                for s, v in sorted(e.items(), key=lambda kv: SLOT_PATHS.index(kv[0]))
            ),
        )
        for opid, e in expected.items()
    )
    return system, claim, point, free, const, ops


def cmd_synthesize(args) -> int:
    system = SystemId(args.system) if args.system else None
    text = Path(args.input).read_text(encoding="utf-8")
    system, claim, point, free, const, ops = _parse_partial(text, system)
    _progress(f"solving {system.value} from {len(free)} free slots ...")
    bundle = synthesize(system, free, const or None)
    out = Path(args.out)
    fixture = MetricFixture(
        out.stem, system, bundle, claim[0], claim[1], point, ops
    )
    save(fixture, out)
    _progress(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# curvature


def _h_compact(params) -> str:
    A = params.A
    if all(x == 0 for row in A for x in row):
        a_txt = "0"
    elif A[0][1] == 0 and A[1][0] == 0:
        a_txt = f"diag({render_qsqrt2(A[0][0])}, {render_qsqrt2(A[1][1])})"
    else:
        rows = [
            "[" + ", ".join(render_qsqrt2(x) for x in row) + "]" for row in A
        ]
        a_txt = "[" + ", ".join(rows) + "]"
    pair = lambda p: (
        "0" if p[0] == 0 and p[1] == 0
        else f"({render_qsqrt2(p[0])}, {render_qsqrt2(p[1])})"
    )
    return f"h({a_txt}, {render_qsqrt2(params.v)}, {pair(params.u)}, {pair(params.y)})"


def cmd_curvature(args) -> int:
    f = find(args.fixture)
    if not OPID_RE.fullmatch(args.op):
        raise InputError(
            f"bad operator id {args.op!r}; use R<k><l>, nR<z>_<kl> or n2R<z2><z1>_<kl>"
        )
    c = f.coframe()
    M = operator_value(c, args.op, f.point)
    zero = mat_is_zero(M)
    params, resid = decompose_h(M)
    in_model = mat_is_zero(resid)
    compact = "0" if zero else _h_compact(params)
    entries = {slot: render_qsqrt2(slot_value(params, slot)) for slot in SLOT_PATHS}
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "curvature",
        "fixture": f.name,
        "op": args.op,
        "point": [str(x) for x in f.point],
        "zero": zero,
        "in_model": in_model,
        "value": compact,
        "entries": entries,
    }
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    else:
        print(f"{args.op} of fixture {f.name} = {compact}")
        if not in_model:
            print("  value is outside the model subalgebra")
        for slot in SLOT_PATHS:
            print(f"  {slot} = {entries[slot]}")
    return 0


# ---------------------------------------------------------------------------
# list-algebras


def _catalogue_rows() -> list:
    rows = []
    for name in CATALOGUE_NAMES:
        samples = _LIST_SAMPLES.get(name)
        if name in ("2c", "4b"):
            for p in samples:
                rows.append((name, p, catalogue(name, p).dim))
        elif samples is not None:
            rows.append((name, samples[0], catalogue(name, samples[0]).dim))
        else:
            rows.append((name, None, catalogue(name).dim))
    return rows


def cmd_list_algebras(args) -> int:
    rows = _catalogue_rows()
    if args.format == "json":
        payload = {
            "schema_version": SCHEMA_VERSION,
            "command": "list-algebras",
            "algebras": [
                {
                    "name": name,
                    "params": None if p is None else str(p),
                    "parameter_spec": CATALOGUE_PARAMS.get(name),
                    "dim": dim,
                }
                for name, p, dim in rows
            ],
        }
        print(json.dumps(payload, indent=2))
    else:
        print(f"{'name':<12} {'params':<22} dim")
        for name, p, dim in rows:
            spec = CATALOGUE_PARAMS.get(name)
            p_txt = "-" if p is None else str(p)
            if spec and name not in ("2c", "4b"):
                p_txt += "  (sample)"
            print(f"{name:<12} {p_txt:<22} {dim:3d}")
        print(f"{len(rows)} subalgebras")
    return 0


# ---------------------------------------------------------------------------
# numeric


def cmd_numeric(args) -> int:
    f = find(args.fixture)
    if args.side <= 0:
        raise InputError("--side must be positive")
    c = f.coframe()
    center = tuple(float(x) for x in f.point)
    claim_dim = f.claim().dim

    def estimate(side: float):
        loops = default_loops(side=side, center=center)
        if args.loops is not None:
            loops = loops[: args.loops]
        return numeric_holonomy(c, loops, steps=args.steps, richardson=True)

    _progress(f"transporting around loops of side {args.side} ...")
    result = estimate(args.side)
    _progress(f"refining at side {args.side / 2} ...")
    refined = estimate(args.side / 2)
    stable = result.dimension == refined.dimension
    note = (
        "estimate stable under halving the loop side"
        if stable
        else f"estimate moves to {refined.dimension} at side {args.side / 2}; "
        "shrink --side or raise --steps"
    )
    sv = [float(s) for s in result.singular_values[: claim_dim + 3]]
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "numeric",
        "fixture": f.name,
        "side": args.side,
        "steps": args.steps,
        "loops": args.loops,
        "dimension": result.dimension,
        "dimension_refined": refined.dimension,
        "claim_dim": claim_dim,
        "leading_singular_values": sv,
        "note": note,
    }
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    else:
        print(
            f"fixture {f.name}: numeric holonomy dimension {result.dimension} "
            f"(claimed {claim_dim}); {note}"
        )
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="g2star",
        description="Exact holonomy verification for coframe metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the full verification pipeline")
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--fixture", help="built-in fixture name")
    which.add_argument("--metric", help="path to a fixture-format metric file")
    which.add_argument("--all", action="store_true", help="every built-in fixture")
    p.add_argument(
        "--max-order",
        type=int,
        choices=(0, 1, 2),
        default=2,
        help="highest covariant-derivative order fed to the closure",
    )
    p.add_argument(
        "--point",
        nargs=7,
        metavar="Q",
        help="evaluation point (7 rationals); pinned operator entries are "
        "skipped at an override point",
    )
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(run=cmd_verify)

    p = sub.add_parser("synthesize", help="solve a quadrature system")
    p.add_argument("--system", choices=[s.value for s in SystemId])
    p.add_argument("--input", required=True, help="partial fixture path")
    p.add_argument("--out", required=True, help="output fixture path")
    p.set_defaults(run=cmd_synthesize)

    p = sub.add_parser("curvature", help="decompose one curvature operator")
    p.add_argument("--fixture", required=True)
    p.add_argument("--op", required=True, help="R<k><l>, nR<z>_<kl>, n2R<z2><z1>_<kl>")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(run=cmd_curvature)

    p = sub.add_parser("list-algebras", help="print the subalgebra catalogue")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(run=cmd_list_algebras)

    p = sub.add_parser("numeric", help="floating-point holonomy estimate")
    p.add_argument("--fixture", required=True)
    p.add_argument("--side", type=float, default=1e-2, help="loop side length")
    p.add_argument("--loops", type=int, default=None, help="cap on loop count")
    p.add_argument("--steps", type=int, default=16, help="integrator steps per edge")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(run=cmd_numeric)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.run(args)
    except (
        InputError,
        FixtureError,
        ParseError,
        UnsupportedSystemError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
