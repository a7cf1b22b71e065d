"""Command-line front end.

Exit codes: 0 success, 1 validation failure, 2 property violation,
3 parse error or bad usage.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import complexes as cx
from . import ninegrid as ng
from . import triangles as tr
from .additivity import pairing_defect, pipeline, trace_additivity
from .exactfield import FieldError, FieldSpec, Matrix, ShapeError
from .monoidal import lefschetz_trace, verdier_pairing_point
from .selftest import SUITES, Size, run_selftest
from .serialization import (
    Document,
    ParseError,
    dumps,
    lower_from_job,
    matrix_to_json,
    parse,
    scalar_to_json,
    to_json,
)

EXIT_OK, EXIT_INVALID, EXIT_VIOLATION, EXIT_PARSE = 0, 1, 2, 3

COMMANDS = (
    "validate", "homology", "trace", "pairing", "fold", "nine-validate", "nine-triangle",
    "lower-complete", "additivity", "pipeline", "paper-examples", "selftest",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _window(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like a:b, got {text!r}") from None
    if a > b:
        raise argparse.ArgumentTypeError("window start exceeds end")
    return a, b


def _field(text: str) -> FieldSpec:
    try:
        return FieldSpec.parse(text)
    except (FieldError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--field", type=_field, default=None, help="Q or F<p>")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--cases", type=int, default=None)
    common.add_argument("--max-rank", type=int, default=None)
    common.add_argument("--window", type=_window, default=None, help="a:b")
    common.add_argument("--json", action="store_true", help="machine-readable report")
    common.add_argument("--out", type=Path, default=None, help="write the report here")
    common.add_argument("--parallel", action="store_true", help="run cases in worker processes")

    p = _Parser(prog="ninefold", description="Exact nine-diagrams and trace additivity.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name in ("validate", "homology", "trace", "fold", "lower-complete"):
        sub.add_parser(name, parents=[common]).add_argument("file", type=Path)
    for name in ("pairing", "pipeline"):
        sub.add_parser(name, parents=[common]).add_argument("file", type=Path, nargs="?")
    for name in ("nine-validate", "nine-triangle"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("file", type=Path)
        sp.add_argument("--construct", choices=("source", "target"),
                        help="treat FILE as a complex X and use S(X) or T(X)")
    sub.add_parser("additivity", parents=[common])
    sub.add_parser("paper-examples", parents=[common]).add_argument("--rank", type=int, default=2)
    sub.add_parser("selftest", parents=[common])
    return p


# -- helpers ---------------------------------------------------------------


def _load(path: Path) -> Document:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    return parse(text)


def _expect(doc: Document, *kinds: str) -> None:
    if doc.kind not in kinds:
        raise ParseError(f"expected a {' or '.join(kinds)} document, got {doc.kind}", "$.kind")


def _graded(m: cx.GradedMap) -> dict:
    return {str(n): matrix_to_json(m(n)) for n in cx.degree_span(m.source, m.target)
            if m.source.rank(n) or m.target.rank(n + m.shift)}


def _fmt_matrix(m: Matrix) -> str:
    rows = [[scalar_to_json(m.field, v) for v in r] for r in m.tolist()]
    if not rows:
        return "  []"
    width = max((len(x) for r in rows for x in r), default=1)
    return "\n".join("  [" + " ".join(x.rjust(width) for x in r) + "]" for r in rows)


def _nine_from(args) -> ng.NineDiagram:
    doc = _load(args.file)
    if args.construct:
        _expect(doc, "complex")
        return (ng.source_nine if args.construct == "source" else ng.target_nine)(doc.value)
    _expect(doc, "nine")
    return doc.value


def _suite_size(args, default: Size) -> Size:
    return Size(args.max_rank if args.max_rank is not None else default.max_rank,
                args.window if args.window is not None else default.window)


# -- commands -------------------------------------------------------------
# each returns (exit code, report dict, text lines)


def cmd_validate(args):
    doc = _load(args.file)
    v = doc.value
    reason = None
    try:
        if doc.kind == "complex":
            v.validate()
        elif doc.kind == "map":
            if isinstance(v, cx.ChainMap):
                v.validate()
        elif doc.kind == "triangle":
            if not tr.validate_triangle(v):
                reason = "comparison map out of the cone is not a quasi-isomorphism"
        elif doc.kind == "square":
            if not tr.is_exact_square(v):
                reason = "square is not exact"
        elif doc.kind == "nine":
            v.validate()
        elif doc.kind == "endo":
            if not v.check():
                reason = "maps do not commute with the sequence"
    except cx.ValidationError as exc:
        reason = str(exc)
    ok = reason is None
    report = {"command": "validate", "kind": doc.kind, "valid": ok, "reason": reason}
    return (EXIT_OK if ok else EXIT_INVALID), report, [f"{doc.kind}: {'valid' if ok else 'INVALID: ' + reason}"]


def cmd_homology(args):
    doc = _load(args.file)
    _expect(doc, "complex")
    h = cx.homology_dims(doc.value)
    report = {"command": "homology", "homology": {str(n): d for n, d in h.items()},
              "euler_characteristic": cx.euler_characteristic(doc.value)}
    return EXIT_OK, report, [f"H^{n} = {d}" for n, d in h.items()]


def cmd_trace(args):
    doc = _load(args.file)
    _expect(doc, "map", "endo")
    f = doc.field
    if doc.kind == "map":
        t = lefschetz_trace(doc.value)
        report = {"command": "trace", "trace": scalar_to_json(f, t)}
        return EXIT_OK, report, [scalar_to_json(f, t)]
    whole, sub, quot, defect = trace_additivity(doc.value)
    report = {
        "command": "trace",
        "trace": scalar_to_json(f, whole),
        "sub": scalar_to_json(f, sub),
        "quot": scalar_to_json(f, quot),
        "defect": scalar_to_json(f, defect),
    }
    code = EXIT_OK if defect == 0 else EXIT_VIOLATION
    return code, report, [report["trace"], f"Tr(f') = {report['sub']}, Tr(f'') = {report['quot']}",
                          f"defect = {report['defect']}"]


def _pair_job(doc):
    _expect(doc, "job")
    job = doc.value
    if "alpha" not in job or "beta" not in job:
        raise ParseError("pairing job needs sesmap entries 'alpha' and 'beta'")
    return job["alpha"], job["beta"]


def _run_suite(args, name: str, default_cases: int):
    field = args.field or FieldSpec.parse("F7")
    cases = args.cases if args.cases is not None else default_cases
    if cases < 1:
        raise UsageError("--cases must be at least 1")
    suite = next(s for s in SUITES if s.name == name)
    size = _suite_size(args, suite.size)
    report = run_selftest(field, args.seed, cases, parallel=args.parallel, suites=[name], size=size,
                          command=args.command)
    s = report["suites"][0]
    lines = [f"{name}: {s['passed']}/{s['cases']} cases with zero defect over {field}"]
    return (EXIT_OK if report["status"] == "pass" else EXIT_VIOLATION), report, lines


def cmd_pairing(args):
    if args.file is None:
        return _run_suite(args, "pairing", 100)
    doc = _load(args.file)
    a, b = _pair_job(doc)
    f = doc.field
    vals = [verdier_pairing_point(x, y) for x, y in ((a.quot, b.quot), (a.mid, b.mid), (a.sub, b.sub))]
    d = pairing_defect(a, b)
    report = {"command": "pairing", "pairings": {k: scalar_to_json(f, v) for k, v in zip(("quot", "mid", "sub"), vals)},
              "defect": scalar_to_json(f, d)}
    return (EXIT_OK if d == 0 else EXIT_VIOLATION), report, [f"<a'',b''> = {report['pairings']['quot']}",
                                                            f"<a,b> = {report['pairings']['mid']}",
                                                            f"<a',b'> = {report['pairings']['sub']}",
                                                            f"defect = {report['defect']}"]


def cmd_pipeline(args):
    if args.file is None:
        return _run_suite(args, "pipeline", 20)
    doc = _load(args.file)
    a, b = _pair_job(doc)
    f = doc.field
    r = pipeline(a, b)
    report = {
        "command": "pipeline",
        "diagonal": [scalar_to_json(f, x) for x in r.diagonal],
        "defect": scalar_to_json(f, r.defect),
        "squares_commute": r.triangle_map.commutes(),
        "theta": [_graded(t) for t in r.triangle_map.theta],
    }
    ok = r.holds()
    lines = [f"theta_1 diagonal = ({', '.join(report['diagonal'])})", f"pipeline defect = {report['defect']}",
             "PASS" if ok else "FAIL"]
    return (EXIT_OK if ok else EXIT_VIOLATION), report, lines


def cmd_fold(args):
    doc = _load(args.file)
    _expect(doc, "square")
    T = tr.fold_square(doc.value)
    exact = tr.validate_triangle(T)
    report = {"command": "fold", "exact": exact, "triangle": to_json(Document("triangle", doc.field, T))}
    return EXIT_OK, report, [f"folded triangle is {'exact' if exact else 'not exact'}"]


def cmd_nine_validate(args):
    D = _nine_from(args)
    try:
        D.validate()
        reason = None
    except cx.ValidationError as exc:
        reason = str(exc)
    report = {"command": "nine-validate", "valid": reason is None, "reason": reason}
    return (EXIT_OK if reason is None else EXIT_INVALID), report, ["valid" if reason is None else f"INVALID: {reason}"]


def cmd_nine_triangle(args):
    D = _nine_from(args)
    try:
        T = ng.associated_triangle(D)
    except cx.ValidationError as exc:
        report = {"command": "nine-triangle", "valid": False, "reason": str(exc)}
        return EXIT_INVALID, report, [f"INVALID: {exc}"]
    exact = tr.validate_triangle(T)
    report = {"command": "nine-triangle", "valid": True, "exact": exact,
              "first": _graded(T.f), "second": _graded(T.g)}
    lines = []
    for label, m in (("first map", T.f), ("second map", T.g)):
        for n in cx.degree_span(m.source, m.target):
            if m.source.rank(n) or m.target.rank(n):
                lines.append(f"{label}, degree {n}:")
                lines.append(_fmt_matrix(m(n)))
    lines.append("exact" if exact else "NOT exact")
    return (EXIT_OK if exact else EXIT_VIOLATION), report, lines


def cmd_lower_complete(args):
    doc = _load(args.file)
    _expect(doc, "job")
    try:
        D = ng.complete_lower_nine(lower_from_job(doc.value))
    except cx.ValidationError as exc:
        return EXIT_INVALID, {"command": "lower-complete", "valid": False, "reason": str(exc)}, [f"INVALID: {exc}"]
    report = {"command": "lower-complete", "valid": True, "nine": to_json(Document("nine", doc.field, D))}
    ranks = [[D.X[j][k].total_rank for k in range(3)] for j in range(3)]
    return EXIT_OK, report, ["completed; total ranks " + str(ranks)]


def cmd_additivity(args):
    return _run_suite(args, "additivity", 100)


def paper_examples(field: FieldSpec, rank: int = 2) -> dict:
    X = cx.concentrated(field, 0, rank)
    I = Matrix.identity(field, rank)
    Z = Matrix.zeros(field, rank, rank)
    want = {
        "source": (Matrix.block(field, [[I], [-I], [I]]), Matrix.block(field, [[I, I, Z], [Z, I, I]])),
        "target": (Matrix.block(field, [[I, Z], [-I, I], [Z, -I]]), Matrix.block(field, [[I, I, I]])),
    }
    out = {}
    for name, build in (("source", ng.source_nine), ("target", ng.target_nine)):
        T = ng.associated_triangle(build(X))
        u, v = T.f(0), T.g(0)
        out[name] = {
            "first": matrix_to_json(u),
            "second": matrix_to_json(v),
            "exact": tr.validate_triangle(T),
            "match": u == want[name][0] and v == want[name][1],
        }
    return out


def cmd_paper_examples(args):
    fields = [args.field] if args.field else [FieldSpec.parse("Q"), FieldSpec.parse("F5")]
    report = {"command": "paper-examples", "rank": args.rank, "results": {}}
    lines = []
    ok = True
    for f in fields:
        res = paper_examples(f, args.rank)
        report["results"][str(f)] = res
        for name, label in (("source", "S(X)"), ("target", "T(X)")):
            r = res[name]
            good = r["exact"] and r["match"]
            ok = ok and good
            lines.append(f"{label} over {f}, X = rank {args.rank} in degree 0")
            lines.append(" first map:")
            lines.append(_fmt_matrix(Matrix(f, r["first"])))
            lines.append(" second map:")
            lines.append(_fmt_matrix(Matrix(f, r["second"])))
            lines.append(" PASS" if good else " FAIL")
    report["status"] = "pass" if ok else "fail"
    return (EXIT_OK if ok else EXIT_VIOLATION), report, lines


def cmd_selftest(args):
    field = args.field or FieldSpec.parse("F7")
    cases = args.cases if args.cases is not None else 20
    if cases < 1:
        raise UsageError("--cases must be at least 1")
    size = None
    if args.max_rank is not None or args.window is not None:
        size = _suite_size(args, Size(2, (-1, 1)))
    report = run_selftest(field, args.seed, cases, parallel=args.parallel, size=size)
    lines = [f"{s['name']:<11} {s['passed']}/{s['cases']}" for s in report["suites"]]
    lines.append(report["status"].upper())
    return (EXIT_OK if report["status"] == "pass" else EXIT_VIOLATION), report, lines


HANDLERS = {
    "validate": cmd_validate,
    "homology": cmd_homology,
    "trace": cmd_trace,
    "pairing": cmd_pairing,
    "fold": cmd_fold,
    "nine-validate": cmd_nine_validate,
    "nine-triangle": cmd_nine_triangle,
    "lower-complete": cmd_lower_complete,
    "additivity": cmd_additivity,
    "pipeline": cmd_pipeline,
    "paper-examples": cmd_paper_examples,
    "selftest": cmd_selftest,
}


def _emit(args, report: dict, lines: list[str]) -> None:
    text = dumps(report) if args.json else "\n".join(lines) + "\n"
    if args.out is not None:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def run_command(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(str(exc))
        return EXIT_PARSE
    if args.command is None:
        sys.stderr.write(parser.format_usage())
        return EXIT_PARSE
    try:
        code, report, lines = HANDLERS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_PARSE
    except (ParseError, FieldError) as exc:
        sys.stderr.write(f"parse error: {exc}\n")
        return EXIT_PARSE
    except (cx.ValidationError, ShapeError) as exc:
        sys.stderr.write(f"validation error: {exc}\n")
        return EXIT_INVALID
    _emit(args, report, lines)
    return code


def main(argv: list[str] | None = None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
