"""One test per acceptance criterion; each prints a PASS/FAIL line.

The lines are also repeated in the terminal summary (see conftest.py).
"""

import json
import time
from contextlib import contextmanager

from conftest import ACCEPTANCE, brute_force_homology, make_rng
from ninefold import additivity as ad
from ninefold.cli import run_command
from ninefold.complexes import ChainComplex, homology_dims
from ninefold.exactfield import GF, QQ
from ninefold.selftest import Size, run_selftest
from ninefold.serialization import Document, scalar_to_json, serialize
from ninefold.triangles import cone_comparison_is_quasi_iso, is_exact_square

F5, F7 = GF(5), GF(7)


@contextmanager
def criterion(number: int, title: str, limit: float | None = None):
    """Time the body, record the outcome and print it, then re-raise failures."""
    notes: list[str] = []
    start = time.perf_counter()
    ok, error = False, None
    try:
        yield notes
        ok = True
    except Exception as exc:
        error = exc
    elapsed = time.perf_counter() - start
    if ok and limit is not None and elapsed >= limit:
        ok = False
        notes.append(f"over the {limit:g}s limit")
    if error is not None:
        notes.append(f"{type(error).__name__}: {error}")
    detail = "; ".join([f"{elapsed:.2f}s", *notes])
    ACCEPTANCE.append((number, title, ok, detail))
    print(f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
    if error is not None:
        raise error
    assert ok, detail


def cli_json(argv, capsys):
    code = run_command([*argv, "--json"])
    return code, json.loads(capsys.readouterr().out)


def blocks(field, rows, size=2):
    """Serialized block matrix whose blocks are ``c * identity``."""
    out = []
    for row in rows:
        for i in range(size):
            out.append([scalar_to_json(field, c if j == i else 0) for c in row for j in range(size)])
    return out


def nine_triangle(tmp_path, capsys, field, construct):
    path = tmp_path / f"{construct}-{field}.json"
    path.write_text(serialize(Document("complex", field, ChainComplex(field, {0: 2}))))
    return cli_json(["nine-triangle", str(path), "--construct", construct], capsys)


def check_example(tmp_path, capsys, construct, first, second):
    for field in (F5, QQ):
        code, report = nine_triangle(tmp_path, capsys, field, construct)
        assert code == 0 and report["exact"], f"{field}: not exact"
        assert report["first"]["0"] == blocks(field, first), f"{field}: first map"
        assert report["second"]["0"] == blocks(field, second), f"{field}: second map"


def test_c01_source_nine_example(tmp_path, capsys):
    with criterion(1, "S(X) associated triangle over F5 and Q", 1.0):
        check_example(tmp_path, capsys, "source", [[1], [-1], [1]], [[1, 1, 0], [0, 1, 1]])


def test_c02_target_nine_example(tmp_path, capsys):
    with criterion(2, "T(X) associated triangle over F5 and Q", 1.0):
        check_example(tmp_path, capsys, "target", [[1, 0], [-1, 1], [0, -1]], [[1, 1, 1]])


def suite_cli(capsys, command, field, cases, *extra):
    code, report = cli_json([command, "--field", str(field), "--seed", "1", "--cases", str(cases), *extra], capsys)
    s = report["suites"][0]
    return code, f"{field} {s['passed']}/{s['cases']}"


def test_c03_trace_additivity(capsys):
    with criterion(3, "trace additivity, 500 F7 + 100 Q endomorphisms", 60.0) as notes:
        for field, cases in ((F7, 500), (QQ, 100)):
            code, line = suite_cli(capsys, "additivity", field, cases, "--max-rank", "4", "--window=-2:2")
            notes.append(line)
            assert code == 0, line


def test_c04_pairing_additivity(capsys):
    with criterion(4, "pairing additivity, 300 cases", 60.0) as notes:
        for field, cases in ((F7, 200), (QQ, 100)):
            code, line = suite_cli(capsys, "pairing", field, cases)
            notes.append(line)
            assert code == 0, line


def test_c05_pipeline(capsys):
    with criterion(5, "proof pipeline, 100 cases", 120.0) as notes:
        for field, cases in ((F7, 50), (QQ, 50)):
            code, line = suite_cli(capsys, "pipeline", field, cases, "--max-rank", "2")
            notes.append(line)
            assert code == 0, line


def run_suite(name, mix, size=None):
    lines = []
    for field, cases in mix:
        report = run_selftest(field, 1, cases, suites=[name], size=size)
        s = report["suites"][0]
        lines.append(f"{field} {s['passed']}/{s['cases']}")
        assert report["status"] == "pass", lines[-1]
    return lines


def test_c06_trace_coherence():
    with criterion(6, "trace coherence, 200 endomorphisms") as notes:
        notes.extend(run_suite("trace", ((F7, 100), (QQ, 100))))


def test_c07_duality():
    with criterion(7, "zigzag identities, 100 complexes") as notes:
        notes.extend(run_suite("duality", ((F7, 70), (QQ, 30)), Size(3, (-2, 2))))


def test_c08_nine_soundness():
    with criterion(8, "nine-diagram soundness, 200 grids") as notes:
        notes.extend(run_suite("nine", ((F7, 100), (QQ, 100))))


def test_c09_square_cross_check():
    with criterion(9, "exact-square test agrees with cone comparison, 200 squares") as notes:
        agree = exact = 0
        for i in range(200):
            field = F7 if i % 4 else QQ
            rng = make_rng(9, i)
            S = ad.random_exact_square(field, rng, (-1, 1), 2)
            if i % 2:
                S = ad.perturb_square(S, rng, "extra" if i % 4 == 1 else "kill")
            verdict = is_exact_square(S)
            exact += verdict
            agree += verdict == cone_comparison_is_quasi_iso(S)
            assert i % 2 or verdict, f"constructed square {i} is not exact"
        notes.append(f"{agree}/200 agree, {exact} exact")
        assert agree == 200


def test_c10_homology_oracle():
    with criterion(10, "F2 homology against brute force, 50 complexes") as notes:
        field = GF(2)
        for i in range(50):
            X = ad.random_complex(field, make_rng(10, i), (-1, 2), 3)
            assert homology_dims(X) == brute_force_homology(X), f"complex {i}"
        notes.append("50/50 agree")


def test_c11_determinism(capsys):
    with criterion(11, "selftest reports byte-identical, serial and parallel") as notes:
        outs = []
        for extra in ([], [], ["--parallel"], ["--parallel"]):
            code = run_command(["selftest", "--seed", "7", "--cases", "50", "--json", *extra])
            outs.append(capsys.readouterr().out)
            assert code == 0
        notes.append(f"{len(outs[0])} bytes")
        assert len(set(outs)) == 1, "reports differ"
