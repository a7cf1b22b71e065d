import json
import subprocess
import sys

import numpy as np

from ninefold import additivity as ad
from ninefold import complexes as cx
from ninefold import triangles as tr
from ninefold.cli import run_command
from ninefold.complexes import ChainComplex, identity
from ninefold.exactfield import QQ, GF, Matrix
from ninefold.ninegrid import source_nine
from ninefold.serialization import Document, serialize


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(serialize(doc), encoding="utf-8")
    return str(p)


def run(argv, capsys):
    code = run_command(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rank_21():
    return ChainComplex(QQ, {0: 2, 1: 1}, {0: Matrix(QQ, [[1, 0]])})


def test_trace_of_identity(tmp_path, capsys):
    X = rank_21()
    path = write(tmp_path, "map.json", Document("map", QQ, identity(X)))
    code, out, _ = run(["trace", path], capsys)
    assert code == 0 and out.strip() == "1"
    S = ad.SplitSES.from_twist(ChainComplex(QQ, {}), X)
    e = ad.SESMap(S, S, identity(S.sub), identity(S.total), identity(S.quot))
    path = write(tmp_path, "endo.json", Document("endo", QQ, e))
    code, out, _ = run(["trace", path], capsys)
    assert code == 0 and out.splitlines()[0] == "1"


def test_validate_and_homology(tmp_path, capsys):
    X = ChainComplex(QQ, {0: 1, 1: 2, 2: 1}, {0: Matrix(QQ, [[1], [-1]]), 1: Matrix(QQ, [[1, 1]])})
    path = write(tmp_path, "x.json", Document("complex", QQ, X))
    assert run(["validate", path], capsys)[0] == 0
    code, out, _ = run(["homology", path, "--json"], capsys)
    assert code == 0


def test_invalid_complex_exit_1(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"kind": "complex", "field": "Q", "ranks": {"0": 1, "1": 1, "2": 1},
                             "differentials": {"0": [["1"]], "1": [["1"]]}}))
    assert run(["validate", str(p)], capsys)[0] == 1


def test_parse_errors_exit_3(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"kind": "complex", "field": "Q", "ranks": {"0": 1, "1": 1},
                             "differentials": {"0": [["1/0"]]}}))
    code, _, err = run(["validate", str(p)], capsys)
    assert code == 3 and "$.differentials.0" in err
    assert run(["frobnicate"], capsys)[0] == 3
    assert run(["selftest", "--cases", "0"], capsys)[0] == 3
    assert run(["selftest", "--field", "F6"], capsys)[0] == 3


def test_paper_examples(capsys):
    code, out, _ = run(["paper-examples"], capsys)
    assert code == 0
    assert out.count("PASS") == 4


def test_nine_triangle_construct(tmp_path, capsys):
    path = write(tmp_path, "r.json", Document("complex", GF(5), ChainComplex(GF(5), {0: 2})))
    code, out, _ = run(["nine-triangle", path, "--construct", "source", "--json"], capsys)
    report = json.loads(out)
    assert code == 0 and report["exact"]
    assert report["first"]["0"] == [["1", "0"], ["0", "1"], ["4", "0"], ["0", "4"], ["1", "0"], ["0", "1"]]
    code, _, _ = run(["nine-validate", path, "--construct", "target"], capsys)
    assert code == 0


def test_nine_validate_file(tmp_path, capsys):
    path = write(tmp_path, "s.json", Document("nine", QQ, source_nine(rank_21())))
    assert run(["nine-validate", path], capsys)[0] == 0
    assert run(["nine-triangle", path], capsys)[0] == 0


def test_fold(tmp_path, capsys):
    S = ad.random_exact_square(QQ, np.random.default_rng(0))
    path = write(tmp_path, "sq.json", Document("square", QQ, S))
    code, out, _ = run(["fold", path], capsys)
    assert code == 0 and "exact" in out


def test_pairing_and_pipeline_jobs(tmp_path, capsys):
    rng = np.random.default_rng(3)
    F7 = GF(7)
    F = ad.random_split_ses(F7, rng, (-1, 1), 1, min_rank=1)
    G = ad.random_split_ses(F7, rng, (-1, 1), 1, min_rank=1)
    job = {"F": F, "G": G, "alpha": ad.random_ses_map(F, G, rng), "beta": ad.random_ses_map(G, F, rng)}
    path = write(tmp_path, "job.json", Document("job", F7, job))
    code, out, _ = run(["pairing", path], capsys)
    assert code == 0 and out.splitlines()[-1] == "defect = 0"
    code, out, _ = run(["pipeline", path, "--json"], capsys)
    assert code == 0 and json.loads(out)["squares_commute"]


def test_lower_complete(tmp_path, capsys):
    rng = np.random.default_rng(4)
    D = ad.tensor_grid(ad.random_split_ses(QQ, rng), ad.random_split_ses(QQ, rng))
    job = {"dv02": D.dv[0][2], "dv12": D.dv[1][2], "dh20": D.dh[2][0], "dh21": D.dh[2][1],
           "dh11": D.dh[1][1], "dv11": D.dv[1][1]}
    path = write(tmp_path, "lower.json", Document("job", QQ, job))
    assert run(["lower-complete", path], capsys)[0] == 0


def test_additivity_500(capsys):
    code, out, _ = run(["additivity", "--seed", "42", "--cases", "500", "--field", "F7"], capsys)
    assert code == 0 and "500/500" in out


def test_out_flag(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert run(["selftest", "--seed", "1", "--cases", "2", "--json", "--out", str(out)], capsys)[0] == 0
    assert json.loads(out.read_text())["status"] == "pass"


def test_selftest_deterministic(capsys):
    a = run(["selftest", "--seed", "1", "--cases", "3", "--json"], capsys)
    b = run(["selftest", "--seed", "1", "--cases", "3", "--json"], capsys)
    assert a == b and a[0] == 0


def _bad_cone(f):
    """Cone with the sign of ``d_X`` flipped, so ``d^2 = 2 f d_X``."""
    X, Y = f.source, f.target
    field = f.field
    span = cx.degree_span(cx.shift(X, 1), Y)
    ranks = {n: X.rank(n + 1) + Y.rank(n) for n in span}
    diffs = {}
    for n in span:
        blocks = [[X.d(n + 1), Matrix.zeros(field, X.rank(n + 2), Y.rank(n))], [f(n + 1), Y.d(n)]]
        diffs[n] = cx.block_matrix(field, blocks, [X.rank(n + 2), Y.rank(n + 1)], [X.rank(n + 1), Y.rank(n)])
    return ChainComplex(field, ranks, diffs, check=False)


def test_mutated_cone_is_caught(monkeypatch, capsys):
    monkeypatch.setattr(cx, "mapping_cone", _bad_cone)
    monkeypatch.setattr(tr, "cone", _bad_cone)
    code, out, _ = run(["selftest", "--seed", "3", "--cases", "10", "--json"], capsys)
    report = json.loads(out)
    assert code == 2 and report["status"] == "fail"
    cone = next(s for s in report["suites"] if s["name"] == "cone")
    assert cone["failed"] > 0
    assert cone["counterexample"]["input"]["kind"] == "job"


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "ninefold", "paper-examples", "--field", "F5"],
                       capture_output=True, text=True, timeout=120)
    assert r.returncode == 0 and "PASS" in r.stdout
