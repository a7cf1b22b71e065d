"""Seeded property suites with deterministic reports.

Every case draws from ``SeedSequence([seed, suite_index, case])`` so results
do not depend on execution order; ``--parallel`` only changes scheduling.
A failing suite carries the smallest failing input found by re-drawing at
shrinking sizes.
"""

from __future__ import annotations

import concurrent.futures as cf
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import additivity as ad
from . import complexes as cx
from . import monoidal as mo
from . import ninegrid as ng
from . import triangles as tr
from .exactfield import FieldSpec, Matrix
from .serialization import Document, to_json

__all__ = ["Suite", "SUITES", "run_case", "run_selftest", "case_rng", "Size"]


@dataclass(frozen=True)
class Size:
    max_rank: int
    window: tuple[int, int]


def case_rng(seed: int, suite: int, case: int, salt: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, suite, case, salt]))


# Each check records its random inputs in ``rec`` as soon as they exist, so a
# crash halfway through still leaves a reportable counterexample.


def _field_laws(field: FieldSpec, rng, size: Size, rec: dict) -> bool:
    a, b, c = (field.random_element(rng, 50) for _ in range(3))
    rec.update(a=str(a), b=str(b), c=str(c))
    add, mul = field.add, field.mul
    ok = add(a, add(b, c)) == add(add(a, b), c) and mul(a, add(b, c)) == add(mul(a, b), mul(a, c))
    if a != 0:
        ok = ok and mul(a, field.inv(a)) == field.one()
    return ok


def _homology(field, rng, size, rec):
    X = rec["X"] = ad.random_complex(field, rng, size.window, size.max_rank)
    h = cx.homology_dims(X)
    euler = sum(X.rank(n) * (1 if n % 2 == 0 else -1) for n in X.degrees)
    ok = sum(v * (1 if n % 2 == 0 else -1) for n, v in h.items()) == euler
    ok = ok and cx.shift(cx.shift(X, 1), -1) == X
    return ok and all(cx.homology_dims(cx.shift(X, 1)).get(n - 1, 0) == h.get(n, 0) for n in X.degrees)


def _cone(field, rng, size, rec):
    X = ad.random_complex(field, rng, size.window, size.max_rank)
    Y = ad.random_complex(field, rng, size.window, size.max_rank)
    f = rec["f"] = ad.random_chain_map(X, Y, rng)
    C = cx.mapping_cone(f)
    ok = all((C.d(n + 1) @ C.d(n)).is_zero() for n in C.degrees)
    ok = ok and cx.is_acyclic(cx.mapping_cone(cx.identity(X)))
    return ok and tr.validate_triangle(tr.canonical_triangle(f))


def _duality(field, rng, size, rec):
    X = rec["X"] = ad.random_complex(field, rng, size.window, size.max_rank)
    z1, z2 = mo.zigzag_maps(X)
    return z1 == cx.identity(z1.source) and z2 == cx.identity(z2.source)


def _trace(field, rng, size, rec):
    X = ad.random_complex(field, rng, size.window, size.max_rank)
    Y = ad.random_complex(field, rng, size.window, size.max_rank)
    f = rec["f"] = ad.random_chain_map(X, X, rng)
    a = rec["alpha"] = ad.random_chain_map(X, Y, rng)
    b = rec["beta"] = ad.random_chain_map(Y, X, rng)
    ok = mo.trace_via_duality(f) == mo.lefschetz_trace(f)
    ok = ok and mo.lefschetz_trace(cx.compose(a, b)) == mo.lefschetz_trace(cx.compose(b, a))
    s = {n: Matrix.random(field, X.rank(n - 1), X.rank(n), rng) for n in X.degrees}
    hom = rec["s"] = cx.GradedMap(X, X, -1, s)
    ds = {n: X.d(n - 1) @ hom(n) + hom(n + 1) @ X.d(n) for n in X.degrees}
    g = f + cx.ChainMap(X, X, ds, check=False)
    return ok and mo.lefschetz_trace(g) == mo.lefschetz_trace(f)


def _fold(field, rng, size, rec):
    S = ad.random_exact_square(field, rng, size.window, size.max_rank)
    if rng.integers(0, 2):
        S = ad.perturb_square(S, rng, "extra" if rng.integers(0, 2) else "kill")
    rec.update(f=S.f, g=S.g, p=S.p, q=S.q)
    return tr.is_exact_square(S) == tr.cone_comparison_is_quasi_iso(S)


def _nine(field, rng, size, rec):
    F = rec["F"] = ad.random_split_ses(field, rng, size.window, size.max_rank, min_rank=1)
    G = rec["G"] = ad.random_split_ses(field, rng, size.window, size.max_rank, min_rank=1)
    D = ad.hom_grid(F, G) if rng.integers(0, 2) else ad.tensor_grid(F, G)
    D.validate()
    ok = ng.five_term_chain(D).check()
    u, v = ng.associated_maps(D)
    ok = ok and cx.compose(v, u).is_zero()
    ok = ok and tr.validate_triangle(ng.associated_triangle(D, validate=False))
    return ok and cx.is_acyclic(ng.total_complex(D))


def _additivity(field, rng, size, rec):
    F = rec["F"] = ad.random_split_ses(field, rng, size.window, size.max_rank)
    e = rec["endo"] = ad.random_endo(F, rng)
    return ad.trace_additivity(e)[3] == 0


def _ses_pair(field, rng, size, rec):
    F = rec["F"] = ad.random_split_ses(field, rng, size.window, size.max_rank, min_rank=1)
    G = rec["G"] = ad.random_split_ses(field, rng, size.window, size.max_rank, min_rank=1)
    a = rec["alpha"] = ad.random_ses_map(F, G, rng)
    b = rec["beta"] = ad.random_ses_map(G, F, rng)
    return a, b


def _pairing(field, rng, size, rec):
    a, b = _ses_pair(field, rng, size, rec)
    return ad.pairing_defect(a, b) == 0


def _pipeline(field, rng, size, rec):
    a, b = _ses_pair(field, rng, size, rec)
    r = ad.pipeline(a, b)
    want = tuple(mo.verdier_pairing_point(x, y) for x, y in
                 ((a.quot, b.quot), (a.mid, b.mid), (a.sub, b.sub)))
    return r.holds() and r.diagonal == want


@dataclass(frozen=True)
class Suite:
    name: str
    check: Callable
    size: Size


SUITES: tuple[Suite, ...] = (
    Suite("field", _field_laws, Size(1, (0, 0))),
    Suite("homology", _homology, Size(3, (-2, 2))),
    Suite("cone", _cone, Size(3, (-2, 2))),
    Suite("duality", _duality, Size(3, (-2, 2))),
    Suite("trace", _trace, Size(3, (-2, 2))),
    Suite("fold", _fold, Size(2, (-1, 1))),
    Suite("nine", _nine, Size(1, (-1, 1))),
    Suite("additivity", _additivity, Size(4, (-2, 2))),
    Suite("pairing", _pairing, Size(2, (-1, 1))),
    Suite("pipeline", _pipeline, Size(1, (-1, 1))),
)

_SHRINK = (Size(1, (0, 0)), Size(1, (0, 1)), Size(2, (0, 1)), Size(1, (-1, 1)), Size(2, (-1, 1)),
           Size(3, (-1, 1)), Size(3, (-2, 2)), Size(4, (-2, 2)))


def _evaluate(suite: Suite, field: FieldSpec, rng, size: Size):
    rec: dict = {}
    try:
        ok = suite.check(field, rng, size, rec)
        return bool(ok), rec, None
    except Exception as exc:  # any crash inside a property is a violation
        return False, rec, f"{type(exc).__name__}: {exc}"


def run_case(field_text: str, seed: int, index: int, case: int,
             size: Size | None = None) -> tuple[int, int, bool, str | None]:
    field = FieldSpec.parse(field_text)
    suite = SUITES[index]
    ok, _, err = _evaluate(suite, field, case_rng(seed, index, case), size or suite.size)
    return index, case, ok, err


def _inputs_doc(field: FieldSpec, inputs) -> dict | None:
    if not inputs:
        return None
    try:
        return to_json(Document("job", field, inputs))
    except Exception:  # counterexample reporting must not mask the failure
        return None


def _shrink(field: FieldSpec, seed: int, index: int, case: int, size: Size | None = None) -> dict:
    """Smallest size at which a failure reproduces; falls back to the case itself."""
    suite = SUITES[index]
    top = size or suite.size
    ladder = [s for s in _SHRINK if s.max_rank <= top.max_rank
              and s.window[0] >= top.window[0] and s.window[1] <= top.window[1]]
    for size in ladder:
        for salt in range(1, 21):
            rng = case_rng(seed, index, case, salt)
            ok, inputs, err = _evaluate(suite, field, rng, size)
            if not ok:
                return {"size": {"max_rank": size.max_rank, "window": list(size.window)},
                        "salt": salt, "error": err, "input": _inputs_doc(field, inputs)}
    ok, inputs, err = _evaluate(suite, field, case_rng(seed, index, case), top)
    return {"size": {"max_rank": top.max_rank, "window": list(top.window)},
            "salt": 0, "error": err, "input": _inputs_doc(field, inputs)}


def run_selftest(field: FieldSpec, seed: int, cases: int, *, parallel: bool = False,
                 suites: list[str] | None = None, size: Size | None = None,
                 command: str = "selftest") -> dict:
    """Run the chosen suites; ``size`` overrides every suite's default size."""
    if cases < 1:
        raise ValueError("cases must be at least 1")
    chosen = [i for i, s in enumerate(SUITES) if suites is None or s.name in suites]
    jobs = [(str(field), seed, i, c, size) for i in chosen for c in range(cases)]
    if parallel:
        workers = min(len(jobs), os.cpu_count() or 1)
        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_case, *zip(*jobs), chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [run_case(*j) for j in jobs]
    results.sort(key=lambda r: (r[0], r[1]))
    report_suites = []
    status = "pass"
    for i in chosen:
        mine = [r for r in results if r[0] == i]
        failed = [r for r in mine if not r[2]]
        entry = {"name": SUITES[i].name, "cases": len(mine), "passed": len(mine) - len(failed),
                 "failed": len(failed), "counterexample": None}
        if failed:
            status = "fail"
            first = failed[0]
            entry["counterexample"] = {"case": first[1], "case_error": first[3], **_shrink(field, seed, i, first[1], size)}
        report_suites.append(entry)
    return {"command": command, "field": str(field), "seed": seed, "cases": cases,
            "suites": report_suites, "status": status}
