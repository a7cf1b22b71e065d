"""JSON documents for complexes, maps, triangles, squares, grids and sequences.

Matrices are arrays of arrays of strings (``"3"``, ``"-1/2"``); plain JSON
integers are also accepted on input.  Output uses sorted keys so equal objects
serialize to identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from .complexes import ChainComplex, ChainMap, GradedMap, shift
from .exactfield import FieldError, FieldSpec, Matrix, ShapeError
from .ninegrid import LowerNine, NineDiagram
from .triangles import CommSquare, Triangle

__all__ = [
    "ParseError",
    "Document",
    "KINDS",
    "parse",
    "serialize",
    "dumps",
    "scalar_to_json",
    "matrix_to_json",
    "complex_to_json",
    "map_to_json",
    "lower_from_job",
]

KINDS = ("complex", "map", "triangle", "square", "nine", "ses", "endo", "job")


class ParseError(ValueError):
    """Malformed input; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True, eq=False)
class Document:
    kind: str
    field: FieldSpec
    value: Any

    def __eq__(self, other):
        if not isinstance(other, Document):
            return NotImplemented
        return self.kind == other.kind and serialize(self) == serialize(other)

    __hash__ = None


# -- writing --------------------------------------------------------------


def scalar_to_json(field: FieldSpec, x) -> str:
    x = field.element(x)
    if isinstance(x, Fraction) and x.denominator != 1:
        return f"{x.numerator}/{x.denominator}"
    return str(int(x))


def matrix_to_json(m: Matrix) -> list[list[str]]:
    return [[scalar_to_json(m.field, v) for v in row] for row in m.tolist()]


def complex_to_json(X: ChainComplex) -> dict:
    degrees = [n for n in X.degrees if X.rank(n)]
    out = {
        "field": str(X.field),
        "ranks": {str(n): X.rank(n) for n in degrees},
        "differentials": {
            str(n): matrix_to_json(X.d(n)) for n in X.degrees if not X.d(n).is_zero()
        },
    }
    if degrees:
        out["window"] = {"min": degrees[0], "max": degrees[-1]}
    return out


def _components(f: GradedMap) -> dict:
    return {str(n): matrix_to_json(f(n)) for n in f.source.degrees if not f(n).is_zero()}


def map_to_json(f: GradedMap, *, endpoints: bool = True) -> dict:
    out = {"components": _components(f)}
    if endpoints:
        out["source"] = complex_to_json(f.source)
        out["target"] = complex_to_json(f.target)
    if f.shift:
        out["degree"] = f.shift
    return out


def _nine_to_json(D: NineDiagram) -> dict:
    bare = lambda m: map_to_json(m, endpoints=False)
    return {
        "entries": [[complex_to_json(D.X[j][k]) for k in range(3)] for j in range(3)],
        "horizontal": [[bare(D.dh[j][k]) for k in range(2)] for j in range(3)],
        "vertical": [[bare(D.dv[j][k]) for k in range(3)] for j in range(2)],
        "witnesses": {
            "row": [bare(w) for w in D.w_row],
            "col": [bare(w) for w in D.w_col],
            "ul": bare(D.w_ul),
            "lr": bare(D.w_lr),
        },
    }


def _ses_to_json(E) -> dict:
    return {
        "Fp": complex_to_json(E.sub),
        "F": complex_to_json(E.total),
        "Fq": complex_to_json(E.quot),
        "iota": map_to_json(E.iota, endpoints=False),
        "pi": map_to_json(E.pi, endpoints=False),
    }


def _endo_to_json(e) -> dict:
    bare = lambda m: map_to_json(m, endpoints=False)
    return {"ses": _ses_to_json(e.source), "fp": bare(e.sub), "f": bare(e.mid), "fq": bare(e.quot)}


def _value_to_json(kind: str, v) -> dict:
    if kind == "complex":
        return complex_to_json(v)
    if kind == "map":
        return map_to_json(v)
    if kind == "triangle":
        return {"f": map_to_json(v.f), "g": map_to_json(v.g), "w": map_to_json(v.w, endpoints=False)}
    if kind == "square":
        body = {k: map_to_json(getattr(v, k)) for k in ("f", "g", "p", "q")}
        body["w"] = map_to_json(v.w, endpoints=False)
        return body
    if kind == "nine":
        return _nine_to_json(v)
    if kind == "ses":
        return _ses_to_json(v)
    if kind == "endo":
        return _endo_to_json(v)
    if kind == "job":
        return _job_to_json(v)
    raise ValueError(f"unknown kind {kind!r}")


def _job_to_json(job: dict) -> dict:
    out = {}
    for key, val in job.items():
        if isinstance(val, ChainComplex):
            out[key] = {"complex": complex_to_json(val)}
        elif isinstance(val, GradedMap):
            out[key] = {"map": map_to_json(val)}
        elif hasattr(val, "iota") and hasattr(val, "pi"):
            out[key] = {"ses": _ses_to_json(val)}
        elif hasattr(val, "mid"):
            bare = lambda m: map_to_json(m, endpoints=False)
            names = {id(v): k for k, v in job.items()}
            out[key] = {"sesmap": {"fp": bare(val.sub), "f": bare(val.mid), "fq": bare(val.quot),
                                   "from": names[id(val.source)], "to": names[id(val.target)]}}
        else:
            out[key] = val
    return out


def to_json(doc: Document) -> dict:
    body = _value_to_json(doc.kind, doc.value)
    body["kind"] = doc.kind
    body["field"] = str(doc.field)
    return body


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def serialize(doc: Document) -> str:
    return dumps(to_json(doc))


# -- reading --------------------------------------------------------------


def _need(obj, key, path):
    if not isinstance(obj, dict):
        raise ParseError("expected an object", path)
    if key not in obj:
        raise ParseError(f"missing field {key!r}", path)
    return obj[key]


def _int(v, path) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        if isinstance(v, str):
            try:
                return int(v)
            except ValueError:
                pass
        raise ParseError("expected an integer", path)
    return v


def _scalar(field: FieldSpec, v, path):
    if isinstance(v, bool) or not isinstance(v, (int, str)):
        raise ParseError("scalar must be an integer or an 'a/b' string", path)
    try:
        return field.element(v)
    except (FieldError, ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad scalar {v!r}: {exc}", path) from exc


def _matrix(field: FieldSpec, rows, shape, path) -> Matrix:
    if not isinstance(rows, list) or any(not isinstance(r, list) for r in rows):
        raise ParseError("matrix must be an array of arrays", path)
    vals = [[_scalar(field, v, f"{path}[{i}][{j}]") for j, v in enumerate(r)] for i, r in enumerate(rows)]
    if shape[1] == 0 and not vals:
        vals = []
    if len(vals) != shape[0] or any(len(r) != shape[1] for r in vals):
        got = (len(vals), len(vals[0]) if vals else 0)
        raise ParseError(f"matrix has shape {got}, expected {shape}", path)
    return Matrix(field, vals, shape=shape)


def _degree_keys(obj, path) -> dict[int, Any]:
    if not isinstance(obj, dict):
        raise ParseError("expected an object keyed by degree", path)
    out = {}
    for k, v in obj.items():
        try:
            out[int(k)] = v
        except ValueError:
            raise ParseError(f"degree key {k!r} is not an integer", path) from None
    return out


def _field_of(obj, path, default: FieldSpec | None = None) -> FieldSpec:
    if isinstance(obj, dict) and "field" in obj:
        try:
            return FieldSpec.parse(obj["field"])
        except (FieldError, ValueError, TypeError) as exc:
            raise ParseError(str(exc), f"{path}.field") from exc
    if default is None:
        raise ParseError("missing field 'field'", path)
    return default


def parse_complex(obj, path="$", field: FieldSpec | None = None) -> ChainComplex:
    field = _field_of(obj, path, field)
    ranks = {n: _int(r, f"{path}.ranks.{n}") for n, r in _degree_keys(_need(obj, "ranks", path), f"{path}.ranks").items()}
    if any(r < 0 for r in ranks.values()):
        raise ParseError("negative rank", f"{path}.ranks")
    window = None
    if "window" in obj and obj["window"] is not None:
        w = obj["window"]
        window = (_int(_need(w, "min", f"{path}.window"), f"{path}.window.min"),
                  _int(_need(w, "max", f"{path}.window"), f"{path}.window.max"))
    diffs = {}
    for n, rows in _degree_keys(obj.get("differentials", {}), f"{path}.differentials").items():
        shape = (ranks.get(n + 1, 0), ranks.get(n, 0))
        diffs[n] = _matrix(field, rows, shape, f"{path}.differentials.{n}")
    try:
        return ChainComplex(field, ranks, diffs, window=window)
    except ShapeError as exc:
        raise ParseError(str(exc), path) from exc


def _parse_components(obj, source, target, degree, path) -> dict:
    comps = {}
    for n, rows in _degree_keys(_need(obj, "components", path), f"{path}.components").items():
        shape = (target.rank(n + degree), source.rank(n))
        comps[n] = _matrix(source.field, rows, shape, f"{path}.components.{n}")
    return comps


def parse_map(obj, path="$", source=None, target=None, field=None, *, chain: bool = True) -> GradedMap:
    field = _field_of(obj, path, field or (source.field if source is not None else None))
    if source is None:
        source = parse_complex(_need(obj, "source", path), f"{path}.source", field)
    if target is None:
        target = parse_complex(_need(obj, "target", path), f"{path}.target", field)
    degree = _int(obj.get("degree", 0), f"{path}.degree")
    comps = _parse_components(obj, source, target, degree, path)
    if chain and degree == 0:
        return ChainMap(source, target, comps, check=False)
    return GradedMap(source, target, degree, comps)


def _parse_nine(obj, field, path) -> NineDiagram:
    ent = _need(obj, "entries", path)
    if not (isinstance(ent, list) and len(ent) == 3 and all(isinstance(r, list) and len(r) == 3 for r in ent)):
        raise ParseError("entries must be a 3x3 array", f"{path}.entries")
    X = [[parse_complex(ent[j][k], f"{path}.entries[{j}][{k}]", field) for k in range(3)] for j in range(3)]
    H = _need(obj, "horizontal", path)
    V = _need(obj, "vertical", path)
    try:
        dh = [[parse_map(H[j][k], f"{path}.horizontal[{j}][{k}]", X[j][k], X[j][k + 1]) for k in range(2)]
              for j in range(3)]
        dv = [[parse_map(V[j][k], f"{path}.vertical[{j}][{k}]", X[j][k], X[j + 1][k]) for k in range(3)]
              for j in range(2)]
    except (IndexError, TypeError, KeyError) as exc:
        raise ParseError("horizontal is 3x2 and vertical is 2x3", path) from exc
    W = obj.get("witnesses") or {}
    wp = f"{path}.witnesses"

    def wit(o, src, tgt, p):
        return None if o is None else parse_map(o, p, shift(src, 1), tgt)

    rows = W.get("row") or [None] * 3
    cols = W.get("col") or [None] * 3
    if len(rows) != 3 or len(cols) != 3:
        raise ParseError("row and col witnesses come in threes", wp)
    w_row = [wit(rows[j], X[j][0], X[j][2], f"{wp}.row[{j}]") for j in range(3)]
    w_col = [wit(cols[k], X[0][k], X[2][k], f"{wp}.col[{k}]") for k in range(3)]
    w_ul = wit(W.get("ul"), X[0][0], X[1][1], f"{wp}.ul")
    w_lr = wit(W.get("lr"), X[1][1], X[2][2], f"{wp}.lr")
    return NineDiagram.build(X, dh, dv, w_row, w_col, w_ul, w_lr)


def _parse_ses(obj, field, path):
    from .additivity import SplitSES

    sub = parse_complex(_need(obj, "Fp", path), f"{path}.Fp", field)
    F = parse_complex(_need(obj, "F", path), f"{path}.F", field)
    quot = parse_complex(_need(obj, "Fq", path), f"{path}.Fq", field)
    iota = parse_map(_need(obj, "iota", path), f"{path}.iota", sub, F)
    pi = parse_map(_need(obj, "pi", path), f"{path}.pi", F, quot)
    return SplitSES.from_maps(iota, pi)


def _parse_sesmap(obj, S, T, path):
    from .additivity import SESMap

    a1 = parse_map(_need(obj, "fp", path), f"{path}.fp", S.sub, T.sub)
    a = parse_map(_need(obj, "f", path), f"{path}.f", S.total, T.total)
    a2 = parse_map(_need(obj, "fq", path), f"{path}.fq", S.quot, T.quot)
    return SESMap(S, T, a1, a, a2)


def _parse_job(obj, field, path) -> dict:
    """Free-form job: values tagged ``complex``, ``map``, ``ses`` or ``sesmap``.

    A ``sesmap`` names its endpoints with ``"from"`` and ``"to"`` keys that
    refer to ``ses`` entries of the same job.
    """
    job = {}
    pending = []
    for key, val in obj.items():
        if key in ("kind", "field"):
            continue
        p = f"{path}.{key}"
        if isinstance(val, dict) and len(val) == 1:
            (tag, body), = val.items()
            if tag == "complex":
                job[key] = parse_complex(body, p, field)
                continue
            if tag == "map":
                job[key] = parse_map(body, p, field=field)
                continue
            if tag == "ses":
                job[key] = _parse_ses(body, field, p)
                continue
            if tag == "sesmap":
                pending.append((key, body, p))
                continue
        job[key] = val
    for key, body, p in pending:
        src, tgt = job.get(body.get("from")), job.get(body.get("to"))
        if src is None or tgt is None:
            raise ParseError("sesmap needs 'from' and 'to' naming ses entries", p)
        job[key] = _parse_sesmap(body, src, tgt, p)
    return job


def parse_obj(obj) -> Document:
    if not isinstance(obj, dict):
        raise ParseError("top level must be an object")
    kind = _need(obj, "kind", "$")
    if kind not in KINDS:
        raise ParseError(f"unknown kind {kind!r}", "$.kind")
    field = _field_of(obj, "$")
    path = "$"
    try:
        if kind == "complex":
            value = parse_complex(obj, path, field)
        elif kind == "map":
            value = parse_map(obj, path, field=field)
        elif kind == "triangle":
            f = parse_map(_need(obj, "f", path), "$.f", field=field)
            g = parse_map(_need(obj, "g", path), "$.g", source=f.target)
            w = parse_map(_need(obj, "w", path), "$.w", shift(f.source, 1), g.target)
            value = Triangle(f, g, w)
        elif kind == "square":
            f = parse_map(_need(obj, "f", path), "$.f", field=field)
            g = parse_map(_need(obj, "g", path), "$.g", source=f.source)
            p = parse_map(_need(obj, "p", path), "$.p", source=f.target)
            q = parse_map(_need(obj, "q", path), "$.q", g.target, p.target)
            w = (parse_map(obj["w"], "$.w", shift(f.source, 1), p.target) if obj.get("w") is not None else None)
            value = CommSquare.with_zero_witness(f, g, p, q) if w is None else CommSquare(f, g, p, q, w)
        elif kind == "nine":
            value = _parse_nine(obj, field, path)
        elif kind == "ses":
            value = _parse_ses(obj, field, path)
        elif kind == "endo":
            S = _parse_ses(_need(obj, "ses", path), field, "$.ses")
            value = _parse_sesmap(obj, S, S, path)
        else:
            value = _parse_job(obj, field, path)
    except ParseError:
        raise
    except ShapeError as exc:
        raise ParseError(str(exc), path) from exc
    return Document(kind, field, value)


def parse(text: str) -> Document:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_obj(obj)


def lower_from_job(job: dict) -> LowerNine:
    names = ("dv02", "dv12", "dh20", "dh21", "dh11", "dv11")
    missing = [n for n in names if n not in job]
    if missing:
        raise ParseError("lower-complete job needs maps " + ", ".join(missing))
    return LowerNine(*(job[n] for n in names))

