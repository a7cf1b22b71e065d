"""Exact nine-diagrams, their five-term chains and associated triangles.

Entries are ``X[j][k]`` with ``0 <= j, k <= 2``; ``dh[j][k]: X[j][k] -> X[j][k+1]``
and ``dv[j][k]: X[j][k] -> X[j+1][k]``.  Witnesses are chain maps out of a
shifted entry: ``w_row[j]: X[j][0][1] -> X[j][2]``, ``w_col[k]: X[0][k][1] ->
X[2][k]``, ``w_ul: X[0][0][1] -> X[1][1]`` and ``w_lr: X[1][1][1] -> X[2][2]``.

The five-term chain has ``C_i = sum_{j+k=i} X[j][k]`` (j ascending) and
``d_i = dh + (-1)^{j+k} dv`` on ``X[j][k]``.  The associated triangle is
``cone(d_0) -u-> C_2 -v-> fiber(d_3)`` with

    u(x, (a, b)) = (w_r0 x + dh01 a,  -w_ul x - dv01 a + dh10 b,  w_c0 x - dv10 b)
    v(c, m, e)   = ((dv02 c + dh11 m,  dv11 m + dh20 e),  w_c2 c + w_lr m + w_r2 e)
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

from .complexes import (
    ChainComplex,
    ChainMap,
    GradedMap,
    ValidationError,
    block_matrix,
    compose,
    degree_span,
    direct_sum,
    identity,
    shift,
    shift_map,
    zero_map,
)
from .exactfield import BlockSystem, FieldSpec, Matrix, kernel_basis, mat_rank, solve
from .triangles import Triangle, cone, fiber, validate_triangle

__all__ = [
    "NineValidationError",
    "ConstructionError",
    "CompletionError",
    "NaturalityError",
    "UnsupportedInputError",
    "NineDiagram",
    "FiveTermChain",
    "NineMap",
    "TriangleMap",
    "LowerNine",
    "DEFAULT_SIGNS",
    "five_term_chain",
    "associated_maps",
    "associated_triangle",
    "search_signs",
    "source_nine",
    "target_nine",
    "complete_lower_nine",
    "restrict_lower",
    "kernel_complex",
    "apply_nine_map",
    "total_complex",
    "transpose",
    "solve_upper_corner",
    "solve_lower_corner",
    "zero_complex",
]

POSITIONS = [(j, k) for j in range(3) for k in range(3)]


class NineValidationError(ValidationError):
    pass


class ConstructionError(ValidationError):
    """The associated triangle contract fails for every sign choice."""


class CompletionError(ValidationError):
    pass


class NaturalityError(ValidationError):
    pass


class UnsupportedInputError(ValueError):
    pass


def zero_complex(field: FieldSpec) -> ChainComplex:
    return ChainComplex(field, {})


def _antidiagonal(i: int) -> list[tuple[int, int]]:
    return [(j, i - j) for j in range(3) if 0 <= i - j <= 2]


@dataclass(frozen=True, eq=False)
class NineDiagram:
    X: tuple  # 3x3 tuple of ChainComplex
    dh: tuple  # 3x2: dh[j][k] for k in 0, 1
    dv: tuple  # 2x3: dv[j][k] for j in 0, 1
    w_row: tuple  # 3
    w_col: tuple  # 3
    w_ul: ChainMap
    w_lr: ChainMap

    @classmethod
    def build(cls, X, dh, dv, w_row=None, w_col=None, w_ul=None, w_lr=None) -> "NineDiagram":
        """Fill missing witnesses with zero maps."""
        X = tuple(tuple(r) for r in X)
        w_row = list(w_row or [None] * 3)
        w_col = list(w_col or [None] * 3)
        for j in range(3):
            if w_row[j] is None:
                w_row[j] = zero_map(shift(X[j][0], 1), X[j][2])
            if w_col[j] is None:
                w_col[j] = zero_map(shift(X[0][j], 1), X[2][j])
        if w_ul is None:
            w_ul = zero_map(shift(X[0][0], 1), X[1][1])
        if w_lr is None:
            w_lr = zero_map(shift(X[1][1], 1), X[2][2])
        return cls(X, tuple(tuple(r) for r in dh), tuple(tuple(r) for r in dv),
                   tuple(w_row), tuple(w_col), w_ul, w_lr)

    @property
    def field(self) -> FieldSpec:
        return self.X[0][0].field

    def row(self, j: int) -> Triangle:
        return Triangle(self.dh[j][0], self.dh[j][1], self.w_row[j])

    def col(self, k: int) -> Triangle:
        return Triangle(self.dv[0][k], self.dv[1][k], self.w_col[k])

    def witnesses(self) -> list[ChainMap]:
        return [*self.w_row, *self.w_col, self.w_ul, self.w_lr]

    def has_zero_witnesses(self) -> bool:
        return all(w.is_zero() for w in self.witnesses())

    # -- validation -----------------------------------------------------

    def _check_shapes(self):
        X = self.X
        for j in range(3):
            for k in range(2):
                m = self.dh[j][k]
                if m.source != X[j][k] or m.target != X[j][k + 1]:
                    raise NineValidationError(f"dh[{j}][{k}] has the wrong endpoints")
        for j in range(2):
            for k in range(3):
                m = self.dv[j][k]
                if m.source != X[j][k] or m.target != X[j + 1][k]:
                    raise NineValidationError(f"dv[{j}][{k}] has the wrong endpoints")
        pairs = [(self.w_row[j], X[j][0], X[j][2], f"w_row[{j}]") for j in range(3)]
        pairs += [(self.w_col[k], X[0][k], X[2][k], f"w_col[{k}]") for k in range(3)]
        pairs += [(self.w_ul, X[0][0], X[1][1], "w_ul"), (self.w_lr, X[1][1], X[2][2], "w_lr")]
        for w, a, b, name in pairs:
            if w.source != shift(a, 1) or w.target != b:
                raise NineValidationError(f"{name} has the wrong endpoints")
            if not w.is_chain_map():
                raise NineValidationError(f"{name} is not a chain map")
        for name, m in self._all_maps():
            if not m.is_chain_map():
                raise NineValidationError(f"{name} is not a chain map")

    def _all_maps(self):
        for j in range(3):
            for k in range(2):
                yield f"dh[{j}][{k}]", self.dh[j][k]
        for j in range(2):
            for k in range(3):
                yield f"dv[{j}][{k}]", self.dv[j][k]

    def square_defects(self) -> list[str]:
        bad = []
        for j in range(2):
            for k in range(2):
                if compose(self.dv[j][k + 1], self.dh[j][k]) != compose(self.dh[j + 1][k], self.dv[j][k]):
                    bad.append(f"square ({j},{k})")
        return bad

    def compatibility_defects(self) -> list[str]:
        """Witness identities that make u, v chain maps with v u = 0."""
        dh, dv = self.dh, self.dv
        wr, wc, wul, wlr = self.w_row, self.w_col, self.w_ul, self.w_lr
        s = shift_map
        bad = []
        if compose(dv[0][2], wr[0]) != compose(dh[1][1], wul):
            bad.append("dv02 w_r0 = dh11 w_ul")
        if compose(dh[2][0], wc[0]) != compose(dv[1][1], wul):
            bad.append("dh20 w_c0 = dv11 w_ul")
        if compose(wc[2], s(dh[0][1], 1)) != compose(wlr, s(dv[0][1], 1)):
            bad.append("w_c2 dh01 = w_lr dv01")
        if compose(wlr, s(dh[1][0], 1)) != compose(wr[2], s(dv[1][0], 1)):
            bad.append("w_lr dh10 = w_r2 dv10")
        total = compose(wc[2], s(wr[0], 1)) - compose(wlr, s(wul, 1)) + compose(wr[2], s(wc[0], 1))
        if not total.is_zero():
            bad.append("w_c2 w_r0 - w_lr w_ul + w_r2 w_c0 = 0")
        return bad

    def validate(self) -> None:
        self._check_shapes()
        bad = self.square_defects()
        if bad:
            raise NineValidationError("non-commuting " + ", ".join(bad))
        for j in range(3):
            try:
                tri = self.row(j)
                ok = validate_triangle(tri)
            except ValidationError as exc:
                raise NineValidationError(f"row {j}: {exc}") from exc
            if not ok:
                raise NineValidationError(f"row {j} is not an exact triangle")
        for k in range(3):
            try:
                ok = validate_triangle(self.col(k))
            except ValidationError as exc:
                raise NineValidationError(f"column {k}: {exc}") from exc
            if not ok:
                raise NineValidationError(f"column {k} is not an exact triangle")
        bad = self.compatibility_defects()
        if bad:
            raise NineValidationError("witness identities fail: " + "; ".join(bad))

    def is_valid(self) -> bool:
        try:
            self.validate()
        except ValidationError:
            return False
        return True


@dataclass(frozen=True)
class FiveTermChain:
    C: tuple  # five complexes
    d: tuple  # four chain maps
    blocks: tuple  # positions inside each C_i

    def check(self) -> bool:
        return all(compose(self.d[i + 1], self.d[i]).is_zero() for i in range(3))


def _sum_of(D: NineDiagram, positions) -> ChainComplex:
    if not positions:
        return zero_complex(D.field)
    return direct_sum(*(D.X[j][k] for j, k in positions))


def _block_map(field, src_pos, tgt_pos, src_objs, tgt_objs, entry, span) -> dict:
    """Degreewise block matrices; ``entry(n, s, t)`` gives the block or None."""
    comps = {}
    for n in span:
        heights = [tgt_objs[t].rank(n) for t in tgt_pos]
        widths = [src_objs[s].rank(n) for s in src_pos]
        blocks = []
        for t in tgt_pos:
            row = []
            for s in src_pos:
                m = entry(n, s, t)
                if m is None:
                    m = Matrix.zeros(field, tgt_objs[t].rank(n), src_objs[s].rank(n))
                row.append(m)
            blocks.append(row)
        comps[n] = block_matrix(field, blocks, heights, widths)
    return comps


def five_term_chain(D: NineDiagram) -> FiveTermChain:
    cached = D.__dict__.get("_chain")
    if cached is None:
        cached = _build_chain(D)
        object.__setattr__(D, "_chain", cached)
    return cached


def _build_chain(D: NineDiagram) -> FiveTermChain:
    field = D.field
    objs = {(j, k): D.X[j][k] for j, k in POSITIONS}
    pos = [_antidiagonal(i) for i in range(5)]
    C = [_sum_of(D, p) for p in pos]
    ds = []
    for i in range(4):
        def entry(n, s, t):
            j, k = s
            if t == (j, k + 1):
                return D.dh[j][k](n)
            if t == (j + 1, k):
                return D.dv[j][k](n).scale(field.sign(j + k))
            return None

        span = degree_span(C[i], C[i + 1])
        ds.append(ChainMap(C[i], C[i + 1], _block_map(field, pos[i], pos[i + 1], objs, objs, entry, span), check=False))
    chain = FiveTermChain(tuple(C), tuple(ds), tuple(tuple(p) for p in pos))
    if not chain.check():
        raise NineValidationError("five-term chain does not square to zero")
    return chain


# Signs on (w_r0, w_ul, w_c0, w_c2, w_lr, w_r2) inside u and v.
DEFAULT_SIGNS = (1, -1, 1, 1, 1, 1)


def associated_maps(D: NineDiagram, signs: Sequence[int] = DEFAULT_SIGNS):
    """``(u, v)`` assembled from the diagram with the given witness signs."""
    key = ("_uv", tuple(signs))
    cached = D.__dict__.get(key)
    if cached is None:
        cached = _build_uv(D, signs)
        D.__dict__[key] = cached
    return cached


def _build_uv(D: NineDiagram, signs):
    field = D.field
    X = D.X
    chain = five_term_chain(D)
    Cc = cone(chain.d[0])  # X00[1] + (X01 + X10)
    Ff = fiber(chain.d[3])  # (X12 + X21) + X22[-1]
    C2 = chain.C[2]
    s_r0, s_ul, s_c0, s_c2, s_lr, s_r2 = signs

    ucomps = {}
    for n in degree_span(Cc, C2):
        cols = [X[0][0].rank(n + 1), X[0][1].rank(n), X[1][0].rank(n)]
        rows = [X[0][2].rank(n), X[1][1].rank(n), X[2][0].rank(n)]
        z = lambda r, c: Matrix.zeros(field, rows[r], cols[c])
        blocks = [
            [D.w_row[0](n).scale(s_r0), D.dh[0][1](n), z(0, 2)],
            [D.w_ul(n).scale(s_ul), -D.dv[0][1](n), D.dh[1][0](n)],
            [D.w_col[0](n).scale(s_c0), z(2, 1), -D.dv[1][0](n)],
        ]
        ucomps[n] = block_matrix(field, blocks, rows, cols)
    u = ChainMap(Cc, C2, ucomps, check=False)

    vcomps = {}
    for n in degree_span(C2, Ff):
        cols = [X[0][2].rank(n), X[1][1].rank(n), X[2][0].rank(n)]
        rows = [X[1][2].rank(n), X[2][1].rank(n), X[2][2].rank(n - 1)]
        z = lambda r, c: Matrix.zeros(field, rows[r], cols[c])
        blocks = [
            [D.dv[0][2](n), D.dh[1][1](n), z(0, 2)],
            [z(1, 0), D.dv[1][1](n), D.dh[2][0](n)],
            [D.w_col[2](n - 1).scale(s_c2), D.w_lr(n - 1).scale(s_lr), D.w_row[2](n - 1).scale(s_r2)],
        ]
        vcomps[n] = block_matrix(field, blocks, rows, cols)
    v = ChainMap(C2, Ff, vcomps, check=False)
    return u, v


def _contract_holds(u: ChainMap, v: ChainMap) -> bool:
    if not (u.is_chain_map() and v.is_chain_map()):
        return False
    if not compose(v, u).is_zero():
        return False
    try:
        return validate_triangle(Triangle.with_zero_witness(u, v))
    except ValidationError:
        return False


def search_signs(D: NineDiagram) -> list[tuple[int, ...]]:
    """Every witness-sign vector for which u, v satisfy the triangle contract."""
    return [s for s in itertools.product((1, -1), repeat=6) if _contract_holds(*associated_maps(D, s))]


def associated_triangle(D: NineDiagram, *, validate: bool = True) -> Triangle:
    if validate:
        D.validate()
    u, v = associated_maps(D)
    if not _contract_holds(u, v):
        found = search_signs(D)
        if not found:
            raise ConstructionError("no sign choice makes the associated triangle exact")
        u, v = associated_maps(D, found[0])
    return Triangle.with_zero_witness(u, v)


# -- degenerate diagrams --------------------------------------------------------


def _grid(field, entries: dict) -> list[list[ChainComplex]]:
    return [[entries.get((j, k), zero_complex(field)) for k in range(3)] for j in range(3)]


def _grid_maps(X, given_h: dict, given_v: dict):
    dh = [[given_h.get((j, k)) or zero_map(X[j][k], X[j][k + 1]) for k in range(2)] for j in range(3)]
    dv = [[given_v.get((j, k)) or zero_map(X[j][k], X[j + 1][k]) for k in range(3)] for j in range(2)]
    return dh, dv


def source_nine(X: ChainComplex) -> NineDiagram:
    """``S(X)``: X[-1] in the corner, identities along the lower-right hook."""
    f = X.field
    G = _grid(f, {(0, 0): shift(X, -1), (0, 2): X, (1, 1): X, (1, 2): X, (2, 0): X, (2, 1): X})
    i = identity(X)
    dh, dv = _grid_maps(G, {(1, 1): i, (2, 0): i}, {(0, 2): i, (1, 1): i})
    w = ChainMap(shift(G[0][0], 1), X, i.components, check=False)
    return NineDiagram.build(G, dh, dv, w_row=[w, None, None], w_col=[w, None, None], w_ul=w)


def target_nine(X: ChainComplex) -> NineDiagram:
    """``T(X)``: X[1] in the corner, identities along the upper-left hook."""
    f = X.field
    G = _grid(f, {(0, 1): X, (0, 2): X, (1, 0): X, (1, 1): X, (2, 0): X, (2, 2): shift(X, 1)})
    i = identity(X)
    dh, dv = _grid_maps(G, {(0, 1): i, (1, 0): i}, {(0, 1): i, (1, 0): i})
    w = identity(shift(X, 1))
    return NineDiagram.build(G, dh, dv, w_row=[None, None, w], w_col=[None, None, w], w_lr=w)


def transpose(D: NineDiagram) -> NineDiagram:
    X = [[D.X[k][j] for k in range(3)] for j in range(3)]
    dh = [[D.dv[k][j] for k in range(2)] for j in range(3)]
    dv = [[D.dh[k][j] for k in range(3)] for j in range(2)]
    return NineDiagram.build(X, dh, dv, w_row=list(D.w_col), w_col=list(D.w_row), w_ul=D.w_ul, w_lr=D.w_lr)


# -- totalization ----------------------------------------------------------


def total_complex(D: NineDiagram) -> ChainComplex:
    """Totalization of the five-term chain; ``C_i^m`` sits in degree ``i + m``."""
    if not D.has_zero_witnesses():
        raise UnsupportedInputError("total_complex needs a grid with zero witnesses")
    chain = five_term_chain(D)
    C, d = chain.C, chain.d
    field = D.field
    span = degree_span(*[shift(C[i], -i) for i in range(5)])
    ranks = {m: sum(C[i].rank(m - i) for i in range(5)) for m in span}
    diffs = {}
    for m in span:
        blocks = []
        for i2 in range(5):
            row = []
            for i in range(5):
                if i2 == i:
                    blk = C[i].d(m - i).scale(field.sign(i))
                elif i2 == i + 1:
                    blk = d[i](m - i)
                else:
                    blk = Matrix.zeros(field, C[i2].rank(m + 1 - i2), C[i].rank(m - i))
                row.append(blk)
            blocks.append(row)
        diffs[m] = block_matrix(field, blocks, [C[i].rank(m + 1 - i) for i in range(5)],
                                [C[i].rank(m - i) for i in range(5)])
    window = (span.start, span.stop - 1) if len(span) else None
    return ChainComplex(field, ranks, diffs, window=window)


# -- maps of nine-diagrams ------------------------------------------------------


@dataclass(frozen=True)
class TriangleMap:
    """Three chain maps between the terms of two triangles."""

    source: Triangle
    target: Triangle
    theta: tuple  # (theta0, theta1, theta2)

    def square_defects(self) -> list[str]:
        t0, t1, t2 = self.theta
        bad = []
        if compose(t1, self.source.f) != compose(self.target.f, t0):
            bad.append("first square")
        if compose(t2, self.source.g) != compose(self.target.g, t1):
            bad.append("second square")
        if compose(self.target.w, shift_map(t0, 1)) != compose(t2, self.source.w):
            bad.append("third square")
        return bad

    def commutes(self) -> bool:
        return not self.square_defects()


@dataclass(frozen=True, eq=False)
class NineMap:
    """Entrywise chain maps plus corner corrections.

    ``h01: X00[1] -> X'01`` and ``h10: X00[1] -> X'10`` fill the two squares
    out of the upper-left corner; ``k12: X12 -> X'22[-1]`` and
    ``k21: X21 -> X'22[-1]`` fill the two squares into the lower-right
    corner.  All four vanish for maps that intertwine witnesses strictly.
    """

    source: NineDiagram
    target: NineDiagram
    phi: tuple  # 3x3 ChainMaps
    h01: GradedMap | None = None
    h10: GradedMap | None = None
    k12: GradedMap | None = None
    k21: GradedMap | None = None

    def correction(self, name: str) -> GradedMap:
        m = getattr(self, name)
        if m is not None:
            return m
        S, T = self.source.X, self.target.X
        ends = {
            "h01": (shift(S[0][0], 1), T[0][1]),
            "h10": (shift(S[0][0], 1), T[1][0]),
            "k12": (S[1][2], shift(T[2][2], -1)),
            "k21": (S[2][1], shift(T[2][2], -1)),
        }[name]
        return GradedMap(ends[0], ends[1], 0, {})

    def has_corrections(self) -> bool:
        return any(not self.correction(n).is_zero() for n in ("h01", "h10", "k12", "k21"))

    # strict squares: everything except the four corrected ones
    _CORRECTED_H = {(0, 0), (2, 1)}
    _CORRECTED_V = {(0, 0), (1, 2)}

    def entry_defects(self, strict: bool = False) -> list[str]:
        S, T, phi = self.source, self.target, self.phi
        bad = []
        for j, k in POSITIONS:
            m = phi[j][k]
            if m.source != S.X[j][k] or m.target != T.X[j][k]:
                bad.append(f"phi[{j}][{k}] endpoints")
            elif not m.is_chain_map():
                bad.append(f"phi[{j}][{k}] not a chain map")
        if bad:
            return bad
        for j in range(3):
            for k in range(2):
                if not strict and (j, k) in self._CORRECTED_H:
                    continue
                if compose(phi[j][k + 1], S.dh[j][k]) != compose(T.dh[j][k], phi[j][k]):
                    bad.append(f"dh[{j}][{k}] naturality")
        for j in range(2):
            for k in range(3):
                if not strict and (j, k) in self._CORRECTED_V:
                    continue
                if compose(phi[j + 1][k], S.dv[j][k]) != compose(T.dv[j][k], phi[j][k]):
                    bad.append(f"dv[{j}][{k}] naturality")
        return bad

    def intertwines_witnesses(self) -> bool:
        """Strict intertwining ``w' phi[src][1] = phi[tgt] w`` for all witnesses."""
        S, T, phi = self.source, self.target, self.phi
        checks = [(S.w_row[j], T.w_row[j], phi[j][0], phi[j][2]) for j in range(3)]
        checks += [(S.w_col[k], T.w_col[k], phi[0][k], phi[2][k]) for k in range(3)]
        checks += [(S.w_ul, T.w_ul, phi[0][0], phi[1][1]), (S.w_lr, T.w_lr, phi[1][1], phi[2][2])]
        return all(compose(wt, shift_map(a, 1)) == compose(b, ws) for ws, wt, a, b in checks)

    def triangle_map(self) -> TriangleMap:
        return _triangle_map(self)

    def validate(self) -> None:
        bad = self.entry_defects()
        if bad:
            raise NaturalityError("; ".join(bad))
        tm = self.triangle_map()
        for name, t in zip(("cone", "middle", "fiber"), tm.theta):
            if not t.is_chain_map():
                raise NaturalityError(f"induced {name} map is not a chain map")
        bad = tm.square_defects()
        if bad:
            raise NaturalityError("induced triangle map fails: " + ", ".join(bad))

    def is_valid(self) -> bool:
        try:
            self.validate()
        except ValidationError:
            return False
        return True

    def then(self, other: "NineMap") -> "NineMap":
        """``other o self``."""
        phi = tuple(tuple(compose(other.phi[j][k], self.phi[j][k]) for k in range(3)) for j in range(3))
        c = lambda n: self.correction(n)
        o = lambda n: other.correction(n)
        h01 = compose(o("h01"), shift_map(self.phi[0][0], 1).as_graded()) + compose(other.phi[0][1].as_graded(), c("h01"))
        h10 = compose(o("h10"), shift_map(self.phi[0][0], 1).as_graded()) + compose(other.phi[1][0].as_graded(), c("h10"))
        p22 = shift_map(other.phi[2][2], -1).as_graded()
        k12 = compose(o("k12"), self.phi[1][2].as_graded()) + compose(p22, c("k12"))
        k21 = compose(o("k21"), self.phi[2][1].as_graded()) + compose(p22, c("k21"))
        return NineMap(self.source, other.target, phi, h01, h10, k12, k21)

    @classmethod
    def identity(cls, D: NineDiagram) -> "NineMap":
        return cls(D, D, tuple(tuple(identity(D.X[j][k]) for k in range(3)) for j in range(3)))

    @classmethod
    def scalar(cls, D: NineDiagram, c) -> "NineMap":
        phi = tuple(tuple(identity(D.X[j][k]).scale(c) for k in range(3)) for j in range(3))
        return cls(D, D, phi)


def _theta_blocks(m: NineMap):
    S, T = m.source.X, m.target.X
    phi = m.phi
    field = m.source.field
    u_s, v_s = associated_maps(m.source)
    u_t, v_t = associated_maps(m.target)
    Cs, Ct = u_s.source, u_t.source
    Fs, Ft = v_s.target, v_t.target
    M1s, M1t = u_s.target, u_t.target
    h01, h10 = m.correction("h01"), m.correction("h10")
    k12, k21 = m.correction("k12"), m.correction("k21")

    t0 = {}
    for n in degree_span(Cs, Ct):
        cols = [S[0][0].rank(n + 1), S[0][1].rank(n), S[1][0].rank(n)]
        rows = [T[0][0].rank(n + 1), T[0][1].rank(n), T[1][0].rank(n)]
        z = lambda r, c: Matrix.zeros(field, rows[r], cols[c])
        blocks = [[phi[0][0](n + 1), z(0, 1), z(0, 2)],
                  [h01(n), phi[0][1](n), z(1, 2)],
                  [h10(n), z(2, 1), phi[1][0](n)]]
        t0[n] = block_matrix(field, blocks, rows, cols)
    t1 = {}
    for n in degree_span(M1s, M1t):
        cols = [S[0][2].rank(n), S[1][1].rank(n), S[2][0].rank(n)]
        rows = [T[0][2].rank(n), T[1][1].rank(n), T[2][0].rank(n)]
        z = lambda r, c: Matrix.zeros(field, rows[r], cols[c])
        blocks = [[phi[0][2](n), z(0, 1), z(0, 2)],
                  [z(1, 0), phi[1][1](n), z(1, 2)],
                  [z(2, 0), z(2, 1), phi[2][0](n)]]
        t1[n] = block_matrix(field, blocks, rows, cols)
    t2 = {}
    for n in degree_span(Fs, Ft):
        cols = [S[1][2].rank(n), S[2][1].rank(n), S[2][2].rank(n - 1)]
        rows = [T[1][2].rank(n), T[2][1].rank(n), T[2][2].rank(n - 1)]
        z = lambda r, c: Matrix.zeros(field, rows[r], cols[c])
        blocks = [[phi[1][2](n), z(0, 1), z(0, 2)],
                  [z(1, 0), phi[2][1](n), z(1, 2)],
                  [k12(n), k21(n), phi[2][2](n - 1)]]
        t2[n] = block_matrix(field, blocks, rows, cols)
    return (u_s, v_s, u_t, v_t), (t0, t1, t2)


def _triangle_map(m: NineMap) -> TriangleMap:
    (u_s, v_s, u_t, v_t), (t0, t1, t2) = _theta_blocks(m)
    th0 = ChainMap(u_s.source, u_t.source, t0, check=False)
    th1 = ChainMap(u_s.target, u_t.target, t1, check=False)
    th2 = ChainMap(v_s.target, v_t.target, t2, check=False)
    return TriangleMap(Triangle.with_zero_witness(u_s, v_s), Triangle.with_zero_witness(u_t, v_t), (th0, th1, th2))


def apply_nine_map(m: NineMap) -> TriangleMap:
    m.validate()
    return m.triangle_map()


# -- corner solving ---------------------------------------------------------


def _selector(field, sizes: list[int], which: int, *, rows: bool) -> Matrix:
    """Matrix picking block ``which`` out of a stacked space."""
    total = sum(sizes)
    off = sum(sizes[:which])
    n = sizes[which]
    vals = [[1 if c == off + r else 0 for c in range(total)] for r in range(n)]
    m = Matrix(field, vals, shape=(n, total))
    return m if rows else m.T


def solve_upper_corner(m: NineMap) -> NineMap:
    """Solve for ``phi[0][0]``, ``h01``, ``h10`` so the cone-level map works.

    The rest of ``m`` is kept; constraints are: the cone map is a chain map
    and ``u' theta0 = theta1 u``.
    """
    field = m.source.field
    S, T = m.source.X, m.target.X
    (u_s, _, u_t, _), (_, t1, _) = _theta_blocks(m)
    Cs, Ct = u_s.source, u_t.source
    span = degree_span(Cs, Ct)
    sizes_s = {n: [S[0][0].rank(n + 1), S[0][1].rank(n), S[1][0].rank(n)] for n in span}
    sizes_t = {n: [T[0][0].rank(n + 1), T[0][1].rank(n), T[1][0].rank(n)] for n in span}
    sysm = BlockSystem(field)
    for n in span:
        sysm.unknown(n, Ct.rank(n), Cs.rank(n))
    fixed = {(1, 1): lambda n: m.phi[0][1](n), (2, 2): lambda n: m.phi[1][0](n)}
    for n in span:
        for r in range(3):
            for c in range(3):
                if (r, c) in ((0, 0), (1, 0), (2, 0)):
                    continue
                want = fixed[(r, c)](n) if (r, c) in fixed else Matrix.zeros(field, sizes_t[n][r], sizes_s[n][c])
                P = _selector(field, sizes_t[n], r, rows=True)
                Q = _selector(field, sizes_s[n], c, rows=False)
                sysm.equation([(P, n, Q)], want)
        # chain condition theta^{n+1} d_s = d_t theta^n
        terms = []
        if n + 1 in span:
            terms.append((None, n + 1, Cs.d(n)))
        terms.append((-Ct.d(n), n, None))
        sysm.equation(terms, Matrix.zeros(field, Ct.rank(n + 1), Cs.rank(n)))
        sysm.equation([(u_t(n), n, None)], t1[n] @ u_s(n) if n in t1 else
                      Matrix.zeros(field, u_t.target.rank(n), Cs.rank(n)))
    sol = sysm.solve()
    if sol is None:
        raise NaturalityError("no cone-level map makes the first square commute")
    phi00, h01, h10 = {}, {}, {}
    for n in span:
        th = sol[n]
        rs, cs = sizes_t[n], sizes_s[n]
        phi00[n + 1] = th.submatrix(slice(0, rs[0]), slice(0, cs[0]))
        h01[n] = th.submatrix(slice(rs[0], rs[0] + rs[1]), slice(0, cs[0]))
        h10[n] = th.submatrix(slice(rs[0] + rs[1], sum(rs)), slice(0, cs[0]))
    phi = [list(r) for r in m.phi]
    phi[0][0] = ChainMap(S[0][0], T[0][0], phi00, check=False)
    return NineMap(
        m.source, m.target, tuple(tuple(r) for r in phi),
        GradedMap(shift(S[0][0], 1), T[0][1], 0, h01),
        GradedMap(shift(S[0][0], 1), T[1][0], 0, h10),
        m.k12, m.k21,
    )


def solve_lower_corner(m: NineMap) -> NineMap:
    """Solve for ``phi[2][2]``, ``k12``, ``k21`` so the fiber-level map works."""
    field = m.source.field
    S, T = m.source.X, m.target.X
    (_, v_s, _, v_t), (_, t1, _) = _theta_blocks(m)
    Fs, Ft = v_s.target, v_t.target
    span = degree_span(Fs, Ft)
    sizes_s = {n: [S[1][2].rank(n), S[2][1].rank(n), S[2][2].rank(n - 1)] for n in span}
    sizes_t = {n: [T[1][2].rank(n), T[2][1].rank(n), T[2][2].rank(n - 1)] for n in span}
    sysm = BlockSystem(field)
    for n in span:
        sysm.unknown(n, Ft.rank(n), Fs.rank(n))
    fixed = {(0, 0): lambda n: m.phi[1][2](n), (1, 1): lambda n: m.phi[2][1](n)}
    for n in span:
        for r in range(3):
            for c in range(3):
                if r == 2:
                    continue
                want = fixed[(r, c)](n) if (r, c) in fixed else Matrix.zeros(field, sizes_t[n][r], sizes_s[n][c])
                P = _selector(field, sizes_t[n], r, rows=True)
                Q = _selector(field, sizes_s[n], c, rows=False)
                sysm.equation([(P, n, Q)], want)
        terms = []
        if n + 1 in span:
            terms.append((None, n + 1, Fs.d(n)))
        terms.append((-Ft.d(n), n, None))
        sysm.equation(terms, Matrix.zeros(field, Ft.rank(n + 1), Fs.rank(n)))
        M1 = v_s.source
        rhs = v_t(n) @ t1[n] if n in t1 else Matrix.zeros(field, Ft.rank(n), M1.rank(n))
        sysm.equation([(None, n, v_s(n))], rhs)
    sol = sysm.solve()
    if sol is None:
        raise NaturalityError("no fiber-level map makes the second square commute")
    phi22, k12, k21 = {}, {}, {}
    for n in span:
        th = sol[n]
        rs, cs = sizes_t[n], sizes_s[n]
        r0 = rs[0] + rs[1]
        phi22[n - 1] = th.submatrix(slice(r0, sum(rs)), slice(cs[0] + cs[1], sum(cs)))
        k12[n] = th.submatrix(slice(r0, sum(rs)), slice(0, cs[0]))
        k21[n] = th.submatrix(slice(r0, sum(rs)), slice(cs[0], cs[0] + cs[1]))
    phi = [list(r) for r in m.phi]
    phi[2][2] = ChainMap(S[2][2], T[2][2], phi22, check=False)
    return NineMap(
        m.source, m.target, tuple(tuple(r) for r in phi),
        m.h01, m.h10,
        GradedMap(S[1][2], shift(T[2][2], -1), 0, k12),
        GradedMap(S[2][1], shift(T[2][2], -1), 0, k21),
    )


# -- lower nine completion ----------------------------------------------------


@dataclass(frozen=True)
class LowerNine:
    """Right column ``X02 -> X12 -> X22``, bottom row ``X20 -> X21 -> X22`` and
    the square ``X11 -> X12``, ``X11 -> X21``."""

    dv02: ChainMap
    dv12: ChainMap
    dh20: ChainMap
    dh21: ChainMap
    dh11: ChainMap
    dv11: ChainMap


def kernel_complex(f: ChainMap) -> tuple[ChainComplex, ChainMap]:
    """Degreewise kernel with its inclusion."""
    A = f.source
    field = f.field
    bases = {}
    for n in A.degrees:
        vecs = kernel_basis(f(n))
        bases[n] = Matrix.hstack(field, vecs, A.rank(n)) if vecs else Matrix.zeros(field, A.rank(n), 0)
    ranks = {n: bases[n].cols for n in A.degrees}
    diffs = {}
    for n in A.degrees:
        if n + 1 not in bases:
            continue
        x = solve(bases[n + 1], A.d(n) @ bases[n])
        if x is None:
            raise CompletionError(f"kernel not closed under d in degree {n}")
        diffs[n] = x
    K = ChainComplex(field, ranks, diffs, window=A.window)
    return K, ChainMap(K, A, bases)


def _factor_through(mono: ChainMap, g: ChainMap) -> ChainMap:
    """The unique ``h`` with ``mono h = g``, mono degreewise injective."""
    comps = {}
    for n in g.source.degrees:
        x = solve(mono(n), g(n))
        if x is None:
            raise CompletionError(f"map does not factor in degree {n}")
        comps[n] = x
    return ChainMap(g.source, mono.source, comps)


def _is_surjective(f: ChainMap) -> bool:
    return all(mat_rank(f(n)) == f.target.rank(n) for n in f.target.degrees)


def _is_injective(f: ChainMap) -> bool:
    return all(mat_rank(f(n)) == f.source.rank(n) for n in f.source.degrees)


def _degreewise_ses(f: ChainMap, g: ChainMap) -> bool:
    if not compose(g, f).is_zero():
        return False
    if not (_is_injective(f) and _is_surjective(g)):
        return False
    return all(
        mat_rank(f(n)) == f.target.rank(n) - mat_rank(g(n)) for n in f.target.degrees
    )


def complete_lower_nine(L: LowerNine) -> NineDiagram:
    if not _degreewise_ses(L.dv02, L.dv12):
        raise CompletionError("right column is not a degreewise short exact sequence")
    if not _degreewise_ses(L.dh20, L.dh21):
        raise CompletionError("bottom row is not a degreewise short exact sequence")
    if compose(L.dv12, L.dh11) != compose(L.dh21, L.dv11):
        raise CompletionError("lower-right square does not commute")
    if not (_is_surjective(L.dh11) and _is_surjective(L.dv11)):
        raise CompletionError("middle maps out of X11 must be degreewise surjective")
    X10, dh10 = kernel_complex(L.dh11)
    X01, dv01 = kernel_complex(L.dv11)
    dv10 = _factor_through(L.dh20, compose(L.dv11, dh10))
    dh01 = _factor_through(L.dv02, compose(L.dh11, dv01))
    if not (_is_surjective(dv10) and _is_surjective(dh01)):
        raise CompletionError("induced maps onto X20 / X02 are not surjective")
    X00, dv00 = kernel_complex(dv10)
    dh00 = _factor_through(dv01, compose(dh10, dv00))
    X = [[X00, X01, L.dv02.source], [X10, L.dh11.source, L.dh11.target], [L.dh20.source, L.dh20.target, L.dh21.target]]
    D = NineDiagram.build(
        X,
        [[dh00, dh01], [dh10, L.dh11], [L.dh20, L.dh21]],
        [[dv00, dv01, L.dv02], [dv10, L.dv11, L.dv12]],
    )
    try:
        D.validate()
    except NineValidationError as exc:
        raise CompletionError(f"completed grid is not exact: {exc}") from exc
    return D


def restrict_lower(D: NineDiagram) -> LowerNine:
    return LowerNine(D.dv[0][2], D.dv[1][2], D.dh[2][0], D.dh[2][1], D.dh[1][1], D.dv[1][1])
