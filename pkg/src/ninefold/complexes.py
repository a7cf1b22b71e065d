"""Bounded cochain complexes of finite free modules over an exact field.

Grading is cohomological: ``d(n): X^n -> X^{n+1}``.  The shift is
``X[k]^n = X^{n+k}`` with differential ``(-1)^k d``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .exactfield import BlockSystem, FieldMismatchError, FieldSpec, Matrix, ShapeError, mat_rank

__all__ = [
    "ValidationError",
    "ChainComplex",
    "ChainMap",
    "GradedMap",
    "Homotopy",
    "homology_dims",
    "is_acyclic",
    "is_quasi_iso",
    "is_null_homotopic",
    "shift",
    "shift_map",
    "direct_sum",
    "direct_sum_maps",
    "compose",
    "identity",
    "zero_map",
    "mapping_cone",
    "euler_characteristic",
    "concentrated",
    "degree_span",
]


class ValidationError(ValueError):
    """A complex or map fails one of its defining identities."""


def degree_span(*objs) -> range:
    """Degrees where any of the given complexes can be nonzero."""
    lo, hi = None, None
    for x in objs:
        if x.window is None:
            continue
        a, b = x.window
        lo = a if lo is None else min(lo, a)
        hi = b if hi is None else max(hi, b)
    if lo is None:
        return range(0)
    return range(lo, hi + 1)


class ChainComplex:
    """A bounded complex; ``ranks`` and ``diffs`` are keyed by degree."""

    __slots__ = ("field", "window", "_ranks", "_d")

    def __init__(
        self,
        field: FieldSpec,
        ranks: Mapping[int, int],
        diffs: Mapping[int, Matrix] | None = None,
        *,
        window: tuple[int, int] | None = None,
        check: bool = True,
    ):
        self.field = field
        ranks = {int(n): int(r) for n, r in ranks.items()}
        if any(r < 0 for r in ranks.values()):
            raise ShapeError("negative rank")
        if window is None and ranks:
            window = (min(ranks), max(ranks))
        if window is not None:
            lo, hi = window
            if lo > hi:
                raise ShapeError(f"bad window {window}")
            if any(not lo <= n <= hi and r for n, r in ranks.items()):
                raise ShapeError("nonzero rank outside the window")
        self.window = window
        self._ranks = {n: r for n, r in ranks.items() if r}
        self._d: dict[int, Matrix] = {}
        for n, m in (diffs or {}).items():
            n = int(n)
            if m.field != field:
                raise FieldMismatchError(f"differential d({n}) over {m.field}, complex over {field}")
            if m.shape != (self.rank(n + 1), self.rank(n)):
                raise ShapeError(
                    f"d({n}) has shape {m.shape}, expected {(self.rank(n + 1), self.rank(n))}"
                )
            if not m.is_zero():
                self._d[n] = m
        if check:
            self.validate()

    def rank(self, n: int) -> int:
        return self._ranks.get(n, 0)

    def d(self, n: int) -> Matrix:
        m = self._d.get(n)
        if m is None:
            return Matrix.zeros(self.field, self.rank(n + 1), self.rank(n))
        return m

    @property
    def degrees(self) -> range:
        return degree_span(self)

    @property
    def ranks(self) -> dict[int, int]:
        return {n: self.rank(n) for n in self.degrees}

    @property
    def total_rank(self) -> int:
        return sum(self._ranks.values())

    def is_zero(self) -> bool:
        return not self._ranks

    def validate(self) -> None:
        for n in self.degrees:
            if not (self.d(n + 1) @ self.d(n)).is_zero():
                raise ValidationError(f"d({n + 1}) d({n}) != 0")

    def __eq__(self, other):
        if not isinstance(other, ChainComplex):
            return NotImplemented
        if self.field != other.field:
            return False
        span = degree_span(self, other)
        return all(self.rank(n) == other.rank(n) for n in span) and all(
            self.d(n) == other.d(n) for n in span
        )

    def __hash__(self):
        return hash((self.field, tuple(sorted(self._ranks.items()))))

    def __repr__(self):
        body = ", ".join(f"{n}:{self.rank(n)}" for n in self.degrees)
        return f"ChainComplex[{self.field}]({body})"


def concentrated(field: FieldSpec, degree: int = 0, n: int = 1) -> ChainComplex:
    """The free module of rank n placed in a single degree."""
    return ChainComplex(field, {degree: n})


def _same_field(*objs):
    fields = {o.field for o in objs}
    if len(fields) > 1:
        raise FieldMismatchError(f"mixed fields {sorted(map(str, fields))}")


class GradedMap:
    """Degreewise matrices ``g(n): source^n -> target^{n+shift}``; no chain condition."""

    __slots__ = ("source", "target", "shift", "_c")

    def __init__(self, source: ChainComplex, target: ChainComplex, shift: int = 0,
                 components: Mapping[int, Matrix] | None = None):
        _same_field(source, target)
        self.source, self.target, self.shift = source, target, shift
        self._c: dict[int, Matrix] = {}
        for n, m in (components or {}).items():
            n = int(n)
            want = (target.rank(n + shift), source.rank(n))
            if m.shape != want:
                raise ShapeError(f"component {n} has shape {m.shape}, expected {want}")
            if m.field != source.field:
                raise FieldMismatchError("component over the wrong field")
            if not m.is_zero():
                self._c[n] = m

    @property
    def field(self) -> FieldSpec:
        return self.source.field

    def __call__(self, n: int) -> Matrix:
        m = self._c.get(n)
        if m is None:
            return Matrix.zeros(self.field, self.target.rank(n + self.shift), self.source.rank(n))
        return m

    @property
    def components(self) -> dict[int, Matrix]:
        return {n: self(n) for n in self.source.degrees}

    def is_zero(self) -> bool:
        return not self._c

    def _like(self, comps):
        return type(self)._make(self, comps)

    @classmethod
    def _make(cls, proto, comps):
        return GradedMap(proto.source, proto.target, proto.shift, comps)

    def _check_same(self, other):
        if (
            self.source != other.source
            or self.target != other.target
            or self.shift != other.shift
        ):
            raise ShapeError("maps have different source, target or degree")

    def __add__(self, other):
        self._check_same(other)
        return self._like({n: self(n) + other(n) for n in self.source.degrees})

    def __sub__(self, other):
        self._check_same(other)
        return self._like({n: self(n) - other(n) for n in self.source.degrees})

    def __neg__(self):
        return self._like({n: -self(n) for n in self.source.degrees})

    def scale(self, c):
        return self._like({n: self(n).scale(c) for n in self.source.degrees})

    def __eq__(self, other):
        if not isinstance(other, GradedMap):
            return NotImplemented
        return (
            self.source == other.source
            and self.target == other.target
            and self.shift == other.shift
            and all(self(n) == other(n) for n in degree_span(self.source))
        )

    def __hash__(self):
        return hash((self.shift, tuple(sorted(self._c))))

    def __repr__(self):
        return f"{type(self).__name__}({self.source!r} -> {self.target!r}, shift={self.shift})"


class ChainMap(GradedMap):
    """A degree-0 map commuting strictly with the differentials."""

    __slots__ = ()

    def __init__(self, source: ChainComplex, target: ChainComplex,
                 components: Mapping[int, Matrix] | None = None, *, check: bool = True):
        super().__init__(source, target, 0, components)
        if check:
            self.validate()

    @classmethod
    def _make(cls, proto, comps):
        return ChainMap(proto.source, proto.target, comps, check=False)

    def chain_defect(self, n: int) -> Matrix:
        return self(n + 1) @ self.source.d(n) - self.target.d(n) @ self(n)

    def is_chain_map(self) -> bool:
        span = degree_span(self.source, self.target)
        return all(self.chain_defect(n).is_zero() for n in range(span.start - 1, span.stop))

    def validate(self) -> None:
        span = degree_span(self.source, self.target)
        for n in range(span.start - 1, span.stop):
            if not self.chain_defect(n).is_zero():
                raise ValidationError(f"not a chain map in degree {n}")

    def as_graded(self) -> GradedMap:
        return GradedMap(self.source, self.target, 0, self._c)


@dataclass(frozen=True)
class Homotopy:
    """``s`` of degree -1 with ``f - g = d s + s d``."""

    s: GradedMap
    f: ChainMap
    g: ChainMap

    def check(self) -> bool:
        X, Y = self.f.source, self.f.target
        for n in degree_span(X, Y):
            lhs = self.f(n) - self.g(n)
            rhs = Y.d(n - 1) @ self.s(n) + self.s(n + 1) @ X.d(n)
            if lhs != rhs:
                return False
        return True


def homology_dims(X: ChainComplex) -> dict[int, int]:
    X.validate()
    rk = {n: mat_rank(X.d(n)) for n in range(X.degrees.start - 1, X.degrees.stop)}
    return {n: X.rank(n) - rk[n] - rk[n - 1] for n in X.degrees}


def is_acyclic(X: ChainComplex) -> bool:
    return all(v == 0 for v in homology_dims(X).values())


def euler_characteristic(X: ChainComplex) -> int:
    return sum((-1) ** (n % 2) * X.rank(n) for n in X.degrees)


def identity(X: ChainComplex) -> ChainMap:
    return ChainMap(X, X, {n: Matrix.identity(X.field, X.rank(n)) for n in X.degrees}, check=False)


def zero_map(X: ChainComplex, Y: ChainComplex) -> ChainMap:
    return ChainMap(X, Y, {}, check=False)


def compose(g: GradedMap, f: GradedMap) -> GradedMap:
    """``g o f`` (apply f first).  Chain maps compose to chain maps."""
    if f.target != g.source:
        raise ShapeError("maps are not composable")
    comps = {n: g(n + f.shift) @ f(n) for n in f.source.degrees}
    if isinstance(f, ChainMap) and isinstance(g, ChainMap):
        return ChainMap(f.source, g.target, comps, check=False)
    return GradedMap(f.source, g.target, f.shift + g.shift, comps)


def shift(X: ChainComplex, k: int) -> ChainComplex:
    if k == 0:
        return X
    sign = X.field.sign(k)
    window = None if X.window is None else (X.window[0] - k, X.window[1] - k)
    return ChainComplex(
        X.field,
        {n - k: X.rank(n) for n in X.degrees},
        {n - k: X.d(n).scale(sign) for n in X.degrees},
        window=window,
        check=False,
    )


def shift_map(f: GradedMap, k: int) -> GradedMap:
    """``f[k]^n = f^{n+k}``; no sign for chain maps."""
    src, tgt = shift(f.source, k), shift(f.target, k)
    comps = {n - k: f(n) for n in f.source.degrees}
    if isinstance(f, ChainMap):
        return ChainMap(src, tgt, comps, check=False)
    # a degree-s map picks up (-1)^{ks} against the shifted differentials
    return GradedMap(src, tgt, f.shift, {n: m.scale(f.field.sign(k * f.shift)) for n, m in comps.items()})


def direct_sum(*Xs: ChainComplex) -> ChainComplex:
    """Blockwise sum; basis of each degree is the concatenation in argument order."""
    if not Xs:
        raise ValueError("direct_sum needs at least one summand")
    _same_field(*Xs)
    field = Xs[0].field
    span = degree_span(*Xs)
    windows = [x.window for x in Xs if x.window is not None]
    window = (min(w[0] for w in windows), max(w[1] for w in windows)) if windows else None
    ranks = {n: sum(x.rank(n) for x in Xs) for n in span}
    diffs = {}
    for n in span:
        blocks = [
            [Xs[i].d(n) if i == j else Matrix.zeros(field, Xs[i].rank(n + 1), Xs[j].rank(n)) for j in range(len(Xs))]
            for i in range(len(Xs))
        ]
        diffs[n] = _block(field, blocks, [x.rank(n + 1) for x in Xs], [x.rank(n) for x in Xs])
    return ChainComplex(field, ranks, diffs, window=window, check=False)


def _block(field, blocks, heights, widths) -> Matrix:
    """Block assembly that tolerates zero-sized rows/columns."""
    H, W = sum(heights), sum(widths)
    if H == 0 or W == 0:
        return Matrix.zeros(field, H, W)
    rows = [(row, h) for row, h in zip(blocks, heights) if h]
    keep = [j for j, w in enumerate(widths) if w]
    return Matrix.block(field, [[row[j] for j in keep] for row, _ in rows])


def block_matrix(field: FieldSpec, blocks, heights, widths) -> Matrix:
    return _block(field, blocks, heights, widths)


def direct_sum_maps(*fs: GradedMap) -> GradedMap:
    """Block-diagonal map between direct sums."""
    field = fs[0].field
    k = fs[0].shift
    if any(f.shift != k for f in fs):
        raise ShapeError("summands have different degrees")
    src = direct_sum(*(f.source for f in fs))
    tgt = direct_sum(*(f.target for f in fs))
    comps = {}
    for n in src.degrees:
        blocks = [
            [fs[i](n) if i == j else Matrix.zeros(field, fs[i].target.rank(n + k), fs[j].source.rank(n)) for j in range(len(fs))]
            for i in range(len(fs))
        ]
        comps[n] = _block(field, blocks, [f.target.rank(n + k) for f in fs], [f.source.rank(n) for f in fs])
    if all(isinstance(f, ChainMap) for f in fs):
        return ChainMap(src, tgt, comps, check=False)
    return GradedMap(src, tgt, k, comps)


def mapping_cone(f: ChainMap) -> ChainComplex:
    """``cone(f)^n = X^{n+1} + Y^n`` with ``d(x, y) = (-dx, f x + dy)``."""
    X, Y = f.source, f.target
    field = f.field
    span = degree_span(shift(X, 1), Y)
    ranks = {n: X.rank(n + 1) + Y.rank(n) for n in span}
    diffs = {}
    for n in span:
        blocks = [[-X.d(n + 1), Matrix.zeros(field, X.rank(n + 2), Y.rank(n))],
                  [f(n + 1), Y.d(n)]]
        diffs[n] = _block(field, blocks, [X.rank(n + 2), Y.rank(n + 1)], [X.rank(n + 1), Y.rank(n)])
    window = (span.start, span.stop - 1) if len(span) else None
    return ChainComplex(field, ranks, diffs, window=window, check=False)


def is_quasi_iso(f: ChainMap) -> bool:
    f.validate()
    return is_acyclic(mapping_cone(f))


def is_null_homotopic(f: ChainMap) -> Homotopy | None:
    """A homotopy ``s`` with ``f = d s + s d``, found by one exact linear solve."""
    X, Y = f.source, f.target
    field = f.field
    span = degree_span(X, Y)
    sys = BlockSystem(field)
    for n in span:
        sys.unknown(n, Y.rank(n - 1), X.rank(n))
    for n in span:
        terms = [(Y.d(n - 1), n, None)]
        if n + 1 in span:
            terms.append((None, n + 1, X.d(n)))
        sys.equation(terms, f(n))
    sol = sys.solve()
    if sol is None:
        return None
    s = GradedMap(X, Y, -1, sol)
    return Homotopy(s, f, zero_map(X, Y))
