"""Cones, fibers, witnessed triangles and commuting squares.

A triangle ``X -f-> Y -g-> Z`` has ``g f = 0`` on the nose plus a witness
chain map ``w: X[1] -> Z``.  It is exact when ``Phi(x, y) = w(x) + g(y)``
is a quasi-isomorphism ``cone(f) -> Z``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .complexes import (
    ChainComplex,
    ChainMap,
    ValidationError,
    block_matrix,
    compose,
    degree_span,
    direct_sum,
    is_quasi_iso,
    mapping_cone,
    shift,
    zero_map,
)
from .exactfield import Matrix

__all__ = [
    "WitnessError",
    "cone",
    "fiber",
    "cone_inclusion",
    "cone_projection",
    "fiber_projection",
    "Triangle",
    "CommSquare",
    "comparison_map",
    "canonical_triangle",
    "validate_triangle",
    "fold_square",
    "is_exact_square",
    "cone_comparison",
    "cone_comparison_is_quasi_iso",
    "pair_map",
    "copair_map",
]


class WitnessError(ValidationError):
    """The assembled comparison map out of the cone is not a chain map."""


cone = mapping_cone


def fiber(f: ChainMap) -> ChainComplex:
    """``cone(f)[-1]``: degree n is ``X^n + Y^{n-1}``."""
    return shift(cone(f), -1)


def cone_inclusion(f: ChainMap) -> ChainMap:
    """``Y -> cone(f)``, ``y -> (0, y)``."""
    X, Y, C = f.source, f.target, cone(f)
    comps = {n: block_matrix(f.field, [[Matrix.zeros(f.field, X.rank(n + 1), Y.rank(n))],
                                       [Matrix.identity(f.field, Y.rank(n))]],
                             [X.rank(n + 1), Y.rank(n)], [Y.rank(n)]) for n in C.degrees}
    return ChainMap(Y, C, comps, check=False)


def cone_projection(f: ChainMap) -> ChainMap:
    """``cone(f) -> X[1]``, ``(x, y) -> x``."""
    X, Y, C = f.source, f.target, cone(f)
    comps = {n: block_matrix(f.field, [[Matrix.identity(f.field, X.rank(n + 1)),
                                        Matrix.zeros(f.field, X.rank(n + 1), Y.rank(n))]],
                             [X.rank(n + 1)], [X.rank(n + 1), Y.rank(n)]) for n in C.degrees}
    return ChainMap(C, shift(X, 1), comps, check=False)


def fiber_projection(f: ChainMap) -> ChainMap:
    """``fiber(f) -> X``, ``(x, y) -> x``."""
    X, Y, Fb = f.source, f.target, fiber(f)
    comps = {n: block_matrix(f.field, [[Matrix.identity(f.field, X.rank(n)),
                                        Matrix.zeros(f.field, X.rank(n), Y.rank(n - 1))]],
                             [X.rank(n)], [X.rank(n), Y.rank(n - 1)]) for n in Fb.degrees}
    return ChainMap(Fb, X, comps, check=False)


def pair_map(*fs: ChainMap) -> ChainMap:
    """``x -> (f_1 x, ..., f_k x)`` into the direct sum of targets."""
    X = fs[0].source
    T = direct_sum(*(f.target for f in fs))
    comps = {n: block_matrix(X.field, [[f(n)] for f in fs], [f.target.rank(n) for f in fs], [X.rank(n)])
             for n in X.degrees}
    return ChainMap(X, T, comps, check=False)


def copair_map(*fs: ChainMap) -> ChainMap:
    """``(y_1, ..., y_k) -> sum f_i y_i`` out of the direct sum of sources."""
    W = fs[0].target
    S = direct_sum(*(f.source for f in fs))
    comps = {n: block_matrix(W.field, [[f(n) for f in fs]], [W.rank(n)], [f.source.rank(n) for f in fs])
             for n in S.degrees}
    return ChainMap(S, W, comps, check=False)


@dataclass(frozen=True)
class Triangle:
    f: ChainMap
    g: ChainMap
    w: ChainMap

    def __post_init__(self):
        if self.f.target != self.g.source:
            raise ValidationError("f and g are not composable")
        if self.w.source != shift(self.f.source, 1) or self.w.target != self.g.target:
            raise ValidationError("witness must map X[1] -> Z")
        if not compose(self.g, self.f).is_zero():
            raise ValidationError("g o f is not zero")

    @property
    def objects(self) -> tuple[ChainComplex, ChainComplex, ChainComplex]:
        return self.f.source, self.f.target, self.g.target

    @classmethod
    def with_zero_witness(cls, f: ChainMap, g: ChainMap) -> "Triangle":
        return cls(f, g, zero_map(shift(f.source, 1), g.target))


def comparison_map(T: Triangle) -> ChainMap:
    """``Phi: cone(f) -> Z``, ``(x, y) -> w(x) + g(y)``; not validated."""
    X, Y, Z = T.objects
    C = cone(T.f)
    comps = {n: block_matrix(X.field, [[T.w(n), T.g(n)]], [Z.rank(n)], [X.rank(n + 1), Y.rank(n)])
             for n in degree_span(C, Z)}
    return ChainMap(C, Z, comps, check=False)


def validate_triangle(T: Triangle) -> bool:
    if not T.w.is_chain_map():
        raise WitnessError("witness is not a chain map X[1] -> Z")
    phi = comparison_map(T)
    if not phi.is_chain_map():
        raise WitnessError("comparison map cone(f) -> Z is not a chain map")
    return is_quasi_iso(phi)


def canonical_triangle(f: ChainMap) -> Triangle:
    """``Y -> cone(f) -> X[1]`` with zero witness."""
    return Triangle.with_zero_witness(cone_inclusion(f), cone_projection(f))


@dataclass(frozen=True)
class CommSquare:
    """``f: X -> Y, g: X -> Z, p: Y -> W, q: Z -> W`` with ``p f = q g``."""

    f: ChainMap
    g: ChainMap
    p: ChainMap
    q: ChainMap
    w: ChainMap

    def __post_init__(self):
        if self.f.source != self.g.source or self.p.source != self.f.target or self.q.source != self.g.target:
            raise ValidationError("square maps do not fit together")
        if self.p.target != self.q.target:
            raise ValidationError("p and q must share a target")
        if compose(self.p, self.f) != compose(self.q, self.g):
            raise ValidationError("square does not commute")

    @classmethod
    def with_zero_witness(cls, f, g, p, q) -> "CommSquare":
        return cls(f, g, p, q, zero_map(shift(f.source, 1), p.target))


def fold_square(S: CommSquare) -> Triangle:
    """``X -(f,g)-> Y + Z -(p,-q)-> W`` keeping the witness."""
    return Triangle(pair_map(S.f, S.g), copair_map(S.p, -S.q), S.w)


def is_exact_square(S: CommSquare) -> bool:
    return validate_triangle(fold_square(S))


def cone_comparison(S: CommSquare) -> ChainMap:
    """``cone(f) -> cone(q)``, ``(x, y) -> (g x, p y)``; only meaningful for w = 0."""
    Cf, Cq = cone(S.f), cone(S.q)
    X, Y, Z = S.f.source, S.f.target, S.g.target
    W = S.p.target
    field = X.field
    comps = {}
    for n in degree_span(Cf, Cq):
        comps[n] = block_matrix(
            field,
            [[S.g(n + 1), Matrix.zeros(field, Z.rank(n + 1), Y.rank(n))],
             [Matrix.zeros(field, W.rank(n), X.rank(n + 1)), S.p(n)]],
            [Z.rank(n + 1), W.rank(n)],
            [X.rank(n + 1), Y.rank(n)],
        )
    return ChainMap(Cf, Cq, comps)


def cone_comparison_is_quasi_iso(S: CommSquare) -> bool:
    return is_quasi_iso(cone_comparison(S))
