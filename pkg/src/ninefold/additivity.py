"""Random split sequences, trace additivity and the Hom nine-diagram pipeline.

A split sequence ``F' -i-> F -p-> F''`` is stored as ``F = F' + F''`` with
differential ``[[d', u], [0, d'']]``; ``u`` is the twist (degree +1,
``d' u + u d'' = 0``).  Maps between such sequences are upper-triangular.
"""

from __future__ import annotations

from dataclasses import dataclass

from .complexes import (
    ChainComplex,
    ChainMap,
    GradedMap,
    ValidationError,
    block_matrix,
    compose,
    degree_span,
    identity,
    zero_map,
)
from .exactfield import BlockSystem, FieldSpec, Matrix, kernel_basis, solve
from .monoidal import (
    hom_vector,
    internal_hom,
    tensor,
    tensor_maps,
    lefschetz_trace,
    post_compose,
    pre_compose,
    verdier_pairing_point,
)
from .triangles import CommSquare, pair_map
from .ninegrid import (
    NineDiagram,
    NineMap,
    TriangleMap,
    associated_maps,
    solve_lower_corner,
    solve_upper_corner,
    source_nine,
    target_nine,
)

__all__ = [
    "SplitSES",
    "SESMap",
    "random_complex",
    "random_chain_map",
    "random_split_ses",
    "random_ses_map",
    "random_endo",
    "trace_additivity",
    "pairing_defect",
    "hom_grid",
    "tensor_grid",
    "random_exact_square",
    "perturb_square",
    "coev_nine",
    "ev_nine",
    "PipelineResult",
    "pipeline",
]


def _stack_rows(field, vecs: list[Matrix], width: int) -> Matrix:
    if not vecs:
        return Matrix.zeros(field, 0, width)
    return Matrix.block(field, [[v.T] for v in vecs])


def random_complex(field: FieldSpec, rng, window=(-1, 1), max_rank: int = 2, min_rank: int = 0) -> ChainComplex:
    lo, hi = window
    ranks = {n: int(rng.integers(min_rank, max_rank + 1)) for n in range(lo, hi + 1)}
    diffs = {}
    prev = None
    for n in range(lo, hi):
        r, r1 = ranks[n], ranks[n + 1]
        if prev is None:
            left = Matrix.identity(field, r)
        else:
            # rows annihilating the previous differential
            left = _stack_rows(field, kernel_basis(prev.T), r)
        d = Matrix.random(field, r1, left.rows, rng) @ left
        diffs[n] = d
        prev = d
    return ChainComplex(field, ranks, diffs, window=window)


def _sample(system: BlockSystem, rng) -> dict:
    sol = system.sample(rng)
    if sol is None:  # homogeneous systems always have 0
        raise ValidationError("inconsistent random system")
    return sol


def random_chain_map(X: ChainComplex, Y: ChainComplex, rng) -> ChainMap:
    field = X.field
    span = degree_span(X, Y)
    sysm = BlockSystem(field)
    for n in span:
        sysm.unknown(n, Y.rank(n), X.rank(n))
    for n in span:
        if n + 1 in span:
            sysm.equation([(None, n + 1, X.d(n)), (-Y.d(n), n, None)])
    sol = _sample(sysm, rng)
    return ChainMap(X, Y, {n: sol[n] for n in span})


@dataclass(frozen=True, eq=False)
class SplitSES:
    sub: ChainComplex  # F'
    quot: ChainComplex  # F''
    twist: GradedMap  # F'' -> F', degree +1
    total: ChainComplex
    iota: ChainMap
    pi: ChainMap
    sigma: GradedMap  # section F'' -> F, not a chain map when twisted
    rho: GradedMap  # retraction F -> F'

    @classmethod
    def from_twist(cls, sub: ChainComplex, quot: ChainComplex, twist: GradedMap | None = None) -> "SplitSES":
        field = sub.field
        if twist is None:
            twist = GradedMap(quot, sub, 1, {})
        span = degree_span(sub, quot)
        ranks = {n: sub.rank(n) + quot.rank(n) for n in span}
        diffs = {}
        for n in span:
            diffs[n] = block_matrix(
                field,
                [[sub.d(n), twist(n)], [Matrix.zeros(field, quot.rank(n + 1), sub.rank(n)), quot.d(n)]],
                [sub.rank(n + 1), quot.rank(n + 1)],
                [sub.rank(n), quot.rank(n)],
            )
        window = (span.start, span.stop - 1) if len(span) else None
        F = ChainComplex(field, ranks, diffs, window=window)
        inc, proj = {}, {}
        for n in span:
            a, b = sub.rank(n), quot.rank(n)
            inc[n] = block_matrix(field, [[Matrix.identity(field, a)], [Matrix.zeros(field, b, a)]], [a, b], [a])
            proj[n] = block_matrix(field, [[Matrix.zeros(field, b, a), Matrix.identity(field, b)]], [b], [a, b])
        iota = ChainMap(sub, F, inc)
        pi = ChainMap(F, quot, proj)
        sigma = GradedMap(quot, F, 0, {n: proj[n].T for n in span})
        rho = GradedMap(F, sub, 0, {n: inc[n].T for n in span})
        return cls(sub, quot, twist, F, iota, pi, sigma, rho)

    @classmethod
    def from_maps(cls, iota: ChainMap, pi: ChainMap) -> "SplitSES":
        """Any degreewise short exact ``iota, pi``; picks a splitting."""
        field = iota.field
        sub, F, quot = iota.source, iota.target, pi.target
        if pi.source != F:
            raise ValidationError("iota and pi are not composable")
        if not (iota.is_chain_map() and pi.is_chain_map()):
            raise ValidationError("iota and pi must be chain maps")
        if not compose(pi, iota).is_zero():
            raise ValidationError("pi o iota is not zero")
        sig, rho = {}, {}
        for n in degree_span(sub, F, quot):
            a, b = sub.rank(n), quot.rank(n)
            if F.rank(n) != a + b:
                raise ValidationError(f"ranks do not add up in degree {n}")
            sec = solve(pi(n), Matrix.identity(field, b))
            if sec is None:
                raise ValidationError(f"pi is not surjective in degree {n}")
            basis = Matrix.block(field, [[iota(n), sec]]) if a + b else Matrix.zeros(field, 0, 0)
            inv = solve(basis, Matrix.identity(field, a + b))
            if inv is None:
                raise ValidationError(f"sequence is not exact in degree {n}")
            sig[n] = sec
            rho[n] = inv.submatrix(slice(0, a), slice(0, a + b))
        sigma = GradedMap(quot, F, 0, sig)
        rho_m = GradedMap(F, sub, 0, rho)
        twist = compose(rho_m, compose(GradedMap(F, F, 1, {n: F.d(n) for n in F.degrees}), sigma))
        return cls(sub, quot, twist, F, iota, pi, sigma, rho_m)

    @property
    def field(self) -> FieldSpec:
        return self.total.field

    def terms(self) -> tuple[ChainComplex, ChainComplex, ChainComplex]:
        return self.sub, self.total, self.quot

    def is_twisted(self) -> bool:
        return not self.twist.is_zero()


def random_split_ses(field: FieldSpec, rng, window=(-1, 1), max_rank: int = 2, *,
                     min_rank: int = 0, twisted: bool = True) -> SplitSES:
    sub = random_complex(field, rng, window, max_rank, min_rank)
    quot = random_complex(field, rng, window, max_rank, min_rank)
    if not twisted:
        return SplitSES.from_twist(sub, quot)
    span = degree_span(sub, quot)
    sysm = BlockSystem(field)
    for n in span:
        sysm.unknown(n, sub.rank(n + 1), quot.rank(n))
    for n in span:
        # d'^{n+1} u^n + u^{n+1} d''^n = 0
        terms = [(sub.d(n + 1), n, None)]
        if n + 1 in span:
            terms.append((None, n + 1, quot.d(n)))
        sysm.equation(terms, shape=(sub.rank(n + 2), quot.rank(n)))
    sol = _sample(sysm, rng)
    twist = GradedMap(quot, sub, 1, {n: sol[n] for n in span})
    return SplitSES.from_twist(sub, quot, twist)


@dataclass(frozen=True, eq=False)
class SESMap:
    """``(a', a, a'')`` between split sequences with both squares commuting."""

    source: SplitSES
    target: SplitSES
    sub: ChainMap
    mid: ChainMap
    quot: ChainMap

    def check(self) -> bool:
        S, T = self.source, self.target
        return (
            all(m.is_chain_map() for m in (self.sub, self.mid, self.quot))
            and compose(T.iota, self.sub) == compose(self.mid, S.iota)
            and compose(T.pi, self.mid) == compose(self.quot, S.pi)
        )

    def components(self) -> tuple[ChainMap, ChainMap, ChainMap]:
        return self.sub, self.mid, self.quot


def random_ses_map(S: SplitSES, T: SplitSES, rng) -> SESMap:
    """Random upper-triangular ``[[a', v], [0, a'']]`` solved jointly."""
    field = S.field
    span = degree_span(S.total, T.total)
    sysm = BlockSystem(field)
    for n in span:
        sysm.unknown(("a1", n), T.sub.rank(n), S.sub.rank(n))
        sysm.unknown(("a2", n), T.quot.rank(n), S.quot.rank(n))
        sysm.unknown(("v", n), T.sub.rank(n), S.quot.rank(n))
    for n in span:
        if n + 1 not in span:
            continue
        sysm.equation([(None, ("a1", n + 1), S.sub.d(n)), (-T.sub.d(n), ("a1", n), None)])
        sysm.equation([(None, ("a2", n + 1), S.quot.d(n)), (-T.quot.d(n), ("a2", n), None)])
        # a'^{n+1} u^n + v^{n+1} d''^n = d'^n v^n + u^n a''^n
        sysm.equation([
            (None, ("a1", n + 1), S.twist(n)),
            (None, ("v", n + 1), S.quot.d(n)),
            (-T.sub.d(n), ("v", n), None),
            (-T.twist(n), ("a2", n), None),
        ])
    sol = _sample(sysm, rng)
    a1 = ChainMap(S.sub, T.sub, {n: sol[("a1", n)] for n in span})
    a2 = ChainMap(S.quot, T.quot, {n: sol[("a2", n)] for n in span})
    mid = {}
    for n in span:
        mid[n] = block_matrix(
            field,
            [[sol[("a1", n)], sol[("v", n)]], [Matrix.zeros(field, T.quot.rank(n), S.sub.rank(n)), sol[("a2", n)]]],
            [T.sub.rank(n), T.quot.rank(n)],
            [S.sub.rank(n), S.quot.rank(n)],
        )
    m = SESMap(S, T, a1, ChainMap(S.total, T.total, mid), a2)
    assert m.check()
    return m


def random_endo(S: SplitSES, rng) -> SESMap:
    return random_ses_map(S, S, rng)


def trace_additivity(e: SESMap):
    """``(Tr f, Tr f', Tr f'', Tr f - Tr f' - Tr f'')`` for an endomorphism."""
    field = e.source.field
    t, t1, t2 = lefschetz_trace(e.mid), lefschetz_trace(e.sub), lefschetz_trace(e.quot)
    return t, t1, t2, field.add(t, field.neg(field.add(t1, t2)))


def pairing_defect(alpha: SESMap, beta: SESMap):
    """``<a'', b''> - <a, b> + <a', b'>``."""
    field = alpha.source.field
    p2 = verdier_pairing_point(alpha.quot, beta.quot)
    p1 = verdier_pairing_point(alpha.mid, beta.mid)
    p0 = verdier_pairing_point(alpha.sub, beta.sub)
    return field.add(field.add(p2, field.neg(p1)), p0)


# -- the Hom nine-diagram ---------------------------------------------------------


def hom_grid(F: SplitSES, G: SplitSES) -> NineDiagram:
    """``H[j][k] = Hom(F_{2-j}, G_k)`` with ``F_0 = F'``, ``F_1 = F``, ``F_2 = F''``."""
    Fs, Gs = F.terms(), G.terms()
    X = [[internal_hom(Fs[2 - j], Gs[k]) for k in range(3)] for j in range(3)]
    gmaps = (G.iota, G.pi)
    fmaps = (F.pi, F.iota)  # F_{1-j} -> F_{2-j}
    dh = [[post_compose(gmaps[k], Fs[2 - j]) for k in range(2)] for j in range(3)]
    dv = [[pre_compose(fmaps[j], Gs[k]) for k in range(3)] for j in range(2)]
    return NineDiagram.build(X, dh, dv)


def tensor_grid(F: SplitSES, G: SplitSES) -> NineDiagram:
    """``X[j][k] = F_j (x) G_k``; rows and columns stay degreewise split."""
    Fs, Gs = F.terms(), G.terms()
    fm, gm = (F.iota, F.pi), (G.iota, G.pi)
    X = [[tensor(Fs[j], Gs[k]) for k in range(3)] for j in range(3)]
    dh = [[tensor_maps(identity(Fs[j]), gm[k]) for k in range(2)] for j in range(3)]
    dv = [[tensor_maps(fm[j], identity(Gs[k])) for k in range(3)] for j in range(2)]
    as_chain = lambda m: ChainMap(m.source, m.target, m.components, check=False)
    return NineDiagram.build(X, [[as_chain(m) for m in r] for r in dh], [[as_chain(m) for m in r] for r in dv])


def _point(H: ChainComplex, R: ChainComplex, phi: ChainMap) -> ChainMap:
    """The chain map ``R -> H`` picking out a degree-0 cycle."""
    return ChainMap(R, H, {0: hom_vector(phi)})


def _functional(H: ChainComplex, T: ChainComplex, row: Matrix) -> ChainMap:
    return ChainMap(H, T, {0: row})


def _trace_row(post: ChainMap, A: ChainComplex) -> Matrix:
    """Row on ``Hom(A, B)^0`` sending ``phi`` to ``Tr(post phi)``, ``post: B -> A``."""
    field = A.field
    vals = []
    for k in A.degrees:
        if A.rank(k):
            block = post(k).T.scale(field.sign(k))
            vals.extend(block.array.ravel().tolist())
    return Matrix(field, [vals], shape=(1, len(vals)))


def coev_nine(alpha: SESMap) -> NineMap:
    """``S(R) -> Hom(F, G)`` grid selecting ``alpha`` and its pieces."""
    F, G = alpha.source, alpha.target
    field = F.field
    R = ChainComplex(field, {0: 1})
    S = source_nine(R)
    H = hom_grid(F, G)
    pts = {
        (0, 2): alpha.quot,
        (1, 1): alpha.mid,
        (2, 0): alpha.sub,
        (1, 2): compose(G.pi, alpha.mid),
        (2, 1): compose(G.iota, alpha.sub),
    }
    phi = [[None] * 3 for _ in range(3)]
    for j in range(3):
        for k in range(3):
            if (j, k) in pts:
                phi[j][k] = _point(H.X[j][k], S.X[j][k], pts[(j, k)])
            else:
                phi[j][k] = zero_map(S.X[j][k], H.X[j][k])
    m = NineMap(S, H, tuple(tuple(r) for r in phi))
    m = solve_upper_corner(m)
    m.validate()
    return m


def ev_nine(beta: SESMap) -> NineMap:
    """``Hom(F, G)`` grid ``-> T(R)`` by traces against ``beta: G -> F``."""
    G, F = beta.source, beta.target
    field = F.field
    R = ChainComplex(field, {0: 1})
    T = target_nine(R)
    H = hom_grid(F, G)
    Fs = F.terms()
    # phi in Hom(F_{2-j}, G_k) goes to Tr(post phi)
    specs = {
        (0, 2): beta.quot,
        (1, 1): beta.mid,
        (2, 0): beta.sub,
        (0, 1): compose(F.pi, beta.mid),
        (1, 0): compose(beta.mid, G.iota),
    }
    phi = [[None] * 3 for _ in range(3)]
    for j in range(3):
        for k in range(3):
            if (j, k) in specs:
                row = _trace_row(specs[(j, k)], Fs[2 - j])
                phi[j][k] = _functional(H.X[j][k], T.X[j][k], row)
            else:
                phi[j][k] = zero_map(H.X[j][k], T.X[j][k])
    m = NineMap(H, T, tuple(tuple(r) for r in phi))
    m = solve_lower_corner(m)
    m.validate()
    return m


@dataclass(frozen=True)
class PipelineResult:
    coev: NineMap
    ev: NineMap
    triangle_map: TriangleMap
    diagonal: tuple  # (<a'', b''>, <a, b>, <a', b'>)
    defect: object

    def holds(self) -> bool:
        return self.defect == 0 and self.triangle_map.commutes()


def pipeline(alpha: SESMap, beta: SESMap) -> PipelineResult:
    """Compose coev and ev grids and read off the pairing identity."""
    field = alpha.source.field
    c = coev_nine(alpha)
    e = ev_nine(beta)
    total = c.then(e)
    tm = total.triangle_map()
    t1 = tm.theta[1](0)
    diag = tuple(field.element(t1[i, i]) for i in range(3))
    u_s, _ = associated_maps(total.source)
    _, v_t = associated_maps(total.target)
    d = (v_t(0) @ t1 @ u_s(0))
    return PipelineResult(c, e, tm, diag, field.element(d[0, 0]))


# -- random commuting squares -------------------------------------------------------


def random_exact_square(field: FieldSpec, rng, window=(-1, 1), max_rank: int = 2) -> CommSquare:
    """Pushout of a random ``g`` along a twisted split inclusion ``f``."""
    E = random_split_ses(field, rng, window, max_rank)
    X, Y0, Y = E.sub, E.quot, E.total
    Z = random_complex(field, rng, window, max_rank)
    g = random_chain_map(X, Z, rng)
    span = degree_span(Y0, Z)
    ranks = {n: Y0.rank(n) + Z.rank(n) for n in span}
    diffs, pc, qc = {}, {}, {}
    for n in span:
        diffs[n] = block_matrix(
            field,
            [[Y0.d(n), Matrix.zeros(field, Y0.rank(n + 1), Z.rank(n))],
             [-(g(n + 1) @ E.twist(n)), Z.d(n)]],
            [Y0.rank(n + 1), Z.rank(n + 1)],
            [Y0.rank(n), Z.rank(n)],
        )
    W = ChainComplex(field, ranks, diffs, window=(span.start, span.stop - 1))
    for n in degree_span(Y, W):
        pc[n] = block_matrix(
            field,
            [[Matrix.zeros(field, Y0.rank(n), X.rank(n)), Matrix.identity(field, Y0.rank(n))],
             [-g(n), Matrix.zeros(field, Z.rank(n), Y0.rank(n))]],
            [Y0.rank(n), Z.rank(n)],
            [X.rank(n), Y0.rank(n)],
        )
        qc[n] = block_matrix(
            field,
            [[Matrix.zeros(field, Y0.rank(n), Z.rank(n))], [-Matrix.identity(field, Z.rank(n))]],
            [Y0.rank(n), Z.rank(n)],
            [Z.rank(n)],
        )
    p = ChainMap(Y, W, pc)
    q = ChainMap(Z, W, qc)
    return CommSquare.with_zero_witness(E.iota, g, p, q)


def perturb_square(S: CommSquare, rng, mode: str = "extra") -> CommSquare:
    """``extra``: add a random summand to the corner; ``kill``: p = q = 0."""
    if mode == "kill":
        W = S.p.target
        return CommSquare.with_zero_witness(S.f, S.g, zero_map(S.p.source, W), zero_map(S.q.source, W))
    W = S.p.target
    lo, hi = W.window if W.window else (0, 0)
    K = random_complex(W.field, rng, (lo, hi), 2, min_rank=1)
    incl = pair_map(identity(W), zero_map(W, K))
    return CommSquare.with_zero_witness(S.f, S.g, compose(incl, S.p), compose(incl, S.q))
