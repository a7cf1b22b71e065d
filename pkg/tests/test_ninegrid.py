import pytest

from conftest import make_rng
from ninefold import ninegrid as ng
from ninefold.additivity import hom_grid, random_complex, random_split_ses, tensor_grid
from ninefold.complexes import (
    compose,
    concentrated,
    direct_sum,
    identity,
    is_acyclic,
    shift,
    zero_map,
)
from ninefold.exactfield import Matrix
from ninefold.triangles import CommSquare, is_exact_square, validate_triangle


def blocks(field, rows, size=2):
    """Block matrix of scalar multiples of the size x size identity."""
    I = Matrix.identity(field, size)
    return Matrix.block(field, [[I.scale(c) for c in row] for row in rows])


def test_source_nine_example(field):
    X = concentrated(field, 0, 2)
    D = ng.source_nine(X)
    D.validate()
    chain = ng.five_term_chain(D)
    assert chain.C[0] == shift(X, -1)
    assert chain.C[1].ranks.get(0, 0) == 0
    assert chain.C[2] == direct_sum(X, X, X)
    assert chain.C[3] == direct_sum(X, X)
    assert not any(chain.C[4].ranks.values())
    T = ng.associated_triangle(D)
    assert T.f(0) == blocks(field, [[1], [-1], [1]])
    assert T.g(0) == blocks(field, [[1, 1, 0], [0, 1, 1]])
    assert validate_triangle(T)


def test_target_nine_example(field):
    X = concentrated(field, 0, 2)
    D = ng.target_nine(X)
    D.validate()
    T = ng.associated_triangle(D)
    assert T.f(0) == blocks(field, [[1, 0], [-1, 1], [0, -1]])
    assert T.g(0) == blocks(field, [[1, 1, 1]])
    assert validate_triangle(T)


def test_default_signs_found_by_search(field):
    X = concentrated(field, 0, 1)
    for D in (ng.source_nine(X), ng.target_nine(X)):
        assert ng.DEFAULT_SIGNS in ng.search_signs(D)


def square(D, j, k, w=None):
    args = (D.dh[j][k], D.dv[j][k], D.dv[j][k + 1], D.dh[j + 1][k])
    return CommSquare(*args, w) if w is not None else CommSquare.with_zero_witness(*args)


def test_degenerate_squares_are_not_all_exact(field):
    # Validation cannot demand exact squares: in S(X) only the corner square
    # with the identity witness is exact, the rows and columns carry the rest.
    D = ng.source_nine(concentrated(field, 0, 1))
    assert is_exact_square(square(D, 0, 0, D.w_ul))
    assert not any(is_exact_square(square(D, j, k)) for j, k in ((0, 1), (1, 0), (1, 1)))
    assert not D.square_defects()
    assert not D.compatibility_defects()
    D = ng.target_nine(concentrated(field, 0, 1))
    assert is_exact_square(square(D, 1, 1, D.w_lr))
    assert not is_exact_square(square(D, 0, 0))


def test_transposes_validate(field):
    X = random_complex(field, make_rng(1), (-1, 1), 2)
    for D in (ng.source_nine(X), ng.target_nine(X)):
        T = ng.transpose(D)
        T.validate()
        assert validate_triangle(ng.associated_triangle(T))


def test_source_nine_of_zero_is_zero(field):
    D = ng.source_nine(ng.zero_complex(field))
    D.validate()
    assert all(not any(D.X[j][k].ranks.values()) for j in range(3) for k in range(3))


def test_degree_zero_nine_lemma(field):
    rng = make_rng(2)
    F = random_split_ses(field, rng, (0, 0), 2, min_rank=1)
    G = random_split_ses(field, rng, (0, 0), 2, min_rank=1)
    D = tensor_grid(F, G)
    D.validate()
    assert is_acyclic(ng.total_complex(D))
    assert validate_triangle(ng.associated_triangle(D))


@pytest.mark.parametrize("grid", [hom_grid, tensor_grid])
def test_random_grids(field, grid):
    for i in range(3):
        rng = make_rng(3, i)
        F = random_split_ses(field, rng, (-1, 1), 1)
        G = random_split_ses(field, rng, (-1, 1), 1)
        D = grid(F, G)
        D.validate()
        assert ng.five_term_chain(D).check()
        u, v = ng.associated_maps(D)
        assert compose(v, u).is_zero()
        assert validate_triangle(ng.associated_triangle(D))
        assert is_acyclic(ng.total_complex(D))


def test_total_complex_of_zero_diagram(field):
    D = ng.source_nine(ng.zero_complex(field))
    assert not any(ng.total_complex(D).ranks.values())


def test_total_complex_rejects_witnesses(field):
    with pytest.raises(ng.UnsupportedInputError):
        ng.total_complex(ng.source_nine(concentrated(field)))


def test_lower_completion_recovers_grid(field):
    rng = make_rng(4)
    F = random_split_ses(field, rng, (-1, 1), 2)
    G = random_split_ses(field, rng, (-1, 1), 2)
    D = tensor_grid(F, G)
    E = ng.complete_lower_nine(ng.restrict_lower(D))
    def support(C):
        return {n: r for n, r in C.ranks.items() if r}

    for j in range(3):
        for k in range(3):
            assert support(E.X[j][k]) == support(D.X[j][k])
    E.validate()
    assert is_acyclic(ng.total_complex(E))


def test_lower_completion_of_zeros(field):
    Z = ng.zero_complex(field)
    z = zero_map(Z, Z)
    D = ng.complete_lower_nine(ng.LowerNine(z, z, z, z, z, z))
    assert all(not any(D.X[j][k].ranks.values()) for j in range(3) for k in range(3))


def test_lower_completion_rejects_non_surjective(field):
    R, Z = concentrated(field), ng.zero_complex(field)
    z, zr, i = zero_map(Z, R), zero_map(R, R), identity(R)
    with pytest.raises(ng.CompletionError):
        ng.complete_lower_nine(ng.LowerNine(z, i, z, i, zr, zr))


def test_validation_failure(field):
    D = ng.source_nine(concentrated(field))
    X = [list(r) for r in D.X]
    dh = [list(r) for r in D.dh]
    dv = [list(r) for r in D.dv]
    dh[1][1] = zero_map(X[1][1], X[1][2])
    bad = ng.NineDiagram.build(X, dh, dv, w_row=list(D.w_row), w_col=list(D.w_col), w_ul=D.w_ul, w_lr=D.w_lr)
    assert not bad.is_valid()
    with pytest.raises(ng.NineValidationError):
        bad.validate()


def test_identity_and_scalar_maps(field):
    X = random_complex(field, make_rng(5), (-1, 1), 2)
    D = ng.source_nine(X)
    tm = ng.NineMap.identity(D).triangle_map()
    assert tm.commutes()
    assert all(t == identity(t.source) for t in tm.theta)
    c = field.element(3)
    tm = ng.NineMap.scalar(D, c).triangle_map()
    assert tm.commutes()
    assert all(t == identity(t.source).scale(c) for t in tm.theta)


def test_composite_nine_maps(field):
    X = random_complex(field, make_rng(6), (-1, 1), 2)
    D = ng.target_nine(X)
    a = ng.NineMap.scalar(D, field.element(2))
    b = ng.NineMap.scalar(D, field.element(3))
    ab = a.then(b)
    ab.validate()
    ta, tb, tab = a.triangle_map(), b.triangle_map(), ab.triangle_map()
    assert all(tab.theta[i] == compose(tb.theta[i], ta.theta[i]) for i in range(3))


def test_naturality_failure(field):
    D = ng.source_nine(concentrated(field))
    phi = [[identity(D.X[j][k]) for k in range(3)] for j in range(3)]
    phi[1][1] = zero_map(D.X[1][1], D.X[1][1])
    m = ng.NineMap(D, D, tuple(tuple(r) for r in phi))
    assert not m.is_valid()
    with pytest.raises(ng.NaturalityError):
        m.validate()
