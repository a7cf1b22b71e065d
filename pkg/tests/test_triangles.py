import pytest

from conftest import cx, make_rng
from ninefold.additivity import perturb_square, random_chain_map, random_complex, random_exact_square
from ninefold.complexes import (
    ChainComplex,
    ChainMap,
    ValidationError,
    direct_sum,
    identity,
    is_acyclic,
    shift,
    zero_map,
)
from ninefold.exactfield import Matrix
from ninefold.triangles import (
    CommSquare,
    Triangle,
    WitnessError,
    canonical_triangle,
    cone,
    cone_comparison_is_quasi_iso,
    fiber,
    fold_square,
    is_exact_square,
    pair_map,
    validate_triangle,
)


def R(field, n=0, r=1):
    return cx(field, {n: r}, {})


def test_cone_of_identity_is_acyclic(field):
    C = cone(identity(R(field)))
    assert C.ranks == {-1: 1, 0: 1}
    assert C.d(-1) in (Matrix(field, [[1]]), Matrix(field, [[-1]]))
    assert is_acyclic(C)


def test_fiber_is_shifted_cone(field):
    f = random_chain_map(random_complex(field, make_rng(1), (-1, 1), 2),
                         random_complex(field, make_rng(2), (-1, 1), 2), make_rng(3))
    assert fiber(f) == shift(cone(f), -1)


def test_canonical_triangles(field):
    X = random_complex(field, make_rng(4), (-1, 1), 2)
    T = canonical_triangle(identity(X))
    assert is_acyclic(T.g.source) and validate_triangle(T)
    Y = random_complex(field, make_rng(5), (-1, 1), 2)
    T = canonical_triangle(zero_map(X, Y))
    assert T.g.source == direct_sum(shift(X, 1), Y)
    assert validate_triangle(T)


def test_short_exact_sequence_is_exact(field):
    Rn = R(field)
    R2 = R(field, 0, 2)
    f = ChainMap(Rn, R2, {0: Matrix(field, [[1], [0]])})
    g = ChainMap(R2, Rn, {0: Matrix(field, [[0, 1]])})
    assert validate_triangle(Triangle.with_zero_witness(f, g))


def test_zero_maps_not_exact(field):
    Rn = R(field)
    assert not validate_triangle(Triangle.with_zero_witness(zero_map(Rn, Rn), zero_map(Rn, Rn)))


def test_transposition_triangle(field):
    X = random_complex(field, make_rng(6), (-1, 1), 2)
    Xm = shift(X, -1)
    Z = ChainComplex(field, {})
    T = Triangle(zero_map(Xm, Z), zero_map(Z, X), identity(X))
    assert validate_triangle(T)


def test_bad_witness_raises(field):
    X = cx(field, {0: 1, 1: 1}, {0: [[1]]})
    Z = ChainComplex(field, {})
    Xm = shift(X, -1)
    T = Triangle(zero_map(Xm, Z), zero_map(Z, X), ChainMap(X, X, {0: Matrix(field, [[1]]), 1: Matrix(field, [[0]])}, check=False))
    with pytest.raises(WitnessError):
        validate_triangle(T)


def test_nonzero_composite_rejected(field):
    Rn = R(field)
    with pytest.raises(ValidationError):
        Triangle.with_zero_witness(identity(Rn), identity(Rn))


def test_transposition_square(field):
    X = random_complex(field, make_rng(7), (-1, 1), 2)
    Xm, Z = shift(X, -1), ChainComplex(field, {})
    S = CommSquare(zero_map(Xm, Z), zero_map(Xm, Z), zero_map(Z, X), zero_map(Z, X), identity(X))
    assert is_exact_square(S)


def test_iso_square_with_zero_corner(field):
    X = random_complex(field, make_rng(8), (-1, 1), 2)
    Z = ChainComplex(field, {})
    S = CommSquare.with_zero_witness(identity(X), zero_map(X, Z), zero_map(X, Z), zero_map(Z, Z))
    assert is_exact_square(S)


def test_zero_square_not_exact(field):
    Rn = R(field)
    z = zero_map(Rn, Rn)
    assert not is_exact_square(CommSquare.with_zero_witness(z, z, z, z))


def test_fold_has_signed_second_map(field):
    S = random_exact_square(field, make_rng(9), (-1, 1), 2)
    T = fold_square(S)
    assert T.f == pair_map(S.f, S.g)
    assert T.g.is_chain_map()


def test_constructed_squares_exact_and_oracle_agrees(field):
    for i in range(10):
        rng = make_rng(10, i)
        S = random_exact_square(field, rng, (-1, 1), 2)
        assert is_exact_square(S)
        assert cone_comparison_is_quasi_iso(S)
        P = perturb_square(S, rng, "extra" if i % 2 else "kill")
        assert is_exact_square(P) == cone_comparison_is_quasi_iso(P)
