import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_force_homology, cx, make_rng
from ninefold.additivity import random_chain_map, random_complex
from ninefold.complexes import (
    ChainComplex,
    ChainMap,
    ValidationError,
    compose,
    concentrated,
    direct_sum,
    euler_characteristic,
    homology_dims,
    identity,
    is_acyclic,
    is_null_homotopic,
    is_quasi_iso,
    mapping_cone,
    shift,
    zero_map,
)
from ninefold.exactfield import GF, QQ, Matrix, ShapeError


def acyclic_pair(field):
    return cx(field, {0: 1, 1: 1}, {0: [[1]]})


def test_homology_examples(field):
    assert homology_dims(cx(field, {0: 1, 1: 1}, {0: [[0]]})) == {0: 1, 1: 1}
    assert homology_dims(acyclic_pair(field)) == {0: 0, 1: 0}
    X = cx(field, {0: 1, 1: 2, 2: 1}, {0: [[1], [-1]], 1: [[1, 1]]})
    assert homology_dims(X) == {0: 0, 1: 0, 2: 0}


def test_d_squared_rejected():
    with pytest.raises(ValidationError):
        cx(QQ, {0: 1, 1: 1, 2: 1}, {0: [[1]], 1: [[1]]})


def test_shape_rejected():
    with pytest.raises(ShapeError):
        ChainComplex(QQ, {0: 1, 1: 1}, {0: Matrix(QQ, [[1, 2]])})


def test_quasi_iso_examples(field):
    X = concentrated(field, 0, 2)
    assert is_quasi_iso(identity(X))
    empty = ChainComplex(field, {})
    assert is_quasi_iso(zero_map(empty, acyclic_pair(field)))
    assert not is_quasi_iso(zero_map(empty, concentrated(field)))


def test_null_homotopic_examples(field):
    X = acyclic_pair(field)
    h = is_null_homotopic(zero_map(X, X))
    assert h is not None and h.s.is_zero()
    h = is_null_homotopic(identity(X))
    assert h is not None and h.check()
    assert is_null_homotopic(identity(concentrated(field))) is None


def test_shift_examples(field):
    X = acyclic_pair(field)
    assert shift(X, 0) == X
    assert shift(shift(X, 1), -1) == X
    Y = shift(X, 1)
    assert Y.ranks == {-1: 1, 0: 1}
    assert Y.d(-1) == Matrix(field, [[-1]])


def test_sum_and_compose(field):
    X = acyclic_pair(field)
    Z = ChainComplex(field, {})
    assert direct_sum(X, Z) == X
    Y = concentrated(field, 1, 2)
    assert direct_sum(X, Y).ranks == {0: 1, 1: 3}
    f = ChainMap(X, X, {0: Matrix(field, [[2]]), 1: Matrix(field, [[2]])})
    assert compose(identity(X), f) == f


def test_cone_examples(field):
    R = concentrated(field)
    C = mapping_cone(identity(R))
    assert C.ranks == {-1: 1, 0: 1} and is_acyclic(C)
    X, Y = acyclic_pair(field), concentrated(field, 0, 2)
    assert mapping_cone(zero_map(X, Y)) == direct_sum(shift(X, 1), Y)


def test_chain_map_validation():
    X = acyclic_pair(QQ)
    with pytest.raises(ValidationError):
        ChainMap(X, X, {0: Matrix(QQ, [[1]]), 1: Matrix(QQ, [[2]])})


def test_brute_force_oracle_f2():
    F2 = GF(2)
    for i in range(50):
        X = random_complex(F2, make_rng(10, i), (-1, 2), 3)
        assert homology_dims(X) == brute_force_homology(X)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([QQ, GF(3)]))
def test_random_complex_laws(seed, field):
    rng = make_rng(seed)
    X = random_complex(field, rng, (-2, 2), 3)
    Y = random_complex(field, rng, (-2, 2), 3)
    X.validate()
    h = homology_dims(X)
    assert sum(v if n % 2 == 0 else -v for n, v in h.items()) == euler_characteristic(X)
    f = random_chain_map(X, Y, rng)
    assert f.is_chain_map()
    # long exact sequence: cone(f) acyclic iff f quasi-iso
    assert is_acyclic(mapping_cone(f)) == is_quasi_iso(f)
    assert is_acyclic(mapping_cone(identity(X)))
