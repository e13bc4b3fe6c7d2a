import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quaternion_riccati.errors import NearZeroDivisor, NotASymbol
from quaternion_riccati.quat_core import (
    I,
    J,
    K,
    ONE,
    Quaternion,
    as_quaternion,
    hamilton,
    inverse,
    lemma21_check,
    mul,
    symbol,
    unsymbol,
)

components = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)
quaternions = st.builds(Quaternion, components, components, components, components)
nonzero = quaternions.filter(lambda q: q.norm() > 1e-3)


def test_unit_table():
    assert (I * I).isclose(-ONE)
    assert (J * J).isclose(-ONE)
    assert (K * K).isclose(-ONE)
    assert (I * J * K).isclose(-ONE)
    assert (I * J).isclose(K)
    assert (J * I).isclose(-K)
    assert (J * K).isclose(I)
    assert (K * I).isclose(J)


def test_noncommutative():
    p = Quaternion(1, 2, 3, 4)
    q = Quaternion(-2, 0.5, 1, 0)
    assert not (p * q).isclose(q * p)


def test_real_scalars():
    q = Quaternion(1, -2, 3, 0.5)
    assert (2 * q).isclose(q * 2)
    assert (q + 1).isclose(Quaternion(2, -2, 3, 0.5))
    assert (1 - q).isclose(Quaternion(0, 2, -3, -0.5))
    assert (q / 2).isclose(Quaternion(0.5, -1, 1.5, 0.25))
    with pytest.raises(TypeError):
        q / q


def test_parts_and_norm():
    q = Quaternion(1, 2, 2, 4)
    assert q.norm() == 5.0
    assert abs(q) == 5.0
    assert q.re == 1.0
    assert q.im.isclose(Quaternion(0, 2, 2, 4))
    assert q.conjugate().isclose(Quaternion(1, -2, -2, -4))
    assert not q.is_real()
    assert Quaternion(3).is_real()


@pytest.mark.parametrize(
    "value, expected",
    [
        (2, Quaternion(2)),
        (2.5, Quaternion(2.5)),
        ([1, 2, 3, 4], Quaternion(1, 2, 3, 4)),
        ((0, 0, 1, 0), J),
        (K, K),
    ],
)
def test_as_quaternion(value, expected):
    assert as_quaternion(value) == expected


def test_as_quaternion_wrong_length():
    with pytest.raises(ValueError):
        as_quaternion([1, 2, 3])


def test_inverse_near_zero():
    with pytest.raises(NearZeroDivisor):
        inverse(Quaternion(1e-13, 0, 0, 0))
    with pytest.raises(ZeroDivisionError):
        Quaternion().inverse()
    # threshold is configurable
    assert inverse(Quaternion(1e-13), eps_zero=0.0).isclose(Quaternion(1e13), tol=1.0)


def test_hamilton_matches_mul():
    rng = np.random.default_rng(7)
    p = rng.normal(size=(50, 4))
    q = rng.normal(size=(50, 4))
    stacked = hamilton(p, q)
    for row, a, b in zip(stacked, p, q):
        expected = mul(Quaternion.from_array(a), Quaternion.from_array(b)).as_array()
        np.testing.assert_allclose(row, expected, rtol=1e-14, atol=1e-14)


@settings(max_examples=200)
@given(quaternions, quaternions, quaternions)
def test_associative(p, q, r):
    scale = max(1.0, p.norm() * q.norm() * r.norm())
    assert ((p * q) * r - p * (q * r)).norm() <= 1e-12 * scale


@settings(max_examples=200)
@given(quaternions, quaternions)
def test_norm_multiplicative(p, q):
    assert math.isclose((p * q).norm(), p.norm() * q.norm(), rel_tol=1e-12, abs_tol=1e-12)


@settings(max_examples=200)
@given(quaternions, quaternions)
def test_conjugate_reverses_products(p, q):
    scale = max(1.0, p.norm() * q.norm())
    assert ((p * q).conjugate() - q.conjugate() * p.conjugate()).norm() <= 1e-12 * scale


@settings(max_examples=200)
@given(nonzero)
def test_inverse_both_sides(q):
    q_inv = inverse(q)
    assert (q * q_inv).isclose(ONE, tol=1e-12)
    assert (q_inv * q).isclose(ONE, tol=1e-12)


@settings(max_examples=200)
@given(nonzero)
def test_symbol_determinant_and_trace(q):
    det, trace = lemma21_check(q)
    assert math.isclose(det, q.norm() ** 4, rel_tol=1e-9)
    assert math.isclose(trace, 4 * q.re, rel_tol=1e-9, abs_tol=1e-9 * q.norm())


@settings(max_examples=200)
@given(quaternions, quaternions)
def test_symbol_homomorphism(p, q):
    product = symbol(p * q).m
    expected = (symbol(p) @ symbol(q)).m
    scale = max(1.0, p.norm() * q.norm())
    assert np.max(np.abs(product - expected)) <= 1e-10 * scale


@settings(max_examples=100)
@given(nonzero)
def test_symbol_inverse(q):
    np.testing.assert_allclose(
        symbol(inverse(q)).m, symbol(q).inverse().m, atol=1e-9 / q.norm()
    )


@given(quaternions)
def test_unsymbol_round_trip(q):
    assert unsymbol(symbol(q)) == q


def test_unsymbol_rejects_other_matrices():
    with pytest.raises(NotASymbol):
        unsymbol(np.eye(4) + np.diag([0, 0, 0, 1e-3]))
    with pytest.raises(NotASymbol):
        unsymbol(np.eye(3))


def test_symbol_first_row_layout():
    m = symbol(Quaternion(1, 2, 3, 4)).m
    np.testing.assert_array_equal(m[0], [1, 2, 3, -4])
    np.testing.assert_array_equal(np.diag(m), [1, 1, 1, 1])
