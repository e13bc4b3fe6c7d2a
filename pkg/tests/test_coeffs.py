import json
import math

import numpy as np
import pytest

from quaternion_riccati import coeffs
from quaternion_riccati.coeffs import (
    CompositeCoeff,
    ConstantCoeff,
    ExponentialCoeff,
    PolynomialCoeff,
    ScaledCoeff,
    TableCoeff,
    TailStatus,
    TrigonometricCoeff,
)
from quaternion_riccati.errors import OutOfDomain, SchemaError, ToleranceNotMet
from quaternion_riccati.quat_core import Quaternion


def test_parse_control(control_coeffs):
    cs = coeffs.parse(control_coeffs)
    assert isinstance(cs.a, ExponentialCoeff)
    assert isinstance(cs.b, ConstantCoeff)
    assert isinstance(cs.c, PolynomialCoeff)
    assert isinstance(cs.d, TrigonometricCoeff)
    assert cs.b.is_zero()
    # c = t + 2j
    assert cs.evaluate("c", 3.0).isclose(Quaternion(3, 0, 2, 0))
    assert cs.evaluate("d", math.pi / 2).isclose(Quaternion(0, 1, 0, 0))
    assert cs.evaluate("a", 1.0).isclose(Quaternion(math.exp(-1)))


def test_parse_json_text(control_coeffs):
    assert coeffs.parse(json.dumps(control_coeffs)) == coeffs.parse(control_coeffs)


def test_serialize_round_trip(control_coeffs):
    cs = coeffs.parse(control_coeffs)
    assert coeffs.parse(coeffs.serialize(cs)) == cs


@pytest.mark.parametrize(
    "shorthand, kind",
    [
        (2.0, "constant"),
        ([0, 1, 0, 0], "constant"),
        ({"const": [0, 0, 1, 0]}, "constant"),
        ({"poly": [[1, 2]]}, "polynomial"),
        ({"exp": {"coefficients": [[1]], "rates": -1}}, "exponential"),
        ({"trig": {"coefficients": [[1]], "frequencies": 2}}, "trigonometric"),
        ({"table": {"grid": [0, 1], "samples": [[0, 0, 0, 0], [1, 0, 0, 0]]}}, "table"),
        ({"scaled": {"factor": -1, "base": 1}}, "scaled"),
        ({"composite": [1, {"poly": [[0, 1], [0, 1]]}, 0, 0]}, "composite"),
    ],
)
def test_shorthand(shorthand, kind):
    assert coeffs.parse_coeff(shorthand).kind == kind


@pytest.mark.parametrize(
    "config, path",
    [
        ({"a": {"kind": "bessel"}}, "a"),
        ({"a": {"poly": [[1]], "support": [2, 1]}}, "a"),
        ({"a": 1, "e": 1}, "e"),
        ({"a": {"table": {"grid": [0, 0], "samples": [[0, 0, 0, 0], [1, 0, 0, 0]]}}}, "a"),
    ],
)
def test_parse_rejects(config, path):
    with pytest.raises(SchemaError) as e:
        coeffs.parse(config)
    assert e.value.path.startswith(path)


def test_parse_invalid_json():
    with pytest.raises(SchemaError):
        coeffs.parse("{not json")


def test_ambiguous_shorthand():
    with pytest.raises(SchemaError):
        coeffs.parse_coeff({"const": 1, "poly": [[1]]})


def test_support_window():
    f = coeffs.parse_coeff({"poly": [[1]], "support": [0, 2]})
    np.testing.assert_array_equal(f.values([-1, 0, 1, 2, 3])[:, 0], [0, 1, 1, 1, 0])
    assert f.breakpoints() == (0.0, 2.0)


def test_values_shape():
    f = ExponentialCoeff(coefficients=[[1], [0, 1]], rates=[-1, 0, 0, 0])
    values = f.values(np.linspace(0, 1, 5))
    assert values.shape == (5, 4)
    np.testing.assert_allclose(values[:, 1], np.linspace(0, 1, 5))
    assert f.component_is_zero(2)
    assert not f.component_is_zero(1)


def test_table_interpolation():
    grid = [0.0, 1.0, 2.0, 3.0]
    samples = [[t**2, 0, 0, t] for t in grid]
    linear = TableCoeff(grid=grid, samples=samples, order="linear")
    cubic = TableCoeff(grid=grid, samples=samples, order="cubic")
    assert linear.at(1.5)[0] == pytest.approx(2.5)
    assert cubic.at(1.5)[3] == pytest.approx(1.5)
    assert linear.domain() == (0.0, 3.0)
    with pytest.raises(OutOfDomain):
        coeffs.evaluate(linear, 3.5)


def test_table_validation():
    with pytest.raises(ValueError):
        TableCoeff(grid=[0.0, 1.0], samples=[[0, 0, 0, 0]])
    with pytest.raises(ValueError):
        TableCoeff(grid=[0.0], samples=[[0, 0, 0, 0]])


def test_composite_and_scaled():
    f = CompositeCoeff(
        components=[
            ConstantCoeff(value=[1, 9, 9, 9]),
            PolynomialCoeff(coefficients=[[9], [0, 1]]),
            ConstantCoeff(),
            ConstantCoeff(value=[9, 9, 9, 2]),
        ]
    )
    assert Quaternion.from_array(f.at(3.0)).isclose(Quaternion(1, 3, 0, 2))
    assert f.component_is_zero(2)
    g = coeffs.scaled(-2.0, f)
    assert isinstance(g, ScaledCoeff)
    assert Quaternion.from_array(g.at(3.0)).isclose(Quaternion(-2, -6, 0, -4))
    assert coeffs.scaled(-1.0, ConstantCoeff(value=[1, 2, 3, 4])).value == (-1, -2, -3, -4)


def test_evaluate_respects_t0():
    f = coeffs.constant(1.0)
    assert coeffs.evaluate(f, 0.5, t0=0.0).isclose(Quaternion(1))
    with pytest.raises(OutOfDomain):
        coeffs.evaluate(f, -0.5, t0=0.0)


def test_coeff_set_evaluate_uses_t0():
    cs = coeffs.parse({"a": 1, "t0": 1.0})
    assert cs.evaluate("a", 1.5).isclose(Quaternion(1))
    with pytest.raises(OutOfDomain):
        cs.evaluate("a", 0.5)


def test_shared_domain():
    table = {"table": {"grid": [1, 2], "samples": [[0, 0, 0, 0], [1, 0, 0, 0]]}}
    with pytest.raises(SchemaError):
        coeffs.parse({"a": table, "t0": 0.0})
    cs = coeffs.parse({"a": table, "t0": 1.0})
    assert cs.domain() == (1.0, 2.0)


@pytest.mark.parametrize(
    "config, t1, t2, expected",
    [
        ({"exp": {"coefficients": [[1]], "rates": -1}}, 0.0, 1.0, 1 - math.exp(-1)),
        ({"poly": [[0, 0, 3, -3, 0.75]], "support": [0, 2]}, 0.0, 5.0, 0.8),
        ({"trig": {"coefficients": [[0, 1]]}}, 0.0, math.pi, -2.0),
        (1, 2.0, 0.0, -2.0),
    ],
)
def test_integrate(config, t1, t2, expected):
    value = coeffs.integrate(coeffs.parse_coeff(config), t1, t2)
    assert value.q0 == pytest.approx(expected, abs=1e-10)
    assert value.im.norm() == pytest.approx(0.0, abs=1e-12)


def test_integrate_out_of_domain():
    f = coeffs.parse_coeff({"table": {"grid": [0, 1], "samples": [[1, 0, 0, 0]] * 2}})
    with pytest.raises(OutOfDomain):
        coeffs.integrate(f, 0.0, 2.0)


def test_integrate_tolerance_not_met():
    f = coeffs.parse_coeff({"trig": {"coefficients": [[1]], "frequencies": 1e4}})
    with pytest.raises(ToleranceNotMet) as e:
        coeffs.integrate(f, 0.0, 100.0, tol=1e-14, limit=3)
    assert e.value.error_estimate > 1e-14


def test_tail_bound_exponential():
    f = coeffs.parse_coeff({"exp": {"coefficients": [[0, 1]], "rates": -1}})
    # int_T^inf t e^{-t} = (T + 1) e^{-T}
    estimate = f.tail_bound(2.0)
    assert estimate.absolutely_convergent
    assert estimate.bound == pytest.approx(3 * math.exp(-2), rel=1e-12)


@pytest.mark.parametrize(
    "config, bound",
    [
        ({"poly": [[1]], "support": [0, 2]}, 0.0),
        (0, 0.0),
        (1, None),
        ({"trig": {"coefficients": [[1]]}}, None),
        ({"exp": {"coefficients": [[1]], "rates": 0.5}}, None),
    ],
)
def test_tail_bound_kinds(config, bound):
    estimate = coeffs.parse_coeff(config).tail_bound(10.0)
    assert estimate.bound == bound


def test_integrate_to_infinity():
    f = coeffs.parse_coeff({"exp": {"coefficients": [[1]], "rates": -1}})
    value, estimate = coeffs.integrate_to_infinity(f, 0.0, 30.0)
    assert value.q0 + estimate.bound == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize(
    "partials, status",
    [
        ([1 - math.exp(-k) for k in range(1, 31)], TailStatus.CONVERGED),
        ([float(k) for k in range(1, 11)], TailStatus.DIVERGES),
        ([math.exp(k) for k in range(1, 11)], TailStatus.DIVERGES),
        ([math.sin(k) * k for k in range(1, 11)], TailStatus.OSCILLATORY),
        ([1.0], TailStatus.OSCILLATORY),
    ],
)
def test_diagnose_tail(partials, status):
    assert coeffs.diagnose_tail(partials, 1e-6, 1e6) is status


def test_diagnose_tail_quaternion_rows():
    rows = np.array([[1 - math.exp(-k), 0, 0, 2 - math.exp(-k)] for k in range(1, 31)])
    assert coeffs.diagnose_tail(rows, 1e-6, 1e6) is TailStatus.CONVERGED
