import math

import numpy as np
import pytest

from quaternion_riccati import coeffs
from quaternion_riccati.errors import OutOfRange
from quaternion_riccati.ode_engine import (
    ATOL,
    RTOL,
    Accumulator,
    OdeProblem,
    SolveStatus,
    _refine_escape,
    solve,
)
from quaternion_riccati.quat_core import I, ONE, Quaternion, hamilton


def growth(t, y):
    return y.copy()


def square(t, y):
    # q' = q q
    return hamilton(y, y)


def negative_square(t, y):
    return -hamilton(y, y)


def test_exponential_growth():
    trajectory = solve(OdeProblem(1, growth, 0.0, [ONE]), 2.0)
    assert trajectory.status is SolveStatus.REACHED_END
    assert trajectory.regular
    assert trajectory.t_end == 2.0
    assert trajectory.t_escape is None
    assert trajectory.slot(2.0).q0 == pytest.approx(math.exp(2), rel=1e-7)
    assert trajectory.slot(0.7).q0 == pytest.approx(math.exp(0.7), rel=1e-7)
    np.testing.assert_allclose(trajectory.derivative(1.0), [math.e, 0, 0, 0], rtol=1e-4)


def test_rotation():
    i = I.as_array()
    trajectory = solve(OdeProblem(1, lambda t, y: hamilton(i, y), 0.0, [ONE]), 3.0)
    for t in (0.5, 1.0, 3.0):
        assert trajectory.slot(t).isclose(Quaternion(math.cos(t), math.sin(t)), tol=1e-7)


def test_escape():
    # q = 1 / (1 - t) leaves every ball before t = 1
    trajectory = solve(OdeProblem(1, square, 0.0, [ONE]), 2.0)
    assert trajectory.status is SolveStatus.ESCAPED
    assert not trajectory.regular
    assert trajectory.t_end < 1.0
    assert trajectory.t_escape == pytest.approx(1.0 - 1e-6, abs=1e-8)
    assert np.linalg.norm(trajectory.state(trajectory.t_end)) > 1e8


def test_escape_refine_norm():
    trajectory = solve(
        OdeProblem(1, square, 0.0, [ONE], escape_norm=1e3), 2.0, escape_refine_norm=1e6
    )
    assert trajectory.status is SolveStatus.ESCAPED
    assert trajectory.t_escape == pytest.approx(1.0 - 1e-3, abs=1e-8)


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_escape_time_converges(lam):
    # q(0) = -1 / lam gives q = 1 / (t - lam)
    misses = []
    for norm in (1e4, 1e6, 1e8):
        seed = Quaternion(-1.0 / lam)
        problem = OdeProblem(1, negative_square, 0.0, [seed], escape_norm=norm)
        trajectory = solve(problem, 2 * lam, escape_refine_norm=norm)
        assert trajectory.status is SolveStatus.ESCAPED
        misses.append(lam - trajectory.t_escape)
    assert all(miss > 0 for miss in misses)
    assert misses[0] > misses[1] > misses[2]
    assert misses[-1] < 1e-2
    assert misses[-1] == pytest.approx(1e-8, rel=1e-3)


def test_refine_escape_on_non_finite_norm():
    ts = np.array([0.0, 1.0, 2.0])
    ys = np.array([[1.0], [2.0], [np.inf]])
    interpolants = [
        lambda t: np.array([1.0 + t]),
        lambda t: np.array([2.0 + 100.0 * (t - 1.0)]),
    ]
    t_escape = _refine_escape(None, ts, ys, interpolants, np.array([0]), 10.0)
    assert t_escape == pytest.approx(1.08)


def test_escape_slots():
    def rhs(t, y):
        return np.concatenate([np.zeros(4), hamilton(y[4:], y[4:])])

    problem = OdeProblem(2, rhs, 0.0, [ONE, 0.5 * ONE], escape_slots=(0,))
    assert solve(problem, 1.5, max_step=0.1).status is not SolveStatus.ESCAPED
    problem = OdeProblem(2, rhs, 0.0, [ONE, 0.5 * ONE])
    trajectory = solve(problem, 3.0)
    assert trajectory.status is SolveStatus.ESCAPED
    assert trajectory.t_escape == pytest.approx(2.0, abs=1e-5)


def test_accumulators():
    accumulators = [
        Accumulator("integral", 1, lambda t, y: y[0]),
        Accumulator("quaternion", 4, lambda t, y: hamilton(I.as_array(), y)),
    ]
    trajectory = solve(OdeProblem(1, growth, 0.0, [ONE]), 2.0, accumulators=accumulators)
    assert trajectory.accumulated("integral", 2.0) == pytest.approx(
        math.exp(2) - 1, rel=1e-7
    )
    quaternion = trajectory.accumulated("quaternion", 1.0)
    assert quaternion.isclose(Quaternion(0, math.e - 1), tol=1e-7)
    assert trajectory.state(1.0).shape == (4,)
    assert trajectory.query(1.0).shape == (9,)


def test_accumulator_validation():
    with pytest.raises(ValueError):
        Accumulator("bad", 2, lambda t, y: y[:2])
    twice = [Accumulator("x", 1, lambda t, y: y[0])] * 2
    with pytest.raises(ValueError):
        solve(OdeProblem(1, growth, 0.0, [ONE]), 1.0, accumulators=twice)


@pytest.mark.parametrize(
    "t_end, rtol, atol",
    [(0.0, 1e-9, 1e-12), (-1.0, 1e-9, 1e-12), (1.0, 0.0, 1e-12), (1.0, 1e-9, -1.0)],
)
def test_solve_rejects(t_end, rtol, atol):
    with pytest.raises(ValueError):
        solve(OdeProblem(1, growth, 0.0, [ONE]), t_end, rtol=rtol, atol=atol)


def test_initial_state_size():
    with pytest.raises(ValueError):
        OdeProblem(2, growth, 0.0, [ONE])


def test_sample_and_range():
    trajectory = solve(OdeProblem(1, growth, 0.0, [ONE]), 1.0)
    grid = np.linspace(0.0, 1.0, 11)
    values = trajectory.sample(grid)
    assert values.shape == (11, 4)
    np.testing.assert_allclose(values[:, 0], np.exp(grid), rtol=1e-7)
    # accepted step times come back exactly
    np.testing.assert_array_equal(trajectory.sample(trajectory.ts[:3]), trajectory.ys[:3])
    with pytest.raises(OutOfRange):
        trajectory.sample([0.5, 1.5])
    with pytest.raises(OutOfRange):
        trajectory.query(-0.1)


def test_step_quadrature():
    trajectory = solve(OdeProblem(1, growth, 0.0, [ONE]), 3.0)
    quadrature = trajectory.quadrature(lambda t, y: y[..., 0])
    assert quadrature.head(2.0)[0] == pytest.approx(math.exp(2) - 1, rel=1e-7)
    assert quadrature.tail(1.0)[0] == pytest.approx(math.exp(3) - math.e, rel=1e-7)
    assert quadrature.over(0.5, 1.5)[0] == pytest.approx(
        math.exp(1.5) - math.exp(0.5), rel=1e-7
    )
    assert quadrature.head(0.0)[0] == 0.0
    assert quadrature.tail(3.0)[0] == pytest.approx(0.0, abs=1e-14)


def test_quaternion_quadrature():
    i = I.as_array()
    trajectory = solve(OdeProblem(1, lambda t, y: hamilton(i, y), 0.0, [ONE]), math.pi)
    quadrature = trajectory.quadrature(lambda t, y: y, width=4)
    # int_0^pi e^{it} dt = 2i
    np.testing.assert_allclose(quadrature.head(math.pi), [0, 2, 0, 0], atol=1e-7)


@pytest.mark.parametrize(
    "config",
    [
        {"exp": {"coefficients": [[1.0]], "rates": [-1, 0, 0, 0]}},
        {"trig": {"coefficients": [[0], [1], [0, 0.5]], "function": "sin"}},
        {"poly": [[0, 0, 1], [], [], [0.5]]},
    ],
)
def test_accumulator_matches_quadrature(config):
    f = coeffs.parse_coeff(config)
    problem = OdeProblem(1, lambda t, y: np.zeros_like(y), 0.0, [ONE])
    accumulators = [Accumulator("f", 4, lambda t, y: f.at(t))]
    trajectory = solve(problem, 1.0, rtol=RTOL, atol=ATOL, accumulators=accumulators)
    expected = coeffs.integrate(f, 0.0, 1.0)
    assert (trajectory.accumulated("f", 1.0) - expected).norm() <= 10 * (ATOL + RTOL)
