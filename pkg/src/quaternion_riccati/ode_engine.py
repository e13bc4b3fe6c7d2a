"""Adaptive Dormand-Prince integration of quaternion vector states.

States are ``dimension`` quaternion slots flattened to ``4 * dimension`` reals.
Accumulators (running path integrals) are appended to the flattened state and
advanced by the same steps, so their error is controlled together with the
state. The integrator is :class:`scipy.integrate.RK45` driven one step at a
time; after every accepted step the monitored slots are checked against
``escape_norm``.
"""

from __future__ import annotations

import logging
from enum import Enum
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import attr
import numpy as np
from numpy.polynomial import legendre
from scipy import integrate as scipy_integrate
from scipy import optimize

from quaternion_riccati.errors import OutOfRange
from quaternion_riccati.quat_core import Quaternion

logger = logging.getLogger(__name__)

RTOL = 1e-9
ATOL = 1e-12
ESCAPE_NORM = 1e8
ESCAPE_REFINE_NORM = 1e6
GAUSS_NODES = 8
# longest subinterval a single Gauss rule is applied to
GAUSS_PIECE = 0.25

# (t, state) -> derivative, both flattened
RightHandSide = Callable[[float, np.ndarray], np.ndarray]
# (t, state) -> integrand; t may be an array of nodes, state then has shape
# (m, 4 * dimension)
Integrand = Callable[[Union[float, np.ndarray], np.ndarray], np.ndarray]


class SolveStatus(str, Enum):
    REACHED_END = "reached-end"
    ESCAPED = "escaped"
    STIFFNESS_FAILURE = "stiffness-failure"


def flatten_state(values) -> np.ndarray:
    """Quaternions, ``[q0, q1, q2, q3]`` lists or a flat array to a flat float array."""
    if isinstance(values, Quaternion):
        return values.as_array()
    parts = []
    for value in values:
        if isinstance(value, Quaternion):
            parts.append(value.as_array())
        else:
            parts.append(np.atleast_1d(np.asarray(value, dtype=float)))
    return np.concatenate(parts) if parts else np.zeros(0)


@attr.s(frozen=True, slots=True)
class Accumulator:
    """Running integral ``int_{t0}^t integrand(s, y(s)) ds`` carried along a solve."""

    label: str = attr.ib()
    width: int = attr.ib()
    integrand: Integrand = attr.ib()

    @width.validator
    def _check_width(self, attribute, value):
        if value not in (1, 4):
            raise ValueError("an accumulator is real (width 1) or quaternion (width 4)")


@attr.s(frozen=True)
class OdeProblem:
    dimension: int = attr.ib()
    rhs: RightHandSide = attr.ib()
    t0: float = attr.ib(converter=float)
    y0: np.ndarray = attr.ib(converter=flatten_state)
    escape_norm: float = attr.ib(default=ESCAPE_NORM, converter=float)
    escape_slots: Optional[Tuple[int, ...]] = attr.ib(default=None)

    @y0.validator
    def _check_y0(self, attribute, value):
        if value.shape != (4 * self.dimension,):
            raise ValueError(
                f"initial state has {value.size} reals, expected {4 * self.dimension}"
            )

    def monitored(self) -> np.ndarray:
        """Indices of the flattened reals that count towards the escape norm."""
        slots = range(self.dimension) if self.escape_slots is None else self.escape_slots
        return np.array([4 * slot + n for slot in slots for n in range(4)], dtype=int)


@attr.s(frozen=True, eq=False)
class Trajectory:
    """Dense numerical solution with its terminal status and accumulators."""

    dimension: int = attr.ib()
    ts: np.ndarray = attr.ib()
    ys: np.ndarray = attr.ib()
    dense: Optional[scipy_integrate.OdeSolution] = attr.ib()
    status: SolveStatus = attr.ib()
    layout: Dict[str, Tuple[int, int]] = attr.ib(factory=dict)
    t_escape: Optional[float] = attr.ib(default=None)
    escape_norm: float = attr.ib(default=ESCAPE_NORM)
    message: str = attr.ib(default="")

    @property
    def t0(self) -> float:
        return float(self.ts[0])

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])

    @property
    def regular(self) -> bool:
        return self.status is SolveStatus.REACHED_END

    @property
    def n_state(self) -> int:
        return 4 * self.dimension

    def _check(self, t: float) -> None:
        if not self.t0 <= t <= self.t_end:
            raise OutOfRange(
                f"t = {t} is outside of the covered interval [{self.t0}, {self.t_end}]"
            )

    def query(self, t: float) -> np.ndarray:
        """Full flattened vector (state and accumulators) at ``t``."""
        self._check(t)
        index = int(np.searchsorted(self.ts, t))
        if index < len(self.ts) and self.ts[index] == t:
            return self.ys[index].copy()
        return np.asarray(self.dense(t))

    def sample(self, grid: Sequence[float]) -> np.ndarray:
        """Full vectors on a grid, shape ``(len(grid), n)``."""
        grid = np.asarray(grid, dtype=float)
        if grid.size and (grid.min() < self.t0 or grid.max() > self.t_end):
            raise OutOfRange(
                f"grid [{grid.min()}, {grid.max()}] leaves [{self.t0}, {self.t_end}]"
            )
        if self.dense is None:
            return np.repeat(self.ys[:1], grid.size, axis=0)
        values = np.asarray(self.dense(grid)).T
        exact = np.isin(grid, self.ts)
        if exact.any():
            values[exact] = self.ys[np.searchsorted(self.ts, grid[exact])]
        return values

    def state(self, t: float) -> np.ndarray:
        return self.query(t)[: self.n_state]

    def slot(self, t: float, i: int = 0) -> Quaternion:
        return Quaternion.from_array(self.query(t)[4 * i : 4 * i + 4])

    def accumulated(self, label: str, t: float) -> Union[float, Quaternion]:
        offset, width = self.layout[label]
        values = self.query(t)[offset : offset + width]
        return float(values[0]) if width == 1 else Quaternion.from_array(values)

    def derivative(self, t: float, h: Optional[float] = None) -> np.ndarray:
        """Central difference of the state on the dense output, one sided at the ends."""
        self._check(t)
        h = h or 1e-5 * max(1.0, abs(t))
        lo, hi = max(self.t0, t - h), min(self.t_end, t + h)
        return (self.state(hi) - self.state(lo)) / (hi - lo)

    def quadrature(
        self, integrand: Integrand, width: int = 1, nodes: int = GAUSS_NODES
    ) -> StepQuadrature:
        return StepQuadrature.build(self, integrand, width, nodes)


@attr.s(frozen=True, eq=False)
class StepQuadrature:
    """Gauss-Legendre integral of a path functional over every accepted step.

    Cumulative sums run forwards for ``head`` and backwards for ``tail``, so a
    tail integral is never formed as the difference of two large heads.
    """

    trajectory: Trajectory = attr.ib()
    integrand: Integrand = attr.ib()
    width: int = attr.ib()
    nodes: int = attr.ib()
    forward: np.ndarray = attr.ib()
    backward: np.ndarray = attr.ib()

    @classmethod
    def build(cls, trajectory, integrand, width=1, nodes=GAUSS_NODES) -> StepQuadrature:
        ts = trajectory.ts
        steps = np.zeros((max(len(ts) - 1, 0), width))
        for k in range(len(ts) - 1):
            steps[k] = _gauss(trajectory, integrand, width, ts[k], ts[k + 1], nodes)
        zero = np.zeros((1, width))
        forward = np.concatenate([zero, np.cumsum(steps, axis=0)])
        backward = np.concatenate([np.cumsum(steps[::-1], axis=0)[::-1], zero])
        return cls(trajectory, integrand, width, nodes, forward, backward)

    def _step_of(self, t: float) -> int:
        self.trajectory._check(t)
        ts = self.trajectory.ts
        return int(min(max(np.searchsorted(ts, t, side="right") - 1, 0), len(ts) - 2))

    def _piece(self, a: float, b: float) -> np.ndarray:
        return _gauss(self.trajectory, self.integrand, self.width, a, b, self.nodes)

    def head(self, t: float) -> np.ndarray:
        """``int_{t0}^t``."""
        if len(self.trajectory.ts) < 2:
            return np.zeros(self.width)
        k = self._step_of(t)
        ts = self.trajectory.ts
        return self.forward[k] + self._piece(ts[k], t)

    def tail(self, t: float) -> np.ndarray:
        """``int_t^{t_end}``."""
        if len(self.trajectory.ts) < 2:
            return np.zeros(self.width)
        k = self._step_of(t)
        ts = self.trajectory.ts
        return self.backward[k + 1] + self._piece(t, ts[k + 1])

    def over(self, a: float, b: float) -> np.ndarray:
        return self.tail(a) - self.tail(b)


def _gauss(trajectory, integrand, width, a, b, nodes) -> np.ndarray:
    """Composite Gauss-Legendre rule on [a, b] split into pieces of at most ``GAUSS_PIECE``.

    Accepted steps get long where the state is flat, while the integrand may
    still decay by many orders of magnitude across them.
    """
    if a == b:
        return np.zeros(width)
    count = max(1, int(np.ceil(abs(b - a) / GAUSS_PIECE)))
    edges = np.linspace(a, b, count + 1)
    x, w = legendre.leggauss(nodes)
    half = np.diff(edges)[:, None] / 2
    mid = (edges[:-1] + edges[1:])[:, None] / 2
    points = (mid + half * x).ravel()
    weights = (half * w).ravel()
    states = np.asarray(trajectory.dense(points)).T[:, : trajectory.n_state]
    values = np.reshape(integrand(points, states), (points.size, width))
    return weights @ values


def _refine_escape(problem, ts, ys, interpolants, monitored, threshold) -> float:
    norms = np.linalg.norm(ys[:, monitored], axis=1)
    # a non-finite norm counts as above every threshold
    above = ~np.isfinite(norms) | (norms > threshold)
    k = int(np.argmax(above))
    if k == 0:
        return float(ts[0])
    interpolant = interpolants[k - 1]

    def excess(t):
        norm = np.linalg.norm(interpolant(t)[monitored])
        return norm - threshold if np.isfinite(norm) else threshold

    return float(optimize.brentq(excess, ts[k - 1], ts[k], xtol=1e-14))


def solve(
    problem: OdeProblem,
    t_end: float,
    rtol: float = RTOL,
    atol: float = ATOL,
    accumulators: Sequence[Accumulator] = (),
    escape_refine_norm: float = ESCAPE_REFINE_NORM,
    max_step: float = np.inf,
) -> Trajectory:
    """Integrate ``problem`` from ``t0`` to ``t_end``.

    Escape and step size failure are reported through ``Trajectory.status``.
    """
    if not t_end > problem.t0:
        raise ValueError(f"t_end = {t_end} must be after t0 = {problem.t0}")
    if rtol <= 0 or atol <= 0:
        raise ValueError("rtol and atol must be positive")

    n_state = 4 * problem.dimension
    layout: Dict[str, Tuple[int, int]] = {}
    offset = n_state
    for accumulator in accumulators:
        if accumulator.label in layout:
            raise ValueError(f"duplicate accumulator label '{accumulator.label}'")
        layout[accumulator.label] = (offset, accumulator.width)
        offset += accumulator.width

    def fun(t, y):
        state = y[:n_state]
        out = np.empty_like(y)
        if n_state:
            out[:n_state] = problem.rhs(t, state)
        for accumulator in accumulators:
            start, width = layout[accumulator.label]
            value = accumulator.integrand(t, state)
            out[start : start + width] = np.reshape(value, width)
        return out

    y0 = np.concatenate([problem.y0, np.zeros(offset - n_state)])
    monitored = problem.monitored()
    solver = scipy_integrate.RK45(
        fun, problem.t0, y0, t_end, rtol=rtol, atol=atol, max_step=max_step
    )
    ts = [problem.t0]
    ys = [y0]
    interpolants = []
    status = SolveStatus.REACHED_END
    message = ""
    while solver.status == "running":
        message = solver.step() or ""
        if solver.status == "failed":
            status = SolveStatus.STIFFNESS_FAILURE
            break
        ts.append(solver.t)
        ys.append(solver.y.copy())
        interpolants.append(solver.dense_output())
        if monitored.size:
            norm = np.linalg.norm(solver.y[monitored])
            if norm > problem.escape_norm or not np.isfinite(norm):
                status = SolveStatus.ESCAPED
                break

    ts_arr = np.asarray(ts)
    ys_arr = np.asarray(ys)
    dense = scipy_integrate.OdeSolution(ts_arr, interpolants) if interpolants else None
    t_escape = None
    if status is SolveStatus.ESCAPED:
        threshold = min(escape_refine_norm, problem.escape_norm)
        t_escape = _refine_escape(
            problem, ts_arr, ys_arr, interpolants, monitored, threshold
        )
    logger.debug(
        "solve finished with %s after %d steps at t=%.6g%s",
        status.value,
        len(ts_arr) - 1,
        ts_arr[-1],
        f", escape near t={t_escape:.6g}" if t_escape is not None else "",
    )
    if status is SolveStatus.STIFFNESS_FAILURE:
        logger.warning("integration stopped at t=%.6g: %s", ts_arr[-1], message)
    return Trajectory(
        dimension=problem.dimension,
        ts=ts_arr,
        ys=ys_arr,
        dense=dense,
        status=status,
        layout=layout,
        t_escape=t_escape,
        escape_norm=problem.escape_norm,
        message=message,
    )
