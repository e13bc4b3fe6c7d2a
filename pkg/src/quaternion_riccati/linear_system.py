"""Two dimensional linear quaternionic systems and their Riccati equation.

A solution ``(phi, psi)`` of

    phi' = a11 phi + a12 psi
    psi' = a21 phi + a22 psi

with ``phi`` nonvanishing projects to ``q = psi phi^-1``, a solution of
``q' + q a12 q + q a11 - a22 q - a21 = 0``. Conversely every Riccati solution
lifts through ``phi' = (a12 q + a11) phi``, ``psi = q phi``.

Lifted solutions are stored as ``phi = exp(rho) u`` with
``rho = int Re(a12 q + a11)`` and ``u' = (G - Re G) u``, ``G = a12 q + a11``;
``|u|`` is invariant, so exponentially growing or decaying ``phi`` stays
representable.
"""

from __future__ import annotations

import itertools
import logging
import math
from enum import Enum
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import attr
import numpy as np
from scipy import integrate as scipy_integrate
from scipy import optimize

from quaternion_riccati import coeffs
from quaternion_riccati.coeffs import CoeffSet, TailStatus
from quaternion_riccati.config import Settings, get_settings
from quaternion_riccati.errors import OutOfDomain, PhiVanishes
from quaternion_riccati.models import LinearSystem
from quaternion_riccati.ode_engine import (
    Accumulator,
    OdeProblem,
    Trajectory,
    solve,
)
from quaternion_riccati.quat_core import (
    EPS_ZERO,
    ONE,
    ZERO,
    Quaternion,
    as_quaternion,
    hamilton,
    inverse,
)
from quaternion_riccati.riccati import (
    RiccatiEq,
    extremal_solution,
    solve_with_companions,
)

logger = logging.getLogger(__name__)

Side = Literal["right", "left"]
PTable = Literal["verbatim", "symmetrized"]


def to_riccati(system: LinearSystem) -> RiccatiEq:
    """``a := a12``, ``c := a11``, ``b := -a22``, ``d := -a21``."""
    return RiccatiEq(
        CoeffSet(
            a=system.a12,
            b=coeffs.scaled(-1.0, system.a22),
            c=system.a11,
            d=coeffs.scaled(-1.0, system.a21),
            t0=system.t0,
        )
    )


def _check_interval(system: LinearSystem, t1: float, t_end: float) -> None:
    start, end = system.domain()
    if t1 < start or t_end > end:
        raise OutOfDomain(
            f"[{t1}, {t_end}] is outside of the validity interval [{start}, {end}]"
        )


@attr.s(frozen=True, eq=False)
class SystemSolution:
    """A solution pair, lifted from a Riccati path or integrated directly.

    ``multiplier`` and ``side`` give the view ``(phi lam, psi lam)`` (right) or
    ``(lam phi, lam psi)`` (left) of the stored pair.
    """

    system: LinearSystem = attr.ib()
    t1: float = attr.ib()
    trajectory: Trajectory = attr.ib()
    path: Optional[object] = attr.ib(default=None)
    multiplier: Quaternion = attr.ib(default=ONE)
    side: Side = attr.ib(default="right")

    @property
    def lifted(self) -> bool:
        return self.path is not None

    @property
    def t_end(self) -> float:
        return self.trajectory.t_end

    @property
    def regular(self) -> bool:
        return self.trajectory.regular

    def _apply(self, value: Quaternion) -> Quaternion:
        if self.side == "right":
            return value * self.multiplier
        return self.multiplier * value

    def _raw_phi(self, t: float) -> Quaternion:
        if self.lifted:
            rho = self.trajectory.accumulated("rho", t)
            return self.trajectory.slot(t, 0) * math.exp(rho)
        return self.trajectory.slot(t, 0)

    def _raw_psi(self, t: float) -> Quaternion:
        if self.lifted:
            return self.path.q(t) * self._raw_phi(t)
        return self.trajectory.slot(t, 1)

    def phi(self, t: float) -> Quaternion:
        return self._apply(self._raw_phi(t))

    def psi(self, t: float) -> Quaternion:
        return self._apply(self._raw_psi(t))

    def log_abs_phi(self, t: float) -> float:
        """``log |phi(t)|`` without forming ``phi`` when it is lifted."""
        scale = math.log(self.multiplier.norm())
        if self.lifted:
            u = self.trajectory.slot(t, 0)
            return self.trajectory.accumulated("rho", t) + math.log(u.norm()) + scale
        return math.log(self.trajectory.slot(t, 0).norm()) + scale

    def phi_share(self, t: float) -> float:
        """``|phi| / |(phi, psi)|``; zero when ``phi`` vanishes."""
        if self.lifted:
            # |q phi lam| = |q| |phi lam| on either side
            return 1.0 / math.sqrt(1.0 + self.path.q(t).norm2())
        phi, psi = self.phi(t), self.psi(t)
        total = math.sqrt(phi.norm2() + psi.norm2())
        return phi.norm() / total if total > 0 else 0.0

    def q(self, t: float) -> Quaternion:
        return project(self).q(t)

    def multiplied(self, lam, side: Side = "right") -> SystemSolution:
        """The pair multiplied by ``lam`` on the given side."""
        lam = as_quaternion(lam)
        if self.multiplier != ONE and side != self.side:
            raise ValueError("cannot mix left and right multipliers")
        combined = self.multiplier * lam if side == "right" else lam * self.multiplier
        return attr.evolve(self, multiplier=combined, side=side)


def lift(
    system: LinearSystem,
    rsol,
    phi1,
    t_end: Optional[float] = None,
    settings: Optional[Settings] = None,
) -> SystemSolution:
    """Solution pair of the system through a Riccati path ``rsol``.

    ``rsol`` needs ``t1`` and ``q(t)``; ``t_end`` defaults to its end.
    """
    settings = settings or get_settings()
    phi1 = as_quaternion(phi1)
    if phi1.norm() <= EPS_ZERO:
        raise ValueError("phi(t1) must not vanish")
    t1 = rsol.t1
    t_end = getattr(rsol, "t_end", None) if t_end is None else t_end
    if t_end is None:
        raise ValueError("t_end is required for paths without an end time")
    _check_interval(system, t1, t_end)

    def generator(t):
        return hamilton(system.a12.at(t), rsol.q(t).as_array()) + system.a11.at(t)

    def derivative(t, y):
        g = generator(t)
        g[0] = 0.0
        return hamilton(g, y)

    def rho(t, y):
        return generator(t)[0]

    problem = OdeProblem(
        dimension=1,
        rhs=derivative,
        t0=t1,
        y0=[phi1],
        escape_norm=settings.escape_norm,
    )
    trajectory = solve(
        problem,
        t_end,
        rtol=settings.rtol,
        atol=settings.atol,
        accumulators=(Accumulator("rho", 1, rho),),
    )
    return SystemSolution(system, float(t1), trajectory, path=rsol)


def solve_system(
    system: LinearSystem,
    t1: float,
    phi1,
    psi1,
    t_end: float,
    settings: Optional[Settings] = None,
) -> SystemSolution:
    """Direct integration of the pair from ``(phi1, psi1)`` at ``t1``."""
    settings = settings or get_settings()
    _check_interval(system, t1, t_end)

    def derivative(t, y):
        phi, psi = y[0:4], y[4:8]
        return np.concatenate(
            [
                hamilton(system.a11.at(t), phi) + hamilton(system.a12.at(t), psi),
                hamilton(system.a21.at(t), phi) + hamilton(system.a22.at(t), psi),
            ]
        )

    problem = OdeProblem(
        dimension=2,
        rhs=derivative,
        t0=t1,
        y0=[as_quaternion(phi1), as_quaternion(psi1)],
        escape_norm=settings.escape_norm,
    )
    trajectory = solve(problem, t_end, rtol=settings.rtol, atol=settings.atol)
    return SystemSolution(system, float(t1), trajectory)


@attr.s(frozen=True, eq=False)
class ProjectedPath:
    """``q = psi phi^-1`` along a system solution."""

    solution: SystemSolution = attr.ib()
    eps_zero: float = attr.ib(default=EPS_ZERO)

    @property
    def t1(self) -> float:
        return self.solution.t1

    @property
    def t_end(self) -> float:
        return self.solution.t_end

    def q(self, t: float) -> Quaternion:
        if self.solution.phi_share(t) <= self.eps_zero:
            raise PhiVanishes(f"phi vanishes at t = {t}", time=t)
        return self.solution.psi(t) * inverse(self.solution.phi(t), eps_zero=0.0)

    def sample(self, grid: Iterable[float]) -> np.ndarray:
        return np.array([self.q(t).as_array() for t in grid])


def project(ssol: SystemSolution, eps_zero: float = EPS_ZERO) -> ProjectedPath:
    return ProjectedPath(ssol, eps_zero)


def residual(
    system: LinearSystem, ssol: SystemSolution, grid: Sequence[float]
) -> np.ndarray:
    """Pointwise defect of the system along ``ssol``, relative to
    ``max(1, |phi| + |psi|)``.

    Derivatives are second order differences on the dense output.
    """
    out = []
    for t in grid:
        h = 1e-4 * max(1.0, abs(t))
        dphi, dpsi = _pair_derivative(ssol, t, h)
        phi, psi = ssol.phi(t), ssol.psi(t)
        defect_phi = dphi - (
            Quaternion.from_array(system.a11.at(t)) * phi
            + Quaternion.from_array(system.a12.at(t)) * psi
        )
        defect_psi = dpsi - (
            Quaternion.from_array(system.a21.at(t)) * phi
            + Quaternion.from_array(system.a22.at(t)) * psi
        )
        scale = max(1.0, phi.norm() + psi.norm())
        out.append(math.hypot(defect_phi.norm(), defect_psi.norm()) / scale)
    return np.asarray(out)


def _pair_derivative(ssol: SystemSolution, t: float, h: float):
    def pair(s):
        return ssol.phi(s).as_array(), ssol.psi(s).as_array()

    lo, hi = ssol.t1, ssol.t_end
    if t - h >= lo and t + h <= hi:
        (p0, s0), (p1, s1) = pair(t - h), pair(t + h)
        return (
            Quaternion.from_array((p1 - p0) / (2 * h)),
            Quaternion.from_array((s1 - s0) / (2 * h)),
        )
    sign = 1.0 if t + 2 * h <= hi else -1.0
    (p0, s0), (p1, s1), (p2, s2) = pair(t), pair(t + sign * h), pair(t + 2 * sign * h)
    return (
        Quaternion.from_array(sign * (-3 * p0 + 4 * p1 - p2) / (2 * h)),
        Quaternion.from_array(sign * (-3 * s0 + 4 * s1 - s2) / (2 * h)),
    )


def modulus_formula_check(ssol: SystemSolution, t: float) -> Tuple[float, float]:
    """``|phi(t)|`` against ``|phi(t1)| exp int_{t1}^t Re(a12 q + a11)``.

    The right-hand side is an independent adaptive quadrature along ``q``.
    """
    system = ssol.system

    def integrand(s):
        q = ssol.q(s).as_array()
        return float((hamilton(system.a12.at(s), q) + system.a11.at(s))[0])

    if t == ssol.t1:
        exponent = 0.0
    else:
        exponent, _ = scipy_integrate.quad(
            integrand, ssol.t1, t, epsabs=1e-12, epsrel=1e-10, limit=200
        )
    return ssol.phi(t).norm(), ssol.phi(ssol.t1).norm() * math.exp(exponent)


def principal_solution(
    system: LinearSystem,
    t1: float,
    horizon: float,
    settings: Optional[Settings] = None,
    tail_horizon: Optional[float] = None,
) -> SystemSolution:
    """Lift of the extremal Riccati path built from the seed ``0``.

    The tail integral is truncated at ``tail_horizon``, by default twice as
    far from ``t1`` as ``horizon``.
    """
    settings = settings or get_settings()
    tail_horizon = t1 + 2.0 * (horizon - t1) if tail_horizon is None else tail_horizon
    eq = to_riccati(system)
    source = solve_with_companions(eq, t1, ZERO, tail_horizon, settings)
    if not source.regular:
        raise ValueError(
            f"the solution through 0 is not regular on [{t1}, {tail_horizon}]: "
            f"{source.status.value} at t = {source.t_end}"
        )
    path = extremal_solution(source, tail_horizon, settings)
    return lift(system, path, ONE, t_end=horizon, settings=settings)


class RatioTrend(str, Enum):
    DECAYING = "monotone-to-zero"
    BOUNDED = "bounded-both-ways"
    GROWING = "growing"


@attr.s(frozen=True, slots=True)
class RatioSeries:
    grid: np.ndarray = attr.ib(eq=False)
    ratios: np.ndarray = attr.ib(eq=False)
    trend: RatioTrend = attr.ib()
    monotone: bool = attr.ib()
    final_over_initial: float = attr.ib()
    last_decade_drift: float = attr.ib()


def asymptotic_ratios(
    sol_a: SystemSolution, sol_b: SystemSolution, grid: Sequence[float]
) -> RatioSeries:
    """``|phi_a| / |phi_b|`` on a grid, computed from log moduli."""
    grid = np.asarray(grid, dtype=float)
    logs = np.array([sol_a.log_abs_phi(t) - sol_b.log_abs_phi(t) for t in grid])
    ratios = np.exp(logs)
    steps = np.diff(logs)
    decreasing = bool(np.all(steps <= 1e-12))
    increasing = bool(np.all(steps >= -1e-12))
    final_over_initial = float(np.exp(logs[-1] - logs[0]))
    cut = grid[0] + 0.9 * (grid[-1] - grid[0])
    anchor = logs[np.searchsorted(grid, cut)]
    drift = float(abs(np.expm1(logs[-1] - anchor)))
    if decreasing and final_over_initial < 1e-3:
        trend = RatioTrend.DECAYING
    elif increasing and final_over_initial > 1e3:
        trend = RatioTrend.GROWING
    else:
        trend = RatioTrend.BOUNDED
    return RatioSeries(
        grid=grid,
        ratios=ratios,
        trend=trend,
        monotone=decreasing or increasing,
        final_over_initial=final_over_initial,
        last_decade_drift=drift,
    )


@attr.s(frozen=True, slots=True)
class TailReport:
    status: TailStatus = attr.ib()
    value: float = attr.ib()
    partials: Tuple[float, ...] = attr.ib(factory=tuple)


def _weighted_tail(
    start: float,
    horizon: float,
    exponent_rate,
    integrand,
    settings: Settings,
    divergence: float,
) -> TailReport:
    """``int_start^T integrand(t, E(t))`` with ``E(t) = int_start^t exponent_rate``.

    ``E`` is carried as the real part of a single state slot so that the
    weight ``exp(E)`` is formed pointwise from an accurate exponent.
    """
    problem = OdeProblem(
        dimension=1,
        rhs=lambda t, y: np.array([exponent_rate(t), 0.0, 0.0, 0.0]),
        t0=start,
        y0=[ZERO],
        escape_slots=(),
    )
    trajectory = solve(
        problem,
        horizon,
        rtol=settings.rtol,
        atol=settings.atol,
        accumulators=(Accumulator("tail", 1, lambda t, y: integrand(t, y[0])),),
    )
    windows = start + (horizon - start) * np.arange(1, settings.tail_windows + 1) / (
        settings.tail_windows
    )
    partials = np.array([trajectory.accumulated("tail", float(w)) for w in windows])
    status = coeffs.diagnose_tail(partials, settings.tail_tol, divergence)
    return TailReport(status, float(partials[-1]), tuple(float(p) for p in partials))


def statement2_integral(
    ssol: SystemSolution,
    T: float,
    horizon: float,
    settings: Optional[Settings] = None,
) -> TailReport:
    """``int_T |a12| / |phi|^2 exp(int_T^tau Re(a11 + a22))`` with tail diagnosis."""
    settings = settings or get_settings()
    system = ssol.system
    if system.a12.is_zero():
        return TailReport(TailStatus.CONVERGED, 0.0, (0.0,) * settings.tail_windows)

    def rate(t):
        return system.a11.at(t)[0] + system.a22.at(t)[0]

    def integrand(t, exponent):
        weight = np.linalg.norm(system.a12.at(t))
        return weight * math.exp(exponent - 2.0 * ssol.log_abs_phi(t))

    report = _weighted_tail(
        T, horizon, rate, integrand, settings, settings.statement2_divergence
    )
    logger.info("statement 2 integral from %s: %s", T, report.status.value)
    return report


def beta_integral(
    system: LinearSystem, horizon: float, settings: Optional[Settings] = None
) -> TailReport:
    """``int_{t0} |a12| exp(int_{t0}^t Re(a22 - a11))`` with tail diagnosis."""
    settings = settings or get_settings()

    def rate(t):
        return system.a22.at(t)[0] - system.a11.at(t)[0]

    def integrand(t, exponent):
        return np.linalg.norm(system.a12.at(t)) * math.exp(exponent)

    return _weighted_tail(
        system.t0, horizon, rate, integrand, settings, 1.0 / settings.tail_tol
    )


def _components(system: LinearSystem, grid: np.ndarray) -> Dict[str, np.ndarray]:
    return {
        "a": system.a12.values(grid),
        "b": -system.a22.values(grid),
        "c": system.a11.values(grid),
        "d": -system.a21.values(grid),
    }


def p_tables(b: np.ndarray, c: np.ndarray) -> Dict[str, np.ndarray]:
    """``p[n, m - 1]`` for ``n = 0..3``, ``m = 1..3``, shape ``(len(grid), 4, 3)``.

    ``verbatim`` keeps the sign pattern as tabulated, with ``b_3 - c_3`` at
    ``p_33``; ``symmetrized`` uses ``p_nn = b_n + c_n`` and ``p_nm = b_m - c_m``
    otherwise. They differ at ``p_33`` only.
    """
    plus = b[:, 1:] + c[:, 1:]
    minus = b[:, 1:] - c[:, 1:]
    verbatim = np.stack(
        [
            plus,
            np.stack([plus[:, 0], minus[:, 1], minus[:, 2]], axis=-1),
            np.stack([minus[:, 0], plus[:, 1], minus[:, 2]], axis=-1),
            minus,
        ],
        axis=1,
    )
    symmetrized = verbatim.copy()
    symmetrized[:, 3, 2] = plus[:, 2]
    return {"verbatim": verbatim, "symmetrized": symmetrized}


def d_table(a: np.ndarray, d: np.ndarray, p: np.ndarray, zero_tol: float) -> np.ndarray:
    """``D_n`` for ``n = 0..3``, shape ``(len(grid), 4)``."""
    squares = np.sum(p**2, axis=-1)
    sign = np.array([1.0, -1.0, -1.0, -1.0])
    nonzero = np.abs(a) > zero_tol
    return np.where(nonzero, squares + sign * 4.0 * a * d, sign * 4.0 * d)


class Thm42Conclusion(str, Enum):
    NORMAL_OR_EXTREMAL = "normal-or-extremal"
    HYPOTHESES_FAIL = "hypotheses-fail"


@attr.s(frozen=True, slots=True)
class AlphaReport:
    satisfied: bool = attr.ib()
    first_violation: Optional[float] = attr.ib(default=None)
    violated: Tuple[str, ...] = attr.ib(factory=tuple)


@attr.s(frozen=True, slots=True)
class Thm42Report:
    S: Tuple[int, ...] = attr.ib()
    D_complement: Tuple[int, ...] = attr.ib()
    grid: np.ndarray = attr.ib(eq=False)
    p: Dict[str, np.ndarray] = attr.ib(eq=False)
    D: Dict[str, np.ndarray] = attr.ib(eq=False)
    p_table: PTable = attr.ib()
    alpha: AlphaReport = attr.ib()
    beta: TailReport = attr.ib()
    conclusion: Thm42Conclusion = attr.ib()
    failed: Tuple[str, ...] = attr.ib(factory=tuple)


def _alpha_conditions(system, S, D_complement, p_table, tol):
    """``(label, g)`` pairs; a condition holds at ``t`` iff ``g(t) <= tol``."""

    def comps(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        values = _components(system, t)
        p = p_tables(values["b"], values["c"])[p_table]
        return values, p

    conditions = []
    for n in S:
        conditions.append((f"a_{n} >= 0", lambda t, n=n: -comps(t)[0]["a"][:, n]))
        for m in S:
            if m == 0:
                continue

            def g(t, n=n, m=m):
                values, p = comps(t)
                vanishing = np.abs(values["a"][:, n]) <= tol
                return np.where(vanishing, np.abs(p[:, n, m - 1]), 0.0)

            conditions.append((f"p_{n}{m} = 0 where a_{n} = 0", g))
    for n in D_complement:
        conditions.append((f"a_{n} = 0", lambda t, n=n: np.abs(comps(t)[0]["a"][:, n])))
    for n in range(4):

        def g(t, n=n):
            values, p = comps(t)
            return d_table(values["a"], values["d"], p, tol)[:, n]

        conditions.append((f"D_{n} <= 0", g))
    return conditions


def _check_alpha(system, S, D_complement, p_table, grid, tol) -> AlphaReport:
    violated = []
    first = None
    for label, g in _alpha_conditions(system, S, D_complement, p_table, tol):
        values = g(grid)
        bad = values > tol
        if not bad.any():
            continue
        violated.append(label)
        k = int(np.argmax(bad))
        if k == 0:
            when = float(grid[0])
        else:
            when = float(
                optimize.brentq(lambda t: float(g(t)[0]) - tol, grid[k - 1], grid[k])
            )
        first = when if first is None else min(first, when)
    return AlphaReport(not violated, first, tuple(violated))


def _subsets() -> List[Tuple[int, ...]]:
    return [
        subset
        for size in range(1, 5)
        for subset in itertools.combinations(range(4), size)
    ]


def thm42_check(
    system: LinearSystem,
    S: Union[Sequence[int], str],
    horizon: float,
    settings: Optional[Settings] = None,
    p_table: PTable = "verbatim",
) -> Thm42Report:
    """Sample the hypotheses of the normal-or-extremal criterion.

    ``S = "try-all"`` tries every nonempty index set and returns the first
    split whose hypotheses hold (or the last one tried).
    """
    settings = settings or get_settings()
    if isinstance(S, str):
        if S != "try-all":
            raise ValueError(f"unknown index set '{S}'")
        report = None
        for subset in _subsets():
            report = thm42_check(system, subset, horizon, settings, p_table)
            if report.conclusion is Thm42Conclusion.NORMAL_OR_EXTREMAL:
                break
        return report

    S = tuple(sorted(set(S)))
    if not S or not set(S) <= {0, 1, 2, 3}:
        raise ValueError(f"S must be a nonempty subset of {{0, 1, 2, 3}}, got {S}")
    D_complement = tuple(n for n in range(4) if n not in S)
    tol = settings.alpha_tol
    grid = np.linspace(system.t0, horizon, settings.alpha_grid_points)
    values = _components(system, grid)
    p = p_tables(values["b"], values["c"])
    D = {
        name: d_table(values["a"], values["d"], table, tol)
        for name, table in p.items()
    }

    alpha = _check_alpha(system, S, D_complement, p_table, grid, tol)
    beta = beta_integral(system, horizon, settings)
    failed = tuple(
        name
        for name, ok in (
            ("alpha", alpha.satisfied),
            ("beta", beta.status is TailStatus.CONVERGED),
        )
        if not ok
    )
    conclusion = (
        Thm42Conclusion.HYPOTHESES_FAIL if failed else Thm42Conclusion.NORMAL_OR_EXTREMAL
    )
    logger.info("hypotheses for S=%s: %s %s", S, conclusion.value, failed or "")
    return Thm42Report(
        S=S,
        D_complement=D_complement,
        grid=grid,
        p=p,
        D=D,
        p_table=p_table,
        alpha=alpha,
        beta=beta,
        conclusion=conclusion,
        failed=failed,
    )


@attr.s(frozen=True, slots=True)
class SignCheckReport:
    S: Tuple[int, ...] = attr.ib()
    regular: bool = attr.ib()
    minima: Tuple[float, float, float, float] = attr.ib()
    passed: bool = attr.ib()


def theorem43_sign_check(
    system: LinearSystem,
    S: Sequence[int],
    horizon: float,
    settings: Optional[Settings] = None,
) -> SignCheckReport:
    """Sign pattern of the solution through ``0``.

    Written as ``q0 = g0 - i g1 - j g2 - k g3``, ``g_n >= 0`` must hold for
    every ``n`` in ``S``.
    """
    settings = settings or get_settings()
    sol = solve_with_companions(to_riccati(system), system.t0, ZERO, horizon, settings)
    grid = sol.grid(settings.alpha_grid_points)
    g = sol.samples(grid)["q"] * np.array([1.0, -1.0, -1.0, -1.0])
    minima = tuple(float(x) for x in g.min(axis=0))
    passed = sol.regular and all(minima[n] >= -settings.alpha_tol for n in S)
    return SignCheckReport(tuple(sorted(S)), sol.regular, minima, passed)
