"""The quaternionic Riccati equation ``q' + q a q + b q + q c + d = 0``.

A solution ``q`` is integrated together with its companions

    phi' = (a q + c) phi        (left multiplication)
    psi' = psi (b + q a)        (right multiplication)

with ``phi(t1) = psi(t1) = 1``, and with the running integrals

    mu(t)   = int_{t1}^t phi^-1 a psi^-1
    re_phi  = int Re(a q + c),   re_psi = int Re(a q + b),   re_aq = int Re(a q)

Every other solution through ``q(t1) + lam`` is then

    q + psi^-1 (1 + lam mu)^-1 lam phi^-1

and the tail ``nu(t) = int_t^inf phi^-1 a psi^-1`` decides whether an extremal
solution exists.
"""

from __future__ import annotations

import logging
from enum import Enum
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple, Union

import attr
import numpy as np
from scipy import integrate as scipy_integrate
from scipy import optimize

from quaternion_riccati import coeffs
from quaternion_riccati.coeffs import CoeffSet, TailStatus
from quaternion_riccati.config import Settings, get_settings
from quaternion_riccati.errors import FamilySingular, NuVanishes, OutOfDomain
from quaternion_riccati.ode_engine import (
    Accumulator,
    OdeProblem,
    SolveStatus,
    StepQuadrature,
    Trajectory,
    solve,
)
from quaternion_riccati.quat_core import (
    EPS_ZERO,
    Quaternion,
    as_quaternion,
    hamilton,
    inverse,
    inverse_array,
    symbol_array,
)

logger = logging.getLogger(__name__)

# |1 + lam mu| relative to its scale below which a family member is at a pole
FAMILY_POLE_TOL = 1e-6

QuaternionLike = Union[Quaternion, float, Sequence[float]]


def _at(f: coeffs._CoeffBase, t) -> np.ndarray:
    """Coefficient values shaped like the quaternion arrays they multiply."""
    return f.at(t) if np.ndim(t) == 0 else f.values(t)


@attr.s(frozen=True, slots=True)
class RiccatiEq:
    coeffs: CoeffSet = attr.ib()

    @property
    def t0(self) -> float:
        return self.coeffs.t0

    @classmethod
    def from_config(cls, config) -> RiccatiEq:
        return cls(coeffs.parse(config))

    def check_interval(self, t1: float, t_end: float) -> None:
        start, end = self.coeffs.domain()
        if t1 < start or t_end > end:
            raise OutOfDomain(
                f"[{t1}, {t_end}] is outside of the validity interval [{start}, {end}]"
            )

    def rhs_array(self, t, q: np.ndarray) -> np.ndarray:
        """``-(q a q + b q + q c + d)`` on quaternion arrays."""
        cs = self.coeffs
        out = hamilton(hamilton(q, _at(cs.a, t)), q)
        if not cs.b.is_zero():
            out = out + hamilton(_at(cs.b, t), q)
        if not cs.c.is_zero():
            out = out + hamilton(q, _at(cs.c, t))
        if not cs.d.is_zero():
            out = out + _at(cs.d, t)
        return -out


def rhs(eq: RiccatiEq, t: float, q: QuaternionLike) -> Quaternion:
    """Right-hand side of the equation solved for ``q'``."""
    return Quaternion.from_array(eq.rhs_array(t, as_quaternion(q).as_array()))


def _companion_system(eq: RiccatiEq):
    cs = eq.coeffs
    zero = np.zeros(4)

    def b_at(t):
        return zero if cs.b.is_zero() else _at(cs.b, t)

    def c_at(t):
        return zero if cs.c.is_zero() else _at(cs.c, t)

    def derivative(t, y):
        q, phi, psi = y[..., 0:4], y[..., 4:8], y[..., 8:12]
        a = _at(cs.a, t)
        aq = hamilton(a, q)
        qa = hamilton(q, a)
        return np.concatenate(
            [
                eq.rhs_array(t, q),
                hamilton(aq + c_at(t), phi),
                hamilton(psi, b_at(t) + qa),
            ],
            axis=-1,
        )

    def mu_integrand(t, y):
        phi, psi = y[..., 4:8], y[..., 8:12]
        return hamilton(hamilton(inverse_array(phi), _at(cs.a, t)), inverse_array(psi))

    def re_aq(t, y):
        return hamilton(_at(cs.a, t), y[..., 0:4])[..., 0]

    def re_phi(t, y):
        return re_aq(t, y) + c_at(t)[..., 0]

    def re_psi(t, y):
        return re_aq(t, y) + b_at(t)[..., 0]

    accumulators = (
        Accumulator("mu", 4, mu_integrand),
        Accumulator("re_phi", 1, re_phi),
        Accumulator("re_psi", 1, re_psi),
        Accumulator("re_aq", 1, re_aq),
    )
    return derivative, mu_integrand, accumulators


@attr.s(frozen=True, eq=False)
class RiccatiSolution:
    """A solution ``q`` with its companions and accumulators, anchored at ``t1``."""

    eq: RiccatiEq = attr.ib()
    t1: float = attr.ib()
    q1: Quaternion = attr.ib()
    trajectory: Trajectory = attr.ib()
    mu_integrand: Callable = attr.ib(repr=False)

    @property
    def status(self) -> SolveStatus:
        return self.trajectory.status

    @property
    def t_end(self) -> float:
        return self.trajectory.t_end

    @property
    def t_escape(self) -> Optional[float]:
        return self.trajectory.t_escape

    @property
    def regular(self) -> bool:
        return self.trajectory.regular

    def q(self, t: float) -> Quaternion:
        return self.trajectory.slot(t, 0)

    def phi(self, t: float) -> Quaternion:
        return self.trajectory.slot(t, 1)

    def psi(self, t: float) -> Quaternion:
        return self.trajectory.slot(t, 2)

    def mu(self, t: float) -> Quaternion:
        return self.trajectory.accumulated("mu", t)

    def re_integral(self, label: str, t: float) -> float:
        """One of ``re_phi``, ``re_psi`` or ``re_aq`` integrated from ``t1`` to ``t``."""
        return self.trajectory.accumulated(label, t)

    @cached_property
    def mu_quadrature(self) -> StepQuadrature:
        """Step-wise quadrature of the mu integrand, used for backward tails."""
        return self.trajectory.quadrature(self.mu_integrand, width=4)

    @cached_property
    def abs_mu_quadrature(self) -> StepQuadrature:
        return self.trajectory.quadrature(
            lambda t, y: np.linalg.norm(self.mu_integrand(t, y), axis=-1), width=1
        )

    def grid(self, points: int) -> np.ndarray:
        return np.linspace(self.t1, self.t_end, points)

    def samples(self, grid: Sequence[float]) -> dict:
        """Arrays of ``q``, ``phi``, ``psi`` and ``mu`` on a grid."""
        values = self.trajectory.sample(grid)
        mu_offset, _ = self.trajectory.layout["mu"]
        return {
            "t": np.asarray(grid, dtype=float),
            "q": values[:, 0:4],
            "phi": values[:, 4:8],
            "psi": values[:, 8:12],
            "mu": values[:, mu_offset : mu_offset + 4],
        }


def solve_with_companions(
    eq: RiccatiEq,
    t1: float,
    q1: QuaternionLike,
    t_end: float,
    settings: Optional[Settings] = None,
) -> RiccatiSolution:
    """Integrate ``q``, ``phi``, ``psi`` and the accumulators as one system.

    Only ``q`` is monitored for escape; the companions stop with it.
    """
    settings = settings or get_settings()
    eq.check_interval(t1, t_end)
    q1 = as_quaternion(q1)
    derivative, mu_integrand, accumulators = _companion_system(eq)
    problem = OdeProblem(
        dimension=3,
        rhs=derivative,
        t0=t1,
        y0=[q1, Quaternion(1.0), Quaternion(1.0)],
        escape_norm=settings.escape_norm,
        escape_slots=(0,),
    )
    trajectory = solve(
        problem,
        t_end,
        rtol=settings.rtol,
        atol=settings.atol,
        accumulators=accumulators,
        escape_refine_norm=settings.escape_refine_norm,
    )
    logger.debug("seed %r from t1=%s: %s", q1, t1, trajectory.status.value)
    return RiccatiSolution(eq, float(t1), q1, trajectory, mu_integrand)


def family_member(sol: RiccatiSolution, lam: QuaternionLike, t: float) -> Quaternion:
    """Value at ``t`` of the solution through ``q(t1) + lam``.

    Raises :class:`FamilySingular` when ``1 + lam mu(t)`` is numerically zero.
    """
    lam = as_quaternion(lam)
    factor = Quaternion(1.0) + lam * sol.mu(t)
    if factor.norm() <= EPS_ZERO:
        raise FamilySingular(
            f"1 + lam mu vanishes at t = {t} for lam = {lam!r}",
            pole_time=family_pole(sol, lam),
        )
    return sol.q(t) + inverse(sol.psi(t)) * inverse(factor) * lam * inverse(sol.phi(t))


def family_pole(
    sol: RiccatiSolution, lam: QuaternionLike, grid_points: int = 1000
) -> Optional[float]:
    """First time where ``|1 + lam mu|`` has a minimum close to zero, if any."""
    lam = as_quaternion(lam)
    grid = sol.grid(grid_points)
    mu = sol.samples(grid)["mu"]
    factors = hamilton(np.broadcast_to(lam.as_array(), mu.shape), mu)
    factors[:, 0] += 1.0
    norms = np.linalg.norm(factors, axis=1)
    scale = 1.0 + lam.norm() * np.linalg.norm(mu, axis=1)
    candidates = [
        k
        for k in range(len(grid))
        if (k == 0 or norms[k] <= norms[k - 1])
        and (k == len(grid) - 1 or norms[k] <= norms[k + 1])
    ]

    def modulus(t):
        return (Quaternion(1.0) + lam * sol.mu(t)).norm()

    for k in candidates:
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
        result = optimize.minimize_scalar(
            modulus, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12}
        )
        if result.fun <= FAMILY_POLE_TOL * scale[k]:
            return float(result.x)
    return None


def companion_moduli_check(
    sol: RiccatiSolution, t: float
) -> Tuple[float, float, float, float]:
    """``|phi(t)|``, ``exp int Re(a q + c)``, ``|psi(t)|``, ``exp int Re(a q + b)``."""
    return (
        sol.phi(t).norm(),
        float(np.exp(sol.re_integral("re_phi", t))),
        sol.psi(t).norm(),
        float(np.exp(sol.re_integral("re_psi", t))),
    )


def modulus_identities_check(
    sol_a: RiccatiSolution, sol_b: RiccatiSolution, t: float
) -> Tuple[float, float, float]:
    """Both sides of the cross modulus identity and the product of the cross moduli.

    With ``lam = q_a(t1) - q_b(t1)``:
    ``|1 + lam mu_b(t)| = exp int Re[a (q_a - q_b)]`` and
    ``|1 + lam mu_b(t)| |1 - lam mu_a(t)| = 1``.
    """
    if sol_a.t1 != sol_b.t1:
        raise ValueError("both solutions must share the anchor time t1")
    lam = sol_a.q1 - sol_b.q1
    lhs = (Quaternion(1.0) + lam * sol_b.mu(t)).norm()
    rhs_value = float(
        np.exp(sol_a.re_integral("re_aq", t) - sol_b.re_integral("re_aq", t))
    )
    product = lhs * (Quaternion(1.0) - lam * sol_a.mu(t)).norm()
    return lhs, rhs_value, product


@attr.s(frozen=True, slots=True)
class NuTail:
    """Diagnosis of ``nu(t) = int_t^horizon phi^-1 a psi^-1``."""

    status: TailStatus = attr.ib()
    value: Quaternion = attr.ib()
    error_bar: Optional[float] = attr.ib()
    zeros: Tuple[float, ...] = attr.ib(factory=tuple)
    partials: Tuple[Quaternion, ...] = attr.ib(factory=tuple)
    t: float = attr.ib(default=0.0)
    horizon: float = attr.ib(default=0.0)

    @property
    def converged(self) -> bool:
        return self.status is TailStatus.CONVERGED

    @property
    def vanishes(self) -> bool:
        return bool(self.zeros)


def _nu(sol: RiccatiSolution, t: float, horizon: float) -> np.ndarray:
    quadrature = sol.mu_quadrature
    return quadrature.tail(t) - quadrature.tail(horizon)


def _nu_mass(sol: RiccatiSolution, t: float, horizon: float) -> float:
    """``int_t^horizon |phi^-1 a psi^-1|``."""
    quadrature = sol.abs_mu_quadrature
    return float((quadrature.tail(t) - quadrature.tail(horizon))[0])


def _nu_ratio(sol: RiccatiSolution, t: float, horizon: float) -> float:
    """``|nu(t)|`` relative to the mass of its integrand; 0 when both vanish."""
    modulus = float(np.linalg.norm(_nu(sol, t, horizon)))
    if modulus == 0.0:
        return 0.0
    mass = _nu_mass(sol, t, horizon)
    return modulus / mass if mass > 0.0 else np.inf


def _nu_zeros(sol, t, horizon, settings) -> Tuple[float, ...]:
    # the horizon itself is a zero of every truncated tail
    grid = np.linspace(t, horizon, settings.grid_points)[:-1]
    ratios = np.array([_nu_ratio(sol, s, horizon) for s in grid])
    moduli = np.array([np.linalg.norm(_nu(sol, s, horizon)) for s in grid])
    tol = settings.nu_zero_tol

    def modulus(s):
        return float(np.linalg.norm(_nu(sol, s, horizon)))

    def excess(s):
        return _nu_ratio(sol, s, horizon) - tol

    zeros: List[float] = []
    below = ratios <= tol
    for k in range(len(grid)):
        if below[k] and (k == 0 or not below[k - 1]):
            # start of a run where nu is numerically zero
            if k == 0:
                zeros.append(float(grid[0]))
            else:
                zeros.append(float(optimize.brentq(excess, grid[k - 1], grid[k])))
        elif (
            not below[k]
            and 0 < k < len(grid) - 1
            and moduli[k] <= moduli[k - 1]
            and moduli[k] <= moduli[k + 1]
        ):
            result = optimize.minimize_scalar(
                modulus,
                bounds=(grid[k - 1], grid[k + 1]),
                method="bounded",
                options={"xatol": 1e-12},
            )
            if _nu_ratio(sol, float(result.x), horizon) <= tol:
                zeros.append(float(result.x))
    return tuple(sorted(zeros))


def nu_tail(
    sol: RiccatiSolution,
    t: float,
    horizon: float,
    settings: Optional[Settings] = None,
) -> NuTail:
    """Tail integral at ``t`` truncated at ``horizon`` with its diagnosis.

    Partial integrals over ``[t, T_k]`` with ``T_k`` spread evenly up to the
    horizon feed :func:`coeffs.diagnose_tail`. Zeros are searched on a uniform
    grid over ``[t, horizon]`` and refined locally.
    """
    settings = settings or get_settings()
    count = settings.tail_windows
    windows = t + (horizon - t) * np.arange(1, count + 1) / count
    partials = np.array(
        [_nu(sol, t, horizon) - _nu(sol, window, horizon) for window in windows]
    )
    status = coeffs.diagnose_tail(partials, settings.tail_tol, 1.0 / settings.tail_tol)
    value = Quaternion.from_array(_nu(sol, t, horizon))

    error_bar = None
    if status is TailStatus.CONVERGED:
        error_bar = float(np.linalg.norm(partials[-1] - partials[-2]))
        estimate = sol.eq.coeffs.a.tail_bound(horizon)
        if estimate.bound is not None:
            scale = sol.phi(horizon).norm() * sol.psi(horizon).norm()
            error_bar += estimate.bound / scale

    zeros = _nu_zeros(sol, t, horizon, settings)
    logger.debug("nu(%s) = %r (%s), %d zeros", t, value, status.value, len(zeros))
    return NuTail(
        status=status,
        value=value,
        error_bar=error_bar,
        zeros=zeros,
        partials=tuple(Quaternion.from_array(p) for p in partials),
        t=float(t),
        horizon=float(horizon),
    )


def _anchored_nu(sol: RiccatiSolution, t: float, horizon: float) -> Quaternion:
    """``phi(t) nu(t) psi(t)``: the tail with the companions renormalized at ``t``."""
    return sol.phi(t) * Quaternion.from_array(_nu(sol, t, horizon)) * sol.psi(t)


def extremal_candidate(
    sol: RiccatiSolution,
    t: float,
    horizon: Optional[float] = None,
    settings: Optional[Settings] = None,
) -> Quaternion:
    """``q0(t) - nu(t)^-1`` with ``nu`` anchored at ``t``.

    Raises :class:`NuVanishes` when ``|nu(t)| <= nu_zero_tol``.
    """
    settings = settings or get_settings()
    horizon = sol.t_end if horizon is None else horizon
    if _nu_ratio(sol, t, horizon) <= settings.nu_zero_tol:
        raise NuVanishes(
            f"nu({t}) vanishes: no extremal solution passes through t = {t}"
        )
    return sol.q(t) - inverse(_anchored_nu(sol, t, horizon))


@attr.s(frozen=True, eq=False)
class ExtremalPath:
    """Extremal solution built from a solution with a convergent tail.

    Reliable on ``[t1, horizon)`` away from the truncation point.
    """

    source: RiccatiSolution = attr.ib()
    horizon: float = attr.ib()
    settings: Settings = attr.ib()

    @property
    def t1(self) -> float:
        return self.source.t1

    def q(self, t: float) -> Quaternion:
        return extremal_candidate(self.source, t, self.horizon, self.settings)

    def nu(self, t: float) -> Quaternion:
        return Quaternion.from_array(_nu(self.source, t, self.horizon))


def extremal_solution(
    sol: RiccatiSolution,
    horizon: Optional[float] = None,
    settings: Optional[Settings] = None,
) -> ExtremalPath:
    settings = settings or get_settings()
    horizon = sol.t_end if horizon is None else horizon
    if not sol.t_end >= horizon:
        raise ValueError(
            f"the source solution stops at t = {sol.t_end} before the horizon {horizon}"
        )
    return ExtremalPath(sol, float(horizon), settings)


@attr.s(frozen=True, slots=True)
class WitnessReport:
    gamma: float = attr.ib()
    seed: Quaternion = attr.ib()
    regular: bool = attr.ib()
    t_end: float = attr.ib()


def regular_witness(
    sol: RiccatiSolution, horizon: float, settings: Optional[Settings] = None
) -> WitnessReport:
    """Second regular seed next to a regular solution.

    ``gamma`` is chosen outside the sampled range of ``mu`` so that
    ``1 - mu / gamma`` never vanishes, and ``q(t1) - 1 / gamma`` is integrated.
    """
    settings = settings or get_settings()
    grid = sol.grid(settings.grid_points)
    sup_mu = float(np.max(np.linalg.norm(sol.samples(grid)["mu"], axis=1)))
    gamma = 2.0 * sup_mu + 1.0
    seed = sol.q1 - Quaternion(1.0 / gamma)
    witness = solve_with_companions(sol.eq, sol.t1, seed, horizon, settings)
    regular = witness.regular and witness.t_end >= horizon
    return WitnessReport(gamma, seed, regular, witness.t_end)


def re_integral_trend(
    sol_star, sol_normal, horizons: Sequence[float]
) -> List[Tuple[float, float]]:
    """``int_{t1}^H Re[a (q_star - q_normal)]`` for every ``H`` in ``horizons``.

    Both arguments only need a ``q(t)`` method and a shared ``t1``.
    """
    a = sol_normal.eq.coeffs.a

    def integrand(t):
        difference = (sol_star.q(t) - sol_normal.q(t)).as_array()
        return float(hamilton(a.at(t), difference)[0])

    trend = []
    start = sol_normal.t1
    for horizon in horizons:
        value, _ = scipy_integrate.quad(
            integrand, start, horizon, limit=200, epsabs=1e-8
        )
        trend.append((float(horizon), float(value)))
    return trend


class SeedVerdict(str, Enum):
    NORMAL = "normal-evidence"
    EXTREMAL = "extremal-candidate"
    ESCAPED = "escaped"
    INDETERMINATE = "indeterminate"


class EquationVerdict(str, Enum):
    NORMAL = "normal"
    EXTREMAL = "extremal"
    SUB_EXTREMAL = "sub-extremal-non-extremal"
    INDETERMINATE = "indeterminate"


@attr.s(frozen=True, slots=True)
class SeedReport:
    seed: Quaternion = attr.ib()
    verdict: SeedVerdict = attr.ib()
    status: SolveStatus = attr.ib()
    t_end: float = attr.ib()
    t_escape: Optional[float] = attr.ib(default=None)
    sup_mu: float = attr.ib(default=0.0)
    sup_mu_before_last: float = attr.ib(default=0.0)
    mu_blowup_time: Optional[float] = attr.ib(default=None)
    nu: Optional[NuTail] = attr.ib(default=None)


@attr.s(frozen=True, slots=True)
class ClassificationReport:
    verdict: EquationVerdict = attr.ib()
    horizon: float = attr.ib()
    t1: float = attr.ib()
    seeds: Tuple[SeedReport, ...] = attr.ib()

    def for_seed(self, seed: QuaternionLike) -> SeedReport:
        seed = as_quaternion(seed)
        for report in self.seeds:
            if report.seed.isclose(seed):
                return report
        raise KeyError(f"seed {seed!r} was not classified")

    @property
    def sup_mu(self) -> float:
        return max((report.sup_mu for report in self.seeds), default=0.0)


def _mu_blowup_time(grid, mu_norms, threshold) -> Optional[float]:
    above = mu_norms > threshold
    if not above.any():
        return None
    k = int(np.argmax(above))
    approach = mu_norms[k // 2 : k + 1]
    if np.any(np.diff(approach) < 0):
        return None
    return float(grid[k])


def classify_seed(
    eq: RiccatiEq,
    t1: float,
    seed: QuaternionLike,
    horizon: float,
    settings: Optional[Settings] = None,
) -> SeedReport:
    """Evidence for one seed, decided in this order.

    1. ``|mu|`` passes ``mu_blowup`` with a monotone trend at least
       ``escape_margin`` before the integration stopped on escape (or with no
       escape at all): extremal candidate. Near a pole ``q`` and ``mu`` blow
       up together; exponential growth takes time to cross the escape norm.
    2. Escape: escaped.
    3. Step size failure: indeterminate.
    4. ``sup |mu|`` plateaus over the last tenth of the horizon: normal evidence.
    5. ``nu`` converges and has no zero: extremal candidate.
    6. Otherwise indeterminate.
    """
    settings = settings or get_settings()
    seed = as_quaternion(seed)
    sol = solve_with_companions(eq, t1, seed, horizon, settings)
    grid = sol.grid(settings.grid_points)
    mu_norms = np.linalg.norm(sol.samples(grid)["mu"], axis=1)
    sup_mu = float(mu_norms.max())
    cut = t1 + 0.9 * (horizon - t1)
    before = mu_norms[grid <= cut]
    sup_before = float(before.max()) if before.size else sup_mu
    blowup = _mu_blowup_time(grid, mu_norms, settings.mu_blowup)

    def report(verdict, nu=None):
        logger.info("seed %r: %s", seed, verdict.value)
        return SeedReport(
            seed=seed,
            verdict=verdict,
            status=sol.status,
            t_end=sol.t_end,
            t_escape=sol.t_escape,
            sup_mu=sup_mu,
            sup_mu_before_last=sup_before,
            mu_blowup_time=blowup,
            nu=nu,
        )

    if blowup is not None:
        stopped = sol.t_end if sol.status is SolveStatus.ESCAPED else None
        if stopped is None or stopped - blowup >= settings.escape_margin:
            return report(SeedVerdict.EXTREMAL)
    if sol.status is SolveStatus.ESCAPED:
        return report(SeedVerdict.ESCAPED)
    if sol.status is SolveStatus.STIFFNESS_FAILURE:
        return report(SeedVerdict.INDETERMINATE)
    nu = nu_tail(sol, t1, horizon, settings)
    if sup_mu == 0.0 or (sup_mu - sup_before) / sup_mu < settings.plateau_tol:
        return report(SeedVerdict.NORMAL, nu)
    if nu.converged and not nu.vanishes:
        return report(SeedVerdict.EXTREMAL, nu)
    return report(SeedVerdict.INDETERMINATE, nu)


def equation_verdict(seeds: Sequence[SeedReport]) -> EquationVerdict:
    """Aggregate per-seed evidence into a verdict on the equation."""
    verdicts = [report.verdict for report in seeds]
    if SeedVerdict.EXTREMAL in verdicts:
        return EquationVerdict.EXTREMAL
    tails = [report.nu for report in seeds if report.nu is not None]
    if any(nu.converged and not nu.vanishes for nu in tails):
        return EquationVerdict.EXTREMAL
    survivors = [r for r in seeds if r.verdict is not SeedVerdict.ESCAPED]
    if survivors and all(r.verdict is SeedVerdict.NORMAL for r in survivors):
        if any(nu.vanishes for nu in tails):
            return EquationVerdict.NORMAL
    if SeedVerdict.NORMAL in verdicts and any(
        report.verdict is SeedVerdict.INDETERMINATE
        and report.nu is not None
        and report.nu.status is TailStatus.OSCILLATORY
        for report in seeds
    ):
        return EquationVerdict.SUB_EXTREMAL
    return EquationVerdict.INDETERMINATE


def classify(
    eq: RiccatiEq,
    t1: float,
    seeds: Sequence[QuaternionLike],
    horizon: Optional[float] = None,
    settings: Optional[Settings] = None,
) -> ClassificationReport:
    """Classify every supplied seed, in order, and aggregate the verdict."""
    settings = settings or get_settings()
    horizon = settings.horizon if horizon is None else horizon
    if not horizon > t1:
        raise ValueError(f"horizon {horizon} must be after t1 = {t1}")
    reports = tuple(classify_seed(eq, t1, seed, horizon, settings) for seed in seeds)
    verdict = equation_verdict(reports)
    logger.info("equation verdict over [%s, %s]: %s", t1, horizon, verdict.value)
    return ClassificationReport(verdict, float(horizon), float(t1), reports)


@attr.s(frozen=True, slots=True)
class OracleReport:
    max_deviation: float = attr.ib()
    det_phi_deviation: float = attr.ib()
    det_psi_deviation: float = attr.ib()


def matrix_oracle_check(
    eq: RiccatiEq,
    t1: float,
    q1: QuaternionLike,
    t_end: float,
    settings: Optional[Settings] = None,
) -> OracleReport:
    """Cross-check against the 4x4 real matrix Riccati equation.

    ``Y' = -(Y A Y + B Y + Y C + D)`` with symbol coefficients is integrated
    from the symbol of ``q1`` together with ``Phi' = (A Y + C) Phi`` and
    ``Psi' = Psi (B + Y A)``. Returns the largest entry of
    ``symbol(q) - Y`` on a grid and the relative deviations of ``det Phi``
    and ``det Psi`` from the exponentials of their trace integrals.
    """
    settings = settings or get_settings()
    q1 = as_quaternion(q1)
    sol = solve_with_companions(eq, t1, q1, t_end, settings)
    cs = eq.coeffs

    def symbols(t):
        return [symbol_array(_at(f, t)) for f in (cs.a, cs.b, cs.c, cs.d)]

    def derivative(t, y):
        Y, Phi, Psi = (y[16 * k : 16 * (k + 1)].reshape(4, 4) for k in range(3))
        A, B, C, D = symbols(t)
        return np.concatenate(
            [
                -(Y @ A @ Y + B @ Y + Y @ C + D).ravel(),
                ((A @ Y + C) @ Phi).ravel(),
                (Psi @ (B + Y @ A)).ravel(),
            ]
        )

    def trace_phi(t, y):
        A, _, C, _ = symbols(t)
        return np.trace(A @ y[:16].reshape(4, 4) + C)

    def trace_psi(t, y):
        A, B, _, _ = symbols(t)
        return np.trace(B + y[:16].reshape(4, 4) @ A)

    eye = np.eye(4).ravel()
    problem = OdeProblem(
        dimension=12,
        rhs=derivative,
        t0=t1,
        y0=[symbol_array(q1.as_array()).ravel(), eye, eye],
        escape_norm=settings.escape_norm,
        escape_slots=(0, 1, 2, 3),
    )
    trajectory = solve(
        problem,
        min(t_end, sol.t_end),
        rtol=settings.rtol,
        atol=settings.atol,
        accumulators=(
            Accumulator("trace_phi", 1, trace_phi),
            Accumulator("trace_psi", 1, trace_psi),
        ),
    )
    grid = np.linspace(t1, min(trajectory.t_end, sol.t_end), settings.grid_points)
    matrices = trajectory.sample(grid)
    q_values = sol.samples(grid)["q"]
    deviation = float(
        np.max(np.abs(symbol_array(q_values) - matrices[:, :16].reshape(-1, 4, 4)))
    )
    det_phi = np.linalg.det(matrices[:, 16:32].reshape(-1, 4, 4))
    det_psi = np.linalg.det(matrices[:, 32:48].reshape(-1, 4, 4))
    offset_phi, _ = trajectory.layout["trace_phi"]
    offset_psi, _ = trajectory.layout["trace_psi"]
    expected_phi = np.exp(matrices[:, offset_phi])
    expected_psi = np.exp(matrices[:, offset_psi])
    report = OracleReport(
        max_deviation=deviation,
        det_phi_deviation=float(np.max(np.abs(det_phi - expected_phi) / expected_phi)),
        det_psi_deviation=float(np.max(np.abs(det_psi - expected_psi) / expected_psi)),
    )
    logger.debug("matrix oracle over [%s, %s]: %s", t1, grid[-1], report)
    return report
