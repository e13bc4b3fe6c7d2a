"""Scenario checks.

Every check kind of :mod:`quaternion_riccati.models` has a function here,
registered under the same ``kind``. A check returns a :class:`CheckOutcome`;
numerical diagnoses are reported as values, exceptions are left to the
runner.
"""

from __future__ import annotations

import logging
from functools import cached_property
from typing import Any, Callable, Dict, Optional, Tuple

import attr
import numpy as np

from quaternion_riccati import coeffs, linear_system, riccati
from quaternion_riccati.config import Settings
from quaternion_riccati.models import (
    Mode,
    Scenario,
    SolutionSpec,
)
from quaternion_riccati.ode_engine import SolveStatus
from quaternion_riccati.quat_core import (
    ONE,
    Quaternion,
    as_quaternion,
    hamilton,
    inverse,
    norm_array,
    symbol_array,
)

logger = logging.getLogger(__name__)

# |q| above which the closed form comparison stops short of a pole
REGULAR_SPAN_NORM = 1e3

CheckFunction = Callable[["RunContext", Any], "CheckOutcome"]

CHECKS: Dict[str, CheckFunction] = {}


def register(kind: str):
    def decorator(func: CheckFunction) -> CheckFunction:
        CHECKS[kind] = func
        return func

    return decorator


@attr.s(frozen=True, slots=True)
class CheckOutcome:
    passed: bool = attr.ib()
    measured: Dict[str, float] = attr.ib(factory=dict)
    details: Dict[str, Any] = attr.ib(factory=dict)
    # optional time series written next to the report, first column "t"
    series: Optional[Dict[str, np.ndarray]] = attr.ib(default=None, eq=False)


@attr.s(eq=False)
class RunContext:
    """Equation, settings and the solutions already integrated for one run."""

    scenario: Scenario = attr.ib()
    settings: Settings = attr.ib()
    _solutions: Dict[Tuple, riccati.RiccatiSolution] = attr.ib(factory=dict)
    _pairs: Dict[Tuple, linear_system.SystemSolution] = attr.ib(factory=dict)

    @cached_property
    def eq(self) -> riccati.RiccatiEq:
        if self.scenario.mode is Mode.SYSTEM:
            return linear_system.to_riccati(self.scenario.system)
        return riccati.RiccatiEq(self.scenario.equation)

    @property
    def system(self):
        return self.scenario.system

    @property
    def start(self) -> float:
        return self.scenario.start

    @property
    def horizon(self) -> float:
        return self.scenario.horizon or self.settings.horizon

    def solution(self, seed, t_end: Optional[float] = None) -> riccati.RiccatiSolution:
        seed = as_quaternion(seed)
        t_end = self.horizon if t_end is None else float(t_end)
        key = (seed.as_tuple(), t_end)
        if key not in self._solutions:
            self._solutions[key] = riccati.solve_with_companions(
                self.eq, self.start, seed, t_end, self.settings
            )
        return self._solutions[key]

    def pair(self, spec: SolutionSpec, t_end: float) -> linear_system.SystemSolution:
        key = (spec.principal, spec.phi1, spec.psi1, float(t_end))
        if key not in self._pairs:
            if spec.principal:
                solution = linear_system.principal_solution(
                    self.system, self.start, t_end, self.settings
                )
            else:
                solution = linear_system.solve_system(
                    self.system,
                    self.start,
                    spec.phi1,
                    spec.psi1,
                    t_end,
                    self.settings,
                )
            self._pairs[key] = solution
        return self._pairs[key]


def _relative(value: np.ndarray, reference: np.ndarray) -> np.ndarray:
    value = np.asarray(value, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if value.ndim and value.shape[-1] == 4 and reference.shape == value.shape:
        return norm_array(value - reference) / np.maximum(1.0, norm_array(reference))
    return np.abs(value - reference) / np.maximum(1.0, np.abs(reference))


def _label(seed) -> str:
    return repr(as_quaternion(seed))


@register("symbol")
def symbol_check(ctx: RunContext, check) -> CheckOutcome:
    rng = np.random.default_rng(check.seed)
    p = rng.normal(size=(check.samples, 4))
    q = rng.normal(size=(check.samples, 4))
    norms = norm_array(q)
    matrices = symbol_array(q)
    det_deviation = np.max(np.abs(np.linalg.det(matrices) - norms**4) / norms**4)
    trace_deviation = np.max(
        np.abs(np.trace(matrices, axis1=-2, axis2=-1) - 4.0 * q[:, 0]) / (4.0 * norms)
    )
    product = symbol_array(hamilton(p, q)) - symbol_array(p) @ matrices
    product_deviation = np.max(
        np.max(np.abs(product), axis=(-2, -1)) / (norm_array(p) * norms)
    )
    measured = {
        "det_deviation": float(det_deviation),
        "trace_deviation": float(trace_deviation),
        "product_deviation": float(product_deviation),
    }
    passed = all(value <= check.tol for value in measured.values())
    return CheckOutcome(passed, measured)


@register("closed-form")
def closed_form_check(ctx: RunContext, check) -> CheckOutcome:
    cs = ctx.eq.coeffs
    a = cs.a
    if not (cs.b.is_zero() and cs.c.is_zero() and cs.d.is_zero()):
        raise ValueError("the closed form needs b = c = d = 0")
    if not all(a.component_is_zero(n) for n in (1, 2, 3)):
        raise ValueError("the closed form needs a real coefficient a")

    grid = np.linspace(ctx.start, check.t_end, check.points)
    steps = [
        coeffs.integrate(a, lo, hi, ctx.settings.quad_tol).q0
        for lo, hi in zip(grid, grid[1:])
    ]
    primitive = np.concatenate([[0.0], np.cumsum(steps)])

    measured: Dict[str, float] = {}
    details: Dict[str, Any] = {}
    series: Dict[str, np.ndarray] = {"t": grid}
    passed = True
    for k, lam in enumerate(check.lambdas):
        lam = as_quaternion(lam)
        sol = ctx.solution(lam, check.t_end)
        deviations = np.full(grid.size, np.nan)
        for i, (t, big_a) in enumerate(zip(grid, primitive)):
            factor = ONE + lam * big_a
            if t > sol.t_end or factor.norm() * REGULAR_SPAN_NORM < lam.norm():
                continue
            exact = inverse(factor, eps_zero=0.0) * lam
            deviations[i] = _relative(sol.q(t).as_array(), exact.as_array())
        worst = float(np.nanmax(deviations)) if np.isfinite(deviations).any() else 0.0
        measured[f"deviation[{k}]"] = worst
        details[_label(lam)] = {"status": sol.status.value, "t_end": sol.t_end}
        series[f"deviation_{k}"] = deviations
        passed = passed and worst <= check.tol

    base = ctx.solution(Quaternion(), check.t_end)
    for k, escape in enumerate(check.escapes):
        sol = ctx.solution(escape.lam, check.t_end)
        escaped = sol.status is SolveStatus.ESCAPED and sol.t_escape is not None
        measured[f"t_escape[{k}]"] = sol.t_escape if escaped else float("nan")
        pole = riccati.family_pole(base, escape.lam, ctx.settings.grid_points)
        measured[f"family_pole[{k}]"] = float("nan") if pole is None else pole
        # the escape time and the pole of the family must agree
        passed = (
            passed
            and escaped
            and abs(sol.t_escape - escape.t) <= escape.tol
            and pole is not None
            and abs(pole - escape.t) <= escape.tol
        )
    return CheckOutcome(passed, measured, details, series)


@register("companion-moduli")
def companion_moduli_check(ctx: RunContext, check) -> CheckOutcome:
    seeds = check.seeds or ctx.scenario.seeds
    measured = {}
    for k, seed in enumerate(seeds):
        sol = ctx.solution(seed, check.t_end)
        worst = 0.0
        for t in sol.grid(check.points):
            phi, exp_phi, psi, exp_psi = riccati.companion_moduli_check(sol, t)
            worst = max(
                worst, abs(phi - exp_phi) / exp_phi, abs(psi - exp_psi) / exp_psi
            )
        measured[f"deviation[{k}]"] = worst
    return CheckOutcome(all(v <= check.tol for v in measured.values()), measured)


@register("cross-modulus")
def cross_modulus_check(ctx: RunContext, check) -> CheckOutcome:
    measured = {}
    for k, (seed_a, seed_b) in enumerate(check.pairs):
        sol_a = ctx.solution(seed_a, check.t_end)
        sol_b = ctx.solution(seed_b, check.t_end)
        end = min(sol_a.t_end, sol_b.t_end)
        identity, product = 0.0, 0.0
        for t in np.linspace(ctx.start, end, check.points):
            lhs, rhs, prod = riccati.modulus_identities_check(sol_a, sol_b, t)
            identity = max(identity, abs(lhs - rhs) / rhs)
            product = max(product, abs(prod - 1.0))
        measured[f"identity_deviation[{k}]"] = identity
        measured[f"product_deviation[{k}]"] = product
    return CheckOutcome(all(v <= check.tol for v in measured.values()), measured)


@register("matrix-oracle")
def matrix_oracle_check(ctx: RunContext, check) -> CheckOutcome:
    report = riccati.matrix_oracle_check(
        ctx.eq, ctx.start, check.seed, check.t_end, ctx.settings
    )
    measured = {
        "max_deviation": report.max_deviation,
        "det_phi_deviation": report.det_phi_deviation,
        "det_psi_deviation": report.det_psi_deviation,
    }
    return CheckOutcome(all(v <= check.tol for v in measured.values()), measured)


def _seed_details(report: riccati.SeedReport) -> Dict[str, Any]:
    details = {
        "verdict": report.verdict.value,
        "status": report.status.value,
        "t_end": report.t_end,
        "t_escape": report.t_escape,
        "sup_mu": report.sup_mu,
        "mu_blowup_time": report.mu_blowup_time,
    }
    if report.nu is not None:
        details["nu_status"] = report.nu.status.value
        details["nu_zeros"] = len(report.nu.zeros)
    return details


@register("classification")
def classification_check(ctx: RunContext, check) -> CheckOutcome:
    seeds = check.seeds or ctx.scenario.seeds
    horizon = check.horizon or ctx.horizon
    report = riccati.classify(ctx.eq, ctx.start, seeds, horizon, ctx.settings)
    details: Dict[str, Any] = {
        "verdict": report.verdict.value,
        "seeds": {_label(r.seed): _seed_details(r) for r in report.seeds},
    }
    measured = {"sup_mu": report.sup_mu}
    passed = True
    for expectation in check.expect:
        seed_report = report.for_seed(expectation.seed)
        verdict = expectation.verdict
        if verdict is not None and seed_report.verdict is not verdict:
            passed = False
        if expectation.t_escape is not None:
            if seed_report.t_escape is None:
                passed = False
            else:
                miss = abs(seed_report.t_escape - expectation.t_escape)
                passed = passed and miss <= expectation.tol
    if check.verdict is not None and report.verdict is not check.verdict:
        passed = False
    if check.verdict_not is not None and report.verdict is check.verdict_not:
        passed = False
    return CheckOutcome(passed, measured, details)


@register("nu-tail")
def nu_tail_check(ctx: RunContext, check) -> CheckOutcome:
    horizon = check.horizon or ctx.horizon
    t = ctx.start if check.t is None else check.t
    sol = ctx.solution(check.seed, horizon)
    nu = riccati.nu_tail(sol, t, horizon, ctx.settings)
    measured: Dict[str, float] = {"abs_nu": nu.value.norm()}
    if nu.error_bar is not None:
        measured["error_bar"] = nu.error_bar
    details = {
        "status": nu.status.value,
        "zeros": list(nu.zeros[:20]),
        "value": nu.value.as_tuple(),
    }
    passed = True
    if check.status is not None:
        passed = passed and nu.status is check.status
    if check.vanishes is not None:
        passed = passed and nu.vanishes == check.vanishes
    if check.value is not None:
        measured["value_deviation"] = (nu.value - as_quaternion(check.value)).norm()
        passed = passed and measured["value_deviation"] <= check.tol
    if check.candidate is not None:
        candidate = riccati.extremal_candidate(sol, t, horizon, ctx.settings)
        details["candidate"] = candidate.as_tuple()
        miss = candidate - as_quaternion(check.candidate)
        measured["candidate_deviation"] = miss.norm()
        passed = passed and measured["candidate_deviation"] <= check.tol
    return CheckOutcome(passed, measured, details)


@register("extremal-track")
def extremal_track_check(ctx: RunContext, check) -> CheckOutcome:
    horizon = check.horizon or ctx.horizon
    sol = ctx.solution(check.seed, horizon)
    path = riccati.extremal_solution(sol, horizon, ctx.settings)
    grid = np.linspace(ctx.start, check.until, check.points)
    reference = check.reference.values(grid)
    values = np.array([path.q(t).as_array() for t in grid])
    deviations = norm_array(values - reference) / norm_array(reference)
    measured = {"max_relative_deviation": float(deviations.max())}
    series = {"t": grid, "relative_deviation": deviations}
    passed = measured["max_relative_deviation"] <= check.tol
    return CheckOutcome(passed, measured, series=series)


@register("exact-solution")
def exact_solution_check(ctx: RunContext, check) -> CheckOutcome:
    eq = ctx.eq
    grid = np.linspace(ctx.start, check.t_end, check.points)
    reference = check.reference.values(grid)

    f = check.reference
    residuals = []
    for t, q in zip(grid, reference):
        h = 1e-4 * max(1.0, abs(t))
        if t - h < ctx.start:
            slope = (-3 * f.at(t) + 4 * f.at(t + h) - f.at(t + 2 * h)) / (2 * h)
        else:
            slope = (f.at(t + h) - f.at(t - h)) / (2 * h)
        residuals.append(np.linalg.norm(slope - eq.rhs_array(t, q)))
    measured = {"max_residual": float(max(residuals))}
    passed = measured["max_residual"] <= check.residual_tol

    sol = ctx.solution(reference[0], check.t_end)
    samples = sol.samples(grid[grid <= sol.t_end])
    deviations = _relative(samples["q"], reference[: len(samples["t"])])
    measured["max_deviation"] = float(np.max(deviations))
    passed = passed and sol.regular and measured["max_deviation"] <= check.tol
    for label, expected in (("phi", check.phi), ("psi", check.psi)):
        if expected is None:
            continue
        target = np.broadcast_to(np.asarray(expected), samples[label].shape)
        deviation = norm_array(samples[label] - target)
        measured[f"{label}_deviation"] = float(np.max(deviation))
        passed = passed and measured[f"{label}_deviation"] <= check.tol
    series = {"t": grid, "residual": np.asarray(residuals)}
    return CheckOutcome(passed, measured, series=series)


@register("regular-witness")
def witness_check(ctx: RunContext, check) -> CheckOutcome:
    horizon = check.horizon or ctx.horizon
    sol = ctx.solution(check.seed, horizon)
    witness = riccati.regular_witness(sol, horizon, ctx.settings)
    details = {"seed": witness.seed.as_tuple(), "t_end": witness.t_end}
    passed = sol.regular and witness.regular
    return CheckOutcome(passed, {"gamma": witness.gamma}, details)


@register("lift-project")
def lift_project_check(ctx: RunContext, check) -> CheckOutcome:
    rsol = ctx.solution(check.seed, check.t_end)
    if not rsol.regular:
        raise ValueError(
            f"the Riccati solution through {_label(check.seed)} "
            f"stops at t = {rsol.t_end}"
        )
    ssol = linear_system.lift(ctx.system, rsol, check.phi1, settings=ctx.settings)
    path = linear_system.project(ssol)
    grid = np.linspace(ctx.start, check.t_end, check.points)

    round_trip = max(
        _relative(path.q(t).as_array(), rsol.q(t).as_array()) for t in grid
    )
    modulus = 0.0
    for t in grid:
        lhs, rhs = linear_system.modulus_formula_check(ssol, t)
        modulus = max(modulus, abs(lhs - rhs) / rhs)
    residuals = linear_system.residual(ctx.system, ssol, grid)
    moduli = np.array([ssol.phi(t).norm() for t in grid])
    measured = {
        "round_trip_deviation": float(round_trip),
        "modulus_deviation": float(modulus),
        "max_residual": float(residuals.max()),
        "min_abs_phi_ratio": float(moduli.min() / moduli.max()),
    }
    passed = (
        measured["round_trip_deviation"] <= check.tol
        and measured["modulus_deviation"] <= check.modulus_tol
        and measured["max_residual"] <= check.residual_tol
        and measured["min_abs_phi_ratio"] > 1e-15
    )
    return CheckOutcome(passed, measured)


@register("multiplier")
def multiplier_check(ctx: RunContext, check) -> CheckOutcome:
    ssol = ctx.pair(check.solution, check.t_end)
    view = ssol.multiplied(check.lam, check.side)
    grid = np.linspace(ctx.start, check.t_end, check.points)
    residuals = linear_system.residual(ctx.system, view, grid)
    worst = float(residuals.max())
    if check.expect == "holds":
        passed = worst <= check.residual_tol
    else:
        passed = worst > check.fail_threshold
    details = {"side": check.side, "expect": check.expect}
    return CheckOutcome(passed, {"max_residual": worst}, details)


@register("thm42")
def thm42_check(ctx: RunContext, check) -> CheckOutcome:
    horizon = check.horizon or ctx.horizon
    report = linear_system.thm42_check(
        ctx.system, check.S, horizon, ctx.settings, p_table=check.p_table
    )
    D = report.D[report.p_table]
    measured = {f"max_D_{n}": float(D[:, n].max()) for n in range(4)}
    measured["beta_partial"] = report.beta.value
    details = {
        "S": list(report.S),
        "conclusion": report.conclusion.value,
        "failed": list(report.failed),
        "alpha_violated": list(report.alpha.violated),
        "alpha_first_violation": report.alpha.first_violation,
        "beta_status": report.beta.status.value,
        "p_table_difference": float(
            np.max(np.abs(report.p["verbatim"] - report.p["symmetrized"]))
        ),
    }
    passed = True
    if check.conclusion is not None:
        passed = report.conclusion.value == check.conclusion
    if check.failed is not None:
        passed = passed and set(report.failed) == set(check.failed)
    series = {"t": report.grid, **{f"D_{n}": D[:, n] for n in range(4)}}
    return CheckOutcome(passed, measured, details, series)


@register("statement2")
def statement2_check(ctx: RunContext, check) -> CheckOutcome:
    horizon = check.horizon or ctx.horizon
    ssol = ctx.pair(check.solution, horizon)
    T = ctx.start if check.T is None else check.T
    report = linear_system.statement2_integral(ssol, T, horizon, ctx.settings)
    passed = check.status is None or report.status is check.status
    return CheckOutcome(
        passed, {"partial": report.value}, {"status": report.status.value}
    )


@register("ratios")
def ratios_check(ctx: RunContext, check) -> CheckOutcome:
    horizon = check.horizon or ctx.horizon
    grid = np.linspace(ctx.start, horizon, check.points)
    series = linear_system.asymptotic_ratios(
        ctx.pair(check.numerator, horizon), ctx.pair(check.denominator, horizon), grid
    )
    measured = {
        "final_over_initial": series.final_over_initial,
        "last_decade_drift": series.last_decade_drift,
    }
    details = {"trend": series.trend.value, "monotone": series.monotone}
    passed = True
    if check.trend is not None:
        passed = series.trend.value == check.trend
    if check.decay_below is not None:
        decays = series.monotone and series.final_over_initial < check.decay_below
        passed = passed and decays
    if check.drift_below is not None:
        passed = passed and series.last_decade_drift < check.drift_below
    return CheckOutcome(passed, measured, details, {"t": grid, "ratio": series.ratios})


@register("sign-pattern")
def sign_pattern_check(ctx: RunContext, check) -> CheckOutcome:
    horizon = check.horizon or ctx.horizon
    report = linear_system.theorem43_sign_check(
        ctx.system, check.S, horizon, ctx.settings
    )
    measured = {f"min_g_{n}": report.minima[n] for n in range(4)}
    return CheckOutcome(report.passed, measured, {"regular": report.regular})
