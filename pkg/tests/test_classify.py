import math

import pytest

from quaternion_riccati.coeffs import TailStatus
from quaternion_riccati.ode_engine import SolveStatus
from quaternion_riccati.quat_core import Quaternion
from quaternion_riccati.riccati import (
    EquationVerdict,
    NuTail,
    SeedReport,
    SeedVerdict,
    classify,
    classify_seed,
    equation_verdict,
)


def seed_report(verdict, nu_status=None, zeros=()):
    nu = None
    if nu_status is not None:
        nu = NuTail(status=nu_status, value=Quaternion(1.0), error_bar=None, zeros=zeros)
    escaped = verdict is SeedVerdict.ESCAPED
    status = SolveStatus.ESCAPED if escaped else SolveStatus.REACHED_END
    return SeedReport(seed=Quaternion(), verdict=verdict, status=status, t_end=1.0, nu=nu)


@pytest.mark.parametrize(
    "reports, verdict",
    [
        (
            [seed_report(SeedVerdict.NORMAL), seed_report(SeedVerdict.EXTREMAL)],
            EquationVerdict.EXTREMAL,
        ),
        (
            [seed_report(SeedVerdict.NORMAL, TailStatus.CONVERGED)],
            EquationVerdict.EXTREMAL,
        ),
        (
            [
                seed_report(SeedVerdict.NORMAL, TailStatus.CONVERGED, zeros=(2.0,)),
                seed_report(SeedVerdict.ESCAPED),
            ],
            EquationVerdict.NORMAL,
        ),
        (
            [
                seed_report(SeedVerdict.NORMAL, TailStatus.DIVERGES),
                seed_report(SeedVerdict.INDETERMINATE, TailStatus.OSCILLATORY),
            ],
            EquationVerdict.SUB_EXTREMAL,
        ),
        (
            [seed_report(SeedVerdict.NORMAL, TailStatus.DIVERGES)],
            EquationVerdict.INDETERMINATE,
        ),
        (
            [seed_report(SeedVerdict.ESCAPED)],
            EquationVerdict.INDETERMINATE,
        ),
        ([], EquationVerdict.INDETERMINATE),
    ],
)
def test_equation_verdict(reports, verdict):
    assert equation_verdict(reports) is verdict


@pytest.mark.slow
def test_classify_exponential(exp_equation, settings):
    report = classify(exp_equation, 0.0, [0.0, 1.0, -1.0, -2.0], 50.0, settings)
    assert report.verdict is EquationVerdict.EXTREMAL
    assert report.horizon == 50.0
    assert report.for_seed(0.0).verdict is SeedVerdict.NORMAL
    assert report.for_seed(1.0).verdict is SeedVerdict.NORMAL
    # q = -e^t: mu grows long before q leaves the escape ball
    extremal = report.for_seed(-1.0)
    assert extremal.verdict is SeedVerdict.EXTREMAL
    assert extremal.mu_blowup_time is not None
    escaped = report.for_seed(-2.0)
    assert escaped.verdict is SeedVerdict.ESCAPED
    assert escaped.t_escape == pytest.approx(math.log(2), abs=1e-3)
    assert report.sup_mu > settings.mu_blowup
    with pytest.raises(KeyError):
        report.for_seed([0, 1, 0, 0])


def test_classify_zero_seed_tail(exp_equation, settings):
    report = classify_seed(exp_equation, 0.0, 0.0, 50.0, settings)
    assert report.nu is not None
    assert report.nu.converged
    assert not report.nu.vanishes
    assert report.sup_mu == pytest.approx(1.0, rel=1e-6)


@pytest.mark.slow
def test_classify_constant(const_equation, settings):
    report = classify(const_equation, 0.0, [1.0, -1.0], 200.0, settings)
    assert report.for_seed(1.0).verdict is SeedVerdict.NORMAL
    assert report.for_seed(-1.0).verdict is SeedVerdict.ESCAPED
    assert report.for_seed(-1.0).status is SolveStatus.ESCAPED
    assert report.verdict is not EquationVerdict.NORMAL


def test_classify_rejects_short_horizon(exp_equation, settings):
    with pytest.raises(ValueError):
        classify(exp_equation, 1.0, [0.0], 0.5, settings)
