import json
from pathlib import Path

import pytest

from quaternion_riccati import coeffs
from quaternion_riccati.config import get_settings
from quaternion_riccati.models import parse_system
from quaternion_riccati.riccati import RiccatiEq, solve_with_companions


def load_control_json(file_name: str):
    control_path = Path(__file__).parent / "testdata" / file_name
    with open(control_path, "r") as f:
        control = json.load(f)
    return control


@pytest.fixture(scope="session")
def settings():
    return get_settings()


@pytest.fixture(scope="session")
def exp_equation():
    """``q' + q e^{-t} q = 0``."""
    return RiccatiEq(
        coeffs.parse({"a": {"exp": {"coefficients": [[1.0]], "rates": [-1, 0, 0, 0]}}})
    )


@pytest.fixture(scope="session")
def const_equation():
    """``q' + q q = 0``."""
    return RiccatiEq(coeffs.parse({"a": 1}))


@pytest.fixture(scope="session")
def exp_zero_solution(exp_equation, settings):
    return solve_with_companions(exp_equation, 0.0, [0, 0, 0, 0], 50.0, settings)


@pytest.fixture(scope="session")
def extremal_system():
    """``phi' = e^{-2t} psi``, ``psi' = 0``."""
    return parse_system({"a12": {"exp": {"coefficients": [[1]], "rates": [-2, 0, 0, 0]}}})


@pytest.fixture(scope="session")
def rotation_system():
    """``phi' = i phi``, ``psi' = k psi``."""
    return parse_system({"a11": [0, 1, 0, 0], "a22": [0, 0, 0, 1]})


@pytest.fixture(scope="session")
def control_coeffs():
    return load_control_json("coeffs_exp.json")


@pytest.fixture(scope="session")
def control_minimal():
    return load_control_json("scenario_minimal.json")


@pytest.fixture(scope="session")
def control_failing():
    return load_control_json("scenario_failing.json")


@pytest.fixture(scope="session")
def control_bad_mode():
    return load_control_json("scenario_bad_mode.json")
