from pathlib import Path

from pydantic import PositiveFloat, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from quaternion_riccati.errors import SchemaError


class Settings(BaseSettings):
    """Numerical defaults and output location.

    Every field can be set through the environment with the ``QR_`` prefix,
    e.g. ``QR_OUT_DIR=/tmp/runs`` or ``QR_RTOL=1e-10``.
    """

    model_config = SettingsConfigDict(env_prefix="QR_", extra="ignore")

    out_dir: Path = Path("qr-out")
    log_level: str = "INFO"

    # integrator
    rtol: PositiveFloat = 1e-9
    atol: PositiveFloat = 1e-12
    escape_norm: PositiveFloat = 1e8
    escape_refine_norm: PositiveFloat = 1e6

    # quadrature
    quad_tol: PositiveFloat = 1e-10
    quad_limit: int = 2**14

    # classification
    horizon: PositiveFloat = 50.0
    tail_tol: PositiveFloat = 1e-6
    tail_windows: int = 10
    plateau_tol: PositiveFloat = 1e-3
    nu_zero_tol: PositiveFloat = 1e-8
    mu_blowup: PositiveFloat = 1e6
    escape_margin: PositiveFloat = 1.0
    grid_points: int = 1000

    # linear systems
    alpha_grid_points: int = 2000
    alpha_tol: PositiveFloat = 1e-10
    statement2_divergence: PositiveFloat = 1e3


def get_settings(**overrides) -> Settings:
    """Settings from the environment with explicit overrides applied on top.

    Overrides are validated like environment values; an invalid one raises
    :class:`SchemaError`.
    """
    overrides = {key: value for key, value in overrides.items() if value is not None}
    try:
        return Settings(**overrides)
    except ValidationError as e:
        first = e.errors()[0]
        path = ".".join(str(part) for part in first.get("loc", ()))
        raise SchemaError(first.get("msg", str(e)), path=f"settings.{path}") from e
