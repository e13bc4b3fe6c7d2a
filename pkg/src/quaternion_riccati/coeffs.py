"""Time dependent quaternion valued coefficient functions.

Each coefficient is a pydantic model tagged by ``kind``. The four quaternion
components are independent real functions of time. Evaluation is vectorized
(``values(t)`` returns an ``(n, 4)`` array); ``evaluate`` is the checked,
scalar entry point.
"""

from __future__ import annotations

import json
import logging
import math
from enum import Enum
from functools import lru_cache
from typing import (
    Annotated,
    Any,
    Dict,
    Literal,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import attr
import numpy as np
from numpy.polynomial import polynomial as npoly
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Discriminator,
    Tag,
    TypeAdapter,
    ValidationError,
    field_validator,
    model_validator,
)
from scipy import integrate as scipy_integrate
from scipy import interpolate, special

from quaternion_riccati.errors import OutOfDomain, SchemaError, ToleranceNotMet
from quaternion_riccati.quat_core import Quaternion

logger = logging.getLogger(__name__)

QUAD_TOL = 1e-10
QUAD_LIMIT = 2**14

QuaternionTuple = Tuple[float, float, float, float]


def _pad_components(value: Any) -> Any:
    """Allow fewer than four component lists; missing components are zero."""
    if isinstance(value, (list, tuple)) and len(value) < 4:
        if all(isinstance(item, (list, tuple)) for item in value):
            return list(value) + [[] for _ in range(4 - len(value))]
    return value


def _broadcast_four(value: Any) -> Any:
    """A scalar parameter applies to all four components."""
    if isinstance(value, (int, float)):
        return [value] * 4
    return value


def _quaternion_tuple(value: Any) -> Any:
    if isinstance(value, (int, float)):
        return [value, 0.0, 0.0, 0.0]
    if isinstance(value, Quaternion):
        return list(value.as_tuple())
    return value


ComponentPolys = Annotated[
    Tuple[Tuple[float, ...], Tuple[float, ...], Tuple[float, ...], Tuple[float, ...]],
    BeforeValidator(_pad_components),
]
FourReals = Annotated[QuaternionTuple, BeforeValidator(_broadcast_four)]
QuaternionField = Annotated[QuaternionTuple, BeforeValidator(_quaternion_tuple)]


class TailStatus(str, Enum):
    """Diagnosis of a truncated improper integral."""

    CONVERGED = "converged"
    DIVERGES = "diverges-to-infinity"
    OSCILLATORY = "oscillatory-unknown"


@attr.s(frozen=True, slots=True)
class TailEstimate:
    """Bound of ``int_T^inf |f|``; ``bound is None`` when no bound is known."""

    bound: Optional[float] = attr.ib()
    absolutely_convergent: bool = attr.ib()
    note: str = attr.ib(default="")


@lru_cache(maxsize=256)
def _poly_matrix(coefficients: Tuple[Tuple[float, ...], ...]) -> np.ndarray:
    degree = max((len(c) for c in coefficients), default=0)
    matrix = np.zeros((max(degree, 1), 4))
    for n, component in enumerate(coefficients):
        matrix[: len(component), n] = component
    return matrix


def _polyval(coefficients: Tuple[Tuple[float, ...], ...], t: np.ndarray) -> np.ndarray:
    # shape (n, 4)
    return npoly.polyval(t, _poly_matrix(coefficients)).T


@lru_cache(maxsize=64)
def _table_interpolant(
    grid: Tuple[float, ...], samples: Tuple[QuaternionTuple, ...], order: str
):
    x = np.asarray(grid)
    y = np.asarray(samples)
    if order == "cubic":
        return interpolate.CubicSpline(x, y, axis=0, bc_type="natural")
    return lambda t: np.stack([np.interp(t, x, y[:, n]) for n in range(4)], axis=-1)


class _CoeffBase(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    support: Optional[Tuple[float, float]] = None

    @field_validator("support")
    @classmethod
    def _ordered_support(cls, value):
        if value is not None and not value[0] < value[1]:
            raise ValueError("support must be an increasing pair [start, end]")
        return value

    # subclasses implement the raw evaluation
    def _raw_values(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def values(self, t: Union[float, np.ndarray]) -> np.ndarray:
        """Unchecked evaluation on an array of times, shape ``(n, 4)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = self._raw_values(t)
        if self.support is not None:
            inside = (t >= self.support[0]) & (t <= self.support[1])
            out = np.where(inside[:, None], out, 0.0)
        return out

    def at(self, t: float) -> np.ndarray:
        """Unchecked evaluation at a single time, shape ``(4,)``."""
        return self.values(t)[0]

    def domain(self) -> Tuple[float, float]:
        return (-math.inf, math.inf)

    def component_is_zero(self, n: int) -> bool:
        return False

    def is_zero(self) -> bool:
        return all(self.component_is_zero(n) for n in range(4))

    def breakpoints(self) -> Tuple[float, ...]:
        """Times where the function may lose smoothness."""
        return tuple(self.support) if self.support is not None else ()

    def _raw_tail_bound(self, T: float) -> TailEstimate:
        return TailEstimate(None, False, f"{self.kind} is not absolutely integrable")

    def tail_bound(self, T: float) -> TailEstimate:
        if self.is_zero():
            return TailEstimate(0.0, True, "identically zero")
        if self.support is not None and self.support[1] <= T:
            return TailEstimate(0.0, True, "support ends before the horizon")
        return self._raw_tail_bound(T)


class ConstantCoeff(_CoeffBase):
    kind: Literal["constant"] = "constant"
    value: QuaternionField = (0.0, 0.0, 0.0, 0.0)

    def _raw_values(self, t):
        return np.broadcast_to(np.asarray(self.value), (t.size, 4)).copy()

    def component_is_zero(self, n):
        return self.value[n] == 0.0


class PolynomialCoeff(_CoeffBase):
    """Componentwise polynomials, coefficients in ascending powers."""

    kind: Literal["polynomial"] = "polynomial"
    coefficients: ComponentPolys

    def _raw_values(self, t):
        return _polyval(self.coefficients, t)

    def component_is_zero(self, n):
        return not any(self.coefficients[n])


class ExponentialCoeff(_CoeffBase):
    """``p_n(t) * exp(rate_n * t)`` in every component."""

    kind: Literal["exponential"] = "exponential"
    coefficients: ComponentPolys
    rates: FourReals = (0.0, 0.0, 0.0, 0.0)

    def _raw_values(self, t):
        return _polyval(self.coefficients, t) * np.exp(np.outer(t, self.rates))

    def component_is_zero(self, n):
        return not any(self.coefficients[n])

    def _raw_tail_bound(self, T):
        if T < 0:
            return TailEstimate(None, False, "tail bound needs T >= 0")
        bound = 0.0
        for n in range(4):
            if self.component_is_zero(n):
                continue
            rate = self.rates[n]
            if rate >= 0:
                return TailEstimate(
                    None, False, f"component {n} does not decay (rate {rate})"
                )
            decay = -rate
            for power, c in enumerate(self.coefficients[n]):
                if c == 0.0:
                    continue
                # int_T^inf t^k e^{-decay t} dt = Gamma(k + 1, decay T) / decay^(k + 1)
                upper_gamma = special.gammaincc(power + 1, decay * T) * special.gamma(
                    power + 1
                )
                bound += abs(c) * upper_gamma / decay ** (power + 1)
        return TailEstimate(float(bound), True, "analytic exponential tail")


class TrigonometricCoeff(_CoeffBase):
    """``p_n(t) * cos(omega_n t + phase_n)`` (or ``sin``) in every component."""

    kind: Literal["trigonometric"] = "trigonometric"
    coefficients: ComponentPolys
    frequencies: FourReals = (1.0, 1.0, 1.0, 1.0)
    phases: FourReals = (0.0, 0.0, 0.0, 0.0)
    function: Literal["cos", "sin"] = "cos"

    def _raw_values(self, t):
        argument = np.outer(t, self.frequencies) + np.asarray(self.phases)
        wave = np.cos(argument) if self.function == "cos" else np.sin(argument)
        return _polyval(self.coefficients, t) * wave

    def component_is_zero(self, n):
        return not any(self.coefficients[n])


class TableCoeff(_CoeffBase):
    """Sampled quaternion values interpolated on a strictly increasing grid."""

    kind: Literal["table"] = "table"
    grid: Tuple[float, ...]
    samples: Tuple[QuaternionField, ...]
    order: Literal["linear", "cubic"] = "cubic"

    @model_validator(mode="after")
    def _check_grid(self):
        if len(self.grid) < 2:
            raise ValueError("a table needs at least two grid points")
        if len(self.grid) != len(self.samples):
            raise ValueError(
                f"grid has {len(self.grid)} points but {len(self.samples)} samples"
            )
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("table grid must be strictly increasing")
        return self

    def _raw_values(self, t):
        return np.asarray(_table_interpolant(self.grid, self.samples, self.order)(t))

    def domain(self):
        return (self.grid[0], self.grid[-1])

    def component_is_zero(self, n):
        return all(sample[n] == 0.0 for sample in self.samples)

    def breakpoints(self):
        points = super().breakpoints()
        if self.order == "linear" and len(self.grid) <= 64:
            points = points + self.grid
        return points

    def _raw_tail_bound(self, T):
        return TailEstimate(None, False, "a table is not defined past its grid")


class CompositeCoeff(_CoeffBase):
    """Component ``n`` is taken from component ``n`` of ``components[n]``."""

    kind: Literal["composite"] = "composite"
    components: Tuple["CoeffFn", "CoeffFn", "CoeffFn", "CoeffFn"]

    def _raw_values(self, t):
        return np.stack(
            [part.values(t)[:, n] for n, part in enumerate(self.components)], axis=-1
        )

    def domain(self):
        starts, ends = zip(*(part.domain() for part in self.components))
        return (max(starts), min(ends))

    def component_is_zero(self, n):
        return self.components[n].component_is_zero(n)

    def breakpoints(self):
        points = super().breakpoints()
        for part in self.components:
            points = points + part.breakpoints()
        return points

    def _raw_tail_bound(self, T):
        bound = 0.0
        for n, part in enumerate(self.components):
            if part.component_is_zero(n):
                continue
            estimate = part.tail_bound(T)
            if estimate.bound is None:
                return estimate
            bound += estimate.bound
        return TailEstimate(bound, True, "sum of component bounds")


class ScaledCoeff(_CoeffBase):
    """``factor * base(t)``."""

    kind: Literal["scaled"] = "scaled"
    factor: float
    base: "CoeffFn"

    def _raw_values(self, t):
        return self.factor * self.base.values(t)

    def domain(self):
        return self.base.domain()

    def component_is_zero(self, n):
        return self.factor == 0.0 or self.base.component_is_zero(n)

    def breakpoints(self):
        return super().breakpoints() + self.base.breakpoints()

    def _raw_tail_bound(self, T):
        estimate = self.base.tail_bound(T)
        if estimate.bound is None:
            return estimate
        return TailEstimate(abs(self.factor) * estimate.bound, True, estimate.note)


def _coeff_kind(value: Any) -> Optional[str]:
    if isinstance(value, Mapping):
        return value.get("kind")
    return getattr(value, "kind", None)


CoeffFn = Annotated[
    Union[
        Annotated[ConstantCoeff, Tag("constant")],
        Annotated[PolynomialCoeff, Tag("polynomial")],
        Annotated[ExponentialCoeff, Tag("exponential")],
        Annotated[TrigonometricCoeff, Tag("trigonometric")],
        Annotated[TableCoeff, Tag("table")],
        Annotated[CompositeCoeff, Tag("composite")],
        Annotated[ScaledCoeff, Tag("scaled")],
    ],
    Discriminator(_coeff_kind),
]

CompositeCoeff.model_rebuild()
ScaledCoeff.model_rebuild()

_SHORTHAND = {
    "const": "constant",
    "poly": "polynomial",
    "exp": "exponential",
    "trig": "trigonometric",
    "table": "table",
    "composite": "composite",
    "scaled": "scaled",
}


def expand_shorthand(value: Any) -> Any:
    """Normalize compact coefficient notation into the tagged form.

    ``{"const": [0, 1, 0, 0]}``, ``{"poly": [[0, 1]]}``, ``{"exp": {...}}``,
    bare reals and bare ``[q0, q1, q2, q3]`` lists are accepted.
    """
    if isinstance(value, _CoeffBase):
        return value
    if isinstance(value, (int, float)):
        return {"kind": "constant", "value": [value, 0.0, 0.0, 0.0]}
    if isinstance(value, (list, tuple)) and len(value) == 4:
        if all(isinstance(item, (int, float)) for item in value):
            return {"kind": "constant", "value": list(value)}
    if not isinstance(value, Mapping):
        return value
    value = dict(value)
    if "kind" not in value:
        tags = [key for key in value if key in _SHORTHAND]
        if len(tags) == 1:
            tag = tags[0]
            payload = value.pop(tag)
            kind = _SHORTHAND[tag]
            if kind == "constant":
                value.update(kind=kind, value=payload)
            elif kind == "polynomial":
                value.update(kind=kind, coefficients=payload)
            elif kind == "composite":
                value.update(kind=kind, components=payload)
            elif isinstance(payload, Mapping):
                value.update(kind=kind, **payload)
            else:
                raise ValueError(f"'{tag}' expects an object of parameters")
        elif len(tags) > 1:
            raise ValueError(f"ambiguous coefficient tags {tags}")
    if value.get("kind") == "composite" and "components" in value:
        value["components"] = [expand_shorthand(item) for item in value["components"]]
    if value.get("kind") == "scaled" and "base" in value:
        value["base"] = expand_shorthand(value["base"])
    return value


_COEFF_ADAPTER = TypeAdapter(CoeffFn)


def zero() -> ConstantCoeff:
    return ConstantCoeff(value=(0.0, 0.0, 0.0, 0.0))


def constant(value: Union[Quaternion, float, Sequence[float]]) -> ConstantCoeff:
    return ConstantCoeff(value=_quaternion_tuple(value))


def scaled(factor: float, base: _CoeffBase) -> _CoeffBase:
    if isinstance(base, ConstantCoeff):
        return constant([factor * x for x in base.value])
    return ScaledCoeff(factor=factor, base=base)


class CoeffSet(BaseModel):
    """The quadruple ``(a, b, c, d)`` of ``q' + q a q + b q + q c + d = 0`` and ``t0``."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    a: CoeffFn = ConstantCoeff()
    b: CoeffFn = ConstantCoeff()
    c: CoeffFn = ConstantCoeff()
    d: CoeffFn = ConstantCoeff()
    t0: float = 0.0

    @model_validator(mode="before")
    @classmethod
    def validate_inputs(cls, values: Any) -> Any:
        if isinstance(values, Mapping):
            values = dict(values)
            for key in ("a", "b", "c", "d"):
                if key in values:
                    values[key] = expand_shorthand(values[key])
        return values

    @model_validator(mode="after")
    def _shared_domain(self):
        for name in ("a", "b", "c", "d"):
            start, end = getattr(self, name).domain()
            if start > self.t0 or end <= self.t0:
                raise ValueError(
                    f"coefficient {name} is defined on [{start}, {end}] "
                    f"which does not start at t0 = {self.t0}"
                )
        return self

    def domain(self) -> Tuple[float, float]:
        ends = [getattr(self, name).domain()[1] for name in ("a", "b", "c", "d")]
        return (self.t0, min(ends))

    def evaluate(self, name: str, t: float) -> Quaternion:
        """Checked evaluation of coefficient ``name``, rejecting ``t < t0``."""
        return evaluate(getattr(self, name), t, self.t0)


def parse_coeff(config: Any) -> _CoeffBase:
    """Validate a single coefficient description."""
    try:
        return _COEFF_ADAPTER.validate_python(expand_shorthand(config))
    except ValidationError as e:
        raise schema_error(e) from e
    except ValueError as e:
        raise SchemaError(str(e)) from e


def parse(config: Union[str, bytes, Mapping[str, Any]]) -> CoeffSet:
    """Build a :class:`CoeffSet` from a JSON text or an already decoded tree."""
    if isinstance(config, (str, bytes)):
        try:
            config = json.loads(config)
        except json.JSONDecodeError as e:
            raise SchemaError(f"invalid JSON: {e}") from e
    try:
        return CoeffSet.model_validate(config)
    except ValidationError as e:
        raise schema_error(e) from e


def serialize(coeff_set: CoeffSet) -> Dict[str, Any]:
    return coeff_set.model_dump(mode="json")


def schema_error(error: ValidationError) -> SchemaError:
    """Turn the first pydantic error into a :class:`SchemaError` with a dotted path."""
    first = error.errors()[0]
    path = ".".join(str(part) for part in first.get("loc", ()))
    return SchemaError(first.get("msg", str(error)), path=path)


def evaluate(f: _CoeffBase, t: float, t0: float = -math.inf) -> Quaternion:
    """Checked evaluation of ``f`` at ``t``."""
    start, end = f.domain()
    start = max(start, t0)
    if not start <= t <= end:
        raise OutOfDomain(
            f"t = {t} is outside of the validity interval [{start}, {end}]"
        )
    return Quaternion.from_array(f.at(t))


def integrate_component(
    f: _CoeffBase,
    n: int,
    t1: float,
    t2: float,
    tol: float = QUAD_TOL,
    limit: int = QUAD_LIMIT,
) -> Tuple[float, float]:
    """Adaptive Gauss-Kronrod quadrature of component ``n``; (value, error estimate)."""
    if f.component_is_zero(n) or t1 == t2:
        return 0.0, 0.0
    lo, hi = min(t1, t2), max(t1, t2)
    points = sorted({p for p in f.breakpoints() if lo < p < hi}) or None
    result = scipy_integrate.quad(
        lambda t: f.at(t)[n],
        lo,
        hi,
        epsabs=tol,
        epsrel=0.0,
        limit=limit,
        points=points,
        full_output=1,
    )
    value, error = result[0], result[1]
    if error > tol:
        raise ToleranceNotMet(
            f"component {n} on [{lo}, {hi}]: error estimate {error:.3e} > {tol:.1e}",
            error_estimate=error,
        )
    sign = 1.0 if t2 >= t1 else -1.0
    return sign * value, error


def integrate(
    f: _CoeffBase,
    t1: float,
    t2: float,
    tol: float = QUAD_TOL,
    limit: int = QUAD_LIMIT,
) -> Quaternion:
    """``int_{t1}^{t2} f`` componentwise, absolute error at most ``tol`` per component."""
    start, end = f.domain()
    if not (start <= min(t1, t2) and max(t1, t2) <= end):
        raise OutOfDomain(
            f"[{t1}, {t2}] is outside of the validity interval [{start}, {end}]"
        )
    return Quaternion.from_array(
        [integrate_component(f, n, t1, t2, tol, limit)[0] for n in range(4)]
    )


def integrate_to_infinity(
    f: _CoeffBase,
    t1: float,
    horizon: float,
    tol: float = QUAD_TOL,
) -> Tuple[Quaternion, TailEstimate]:
    """Truncate ``int_{t1}^inf f`` at ``horizon`` and report the tail estimate."""
    return integrate(f, t1, horizon, tol), f.tail_bound(horizon)


def diagnose_tail(
    partials: Union[Sequence[float], np.ndarray],
    tol: float,
    divergence: float,
) -> TailStatus:
    """Classify partial integrals over increasing windows.

    ``partials`` holds reals or quaternion rows (shape ``(K, 4)``).
    Converged: the last increment is below ``tol`` and the increments are
    not growing. Diverging: magnitudes grow monotonically, either past
    ``divergence`` or with late windows adding at least half as much as the
    first one.
    """
    values = np.asarray(partials, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if len(values) < 2:
        return TailStatus.OSCILLATORY
    increments = np.linalg.norm(np.diff(values, axis=0), axis=1)
    magnitudes = np.linalg.norm(values, axis=1)
    recent = increments[-3:]
    if recent[-1] < tol and np.all(np.diff(recent) <= tol):
        return TailStatus.CONVERGED
    if np.all(np.diff(magnitudes) > 0) and (
        magnitudes[-1] > divergence or increments[-1] >= 0.5 * increments[0]
    ):
        return TailStatus.DIVERGES
    return TailStatus.OSCILLATORY
