import json
import logging
from enum import Enum
from typing import (
    Annotated,
    Any,
    ClassVar,
    Dict,
    List,
    Literal,
    Mapping,
    Optional,
    Tuple,
    Union,
)

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    model_validator,
)

from quaternion_riccati.coeffs import (
    CoeffFn,
    CoeffSet,
    ConstantCoeff,
    QuaternionField,
    TailStatus,
    expand_shorthand,
    schema_error,
)
from quaternion_riccati.errors import SchemaError
from quaternion_riccati.riccati import EquationVerdict, SeedVerdict

logger = logging.getLogger(__name__)

ONE_TUPLE = (1.0, 0.0, 0.0, 0.0)
ZERO_TUPLE = (0.0, 0.0, 0.0, 0.0)


class LinearSystem(BaseModel):
    """``phi' = a11 phi + a12 psi``, ``psi' = a21 phi + a22 psi`` for ``t >= t0``."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    a11: CoeffFn = ConstantCoeff()
    a12: CoeffFn = ConstantCoeff()
    a21: CoeffFn = ConstantCoeff()
    a22: CoeffFn = ConstantCoeff()
    t0: float = 0.0

    @model_validator(mode="before")
    @classmethod
    def validate_inputs(cls, values: Any) -> Any:
        if isinstance(values, Mapping):
            values = dict(values)
            for key in ("a11", "a12", "a21", "a22"):
                if key in values:
                    values[key] = expand_shorthand(values[key])
        return values

    @model_validator(mode="after")
    def _shared_domain(self):
        for name in ("a11", "a12", "a21", "a22"):
            start, end = getattr(self, name).domain()
            if start > self.t0 or end <= self.t0:
                raise ValueError(
                    f"coefficient {name} is defined on [{start}, {end}] "
                    f"which does not start at t0 = {self.t0}"
                )
        return self

    def domain(self) -> Tuple[float, float]:
        ends = [getattr(self, name).domain()[1] for name in ("a11", "a12", "a21", "a22")]
        return (self.t0, min(ends))


def parse_system(config: Any) -> LinearSystem:
    try:
        return LinearSystem.model_validate(config)
    except ValidationError as e:
        raise schema_error(e) from e


class Mode(str, Enum):
    RICCATI = "riccati"
    SYSTEM = "system"


class Tolerances(BaseModel):
    """Scenario level overrides of :class:`quaternion_riccati.config.Settings`."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rtol: Optional[PositiveFloat] = None
    atol: Optional[PositiveFloat] = None
    escape_norm: Optional[PositiveFloat] = None
    escape_refine_norm: Optional[PositiveFloat] = None
    quad_tol: Optional[PositiveFloat] = None
    tail_tol: Optional[PositiveFloat] = None
    tail_windows: Optional[PositiveInt] = None
    plateau_tol: Optional[PositiveFloat] = None
    nu_zero_tol: Optional[PositiveFloat] = None
    mu_blowup: Optional[PositiveFloat] = None
    escape_margin: Optional[PositiveFloat] = None
    grid_points: Optional[PositiveInt] = None
    alpha_grid_points: Optional[PositiveInt] = None
    alpha_tol: Optional[PositiveFloat] = None
    statement2_divergence: Optional[PositiveFloat] = None


class _CheckBase(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    # checks that only make sense for a linear system
    system_only: ClassVar[bool] = False

    name: Optional[str] = None


class SymbolCheck(_CheckBase):
    """Determinant, trace and product rules of the 4x4 symbol on random quaternions."""

    kind: Literal["symbol"] = "symbol"
    samples: PositiveInt = 10_000
    seed: int = 0
    tol: PositiveFloat = 1e-9


class EscapeExpectation(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    lam: QuaternionField
    t: float
    tol: PositiveFloat = 1e-2


class ClosedFormCheck(_CheckBase):
    """``q' + q a q = 0`` with real ``a`` against ``(1 + lam int a)^-1 lam``."""

    kind: Literal["closed-form"] = "closed-form"
    lambdas: Tuple[QuaternionField, ...]
    t_end: float = 10.0
    tol: PositiveFloat = 1e-6
    points: PositiveInt = 201
    escapes: Tuple[EscapeExpectation, ...] = ()


class CompanionModuliCheck(_CheckBase):
    kind: Literal["companion-moduli"] = "companion-moduli"
    seeds: Tuple[QuaternionField, ...] = ()
    t_end: Optional[float] = None
    tol: PositiveFloat = 1e-7
    points: PositiveInt = 50


class CrossModulusCheck(_CheckBase):
    kind: Literal["cross-modulus"] = "cross-modulus"
    pairs: Tuple[Tuple[QuaternionField, QuaternionField], ...]
    t_end: Optional[float] = None
    tol: PositiveFloat = 1e-6
    points: PositiveInt = 50


class MatrixOracleCheck(_CheckBase):
    kind: Literal["matrix-oracle"] = "matrix-oracle"
    seed: QuaternionField = ZERO_TUPLE
    t_end: float = 5.0
    tol: PositiveFloat = 1e-6


class SeedExpectation(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: QuaternionField
    verdict: Optional[SeedVerdict] = None
    t_escape: Optional[float] = None
    tol: PositiveFloat = 1e-3


class ClassificationCheck(_CheckBase):
    """Per-seed evidence and the equation verdict; seeds default to the scenario's."""

    kind: Literal["classification"] = "classification"
    seeds: Tuple[QuaternionField, ...] = ()
    horizon: Optional[float] = None
    expect: Tuple[SeedExpectation, ...] = ()
    verdict: Optional[EquationVerdict] = None
    verdict_not: Optional[EquationVerdict] = None


class NuTailCheck(_CheckBase):
    kind: Literal["nu-tail"] = "nu-tail"
    seed: QuaternionField = ZERO_TUPLE
    t: Optional[float] = None
    horizon: Optional[float] = None
    status: Optional[TailStatus] = None
    value: Optional[QuaternionField] = None
    candidate: Optional[QuaternionField] = None
    vanishes: Optional[bool] = None
    tol: PositiveFloat = 1e-6


class ExtremalTrackCheck(_CheckBase):
    """The extremal path built from ``seed`` follows ``reference`` in relative norm."""

    kind: Literal["extremal-track"] = "extremal-track"
    seed: QuaternionField = ZERO_TUPLE
    reference: CoeffFn
    until: float = 10.0
    horizon: Optional[float] = None
    tol: PositiveFloat = 1e-5
    points: PositiveInt = 101

    @model_validator(mode="before")
    @classmethod
    def validate_inputs(cls, values: Any) -> Any:
        if isinstance(values, Mapping) and "reference" in values:
            values = dict(values, reference=expand_shorthand(values["reference"]))
        return values


class ExactSolutionCheck(_CheckBase):
    """A known solution ``q = reference(t)`` and, optionally, its companions."""

    kind: Literal["exact-solution"] = "exact-solution"
    reference: CoeffFn
    t_end: float = 10.0
    residual_tol: PositiveFloat = 1e-8
    tol: PositiveFloat = 1e-8
    phi: Optional[QuaternionField] = None
    psi: Optional[QuaternionField] = None
    points: PositiveInt = 201

    @model_validator(mode="before")
    @classmethod
    def validate_inputs(cls, values: Any) -> Any:
        if isinstance(values, Mapping) and "reference" in values:
            values = dict(values, reference=expand_shorthand(values["reference"]))
        return values


class WitnessCheck(_CheckBase):
    kind: Literal["regular-witness"] = "regular-witness"
    seed: QuaternionField = ZERO_TUPLE
    horizon: Optional[float] = None


class SolutionSpec(BaseModel):
    """A system solution: the principal one, or the pair through ``(phi1, psi1)``."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    principal: bool = False
    phi1: QuaternionField = ONE_TUPLE
    psi1: QuaternionField = ZERO_TUPLE


class LiftProjectCheck(_CheckBase):
    system_only: ClassVar[bool] = True

    kind: Literal["lift-project"] = "lift-project"
    seed: QuaternionField = ZERO_TUPLE
    phi1: QuaternionField = ONE_TUPLE
    t_end: float = 5.0
    tol: PositiveFloat = 1e-8
    modulus_tol: PositiveFloat = 1e-6
    residual_tol: PositiveFloat = 1e-7
    points: PositiveInt = 51


class MultiplierCheck(_CheckBase):
    """Residual of ``(phi lam, psi lam)`` or ``(lam phi, lam psi)``."""

    system_only: ClassVar[bool] = True

    kind: Literal["multiplier"] = "multiplier"
    solution: SolutionSpec = SolutionSpec()
    lam: QuaternionField
    side: Literal["right", "left"] = "right"
    expect: Literal["holds", "fails"] = "holds"
    t_end: float = 5.0
    residual_tol: PositiveFloat = 1e-7
    fail_threshold: PositiveFloat = 1e-1
    points: PositiveInt = 51


class Thm42Check(_CheckBase):
    system_only: ClassVar[bool] = True

    kind: Literal["thm42"] = "thm42"
    S: Union[Tuple[int, ...], Literal["try-all"]]
    horizon: Optional[float] = None
    p_table: Literal["verbatim", "symmetrized"] = "verbatim"
    conclusion: Optional[Literal["normal-or-extremal", "hypotheses-fail"]] = None
    failed: Optional[Tuple[Literal["alpha", "beta"], ...]] = None


class Statement2Check(_CheckBase):
    system_only: ClassVar[bool] = True

    kind: Literal["statement2"] = "statement2"
    solution: SolutionSpec = SolutionSpec()
    T: Optional[float] = None
    horizon: Optional[float] = None
    status: Optional[TailStatus] = None


class RatiosCheck(_CheckBase):
    system_only: ClassVar[bool] = True

    kind: Literal["ratios"] = "ratios"
    numerator: SolutionSpec
    denominator: SolutionSpec
    horizon: Optional[float] = None
    trend: Optional[Literal["monotone-to-zero", "bounded-both-ways", "growing"]] = None
    decay_below: Optional[PositiveFloat] = None
    drift_below: Optional[PositiveFloat] = None
    points: PositiveInt = 401


class SignPatternCheck(_CheckBase):
    system_only: ClassVar[bool] = True

    kind: Literal["sign-pattern"] = "sign-pattern"
    S: Tuple[int, ...]
    horizon: Optional[float] = None


Check = Annotated[
    Union[
        SymbolCheck,
        ClosedFormCheck,
        CompanionModuliCheck,
        CrossModulusCheck,
        MatrixOracleCheck,
        ClassificationCheck,
        NuTailCheck,
        ExtremalTrackCheck,
        ExactSolutionCheck,
        WitnessCheck,
        LiftProjectCheck,
        MultiplierCheck,
        Thm42Check,
        Statement2Check,
        RatiosCheck,
        SignPatternCheck,
    ],
    Field(discriminator="kind"),
]


class Scenario(BaseModel):
    """A reproducible run: an equation or system, seeds, and the checks to perform."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    reference: str = ""
    description: str = ""
    mode: Mode = Mode.RICCATI
    equation: Optional[CoeffSet] = None
    system: Optional[LinearSystem] = None
    seeds: Tuple[QuaternionField, ...] = ()
    t1: Optional[float] = None
    horizon: Optional[PositiveFloat] = None
    tolerances: Tolerances = Tolerances()
    checks: Tuple[Check, ...] = ()

    @model_validator(mode="before")
    @classmethod
    def validate_inputs(cls, values: Any) -> Any:
        if isinstance(values, Mapping) and "mode" not in values and "system" in values:
            values = dict(values, mode=Mode.SYSTEM.value)
        return values

    @model_validator(mode="after")
    def _check_mode(self):
        if self.mode is Mode.RICCATI:
            if self.equation is None:
                raise ValueError("a riccati scenario needs an 'equation'")
            for check in self.checks:
                if check.system_only:
                    raise ValueError(f"check '{check.kind}' requires mode 'system'")
        elif self.system is None:
            raise ValueError("a system scenario needs a 'system'")
        if self.t1 is not None and self.t1 < self.t0:
            raise ValueError(f"t1 = {self.t1} is before t0 = {self.t0}")
        return self

    @property
    def t0(self) -> float:
        source = self.equation if self.mode is Mode.RICCATI else self.system
        return source.t0

    @property
    def start(self) -> float:
        return self.t0 if self.t1 is None else self.t1

    def check_names(self) -> List[str]:
        """Unique report names, ``name`` if given, else ``<position>-<kind>``."""
        names = []
        for position, check in enumerate(self.checks, start=1):
            name = check.name or f"{position:02d}-{check.kind}"
            if name in names:
                raise SchemaError(f"duplicate check name '{name}'", path="checks")
            names.append(name)
        return names


def parse_scenario(config: Union[str, bytes, Mapping[str, Any]]) -> Scenario:
    """Build a :class:`Scenario` from a JSON text or an already decoded tree."""
    if isinstance(config, (str, bytes)):
        try:
            config = json.loads(config)
        except json.JSONDecodeError as e:
            raise SchemaError(f"invalid JSON: {e}") from e
    try:
        scenario = Scenario.model_validate(config)
    except ValidationError as e:
        raise schema_error(e) from e
    scenario.check_names()
    return scenario


class CheckResult(BaseModel):
    name: str
    kind: str
    passed: bool
    measured: Dict[str, float] = {}
    details: Dict[str, Any] = {}
    error: Optional[str] = None


class SeedSummary(BaseModel):
    seed: QuaternionField
    status: str
    t_end: Optional[float] = None
    t_escape: Optional[float] = None
    csv: Optional[str] = None
    error: Optional[str] = None


class RunReport(BaseModel):
    """What ``run`` writes to ``report.json``."""

    scenario: str
    reference: str = ""
    mode: Mode
    passed: bool
    settings: Dict[str, Any] = {}
    seeds: List[SeedSummary] = []
    checks: List[CheckResult] = []
    files: List[str] = []
