"""Quaternion arithmetic and the 4x4 real symbol representation.

A quaternion ``q = q0 + i q1 + j q2 + k q3`` obeys ``i^2 = j^2 = k^2 = ijk = -1``.
Its symbol is the real matrix

    ( q0   q1   q2  -q3)
    (-q1   q0  -q3  -q2)
    (-q2   q3   q0   q1)
    ( q3   q2  -q1   q0)

which maps sums to sums, products to products and inverses to inverses.
Its determinant is ``|q|^4`` and its trace ``4 re(q)``.
"""

from __future__ import annotations

import logging
import math
from typing import Iterator, Sequence, Tuple, Union

import attr
import numpy as np

from quaternion_riccati.errors import NearZeroDivisor, NotASymbol

logger = logging.getLogger(__name__)

EPS_ZERO = 1e-12
SYMBOL_TOL = 1e-9

Scalar = Union[int, float]


def hamilton(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product of two quaternions stored as length-4 arrays.

    Both arguments may also be stacks of shape ``(n, 4)``.
    """
    p0, p1, p2, p3 = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    q0, q1, q2, q3 = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        [
            p0 * q0 - p1 * q1 - p2 * q2 - p3 * q3,
            p0 * q1 + p1 * q0 + p2 * q3 - p3 * q2,
            p0 * q2 - p1 * q3 + p2 * q0 + p3 * q1,
            p0 * q3 + p1 * q2 - p2 * q1 + p3 * q0,
        ],
        axis=-1,
    )


def conjugate_array(q: np.ndarray) -> np.ndarray:
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def inverse_array(q: np.ndarray) -> np.ndarray:
    """Unchecked inverse ``conj(q) / |q|^2``; used inside right-hand sides."""
    norm2 = np.sum(q * q, axis=-1, keepdims=True)
    return conjugate_array(q) / norm2


def norm_array(q: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(q * q, axis=-1))


@attr.s(frozen=True, slots=True, repr=False)
class Quaternion:
    """Immutable quaternion with double precision components."""

    q0: float = attr.ib(default=0.0, converter=float)
    q1: float = attr.ib(default=0.0, converter=float)
    q2: float = attr.ib(default=0.0, converter=float)
    q3: float = attr.ib(default=0.0, converter=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> Quaternion:
        if len(values) != 4:
            raise ValueError(f"a quaternion needs 4 components, got {len(values)}")
        return cls(*values)

    @classmethod
    def real(cls, value: Scalar) -> Quaternion:
        return cls(value)

    def as_array(self) -> np.ndarray:
        return np.array([self.q0, self.q1, self.q2, self.q3])

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.q0, self.q1, self.q2, self.q3)

    def __iter__(self) -> Iterator[float]:
        return iter(self.as_tuple())

    def __getitem__(self, index: int) -> float:
        return self.as_tuple()[index]

    def __repr__(self) -> str:
        return f"Quaternion({self.q0!r}, {self.q1!r}, {self.q2!r}, {self.q3!r})"

    # arithmetic

    def __add__(self, other: Union[Quaternion, Scalar]) -> Quaternion:
        other = _coerce(other)
        return Quaternion(
            self.q0 + other.q0,
            self.q1 + other.q1,
            self.q2 + other.q2,
            self.q3 + other.q3,
        )

    __radd__ = __add__

    def __sub__(self, other: Union[Quaternion, Scalar]) -> Quaternion:
        return self + (-_coerce(other))

    def __rsub__(self, other: Scalar) -> Quaternion:
        return _coerce(other) - self

    def __neg__(self) -> Quaternion:
        return Quaternion(-self.q0, -self.q1, -self.q2, -self.q3)

    def __mul__(self, other: Union[Quaternion, Scalar]) -> Quaternion:
        if isinstance(other, Quaternion):
            return mul(self, other)
        return Quaternion(
            self.q0 * other, self.q1 * other, self.q2 * other, self.q3 * other
        )

    def __rmul__(self, other: Scalar) -> Quaternion:
        # real scalars commute with every quaternion
        return self * other

    def __truediv__(self, other: Scalar) -> Quaternion:
        if isinstance(other, Quaternion):
            raise TypeError(
                "quaternion division is ambiguous, use p * inverse(q) or inverse(q) * p"
            )
        return self * (1.0 / other)

    # norms and parts

    def norm2(self) -> float:
        return self.q0**2 + self.q1**2 + self.q2**2 + self.q3**2

    def norm(self) -> float:
        return math.sqrt(self.norm2())

    __abs__ = norm

    def conjugate(self) -> Quaternion:
        return Quaternion(self.q0, -self.q1, -self.q2, -self.q3)

    @property
    def re(self) -> float:
        return self.q0

    @property
    def im(self) -> Quaternion:
        return Quaternion(0.0, self.q1, self.q2, self.q3)

    def inverse(self) -> Quaternion:
        return inverse(self)

    def is_real(self, tol: float = 0.0) -> bool:
        return abs(self.q1) <= tol and abs(self.q2) <= tol and abs(self.q3) <= tol

    def isclose(self, other: Union[Quaternion, Scalar], tol: float = 1e-12) -> bool:
        return (self - _coerce(other)).norm() <= tol


ZERO = Quaternion()
ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0)  # noqa: E741
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


def _coerce(value: Union[Quaternion, Scalar, Sequence[float]]) -> Quaternion:
    if isinstance(value, Quaternion):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)):
        return Quaternion(float(value))
    return Quaternion.from_array(value)


def as_quaternion(value: Union[Quaternion, Scalar, Sequence[float]]) -> Quaternion:
    """Accept a quaternion, a real scalar or a ``[q0, q1, q2, q3]`` sequence."""
    return _coerce(value)


def mul(p: Quaternion, q: Quaternion) -> Quaternion:
    """Noncommutative Hamilton product ``p q``."""
    return Quaternion(
        p.q0 * q.q0 - p.q1 * q.q1 - p.q2 * q.q2 - p.q3 * q.q3,
        p.q0 * q.q1 + p.q1 * q.q0 + p.q2 * q.q3 - p.q3 * q.q2,
        p.q0 * q.q2 - p.q1 * q.q3 + p.q2 * q.q0 + p.q3 * q.q1,
        p.q0 * q.q3 + p.q1 * q.q2 - p.q2 * q.q1 + p.q3 * q.q0,
    )


def inverse(q: Quaternion, eps_zero: float = EPS_ZERO) -> Quaternion:
    """``conj(q) / |q|^2``; raises :class:`NearZeroDivisor` when ``|q| <= eps_zero``."""
    norm = q.norm()
    if norm <= eps_zero:
        raise NearZeroDivisor(
            f"cannot invert {q!r}: |q| = {norm:.3e} <= {eps_zero:.1e}"
        )
    return q.conjugate() * (1.0 / (norm * norm))


@attr.s(frozen=True, slots=True, eq=False)
class SymbolMatrix:
    """4x4 real matrix representing a quaternion."""

    m: np.ndarray = attr.ib(converter=lambda value: np.array(value, dtype=float))

    @m.validator
    def _check_shape(self, attribute, value):
        if value.shape != (4, 4):
            raise ValueError(f"a symbol is a 4x4 matrix, got shape {value.shape}")

    def __matmul__(self, other: SymbolMatrix) -> SymbolMatrix:
        return SymbolMatrix(self.m @ other.m)

    def __add__(self, other: SymbolMatrix) -> SymbolMatrix:
        return SymbolMatrix(self.m + other.m)

    def det(self) -> float:
        return float(np.linalg.det(self.m))

    def trace(self) -> float:
        return float(np.trace(self.m))

    def inverse(self) -> SymbolMatrix:
        return SymbolMatrix(np.linalg.inv(self.m))


def symbol_array(q: np.ndarray) -> np.ndarray:
    """Symbols of a quaternion or a stack of quaternions, shape ``(..., 4, 4)``."""
    q0, q1, q2, q3 = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    rows = [
        [q0, q1, q2, -q3],
        [-q1, q0, -q3, -q2],
        [-q2, q3, q0, q1],
        [q3, q2, -q1, q0],
    ]
    return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2)


def symbol(q: Quaternion) -> SymbolMatrix:
    return SymbolMatrix(symbol_array(q.as_array()))


def unsymbol(
    matrix: Union[SymbolMatrix, np.ndarray], tol: float = SYMBOL_TOL
) -> Quaternion:
    """Recover ``q`` from its symbol.

    The first row carries the components; the remaining twelve entries must
    follow the sign pattern within ``tol``.
    """
    m = matrix.m if isinstance(matrix, SymbolMatrix) else np.asarray(matrix, dtype=float)
    if m.shape != (4, 4):
        raise NotASymbol(f"expected a 4x4 matrix, got shape {m.shape}")
    q = Quaternion(m[0, 0], m[0, 1], m[0, 2], -m[0, 3])
    deviation = float(np.max(np.abs(symbol_array(q.as_array()) - m)))
    if deviation > tol:
        raise NotASymbol(
            f"matrix deviates from the symbol pattern by {deviation:.3e} > {tol:.1e}"
        )
    return q


def lemma21_check(q: Quaternion) -> Tuple[float, float]:
    """Determinant and trace of the symbol; expected ``|q|^4`` and ``4 re(q)``."""
    s = symbol(q)
    return s.det(), s.trace()
