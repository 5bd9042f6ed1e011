"""Geometry and tensor algebra for cloaking transformations of the unit disk.

Conventions used throughout the package:

* The reference annulus is ``{eps <= |x| <= 1}``; cloaking transformations fix
  the outer circle and map the inner circle ``C_eps`` onto ``C_{1/2}``.
* A transformation ``Phi`` pushes the identity conductivity forward to
  ``D Phi D Phi^T / |det D Phi|``, a symmetric matrix with unit determinant in
  two dimensions.  The pointwise anisotropy is the eigenvalue gap of that
  matrix, and both the gap and the energy densities depend on it only through
  its trace.
* ``J`` denotes the counterclockwise quarter-turn rotation, ``e_r`` and
  ``e_theta`` the radial and angular unit vectors at a point.

All functions accept plain sequences or numpy arrays where a vector is
expected and are safe to call in parallel; nothing in the module mutates
shared state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateAngleError,
    DomainError,
    NonPositiveSlopeError,
    OrientationError,
    SingularMatrixError,
)

#: Determinant threshold below which a Jacobian is treated as singular.
SINGULAR_DET_TOL = 1e-14

#: Width of the clamp window for trace**2 - 4 rounding slightly negative.
TRACE_CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class AnnulusSpec:
    """Geometry of the cloaking problem.

    Parameters
    ----------
    epsilon : float
        Inner radius of the reference annulus, ``0 < epsilon <= 1/2``.
    target_inner : float
        Radius the inner circle is mapped to.  Fixed at ``1/2``.
    outer : float
        Outer radius, fixed at ``1``.
    """

    epsilon: float
    target_inner: float = 0.5
    outer: float = 1.0

    def __post_init__(self):
        eps = self.epsilon
        if not (isinstance(eps, (int, float)) and math.isfinite(eps)):
            raise ValueError(f"epsilon must be a finite number, got {eps!r}")
        if not 0.0 < eps <= 0.5:
            raise ValueError(f"epsilon must lie in (0, 1/2], got {eps}")
        if self.target_inner != 0.5:
            raise ValueError("target_inner is fixed at 1/2")
        if self.outer != 1.0:
            raise ValueError("outer is fixed at 1")

    @property
    def is_halfway(self) -> bool:
        """True when epsilon is exactly 1/2, where f(r) = log r is optimal for every p."""
        return self.epsilon == 0.5


@dataclass(frozen=True)
class PNorm:
    """Exponent of an anisotropy energy: a finite ``p >= 1`` or infinity."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if math.isnan(v) or v < 1.0:
            raise ValueError(f"energy exponent must satisfy p >= 1, got {self.value!r}")
        object.__setattr__(self, "value", v)

    @classmethod
    def finite(cls, p: float) -> "PNorm":
        if math.isinf(p):
            raise ValueError("use PNorm.infinity() for the sup norm")
        return cls(float(p))

    @classmethod
    def infinity(cls) -> "PNorm":
        return cls(math.inf)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    def __str__(self) -> str:
        return "inf" if math.isinf(self.value) else repr(self.value)


@dataclass(frozen=True)
class PushForwardTensor:
    """Symmetric unit-determinant tensor ``[[a, b], [b, c]]``.

    Instances normally come from :func:`push_forward_tensor`; the constructor
    validates positivity of the diagonal and the unit determinant so that a
    hand-built tensor obeys the same contract.
    """

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not (self.a > 0.0 and self.c > 0.0):
            raise ValueError("diagonal entries of a push-forward tensor must be positive")
        det = self.a * self.c - self.b * self.b
        if abs(det - 1.0) > 1e-12 * max(1.0, abs(self.a), abs(self.c)):
            raise ValueError(f"push-forward tensor must have unit determinant, got {det!r}")

    @property
    def trace(self) -> float:
        return self.a + self.c

    @property
    def eigenvalues(self) -> tuple[float, float]:
        """Eigenvalue pair ``(lam1, lam2)`` with ``lam1 <= 1 <= lam2`` and product 1."""
        t = self.trace
        gap = anisotropy_measure(self)
        return ((t - gap) / 2.0, (t + gap) / 2.0)

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b, self.c]], dtype=float)


@dataclass(frozen=True)
class GradientPair:
    """Gradients ``(D psi, D theta)`` of the log-amplitude and angle of a map.

    A transformation written as ``exp(psi) * (cos theta, sin theta)`` is
    orientation preserving exactly when ``det(D psi, D theta) > 0``, and its
    push-forward trace depends only on this pair.
    """

    d_psi: np.ndarray
    d_theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "d_psi", np.asarray(self.d_psi, dtype=float).reshape(2))
        object.__setattr__(self, "d_theta", np.asarray(self.d_theta, dtype=float).reshape(2))

    @staticmethod
    def rotation() -> np.ndarray:
        """The counterclockwise quarter turn ``J``."""
        return np.array([[0.0, -1.0], [1.0, 0.0]])

    @staticmethod
    def radial_unit(x) -> np.ndarray:
        """``e_r = x / |x|`` at a point ``x`` away from the origin."""
        x = np.asarray(x, dtype=float).reshape(2)
        n = float(np.hypot(x[0], x[1]))
        if n == 0.0:
            raise DomainError("radial unit vector is undefined at the origin")
        return x / n

    @staticmethod
    def angular_unit(x) -> np.ndarray:
        """``e_theta = J x / |x|``, the positively oriented tangent direction."""
        e = GradientPair.radial_unit(x)
        return np.array([-e[1], e[0]])

    @classmethod
    def radial(cls, x, fprime: float) -> "GradientPair":
        """Gradient pair of the radial map ``exp(f(|x|)) x/|x|`` at ``x``."""
        x = np.asarray(x, dtype=float).reshape(2)
        r = float(np.hypot(x[0], x[1]))
        if r == 0.0:
            raise DomainError("radial gradient pair is undefined at the origin")
        return cls(fprime * cls.radial_unit(x), cls.angular_unit(x) / r)

    @property
    def determinant(self) -> float:
        a, b = self.d_psi, self.d_theta
        return float(a[0] * b[1] - a[1] * b[0])


def push_forward_tensor(dphi) -> PushForwardTensor:
    """Push the identity tensor forward through a Jacobian.

    Parameters
    ----------
    dphi : (2, 2) array_like
        Jacobian of the transformation at a point.

    Returns
    -------
    PushForwardTensor
        ``dphi dphi^T / |det dphi|``, symmetric with unit determinant.

    Raises
    ------
    SingularMatrixError
        If ``|det dphi| < 1e-14``.
    """
    m = np.asarray(dphi, dtype=float)
    if m.shape != (2, 2):
        raise DomainError(f"expected a 2x2 Jacobian, got shape {m.shape}")
    det = float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    if abs(det) < SINGULAR_DET_TOL:
        raise SingularMatrixError(f"Jacobian determinant {det!r} is numerically singular")
    s = m @ m.T / abs(det)
    b = 0.5 * (s[0, 1] + s[1, 0])
    return PushForwardTensor(float(s[0, 0]), float(b), float(s[1, 1]))


def anisotropy_measure(t: PushForwardTensor) -> float:
    """Eigenvalue gap ``lam2 - lam1 = sqrt(trace**2 - 4)`` of a unit-determinant tensor.

    The radicand is clamped to zero when it rounds into ``[-1e-12, 0)``; a
    larger violation means the tensor does not have unit determinant and is
    reported as a domain error.
    """
    rad = t.trace * t.trace - 4.0
    if rad < 0.0:
        if rad < -TRACE_CLAMP_TOL:
            raise DomainError(f"trace**2 - 4 = {rad!r} is negative beyond rounding")
        rad = 0.0
    return math.sqrt(rad)


def trace_from_gradients(g: GradientPair) -> float:
    """Push-forward trace ``(|D psi|**2 + |D theta|**2) / det(D psi, D theta)``.

    Raises an orientation error when the pair is not positively oriented.
    """
    det = g.determinant
    if det <= 0.0:
        raise OrientationError(f"gradient pair determinant {det!r} must be positive")
    num = float(g.d_psi @ g.d_psi + g.d_theta @ g.d_theta)
    return num / det


def trace_angle_form(mag_amp: float, mag_ang: float, angle: float) -> float:
    """Push-forward trace from gradient magnitudes and the angle between them.

    Equals ``(mag_ang/mag_amp + mag_amp/mag_ang) / |sin(angle)|`` and agrees
    with :func:`trace_from_gradients` for positively oriented pairs.
    """
    if mag_amp <= 0.0 or mag_ang <= 0.0:
        raise DomainError("gradient magnitudes must be positive")
    s = abs(math.sin(angle))
    if s < 1e-14:
        raise DegenerateAngleError(f"gradients with angle {angle!r} are numerically parallel")
    return (mag_ang / mag_amp + mag_amp / mag_ang) / s


def radial_trace(r, fprime):
    """Push-forward trace ``1/(r f') + r f'`` of a radial map at radius ``r``.

    Accepts scalars or arrays; slopes must be strictly positive and radii
    strictly between 0 and infinity.
    """
    r_arr = np.asarray(r, dtype=float)
    fp = np.asarray(fprime, dtype=float)
    if np.any(~np.isfinite(r_arr)) or np.any(r_arr <= 0.0):
        raise DomainError("radii must be positive and finite")
    if np.any(~np.isfinite(fp)) or np.any(fp <= 0.0):
        raise NonPositiveSlopeError("radial amplitude slope must be strictly positive")
    t = r_arr * fp
    out = 1.0 / t + t
    if out.ndim == 0:
        return float(out)
    return out
