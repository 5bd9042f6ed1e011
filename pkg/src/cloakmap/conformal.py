"""Conformal transfer of circular-annulus cloaks to non-circular domains.

A conformal map ``Psi`` from a simply connected domain onto the unit disk,
normalized by ``Psi(0) = 0`` and ``Psi'(0) = a > 0``, conjugates the radial
cloaking map ``Phi`` into ``Psi^-1 o Phi o Psi``.  Because a conformal
Jacobian is a scaled rotation, the push-forward tensor of the composition is
a rotation conjugate of the radial one, so its trace — and with it the whole
anisotropy theory — transfers verbatim: the trace at ``x`` equals the radial
trace at ``|Psi(x)|``, and the amplitude profile that is optimal on the
circular annulus stays optimal for the Jacobian-weighted energy on the
image domain.

Analytic maps are supplied as closed-form (forward, inverse, derivative)
triples; built-ins cover the identity, the ``sinh`` image of the disk, and
power perturbations ``w -> w + c w^k`` of the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import push_forward_tensor, radial_trace
from .errors import (
    ConvergenceError,
    DomainError,
    OutOfAnnulusError,
    UnknownMapError,
)
from .quadrature import _NODES7, _WEIGHTS7
from .radial import AmplitudeProfile, _check_exponent
from .variational import PolarGrid

#: Relative slack accepted when gating points against the annulus boundaries.
BOUNDARY_GATE_SLACK = 1e-9

#: Smallest finite-difference step the trace evaluator will shrink to.
MIN_FD_STEP = 1e-10


def _as_complex(x) -> np.ndarray:
    """Points given as (..., 2) real arrays or complex scalars/arrays."""
    arr = np.asarray(x)
    if np.issubdtype(arr.dtype, np.complexfloating):
        return arr.astype(complex)
    arr = arr.astype(float)
    if arr.shape == () or arr.shape[-1] != 2:
        raise ValueError("points must be complex or have a trailing axis of length 2")
    return arr[..., 0] + 1j * arr[..., 1]


def _as_points(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1)


def _rotation_matrix(w: np.ndarray) -> np.ndarray:
    """2x2 real matrices (..., 2, 2) acting as multiplication by complex w."""
    w = np.asarray(w, dtype=complex)
    out = np.empty(w.shape + (2, 2))
    out[..., 0, 0] = w.real
    out[..., 0, 1] = -w.imag
    out[..., 1, 0] = w.imag
    out[..., 1, 1] = w.real
    return out


@dataclass(frozen=True)
class AnalyticMap:
    """Conformal map onto the unit disk, as closed-form complex callables.

    ``forward`` is the map onto the disk, ``inverse`` its inverse, and
    ``derivative`` the complex derivative of ``forward``.  All three act on
    complex scalars or arrays.  ``inverse_derivative_fn``, when supplied,
    gives the derivative of ``inverse`` directly; otherwise it is derived
    from the reciprocal of ``derivative`` at the pulled-back point.

    The normalization ``forward(0) = 0`` with real positive derivative is
    enforced at construction.
    """

    tag: str
    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    inverse_derivative_fn: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        origin = complex(np.asarray(self.forward(0j)).reshape(()))
        if abs(origin) > 1e-12:
            raise ValueError(f"map {self.tag!r} must send the origin to itself")
        d0 = complex(np.asarray(self.derivative(0j)).reshape(()))
        if d0.real <= 0.0 or abs(d0.imag) > 1e-12 * (1.0 + abs(d0)):
            raise ValueError(
                f"map {self.tag!r} needs a real positive derivative at the origin"
            )

    @property
    def scale_at_origin(self) -> float:
        """The normalization constant a = forward'(0)."""
        return float(np.asarray(self.derivative(0j)).reshape(()).real)

    def inverse_derivative(self, w) -> np.ndarray:
        """Derivative of the inverse, evaluated at disk points ``w``."""
        w = np.asarray(w, dtype=complex)
        if self.inverse_derivative_fn is not None:
            return np.asarray(self.inverse_derivative_fn(w), dtype=complex)
        return 1.0 / np.asarray(self.derivative(self.inverse(w)), dtype=complex)

    def round_trip_deviation(self, z) -> float:
        """Max of |inverse(forward(z)) - z| over the given domain points."""
        z = np.asarray(z, dtype=complex)
        return float(np.max(np.abs(self.inverse(self.forward(z)) - z)))


def identity_map() -> AnalyticMap:
    """The identity on the unit disk."""
    return AnalyticMap(
        tag="identity",
        forward=lambda z: np.asarray(z, dtype=complex),
        inverse=lambda w: np.asarray(w, dtype=complex),
        derivative=lambda z: np.ones_like(np.asarray(z, dtype=complex)),
        inverse_derivative_fn=lambda w: np.ones_like(np.asarray(w, dtype=complex)),
    )


def _guarded_arcsinh(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    on_cut = (np.abs(z.real) <= 1e-12) & (np.abs(z.imag) >= 1.0)
    if np.any(on_cut):
        raise DomainError(
            "arcsinh is evaluated on its branch cut (imaginary axis beyond +-i); "
            "the point is outside the sinh image of the unit disk"
        )
    return np.arcsinh(z)


def sinh_domain_map() -> AnalyticMap:
    """Conformal map of the ``sinh`` image of the unit disk back onto the disk.

    The domain stays clear of the arcsinh branch cuts (its intersection with
    the imaginary axis is |Im z| < sin 1 < 1), so the principal branch is the
    continuous inverse; evaluation on a cut raises
    :class:`~cloakmap.errors.DomainError` instead of jumping branches.
    """
    return AnalyticMap(
        tag="sinh_domain",
        forward=_guarded_arcsinh,
        inverse=lambda w: np.sinh(np.asarray(w, dtype=complex)),
        derivative=lambda z: 1.0 / np.sqrt(1.0 + np.asarray(z, dtype=complex) ** 2),
        inverse_derivative_fn=lambda w: np.cosh(np.asarray(w, dtype=complex)),
    )


def perturbed_power_map(c: complex = 0.2, k: int = 2,
                        newton_tol: float = 1e-14,
                        max_newton: int = 60) -> AnalyticMap:
    """Map whose inverse is the power perturbation ``w -> w + c w**k``.

    Univalence on the disk requires ``|c| k < 1`` (the derivative
    ``1 + c k w**(k-1)`` then cannot vanish).  The forward direction has no
    closed form and is evaluated by Newton iteration.
    """
    c = complex(c)
    k = int(k)
    if k < 2:
        raise ValueError("the perturbation exponent k must be an integer >= 2")
    if abs(c) * k >= 1.0:
        raise ValueError(f"|c|*k = {abs(c) * k} >= 1 breaks univalence on the disk")

    def inverse(w):
        w = np.asarray(w, dtype=complex)
        return w + c * w ** k

    def inverse_derivative(w):
        w = np.asarray(w, dtype=complex)
        return 1.0 + c * k * w ** (k - 1)

    def forward(z):
        z = np.asarray(z, dtype=complex)
        w = z.copy().reshape(-1)
        flat = z.reshape(-1)
        tol = newton_tol * (1.0 + np.abs(flat))
        for _ in range(max_newton):
            residual = w + c * w ** k - flat
            if np.all(np.abs(residual) <= tol):
                break
            w = w - residual / (1.0 + c * k * w ** (k - 1))
        else:
            raise ConvergenceError("Newton iteration for the power-map forward "
                                   "direction did not converge")
        return w.reshape(z.shape)

    return AnalyticMap(
        tag=f"perturbed_power(c={c}, k={k})",
        forward=forward,
        inverse=inverse,
        derivative=lambda z: 1.0 / inverse_derivative(forward(z)),
        inverse_derivative_fn=inverse_derivative,
    )


def composed_analytic(outer: AnalyticMap, inner: AnalyticMap) -> AnalyticMap:
    """Composition ``outer o inner`` (inner acts first), tagged composite."""
    return AnalyticMap(
        tag="composite",
        forward=lambda z: outer.forward(inner.forward(z)),
        inverse=lambda w: inner.inverse(outer.inverse(w)),
        derivative=lambda z: np.asarray(inner.derivative(z), dtype=complex)
        * np.asarray(outer.derivative(inner.forward(z)), dtype=complex),
        inverse_derivative_fn=lambda w: np.asarray(
            outer.inverse_derivative(w), dtype=complex
        ) * np.asarray(inner.inverse_derivative(outer.inverse(w)), dtype=complex),
    )


#: Names accepted by :func:`builtin_map`, in canonical form.
BUILTIN_MAP_NAMES = ("identity", "sinh_domain", "perturbed_power")

_BUILTIN_FACTORIES = {
    "identity": identity_map,
    "sinh_domain": sinh_domain_map,
    "sinh": sinh_domain_map,
    "perturbed_power": perturbed_power_map,
}


def builtin_map(name: str, **params) -> AnalyticMap:
    """Look up a built-in analytic map by name (``sinh`` aliases sinh_domain)."""
    try:
        factory = _BUILTIN_FACTORIES[name]
    except KeyError:
        raise UnknownMapError(
            f"unknown analytic map {name!r}; built-ins: "
            + ", ".join(BUILTIN_MAP_NAMES) + " (alias sinh)"
        ) from None
    return factory(**params)


@dataclass(frozen=True)
class ComposedCloakMap:
    """Cloaking map on a non-circular domain: inverse o radial-stretch o forward."""

    analytic: AnalyticMap
    profile: AmplitudeProfile

    @property
    def epsilon(self) -> float:
        return self.profile.epsilon


def _gated_radius(m: ComposedCloakMap, y: np.ndarray) -> np.ndarray:
    rho = np.abs(y)
    eps = m.epsilon
    lo = eps * (1.0 - BOUNDARY_GATE_SLACK)
    hi = 1.0 + BOUNDARY_GATE_SLACK
    bad = (rho < lo) | (rho > hi)
    if np.any(bad):
        worst = np.asarray(rho)[bad]
        raise OutOfAnnulusError(
            f"{int(np.count_nonzero(bad))} point(s) pull back outside the annulus "
            f"[{eps}, 1] (radii e.g. {worst.flat[:4].tolist()})"
        )
    return rho


def evaluate_cloak_map(m: ComposedCloakMap, x):
    """Image of ``x`` under the transferred cloaking map.

    Accepts complex values or (..., 2) point arrays and returns matching
    (..., 2) point arrays.  Points must pull back into the reference annulus.
    """
    z = _as_complex(x)
    y = np.asarray(m.analytic.forward(z), dtype=complex)
    rho = _gated_radius(m, y)
    stretched = np.exp(m.profile.value_at(rho)) * y / rho
    return _as_points(m.analytic.inverse(stretched))


def _chain_jacobian(m: ComposedCloakMap, y: np.ndarray) -> np.ndarray:
    """Jacobian of the composed map at points with pull-back ``y`` (batched).

    Chain rule through the three factors; the forward derivative is the
    reciprocal of the inverse derivative at ``y``, which avoids the iterative
    forward evaluation entirely.
    """
    rho = np.abs(y)
    values = m.profile.value_at(rho)
    slopes = m.profile.slope_at(rho)
    radial_scale = np.exp(values)

    cos_t = y.real / rho
    sin_t = y.imag / rho
    along = slopes * radial_scale       # d/d rho of exp(f)
    across = radial_scale / rho
    stretch = np.empty(y.shape + (2, 2))
    stretch[..., 0, 0] = along * cos_t ** 2 + across * sin_t ** 2
    stretch[..., 0, 1] = (along - across) * cos_t * sin_t
    stretch[..., 1, 0] = stretch[..., 0, 1]
    stretch[..., 1, 1] = along * sin_t ** 2 + across * cos_t ** 2

    d_forward = _rotation_matrix(1.0 / m.analytic.inverse_derivative(y))
    d_inverse = _rotation_matrix(
        m.analytic.inverse_derivative(radial_scale * y / rho))
    return d_inverse @ stretch @ d_forward


def cloak_map_jacobian(m: ComposedCloakMap, x) -> np.ndarray:
    """Jacobian of the composed cloaking map from analytic derivatives."""
    z = _as_complex(x)
    y = np.asarray(m.analytic.forward(z), dtype=complex)
    _gated_radius(m, y)
    return _chain_jacobian(m, y)


def pushforward_trace_at(m: ComposedCloakMap, x, h: float = 1e-5) -> float:
    """Trace of the push-forward tensor, via a finite-difference Jacobian.

    The step is halved until the whole four-point stencil pulls back into
    the annulus (down to a floor of 1e-10); an independent cross-check of
    the analytic chain rule.
    """
    z = complex(np.asarray(_as_complex(x)).reshape(()))
    step = float(h)
    while True:
        stencil = np.array([z + step, z - step, z + 1j * step, z - 1j * step])
        rho = np.abs(np.asarray(m.analytic.forward(stencil), dtype=complex))
        eps = m.epsilon
        if (np.all(rho >= eps * (1.0 - BOUNDARY_GATE_SLACK))
                and np.all(rho <= 1.0 + BOUNDARY_GATE_SLACK)):
            break
        step *= 0.5
        if step < MIN_FD_STEP:
            raise OutOfAnnulusError(
                f"no admissible finite-difference stencil at {z}: "
                "the point is too close to (or outside) the domain boundary"
            )
    images = evaluate_cloak_map(m, stencil)
    jac = np.empty((2, 2))
    jac[:, 0] = (images[0] - images[1]) / (2.0 * step)
    jac[:, 1] = (images[2] - images[3]) / (2.0 * step)
    return push_forward_tensor(jac).trace


def modified_energy(m: ComposedCloakMap, p: float, grid: PolarGrid) -> float:
    """Jacobian-weighted anisotropy energy of the transferred cloak.

    The integral of trace**p times |det D forward| over the curved annulus is
    pulled back to the reference annulus, where the weight cancels the change
    of variables; the trace is still assembled from the full composed
    Jacobian at every node, so the map-independence of the result is a
    genuine numerical outcome rather than an identity baked into the code.
    Gauss-Legendre panels between the grid radii, rectangle rule in angle.
    """
    p = _check_exponent(p)
    if abs(grid.epsilon - m.epsilon) > 1e-12:
        raise ValueError(
            f"grid starts at {grid.epsilon} but the profile starts at {m.epsilon}"
        )
    lo = grid.radii[:-1]
    hi = grid.radii[1:]
    half = 0.5 * (hi - lo)
    centers = 0.5 * (hi + lo)
    rho = (centers[:, None] + half[:, None] * _NODES7).reshape(-1)
    weights = (half[:, None] * _WEIGHTS7).reshape(-1)

    y = rho[:, None] * np.exp(1j * grid.angles)[None, :]
    jac = _chain_jacobian(m, y)
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    trace = np.einsum("...ij,...ij->...", jac, jac) / np.abs(det)
    integrand = trace ** p
    return float(np.sum(integrand * (weights * rho)[:, None]) * grid.h_phi)


@dataclass(frozen=True)
class Ray:
    """A sampled ray: its curved source polyline and the cloaked image polyline."""

    angle: float
    source: np.ndarray
    image: np.ndarray


def sample_rays(m: ComposedCloakMap, n_rays: int, n_points: int = 64) -> list:
    """Radial rays of the reference annulus carried to the curved domain.

    Rays sit at angles ``2 pi k / n_rays + pi / n_rays``; each source curve
    is the inverse image of a radial segment, and its image under the cloak
    map is the same curve traversing only the outer part of the domain.
    """
    if n_rays < 1:
        raise ValueError("n_rays must be at least 1")
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    t = np.linspace(m.epsilon, 1.0, n_points)
    stretched = np.exp(m.profile.value_at(t))
    rays = []
    for k in range(n_rays):
        angle = 2.0 * math.pi * k / n_rays + math.pi / n_rays
        direction = np.exp(1j * angle)
        source = _as_points(m.analytic.inverse(t * direction))
        image = _as_points(m.analytic.inverse(stretched * direction))
        rays.append(Ray(angle, source, image))
    return rays


def inner_hole_deviation(analytic: AnalyticMap, epsilon: float,
                         n_samples: int = 256) -> float:
    """How far the curved inner hole deviates from a scaled circle.

    Returns the max over the inner circle of ``|inverse(x) - x/a|`` with
    ``a`` the origin scale; the deviation is O(epsilon**2) with constant
    half the sup of the inverse's second derivative on the half disk.
    """
    if not 0.0 < epsilon <= 0.5:
        raise DomainError("epsilon must lie in (0, 1/2]")
    angles = np.arange(n_samples) * (2.0 * math.pi / n_samples)
    x = epsilon * np.exp(1j * angles)
    a = analytic.scale_at_origin
    return float(np.max(np.abs(np.asarray(analytic.inverse(x), dtype=complex) - x / a)))


def inverse_second_derivative_max(analytic: AnalyticMap, radius: float = 0.5,
                                  n_radii: int = 24, n_angles: int = 64,
                                  h: float = 1e-4) -> float:
    """Finite-difference sup of |inverse''| over the disk of the given radius."""
    rho = np.linspace(0.0, radius, n_radii)
    angles = np.arange(n_angles) * (2.0 * math.pi / n_angles)
    z = (rho[:, None] * np.exp(1j * angles)[None, :]).reshape(-1)
    second = (np.asarray(analytic.inverse(z + h), dtype=complex)
              - 2.0 * np.asarray(analytic.inverse(z), dtype=complex)
              + np.asarray(analytic.inverse(z - h), dtype=complex)) / h ** 2
    return float(np.max(np.abs(second)))


def conformality_defect(analytic: AnalyticMap, x, h: float = 1e-6) -> float:
    """Distance of the finite-difference Jacobian from the scaled rotation.

    Conformality means the Jacobian is |forward'| times a rotation; returns
    the Frobenius defect relative to that scale at one point.
    """
    z = complex(np.asarray(_as_complex(x)).reshape(()))
    stencil = np.array([z + h, z - h, z + 1j * h, z - 1j * h])
    values = np.asarray(analytic.forward(stencil), dtype=complex)
    jac = np.empty((2, 2))
    jac[0, 0] = (values[0].real - values[1].real) / (2.0 * h)
    jac[1, 0] = (values[0].imag - values[1].imag) / (2.0 * h)
    jac[0, 1] = (values[2].real - values[3].real) / (2.0 * h)
    jac[1, 1] = (values[2].imag - values[3].imag) / (2.0 * h)
    expected = _rotation_matrix(np.asarray(analytic.derivative(z), dtype=complex))
    scale = abs(complex(np.asarray(analytic.derivative(z)).reshape(())))
    return float(np.linalg.norm(jac - expected.reshape(2, 2)) / scale)
