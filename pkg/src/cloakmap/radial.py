"""Optimal radial amplitude profiles for annulus cloaking maps.

A radial cloaking map ``x -> exp(f(|x|)) x/|x|`` is fixed by its amplitude
profile ``f``, an increasing function with ``f(eps) = -log 2`` and
``f(1) = 0``.  Its pointwise push-forward trace is ``1/(r f') + r f'`` and
the p-energy is::

    I_p(f) = 2 pi * integral_eps^1 (1/(r f') + r f')**p r dr

This module computes the minimizing profiles.  The minimizer satisfies an
integrated optimality condition ``r**2 * el_momentum(r f'(r), p) = C`` for a
single shooting constant ``C <= 0``, where ``el_momentum`` is (1/p times) the
conjugate momentum ``d/dt (t + 1/t)**p / p``.  Closed forms are provided for
p = 1, for the sup-norm (minimax) case, and for the affine benchmark map
whose image coordinates are a linear function of the source radius.

Profiles are value types: sampled nodes, values, and slopes, with slopes the
primary data (values are their running integral).  All evaluators accept
scalars or arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AnnulusSpec, PNorm, radial_trace
from .errors import (
    ConvergenceError,
    DomainError,
    InadmissibleProfileError,
    InversionRangeError,
)
from .quadrature import (
    _panel_values,
    adaptive_gauss_legendre,
    composite_panels,
    cumulative_panels,
)

KIND_OPTIMAL = "optimal"
KIND_AFFINE = "affine"
KIND_P1 = "p1_closed_form"
KIND_MINIMAX = "minimax"
KIND_CUSTOM = "custom"

LOG2 = math.log(2.0)


def _check_exponent(p: float) -> float:
    p = float(p)
    if not math.isfinite(p) or p < 1.0:
        raise ValueError(f"energy exponent must be a finite real >= 1, got {p!r}")
    return p


def el_momentum(t, p):
    """Momentum factor ``(1/t + t)**(p-1) * (1 - 1/t**2)`` of the radial problem.

    This is ``d/dt (t + 1/t)**p / p``; along a minimizer the combination
    ``r**2 * el_momentum(r f'(r), p)`` is constant in ``r``.  Increasing in
    ``t``, zero exactly at ``t = 1``.

    Parameters
    ----------
    t : scalar or array
        Radial stretch ``r f'(r)``, strictly positive.
    p : float
        Energy exponent, finite and >= 1.

    Raises
    ------
    DomainError
        If any ``t <= 0``.
    """
    p = _check_exponent(p)
    t_arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t_arr)) or np.any(t_arr <= 0.0):
        raise DomainError("momentum factor requires strictly positive stretch values")
    out = _momentum_raw(t_arr, p)
    if out.ndim == 0:
        return float(out)
    return out


def _momentum_raw(t, p):
    with np.errstate(over="ignore"):
        return (1.0 / t + t) ** (p - 1.0) * (1.0 - 1.0 / (t * t))


def _momentum_slope(t, p):
    # d/dt of _momentum_raw; both terms are positive for t > 0.
    with np.errstate(over="ignore"):
        base = 1.0 / t + t
        return (p - 1.0) * base ** (p - 2.0) * (1.0 - 1.0 / (t * t)) ** 2 \
            + base ** (p - 1.0) * (2.0 / t ** 3)


def invert_el_momentum(s, p, tol: float = 1e-10):
    """Inverse of :func:`el_momentum` in its ``t`` argument.

    Parameters
    ----------
    s : scalar or array
        Target momentum value(s).
    p : float
        Energy exponent.  For ``p = 1`` the momentum map only covers
        ``(-inf, 1)`` and the closed form ``t = (1 - s)**(-1/2)`` is used;
        values ``s >= 1`` raise a range error.
    tol : float
        Acceptance threshold ``|el_momentum(t, p) - s| <= tol * (1 + |s|)``.

    Returns
    -------
    scalar or array
        Strictly positive stretch value(s), monotone in ``s``.
    """
    p = _check_exponent(p)
    s_arr = np.asarray(s, dtype=float)
    if np.any(~np.isfinite(s_arr)):
        raise DomainError("momentum targets must be finite")
    if p == 1.0:
        if np.any(s_arr >= 1.0):
            raise InversionRangeError(
                "for p = 1 the momentum map covers (-inf, 1); no stretch attains s >= 1"
            )
        out = (1.0 - s_arr) ** -0.5
    else:
        out = _invert_bracketed(s_arr, p, tol)
    if out.ndim == 0:
        return float(out)
    return out


def _invert_bracketed(s, p, tol: float = 1e-10, bisect_iters: int = 48,
                      newton_iters: int = 30, grow_cap: int = 200):
    """Generic momentum inversion: geometric bracketing from t = 1, bisection, Newton polish.

    Works for every finite p >= 1 (including p = 1 on its range) and is the
    cross-check path for the closed form.
    """
    s = np.asarray(s, dtype=float)
    if p == 1.0 and np.any(s >= 1.0):
        raise InversionRangeError(
            "for p = 1 the momentum map covers (-inf, 1); no stretch attains s >= 1"
        )
    flat = s.ravel()
    lo = np.ones_like(flat)
    hi = np.ones_like(flat)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        need = flat > 0.0
        for _ in range(grow_cap):
            if not np.any(need):
                break
            hi[need] *= 2.0
            need = need & (_momentum_raw(hi, p) < flat)
        else:
            raise ConvergenceError(
                f"momentum bracket growth exhausted above t = {float(np.max(hi))!r}"
            )
        need = flat < 0.0
        for _ in range(grow_cap):
            if not np.any(need):
                break
            lo[need] *= 0.5
            need = need & (_momentum_raw(lo, p) > flat)
        else:
            raise ConvergenceError(
                f"momentum bracket growth exhausted below t = {float(np.min(lo))!r}"
            )
        for _ in range(bisect_iters):
            mid = 0.5 * (lo + hi)
            high_side = _momentum_raw(mid, p) >= flat
            hi = np.where(high_side, mid, hi)
            lo = np.where(high_side, lo, mid)
        t = 0.5 * (lo + hi)
        bound = tol * (1.0 + np.abs(flat))
        for _ in range(newton_iters):
            resid = _momentum_raw(t, p) - flat
            if np.all(np.abs(resid) <= bound):
                break
            step = resid / _momentum_slope(t, p)
            t = np.clip(t - step, lo, hi)
        resid = _momentum_raw(t, p) - flat
    if np.any(np.abs(resid) > bound):
        worst = int(np.argmax(np.abs(resid) - bound))
        raise ConvergenceError(
            f"momentum inversion stalled at s = {flat[worst]!r}, "
            f"last bracket [{lo[worst]!r}, {hi[worst]!r}]"
        )
    return t.reshape(s.shape)


@dataclass(frozen=True)
class AmplitudeProfile:
    """Sampled radial amplitude profile with closed-form or solver provenance.

    Attributes
    ----------
    epsilon : float
        Inner radius of the annulus the profile lives on.
    kind : str
        One of ``optimal``, ``affine``, ``p1_closed_form``, ``minimax``,
        ``custom``; selects the slope evaluator.
    nodes, values, slopes : ndarray
        Sample radii in ``[epsilon, 1]``, amplitude values (``-log 2`` at the
        inner edge, 0 at the outer), and slopes (strictly positive; the
        primary data).
    shooting_constant : float or None
        Integrated-optimality constant for ``optimal`` profiles; 0 exactly
        when ``epsilon = 1/2``.
    p : float or None
        Exponent an ``optimal`` profile minimizes.
    """

    epsilon: float
    kind: str
    nodes: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    shooting_constant: float | None = None
    p: float | None = None

    def __post_init__(self):
        if self.kind not in (KIND_OPTIMAL, KIND_AFFINE, KIND_P1, KIND_MINIMAX, KIND_CUSTOM):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        nodes = np.array(self.nodes, dtype=float)
        values = np.array(self.values, dtype=float)
        slopes = np.array(self.slopes, dtype=float)
        if not (nodes.ndim == values.ndim == slopes.ndim == 1):
            raise ValueError("nodes, values, slopes must be one-dimensional")
        if not (nodes.size == values.size == slopes.size >= 2):
            raise ValueError("nodes, values, slopes must share a length of at least 2")
        if np.any(np.diff(nodes) <= 0.0):
            raise InadmissibleProfileError("profile nodes must be strictly increasing")
        if abs(nodes[0] - self.epsilon) > 1e-12 or abs(nodes[-1] - 1.0) > 1e-12:
            raise InadmissibleProfileError(
                f"profile nodes must span [{self.epsilon}, 1], got "
                f"[{nodes[0]!r}, {nodes[-1]!r}]"
            )
        if np.any(slopes <= 0.0) or np.any(~np.isfinite(slopes)):
            raise InadmissibleProfileError("profile slopes must be strictly positive")
        if abs(values[0] + LOG2) > 1e-10:
            raise InadmissibleProfileError(
                f"profile must start at -log 2, got {values[0]!r}"
            )
        if abs(values[-1]) > 1e-6:
            raise InadmissibleProfileError(
                f"profile must end at 0 within solver tolerance, got {values[-1]!r}"
            )
        for name, arr in (("nodes", nodes), ("values", values), ("slopes", slopes)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def _clip_radii(self, r):
        # Composed maps feed radii that can stick out of [eps, 1] by rounding;
        # evaluation clamps them onto the closed interval.
        return np.clip(np.asarray(r, dtype=float), self.epsilon, 1.0)

    def slope_at(self, r):
        """Amplitude slope ``f'(r)``, vectorized."""
        r = self._clip_radii(r)
        if self.kind == KIND_AFFINE:
            out = 1.0 / (r + 1.0 - 2.0 * self.epsilon)
        elif self.kind == KIND_P1:
            out = 3.0 / np.sqrt(9.0 * r * r + _p1_offset(self.epsilon))
        elif self.kind == KIND_MINIMAX:
            out = _minimax_stretch(self.epsilon) / r
        elif self.kind == KIND_OPTIMAL:
            if self.shooting_constant == 0.0:
                out = 1.0 / r
            else:
                out = _invert_bracketed(self.shooting_constant / (r * r), self.p,
                                        tol=1e-12) / r
        else:
            out = np.interp(r, self.nodes, self.slopes)
        if out.ndim == 0:
            return float(out)
        return out

    def value_at(self, r):
        """Amplitude value ``f(r)``, vectorized."""
        r = self._clip_radii(r)
        if self.kind == KIND_AFFINE:
            out = np.log((r + 1.0 - 2.0 * self.epsilon) / (2.0 * (1.0 - self.epsilon)))
        elif self.kind == KIND_P1:
            q = _p1_offset(self.epsilon)
            out = np.log((3.0 * r + np.sqrt(9.0 * r * r + q)) / (4.0 * (2.0 - self.epsilon)))
        elif self.kind == KIND_MINIMAX:
            out = _minimax_stretch(self.epsilon) * np.log(r)
        elif self.kind == KIND_OPTIMAL:
            if self.shooting_constant == 0.0:
                out = np.log(r)
            else:
                out = self._integrate_from_nodes(r)
        else:
            out = np.interp(r, self.nodes, self.values)
        if out.ndim == 0:
            return float(out)
        return out

    def _integrate_from_nodes(self, r):
        # f(r) = f(node below r) + one quadrature panel over the remainder.
        r = np.atleast_1d(r)
        idx = np.clip(np.searchsorted(self.nodes, r, side="right") - 1, 0, self.nodes.size - 1)
        base = self.nodes[idx]
        out = self.values[idx].copy()
        open_panel = r > base
        if np.any(open_panel):
            out[open_panel] += _panel_values(
                lambda t: self.slope_at(t), base[open_panel], r[open_panel]
            )
        return out if out.size > 1 else out.reshape(())

    def trace_at(self, r):
        """Push-forward trace ``1/(r f') + r f'`` along the profile."""
        r = self._clip_radii(r)
        return radial_trace(r, self.slope_at(r))


def _p1_offset(epsilon: float) -> float:
    return 16.0 * (2.0 - epsilon) * (0.5 - epsilon)


def _minimax_stretch(epsilon: float) -> float:
    return LOG2 / abs(math.log(epsilon))


def profile_affine(spec: AnnulusSpec, n_nodes: int = 512) -> AmplitudeProfile:
    """Benchmark profile whose image radius is affine in the source radius.

    ``exp(f(r)) = (r - 1) / (2 (1 - eps)) + 1``; not optimal for any finite p
    unless ``eps = 1/2``, where it degenerates to ``log r``.
    """
    nodes = _uniform_nodes(spec.epsilon, n_nodes)
    values = np.log((nodes + 1.0 - 2.0 * spec.epsilon) / (2.0 * (1.0 - spec.epsilon)))
    slopes = 1.0 / (nodes + 1.0 - 2.0 * spec.epsilon)
    return AmplitudeProfile(spec.epsilon, KIND_AFFINE, nodes, values, slopes)


def profile_p1(spec: AnnulusSpec, n_nodes: int = 512) -> AmplitudeProfile:
    """Closed-form minimizer of the 1-energy.

    ``f(r) = log((3 r + sqrt(9 r**2 + q)) / (4 (2 - eps)))`` with
    ``q = 16 (2 - eps) (1/2 - eps)``; the slope simplifies to
    ``3 / sqrt(9 r**2 + q)`` and the integrated optimality constant is
    ``-q / 9``.
    """
    nodes = _uniform_nodes(spec.epsilon, n_nodes)
    q = _p1_offset(spec.epsilon)
    values = np.log((3.0 * nodes + np.sqrt(9.0 * nodes ** 2 + q)) / (4.0 * (2.0 - spec.epsilon)))
    slopes = 3.0 / np.sqrt(9.0 * nodes ** 2 + q)
    return AmplitudeProfile(spec.epsilon, KIND_P1, nodes, values, slopes)


def profile_minimax(spec: AnnulusSpec, n_nodes: int = 512) -> AmplitudeProfile:
    """Minimizer of the sup-norm anisotropy: constant stretch ``r f' = log 2 / |log eps|``."""
    nodes = _uniform_nodes(spec.epsilon, n_nodes)
    k = _minimax_stretch(spec.epsilon)
    return AmplitudeProfile(spec.epsilon, KIND_MINIMAX, nodes, k * np.log(nodes), k / nodes)


def profile_from_slopes(spec: AnnulusSpec, nodes, slopes,
                        normalize: bool = True) -> AmplitudeProfile:
    """Custom profile from sampled slopes.

    With ``normalize`` the slopes are rescaled so their trapezoid integral is
    ``log 2``, which makes the trapezoid-integrated values meet both boundary
    conditions exactly.
    """
    nodes = np.asarray(nodes, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    if np.any(slopes <= 0.0):
        raise InadmissibleProfileError("custom profile slopes must be strictly positive")
    dr = np.diff(nodes)
    if normalize:
        total = float(np.sum(0.5 * (slopes[1:] + slopes[:-1]) * dr))
        if total <= 0.0:
            raise InadmissibleProfileError("slope samples integrate to a non-positive total")
        slopes = slopes * (LOG2 / total)
    values = np.concatenate(
        [[0.0], np.cumsum(0.5 * (slopes[1:] + slopes[:-1]) * dr)]
    ) - LOG2
    return AmplitudeProfile(spec.epsilon, KIND_CUSTOM, nodes, values, slopes)


def _uniform_nodes(epsilon: float, n_nodes: int) -> np.ndarray:
    if n_nodes < 2:
        raise ValueError(f"need at least 2 nodes, got {n_nodes}")
    return np.linspace(epsilon, 1.0, int(n_nodes))


def solve_optimal_profile(spec: AnnulusSpec, p: float, n_nodes: int = 512,
                          tol: float = 1e-10) -> AmplitudeProfile:
    """Minimize the p-energy over admissible radial amplitude profiles.

    Shoots on the integrated optimality constant ``C``: the candidate slope
    field ``f'(r) = invert_el_momentum(C / r**2, p) / r`` always starts at
    ``f(eps) = -log 2``, and ``C`` is bisected (after geometric bracket
    growth) until ``f(1) = 0``.  The constant is unique in ``[C_lo, 0]`` and
    ``C = 0`` happens exactly at ``eps = 1/2`` where ``f = log r``.

    Parameters
    ----------
    spec : AnnulusSpec
        Annulus geometry.
    p : float
        Finite exponent >= 1 (use :func:`profile_minimax` for the sup norm).
    n_nodes : int
        Number of uniformly spaced sample radii.
    tol : float
        Boundary-value tolerance for the shooting; node values are then
        accurate to roughly the same level.

    Returns
    -------
    AmplitudeProfile
        Kind ``optimal`` with the shooting constant attached.
    """
    p = _check_exponent(p)
    if tol <= 0.0:
        raise ValueError(f"tolerance must be positive, got {tol!r}")
    nodes = _uniform_nodes(spec.epsilon, n_nodes)
    if spec.is_halfway:
        return AmplitudeProfile(0.5, KIND_OPTIMAL, nodes, np.log(nodes), 1.0 / nodes,
                                shooting_constant=0.0, p=p)
    eps = spec.epsilon
    quad_tol = min(1e-11, tol / 10.0)

    def slope_integrand(r, c):
        return _invert_bracketed(c / (r * r), p, tol=1e-12) / r

    def boundary_gap(c):
        if c == 0.0:
            return abs(math.log(eps)) - LOG2
        val, _ = adaptive_gauss_legendre(lambda r: slope_integrand(r, c), eps, 1.0,
                                         rel_tol=quad_tol)
        return val - LOG2

    c_hi = 0.0
    c_lo = -1.0
    gap_lo = boundary_gap(c_lo)
    doublings = 0
    while gap_lo > 0.0:
        c_lo *= 2.0
        gap_lo = boundary_gap(c_lo)
        doublings += 1
        if doublings > 60:
            raise ConvergenceError(
                f"no sign change while growing constant bracket; last C = {c_lo!r}"
            )
    # gap is increasing in C: gap(c_lo) <= 0 <= gap(0).
    c_mid = 0.5 * (c_lo + c_hi)
    for _ in range(200):
        gap_mid = boundary_gap(c_mid)
        if abs(gap_mid) <= tol:
            break
        if gap_mid >= 0.0:
            c_hi = c_mid
        else:
            c_lo = c_mid
        c_mid = 0.5 * (c_lo + c_hi)
        if c_hi - c_lo <= 1e-14 * (1.0 + abs(c_lo)):
            break
    else:
        raise ConvergenceError(
            f"shooting bisection stalled, last bracket [{c_lo!r}, {c_hi!r}]"
        )
    c0 = c_mid
    slopes = _invert_bracketed(c0 / (nodes * nodes), p, tol=1e-12) / nodes
    values = cumulative_panels(lambda r: slope_integrand(r, c0), nodes) - LOG2
    return AmplitudeProfile(eps, KIND_OPTIMAL, nodes, values, slopes,
                            shooting_constant=c0, p=p)


@dataclass(frozen=True)
class EnergyReport:
    """Energy value with its exponent, quadrature error bound, and provenance."""

    p: PNorm
    value: float
    quadrature_error_estimate: float
    profile_kind: str


def energy_p(profile: AmplitudeProfile, p: float, tol: float = 1e-9) -> EnergyReport:
    """p-energy ``2 pi * integral (1/(r f') + r f')**p r dr`` of a profile.

    Closed-form and solver kinds evaluate slopes analytically at the
    quadrature points; custom kinds integrate the interpolated slopes one
    internode panel at a time (the integrand is smooth within panels).
    """
    p = _check_exponent(p)

    def integrand(r):
        return profile.trace_at(r) ** p * r

    if profile.kind == KIND_CUSTOM:
        value, err = composite_panels(integrand, profile.nodes)
    else:
        value, err = adaptive_gauss_legendre(integrand, profile.epsilon, 1.0, rel_tol=tol)
    return EnergyReport(PNorm.finite(p), 2.0 * math.pi * value,
                        2.0 * math.pi * err, profile.kind)


def energy_inf(profile: AmplitudeProfile) -> EnergyReport:
    """Sup-norm anisotropy energy: the largest push-forward trace over the nodes."""
    worst = float(np.max(radial_trace(profile.nodes, profile.slopes)))
    return EnergyReport(PNorm.infinity(), worst, 0.0, profile.kind)


def el_residual(profile: AmplitudeProfile, p: float) -> float:
    """Deviation of a profile from the integrated optimality condition.

    Evaluates ``q(r) = r**2 * el_momentum(r f'(r), p)`` at the profile nodes
    and returns ``max |q - mean(q)| / (1 + |mean(q)|)``; zero exactly for the
    p-minimizer.
    """
    p = _check_exponent(p)
    q = profile.nodes ** 2 * el_momentum(profile.nodes * profile.slopes, p)
    center = float(np.mean(q))
    return float(np.max(np.abs(q - center))) / (1.0 + abs(center))
