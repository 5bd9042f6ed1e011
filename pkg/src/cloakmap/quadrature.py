"""Adaptive composite Gauss-Legendre quadrature on an interval.

A 7-point rule is applied per panel; panels whose halves disagree with the
parent estimate beyond their share of the tolerance are bisected.  Pending
panels are evaluated in batches so the integrand is always called on arrays.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError

_NODES7, _WEIGHTS7 = np.polynomial.legendre.leggauss(7)


def _panel_values(fn, lo, hi):
    """Integral estimates of ``fn`` over each ``[lo_i, hi_i]`` with one 7-point panel."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[:, None] + half[:, None] * _NODES7[None, :]
    vals = np.asarray(fn(pts.ravel()), dtype=float).reshape(pts.shape)
    return half * (vals @ _WEIGHTS7)


def adaptive_gauss_legendre(fn, a: float, b: float, rel_tol: float = 1e-9,
                            abs_tol: float = 0.0, max_depth: int = 48):
    """Integrate ``fn`` over ``[a, b]`` to a relative tolerance.

    Parameters
    ----------
    fn : callable
        Vectorized integrand mapping a 1-d array of points to values.
    a, b : float
        Integration limits, ``a < b``.
    rel_tol : float
        Target relative accuracy; each panel receives a tolerance share
        proportional to its width.
    abs_tol : float
        Absolute floor added to the tolerance, for integrals near zero.
    max_depth : int
        Bisection depth limit; exceeding it raises a convergence error.

    Returns
    -------
    (value, error_estimate) : tuple of float
        The integral and an upward-biased estimate of the quadrature error.
    """
    if not b > a:
        raise ValueError(f"require a < b, got [{a!r}, {b!r}]")
    width = b - a
    lo = np.array([a])
    hi = np.array([b])
    parent = _panel_values(fn, lo, hi)
    accepted = 0.0
    err_total = 0.0
    for _ in range(max_depth):
        mid = 0.5 * (lo + hi)
        left = _panel_values(fn, lo, mid)
        right = _panel_values(fn, mid, hi)
        child = left + right
        scale = max(abs(accepted + float(np.sum(child))), 1e-300)
        share = (rel_tol * scale + abs_tol) * (hi - lo) / width
        err = np.abs(child - parent)
        done = err <= share
        accepted += float(np.sum(child[done]))
        err_total += float(np.sum(err[done]))
        if np.all(done):
            return accepted, err_total
        keep = ~done
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        parent = np.concatenate([left[keep], right[keep]])
    raise ConvergenceError(
        f"adaptive quadrature did not converge on [{a}, {b}] within depth {max_depth}; "
        f"{lo.size} panels still open, smallest width {float(np.min(hi - lo))!r}"
    )


def composite_panels(fn, edges, refinements: int = 1):
    """Composite 7-point rule over fixed panels with a refinement error estimate.

    ``edges`` are strictly increasing panel boundaries.  The value returned is
    computed on panels split ``refinements`` times; the error estimate is the
    difference from the unsplit composite rule.  Intended for integrands that
    are smooth within panels but only piecewise smooth globally, e.g. linearly
    interpolated slope samples.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly increasing with at least two entries")
    coarse = float(np.sum(_panel_values(fn, edges[:-1], edges[1:])))
    fine_edges = edges
    for _ in range(refinements):
        mids = 0.5 * (fine_edges[:-1] + fine_edges[1:])
        fine_edges = np.sort(np.concatenate([fine_edges, mids]))
    fine = float(np.sum(_panel_values(fn, fine_edges[:-1], fine_edges[1:])))
    return fine, abs(fine - coarse)


def cumulative_panels(fn, nodes):
    """Running integral of ``fn`` from ``nodes[0]`` to every node.

    One 7-point panel per internode interval, evaluated in a single batched
    call; returns an array aligned with ``nodes`` starting at 0.
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or nodes.size < 2 or np.any(np.diff(nodes) <= 0):
        raise ValueError("nodes must be strictly increasing with at least two entries")
    panels = _panel_values(fn, nodes[:-1], nodes[1:])
    out = np.empty(nodes.size, dtype=float)
    out[0] = 0.0
    np.cumsum(panels, out=out[1:])
    return out
