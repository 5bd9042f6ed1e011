"""SVG figure builders for the profile family and the conformal ray portraits.

Rendering is headless and deterministic: the Agg backend, a fixed hash salt
for SVG element ids, glyphs embedded as paths, and no date metadata, so a
fixed configuration reproduces the same drawing.
"""

from __future__ import annotations

import math
import os
import tempfile

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .reporting import SCHEMA_VERSION, as_builtin  # noqa: E402

_SVG_RC = {
    "svg.hashsalt": "cloakmap",
    "svg.fonttype": "path",
    "figure.dpi": 100,
}


def save_figure_svg(fig, path: str, config: dict) -> None:
    """Atomically write the figure as self-contained SVG 1.1."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    description = f"schema_version={SCHEMA_VERSION} config=" + " ".join(
        f"{k}={v}" for k, v in sorted(as_builtin(config).items())
    )
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".svg")
    os.close(fd)
    try:
        with plt.rc_context(_SVG_RC):
            fig.savefig(tmp, format="svg",
                        metadata={"Date": None, "Description": description})
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    finally:
        plt.close(fig)


def profile_family_figure(curves: list, epsilon: float):
    """Amplitude profiles over radius: affine dashed, the optimal family solid.

    ``curves`` holds dicts with keys ``label``, ``kind``, ``r``, ``f``; solid
    curves are color-ramped in the given order.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    solid = [c for c in curves if c["kind"] != "affine"]
    ramp = plt.get_cmap("viridis")(np.linspace(0.0, 0.92, max(len(solid), 1)))
    solid_index = 0
    for curve in curves:
        if curve["kind"] == "affine":
            ax.plot(curve["r"], curve["f"], "k--", linewidth=1.4,
                    label=curve["label"])
        else:
            ax.plot(curve["r"], curve["f"], color=ramp[solid_index],
                    linewidth=1.4, label=curve["label"])
            solid_index += 1
    ax.set_xlabel("r")
    ax.set_ylabel("log-amplitude")
    ax.set_xlim(0.0, 1.0)
    ax.axhline(0.0, color="0.8", linewidth=0.6, zorder=0)
    ax.axhline(-math.log(2.0), color="0.8", linewidth=0.6, zorder=0)
    ax.legend(loc="lower right", fontsize=8, ncol=2)
    ax.set_title(f"amplitude profiles, inner radius {epsilon:g}")
    fig.tight_layout()
    return fig


def _closed_curve(analytic, radius: float, n: int = 256) -> np.ndarray:
    angles = np.linspace(0.0, 2.0 * math.pi, n + 1)
    z = np.asarray(analytic.inverse(radius * np.exp(1j * angles)), dtype=complex)
    return np.stack([z.real, z.imag], axis=-1)


def conformal_panels_figure(rays: list, analytic, epsilon: float):
    """Four-panel ray portrait: reference annulus and curved domain, before/after.

    The left column shows the hole of radius epsilon with rays crossing the
    whole annulus; the right column shows the cloaked state, where the hole
    has grown to radius one half and every ray occupies only the outer part
    of its original track.
    """
    fig, axes = plt.subplots(2, 2, figsize=(8.0, 8.0))
    colors = plt.get_cmap("hsv")(np.linspace(0.0, 1.0, len(rays), endpoint=False))

    def draw(ax, curves, inner_radius, in_domain):
        for curve, color in zip(curves, colors):
            ax.plot(curve[:, 0], curve[:, 1], color=color, linewidth=1.0)
        for radius, style in ((inner_radius, "-"), (1.0, "-")):
            ring = (_closed_curve(analytic, radius) if in_domain else
                    np.stack([radius * np.cos(np.linspace(0, 2 * math.pi, 257)),
                              radius * np.sin(np.linspace(0, 2 * math.pi, 257))], axis=-1))
            ax.plot(ring[:, 0], ring[:, 1], style, color="0.2", linewidth=1.2)
        ax.set_aspect("equal")
        ax.set_xticks([])
        ax.set_yticks([])

    t_ref = np.linspace(epsilon, 1.0, 64)
    ref_before, ref_after = [], []
    for ray in rays:
        direction = np.array([math.cos(ray.angle), math.sin(ray.angle)])
        ref_before.append(t_ref[:, None] * direction[None, :])
        # In the reference annulus the cloaked ray spans [1/2, 1] by construction.
        ref_after.append(np.linspace(0.5, 1.0, 64)[:, None] * direction[None, :])
    draw(axes[0, 0], ref_before, epsilon, in_domain=False)
    axes[0, 0].set_title("reference annulus")
    draw(axes[0, 1], ref_after, 0.5, in_domain=False)
    axes[0, 1].set_title("reference, cloaked")
    draw(axes[1, 0], [ray.source for ray in rays], epsilon, in_domain=True)
    axes[1, 0].set_title("curved domain")
    draw(axes[1, 1], [ray.image for ray in rays], 0.5, in_domain=True)
    axes[1, 1].set_title("curved domain, cloaked")
    fig.tight_layout()
    return fig
