"""Command-line front end: solves, figures, verification suites, conformal demos.

Subcommands
-----------
solve
    Solve optimal amplitude profiles and write per-profile CSV tables plus a
    JSON envelope with shooting constants and energies.
figure-profiles
    Emit the eight-curve amplitude-profile figure (affine profile dashed, the
    optimal family and the sup-norm profile solid) as SVG with the underlying
    CSV table.
verify
    Run the optimality certificate suite (integrated and two-dimensional
    Euler-Lagrange residuals, both perturbation suites, the Hessian bound
    sampling) and write a JSON report; exit 0 iff every check passes.
conformal
    Sample rays through a conformally transferred cloak, render the
    four-panel before/after figure, and report the trace-identity deviation
    and the Jacobian-weighted energy.

Settings resolve as: command-line flags, then config-file keys, then
defaults.  The config file is a flat ``key = value`` text format; see the
README for the key list.  Exit codes: 0 success, 2 validation error,
3 solver/computation failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .conformal import (
    BUILTIN_MAP_NAMES,
    ComposedCloakMap,
    builtin_map,
    modified_energy,
    pushforward_trace_at,
    sample_rays,
)
from .core import AnnulusSpec, PNorm, radial_trace
from .errors import CloakMapError, ConvergenceError, UnknownMapError
from .figures import conformal_panels_figure, profile_family_figure, save_figure_svg
from .radial import (
    KIND_OPTIMAL,
    AmplitudeProfile,
    el_residual,
    energy_inf,
    energy_p,
    profile_affine,
    profile_from_slopes,
    profile_minimax,
    solve_optimal_profile,
)
from .reporting import ResultEnvelope, write_csv_atomic, write_json_atomic
from .variational import (
    PolarGrid,
    el_residual_2d,
    hessian_lower_bound_check,
    lift_angle,
    lift_profile,
    perturb_psi_test,
    perturb_theta_test,
)

#: Profile exponents drawn in the family figure, in drawing order.
FIGURE_EXPONENTS = (1, 2, 3, 5, 8, 13)

#: Threshold for the integrated Euler-Lagrange residual check.
RESIDUAL_PASS = 1e-8

#: A two-dimensional residual below this is treated as quadrature noise.
RESIDUAL_2D_FLOOR = 1e-9

#: Minimum residual decrease per refinement accepted by the 2D check.
RESIDUAL_2D_RATIO = 1.5

_COMMAND_FORMATS = {
    "solve": ("csv", "json"),
    "figure-profiles": ("csv", "json", "svg"),
    "verify": ("json",),
    "conformal": ("json", "svg"),
}

_DEFAULTS = {
    "solve": {"epsilon": 0.1, "p": ("2",), "format": "csv,json"},
    "figure-profiles": {"epsilon": 0.01, "p": ("2",), "format": "csv,svg"},
    "verify": {"epsilon": 0.1, "p": ("2",), "format": "json"},
    "conformal": {"epsilon": 0.1, "p": ("2",), "format": "json,svg"},
}

_COMMON_DEFAULTS = {
    "nodes": "512",
    "grid": "64x128",
    "tol": "1e-10",
    "seed": "0",
    "out": ".",
    "map": "sinh",
    "rays": "19",
    "points": "64",
    "amplitude": "0.05",
    "perturbations": "50",
    "sabotage": "false",
}

_CONFIG_KEYS = frozenset(
    ["epsilon", "p", "nodes", "grid", "tol", "seed", "out", "format",
     "map", "rays", "points", "amplitude", "perturbations", "sabotage"]
)


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for one command invocation."""

    command: str
    epsilon: float
    p_list: tuple
    nodes: int
    grid_shape: tuple
    tol: float
    seed: int
    out_dir: str
    formats: tuple
    map_name: str
    n_rays: int
    n_points: int
    amplitude: float
    n_pert: int
    sabotage: bool

    def echo(self) -> dict:
        return {
            "command": self.command,
            "epsilon": self.epsilon,
            "p": [str(p) for p in self.p_list],
            "nodes": self.nodes,
            "grid": f"{self.grid_shape[0]}x{self.grid_shape[1]}",
            "tol": self.tol,
            "seed": self.seed,
            "format": ",".join(self.formats),
            "map": self.map_name,
            "rays": self.n_rays,
            "points": self.n_points,
            "amplitude": self.amplitude,
            "perturbations": self.n_pert,
            "sabotage": self.sabotage,
        }


def _parse_p_token(token: str) -> PNorm:
    token = token.strip()
    if token.lower() == "inf":
        return PNorm.infinity()
    try:
        value = float(token)
    except ValueError:
        raise ValueError(f"exponent {token!r} is neither a number nor 'inf'") from None
    return PNorm.finite(value)


def _parse_grid(token: str) -> tuple:
    parts = token.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"grid {token!r} must look like NRxNP, e.g. 64x128")
    try:
        n_r, n_phi = int(parts[0]), int(parts[1])
    except ValueError:
        raise ValueError(f"grid {token!r} must hold two integers") from None
    return n_r, n_phi


def _parse_bool(token: str) -> bool:
    lowered = str(token).strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"boolean setting must be true/false, got {token!r}")


def parse_config_file(path: str) -> dict:
    """Flat ``key = value`` settings; '#' starts a comment, blank lines skipped."""
    settings = {}
    try:
        with open(path, "r") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise ValueError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ValueError(
                f"{path}:{lineno}: unknown setting {key!r} "
                f"(known: {', '.join(sorted(_CONFIG_KEYS))})"
            )
        settings[key] = value
    return settings


def _resolve(args: argparse.Namespace) -> RunConfig:
    file_settings = parse_config_file(args.config) if args.config else {}
    command = args.command

    def setting(key: str, flag_value):
        if flag_value is not None:
            return flag_value
        if key in file_settings:
            return file_settings[key]
        if key in _DEFAULTS[command]:
            return _DEFAULTS[command][key]
        return _COMMON_DEFAULTS[key]

    raw_p = setting("p", tuple(args.p) if args.p else None)
    if isinstance(raw_p, str):
        raw_p = tuple(tok for tok in raw_p.split(",") if tok.strip())
    p_list = tuple(_parse_p_token(tok) for tok in raw_p)
    if not p_list:
        raise ValueError("at least one exponent is required")

    epsilon = float(setting("epsilon", args.epsilon))
    if not 0.0 < epsilon <= 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2], got {epsilon}")
    nodes = int(setting("nodes", args.nodes))
    if nodes < 2:
        raise ValueError("nodes must be at least 2")
    grid_shape = _parse_grid(str(setting("grid", args.grid)))
    if grid_shape[0] < 8 or grid_shape[1] < 16:
        raise ValueError("grid needs at least 8 radii and 16 angles")
    tol = float(setting("tol", args.tol))
    if not 0.0 < tol <= 1e-2:
        raise ValueError("tol must lie in (0, 1e-2]")
    seed = int(setting("seed", args.seed))
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    formats_raw = str(setting("format", args.format))
    formats = tuple(tok.strip() for tok in formats_raw.split(",") if tok.strip())
    supported = _COMMAND_FORMATS[command]
    unknown = [fmt for fmt in formats if fmt not in supported]
    if unknown or not formats:
        raise ValueError(
            f"command {command} supports formats {', '.join(supported)}; "
            f"got {formats_raw!r}"
        )
    map_name = str(setting("map", getattr(args, "map", None)))
    n_rays = int(setting("rays", getattr(args, "rays", None)))
    if n_rays < 1:
        raise ValueError("rays must be at least 1")
    n_points = int(setting("points", getattr(args, "points", None)))
    if n_points < 2:
        raise ValueError("points must be at least 2")
    amplitude = float(setting("amplitude", None))
    if amplitude < 0.0:
        raise ValueError("amplitude must be nonnegative")
    n_pert = int(setting("perturbations", None))
    if n_pert < 1:
        raise ValueError("perturbations must be at least 1")
    sabotage_raw = setting("sabotage", getattr(args, "sabotage", None))
    sabotage = sabotage_raw if isinstance(sabotage_raw, bool) else _parse_bool(sabotage_raw)

    return RunConfig(
        command=command,
        epsilon=epsilon,
        p_list=p_list,
        nodes=nodes,
        grid_shape=grid_shape,
        tol=tol,
        seed=seed,
        out_dir=str(setting("out", args.out)),
        formats=formats,
        map_name=map_name,
        n_rays=n_rays,
        n_points=n_points,
        amplitude=amplitude,
        n_pert=n_pert,
        sabotage=sabotage,
    )


def _format_p(p: PNorm) -> str:
    return "inf" if not p.is_finite else format(p.value, "g")


def _profile_for(spec: AnnulusSpec, p: PNorm, nodes: int, tol: float) -> AmplitudeProfile:
    if p.is_finite:
        return solve_optimal_profile(spec, p.value, n_nodes=nodes, tol=tol)
    return profile_minimax(spec, n_nodes=nodes)


def cmd_solve(config: RunConfig) -> int:
    spec = AnnulusSpec(config.epsilon)
    blocks = []
    for p in config.p_list:
        profile = _profile_for(spec, p, config.nodes, config.tol)
        traces = profile.trace_at(profile.nodes)
        csv_name = None
        if "csv" in config.formats:
            csv_name = f"profile_eps{config.epsilon:g}_p{_format_p(p)}.csv"
            rows = zip(profile.nodes, profile.values, profile.slopes, traces)
            write_csv_atomic(os.path.join(config.out_dir, csv_name),
                             ["r", "f", "fprime", "trace"], rows, config.echo())
        if p.is_finite:
            report = energy_p(profile, p.value)
            energy = report.value
        else:
            energy = energy_inf(profile).value
        blocks.append({
            "epsilon": config.epsilon,
            "p": str(p),
            "kind": profile.kind,
            "n_nodes": int(profile.nodes.size),
            "shooting_constant": profile.shooting_constant,
            "energy": energy,
            "sup_trace": energy_inf(profile).value,
            "csv": csv_name,
        })
    if "json" in config.formats:
        envelope = ResultEnvelope.build(config.echo(), {"profiles": blocks})
        write_json_atomic(os.path.join(config.out_dir, "solve.json"), envelope)
    return 0


def _family_curves(config: RunConfig) -> list:
    spec = AnnulusSpec(config.epsilon)
    radii = np.linspace(config.epsilon, 1.0, config.nodes)
    curves = [{"label": "affine", "kind": "affine",
               "profile": profile_affine(spec, n_nodes=config.nodes)}]
    for p in FIGURE_EXPONENTS:
        curves.append({"label": f"p={p}", "kind": KIND_OPTIMAL,
                       "profile": solve_optimal_profile(
                           spec, float(p), n_nodes=config.nodes, tol=config.tol)})
    curves.append({"label": "minimax", "kind": "minimax",
                   "profile": profile_minimax(spec, n_nodes=config.nodes)})
    for curve in curves:
        curve["r"] = radii
        curve["f"] = curve["profile"].value_at(radii)
    return curves


def cmd_figure_profiles(config: RunConfig) -> int:
    curves = _family_curves(config)
    if "csv" in config.formats:
        rows = [(c["label"], r, f) for c in curves for r, f in zip(c["r"], c["f"])]
        write_csv_atomic(os.path.join(config.out_dir, "profile_family.csv"),
                         ["curve", "r", "f"], rows, config.echo())
    if "json" in config.formats:
        blocks = [{
            "label": c["label"],
            "kind": c["profile"].kind,
            "inner_value": float(c["f"][0]),
            "outer_value": float(c["f"][-1]),
        } for c in curves]
        envelope = ResultEnvelope.build(config.echo(), {"curves": blocks})
        write_json_atomic(os.path.join(config.out_dir, "profile_family.json"), envelope)
    if "svg" in config.formats:
        fig = profile_family_figure(curves, config.epsilon)
        save_figure_svg(fig, os.path.join(config.out_dir, "profile_family.svg"),
                        config.echo())
    return 0


def _sabotaged(profile: AmplitudeProfile, spec: AnnulusSpec) -> AmplitudeProfile:
    # Deterministic smooth slope corruption, renormalized back to admissibility.
    rho = (profile.nodes - spec.epsilon) / (1.0 - spec.epsilon)
    slopes = profile.slopes * (1.0 + 0.3 * np.sin(math.pi * rho))
    return profile_from_slopes(spec, profile.nodes, slopes, normalize=True)


def _residual_2d_component_ok(coarse: float, fine: float) -> bool:
    if fine <= RESIDUAL_2D_FLOOR and coarse <= RESIDUAL_2D_FLOOR:
        return True
    return fine > 0.0 and coarse / fine >= RESIDUAL_2D_RATIO


def cmd_verify(config: RunConfig) -> int:
    spec = AnnulusSpec(config.epsilon)
    grid = PolarGrid.uniform(config.epsilon, *config.grid_shape)
    checks = []
    finite_ps = [p for p in config.p_list if p.is_finite] or [PNorm.finite(2.0)]

    residual_block = []
    for p in finite_ps:
        profile = solve_optimal_profile(spec, p.value, n_nodes=config.nodes,
                                        tol=config.tol)
        if config.sabotage:
            profile = _sabotaged(profile, spec)
        value = el_residual(profile, p.value)
        residual_block.append({"p": str(p), "residual": value,
                               "threshold": RESIDUAL_PASS,
                               "passed": value <= RESIDUAL_PASS})
    checks.append({"name": "el_residual",
                   "passed": all(b["passed"] for b in residual_block),
                   "cases": residual_block})

    residual2d_block = []
    fine_grid = grid.refined()
    for p in finite_ps:
        profile = solve_optimal_profile(spec, p.value, n_nodes=config.nodes,
                                        tol=config.tol)
        coarse = el_residual_2d(lift_profile(profile, grid), lift_angle(grid), p.value)
        fine = el_residual_2d(lift_profile(profile, fine_grid), lift_angle(fine_grid),
                              p.value)
        ok = all(_residual_2d_component_ok(c, f) for c, f in zip(coarse, fine))
        residual2d_block.append({
            "p": str(p),
            "coarse": {"psi": coarse.psi_equation, "theta": coarse.theta_equation,
                       "boundary": coarse.boundary},
            "fine": {"psi": fine.psi_equation, "theta": fine.theta_equation,
                     "boundary": fine.boundary},
            "passed": ok,
        })
    checks.append({"name": "el_residual_2d",
                   "passed": all(b["passed"] for b in residual2d_block),
                   "cases": residual2d_block})

    def suite_block(report):
        return {
            "baseline_energy": report.baseline_energy,
            "slack": report.slack,
            "n_violations": len(report.violations),
            "perturbed_energies": [[int(i), float(e)]
                                   for i, e in report.perturbed_energies],
            "passed": report.passed,
        }

    psi_block, theta_block = [], []
    for p in finite_ps:
        report = perturb_psi_test(spec, p.value, n_pert=config.n_pert,
                                  amplitude=config.amplitude, seed=config.seed,
                                  grid=grid, solver_nodes=config.nodes)
        psi_block.append({"p": str(p), **suite_block(report)})
        report = perturb_theta_test(spec, KIND_OPTIMAL, p.value, n_pert=config.n_pert,
                                    amplitude=config.amplitude, seed=config.seed,
                                    grid=grid)
        theta_block.append({"p": str(p), **suite_block(report)})
    checks.append({"name": "perturb_psi",
                   "passed": all(b["passed"] for b in psi_block), "cases": psi_block})
    checks.append({"name": "perturb_theta",
                   "passed": all(b["passed"] for b in theta_block), "cases": theta_block})

    hessian_block = []
    for amp, radius in ((1.0, 1.0), (1.0, 3.0), (2.0, 1.0), (2.0, 3.0)):
        for p in finite_ps:
            outcome = hessian_lower_bound_check(amp, radius, p.value,
                                                n_samples=200, seed=config.seed)
            hessian_block.append({"amp": amp, "radius": radius, "p": str(p),
                                  "bound": outcome.bound,
                                  "passed": bool(outcome)})
    checks.append({"name": "hessian_bound",
                   "passed": all(b["passed"] for b in hessian_block),
                   "cases": hessian_block})

    all_passed = all(check["passed"] for check in checks)
    envelope = ResultEnvelope.build(config.echo(),
                                    {"checks": checks, "all_passed": all_passed})
    write_json_atomic(os.path.join(config.out_dir, "verify.json"), envelope)
    if not all_passed:
        first = next(check["name"] for check in checks if not check["passed"])
        print(f"verification failed: {first}", file=sys.stderr)
        return 4
    return 0


def _trace_identity_deviation(m: ComposedCloakMap, n_radii: int = 32,
                              n_angles: int = 64) -> float:
    radii = np.linspace(m.epsilon, 1.0, n_radii + 2)[1:-1]
    angles = np.arange(n_angles) * (2.0 * math.pi / n_angles)
    worst = 0.0
    for rho in radii:
        points = np.asarray(m.analytic.inverse(rho * np.exp(1j * angles)),
                            dtype=complex)
        expected = radial_trace(float(rho), float(m.profile.slope_at(rho)))
        for z in points:
            measured = pushforward_trace_at(m, complex(z))
            worst = max(worst, abs(measured - expected))
    return worst


def cmd_conformal(config: RunConfig) -> int:
    analytic = builtin_map(config.map_name)
    spec = AnnulusSpec(config.epsilon)
    p = config.p_list[0]
    profile = _profile_for(spec, p, config.nodes, config.tol)
    m = ComposedCloakMap(analytic, profile)
    rays = sample_rays(m, config.n_rays, config.n_points)

    results = {
        "map": analytic.tag,
        "epsilon": config.epsilon,
        "p": str(p),
        "trace_identity_max_deviation": _trace_identity_deviation(m),
        "rays": [{
            "angle": ray.angle,
            "source": ray.source,
            "image": ray.image,
        } for ray in rays],
    }
    if p.is_finite:
        grid = PolarGrid.uniform(config.epsilon, *config.grid_shape)
        results["modified_energy"] = modified_energy(m, p.value, grid)
        results["radial_energy"] = energy_p(profile, p.value).value

    if "json" in config.formats:
        envelope = ResultEnvelope.build(config.echo(), results)
        write_json_atomic(os.path.join(config.out_dir, "conformal.json"), envelope)
    if "svg" in config.formats:
        fig = conformal_panels_figure(rays, analytic, config.epsilon)
        save_figure_svg(fig, os.path.join(config.out_dir, "conformal.svg"),
                        config.echo())
    return 0


_COMMANDS = {
    "solve": cmd_solve,
    "figure-profiles": cmd_figure_profiles,
    "verify": cmd_verify,
    "conformal": cmd_conformal,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--epsilon", type=float, default=None,
                        help="inner radius of the reference annulus, in (0, 1/2]")
    common.add_argument("--p", action="append", default=None, metavar="P",
                        help="energy exponent (repeatable); a number >= 1 or 'inf'")
    common.add_argument("--nodes", type=int, default=None,
                        help="radial nodes for profile solves")
    common.add_argument("--grid", default=None, metavar="NRxNP",
                        help="polar grid shape for 2D checks, e.g. 64x128")
    common.add_argument("--tol", type=float, default=None,
                        help="root-finding tolerance for the profile solver")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for randomized suites")
    common.add_argument("--out", default=None, metavar="DIR",
                        help="output directory")
    common.add_argument("--format", default=None,
                        help="comma-separated outputs: subset of csv,json,svg")
    common.add_argument("--config", default=None, metavar="FILE",
                        help="flat key=value settings file")

    parser = argparse.ArgumentParser(
        prog="cloakmap",
        description="Anisotropy-minimizing cloaking transformations on annuli.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common],
                   help="solve optimal amplitude profiles")
    sub.add_parser("figure-profiles", parents=[common],
                   help="render the amplitude-profile family figure")
    verify = sub.add_parser("verify", parents=[common],
                            help="run the optimality certificate suite")
    verify.add_argument("--sabotage", action="store_const", const=True, default=None,
                        help="corrupt the solved profile first (negative control)")
    conformal = sub.add_parser("conformal", parents=[common],
                               help="transfer the cloak through a conformal map")
    conformal.add_argument("--map", default=None,
                           help="built-in analytic map: " + ", ".join(BUILTIN_MAP_NAMES)
                           + " (alias sinh)")
    conformal.add_argument("--rays", type=int, default=None,
                           help="number of rays to sample")
    conformal.add_argument("--points", type=int, default=None,
                           help="points per ray polyline")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        config = _resolve(args)
    except (ValueError, UnknownMapError) as exc:
        print(f"cloakmap: invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[config.command](config)
    except UnknownMapError as exc:
        print(f"cloakmap: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"cloakmap: solver failed: {exc}", file=sys.stderr)
        return 3
    except CloakMapError as exc:
        print(f"cloakmap: computation failed: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())
