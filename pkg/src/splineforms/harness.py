"""Benchmark drivers: manufactured convergence, rotating annulus, lid cavity.

Each runner assembles the mixed system at one or more refinement levels,
solves, and measures L2 errors with quadrature two orders above the
assembly rule.  Output files are plain text and bit-reproducible for a
fixed configuration.
"""

from __future__ import annotations

import subprocess
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla

from . import __version__
from .assembly import (
    _PatchGrid,
    apply_strong_normal_velocity,
    apply_weak_tangential_velocity,
    assemble_vvp,
    solve,
)
from .errors import ConstructionError
from .geometry import build_taylor_couette, curved_square_patch, unit_square_patch
from .spaces import DiscreteForm, vvp_spaces
from .splines import Basis1D, KnotVector, uniform_open_knots

__all__ = [
    "CaseConfig",
    "ConvergenceRecord",
    "CavityResult",
    "run_manufactured",
    "run_taylor_couette",
    "run_cavity",
    "emit_outputs",
    "manufactured_fields",
    "couette_speed",
]

CASES = ("manufactured", "taylor-couette", "cavity")
GEOMETRIES = ("unit-square", "curved-square", "annulus")


@dataclass
class CaseConfig:
    """Parameters of one benchmark run."""

    case: str = "manufactured"
    degree: int = 2  # velocity/pressure degree; vorticity is one higher
    levels: int = 4
    geometry: str = ""  # default depends on the case
    nu: float = 1.0
    quad: int | None = None
    out_dir: str = "out"
    base_spans: int = 4
    spans: int | None = None  # cavity resolution (spans per direction)
    profile_points: int = 101
    field_points: int = 101

    def __post_init__(self):
        if self.case not in CASES:
            raise ConstructionError(f"unknown case {self.case!r}; pick from {CASES}")
        if not self.geometry:
            self.geometry = {
                "manufactured": "unit-square",
                "taylor-couette": "annulus",
                "cavity": "unit-square",
            }[self.case]
        if self.case == "manufactured" and self.geometry not in ("unit-square", "curved-square"):
            raise ConstructionError("manufactured case runs on unit-square or curved-square")
        if self.case == "taylor-couette" and self.geometry != "annulus":
            raise ConstructionError("taylor-couette runs on the annulus")
        if self.degree < 1:
            raise ConstructionError("degree must be >= 1")
        if self.levels < 1:
            raise ConstructionError("levels must be >= 1")


@dataclass
class ConvergenceRecord:
    """Per-level error summary (pressure-constancy deviation where relevant)."""

    level: int
    h_max: float
    dofs: int
    err_w: float
    err_u: float
    err_p: float
    div_max: float
    extra: dict = field(default_factory=dict)


@dataclass
class CavityResult:
    spans: int
    degree: int
    dofs: int
    div_max: float
    y_line: np.ndarray
    vx_centerline: np.ndarray
    x_line: np.ndarray
    vy_centerline: np.ndarray
    fields: dict  # name -> (101, 101) arrays on the uniform sample grid
    stream_residual: float


# -- analytic data ------------------------------------------------------------


def manufactured_fields():
    """Sinusoidal closed-form Stokes solution on the unit square.

    Velocity is given through its flux-form components (dx, dy); the
    pressure density consistent with the forcing below is
    -sin(pi x) sin(pi y), reported with its mean removed to match the
    zero-mean gauge of the solver.
    """
    pi = np.pi

    def omega(x, y):
        return -4.0 * pi * np.sin(2 * pi * x) * np.sin(2 * pi * y)

    def u_dx(x, y):
        return -np.cos(2 * pi * x) * np.sin(2 * pi * y)

    def u_dy(x, y):
        return -np.sin(2 * pi * x) * np.cos(2 * pi * y)

    def velocity(x, y):
        return u_dy(x, y), -u_dx(x, y)

    def f_dx(x, y):
        return -8 * pi**2 * np.cos(2 * pi * x) * np.sin(2 * pi * y) - pi * np.sin(
            pi * x
        ) * np.cos(pi * y)

    def f_dy(x, y):
        return -8 * pi**2 * np.sin(2 * pi * x) * np.cos(2 * pi * y) + pi * np.cos(
            pi * x
        ) * np.sin(pi * y)

    def pressure(x, y):
        return -np.sin(pi * x) * np.sin(pi * y) + 4.0 / pi**2

    return {
        "omega": omega,
        "u_dx": u_dx,
        "u_dy": u_dy,
        "velocity": velocity,
        "forcing": (f_dx, f_dy),
        "pressure": pressure,
    }


def couette_speed(r, r_in: float = 1.0, r_out: float = 2.0, omega_in: float = 1.0):
    """Azimuthal speed of flow between a rotating inner and fixed outer cylinder."""
    a = -omega_in * r_in**2 / (r_out**2 - r_in**2)
    b = omega_in * r_in**2 * r_out**2 / (r_out**2 - r_in**2)
    return a * r + b / r


# -- shared machinery ----------------------------------------------------------


def _bases(degree_nodal: int, spans: int):
    kv = KnotVector(uniform_open_knots(degree_nodal, spans), degree_nodal)
    kv2 = KnotVector(uniform_open_knots(degree_nodal, spans), degree_nodal)
    return Basis1D(kv), Basis1D(kv2)


def _h_max(patches, triples) -> float:
    worst = 0.0
    for (s0, _, _), patch in zip(triples, patches):
        corners = patch.map_grid(s0.nodal_bases[0].breakpoints, s0.nodal_bases[1].breakpoints)
        d1 = np.linalg.norm(corners[1:, 1:] - corners[:-1, :-1], axis=-1)
        d2 = np.linalg.norm(corners[1:, :-1] - corners[:-1, 1:], axis=-1)
        worst = max(worst, d1.max(), d2.max())
    return worst / np.sqrt(2.0)


def _physical_velocity(grid: _PatchGrid, fu):
    """Velocity vector components at the grid's quadrature points."""
    u1 = grid.reconstruct(fu, 0)
    u2 = grid.reconstruct(fu, 1)
    a = grid.jac[..., 0, 0]
    b = grid.jac[..., 0, 1]
    c = grid.jac[..., 1, 0]
    d = grid.jac[..., 1, 1]
    comp_x = (d * u1 - c * u2) / grid.det
    comp_y = (-b * u1 + a * u2) / grid.det
    return comp_y, -comp_x  # flux form (a dy - b dx) carries the vector (a, b)


def _solution_errors(solution, exact, extra_quad: int = 2, quad=None):
    """L2 errors of (omega, velocity, pressure density) over all patches."""
    sysm = solution.system
    e_w2 = e_u2 = e_p2 = 0.0
    div_pt = 0.0
    rng = np.random.default_rng(1234)
    for p, patch in enumerate(sysm.patches):
        spaces = sysm.spaces[p]
        grid = _PatchGrid(spaces[0].nodal_bases, patch, n_quad=quad, extra=extra_quad)
        W = np.outer(grid.w[0].ravel(), grid.w[1].ravel()) * grid.det
        X = grid.phys[..., 0]
        Y = grid.phys[..., 1]
        fo, fu, fp = solution.forms(p)
        e_w2 += np.sum(W * (grid.reconstruct(fo, 0) - exact["omega"](X, Y)) ** 2)
        vx, vy = _physical_velocity(grid, fu)
        vx_e, vy_e = exact["velocity"](X, Y)
        e_u2 += np.sum(W * ((vx - vx_e) ** 2 + (vy - vy_e) ** 2))
        p_h = grid.reconstruct(fp, 0) / grid.det
        e_p2 += np.sum(W * (p_h - exact["pressure"](X, Y)) ** 2)
        # pointwise physical divergence at ~500 random interior points
        ax = np.sort(rng.uniform(0.01, 0.99, 23))
        ay = np.sort(rng.uniform(0.01, 0.99, 22))
        dvals = fu.exterior_derivative().eval_grid((ax, ay))[0]
        _, det = patch.jacobian_grid(ax, ay)
        div_pt = max(div_pt, float(np.abs(dvals / det).max()))
    return np.sqrt(e_w2), np.sqrt(e_u2), np.sqrt(e_p2), div_pt


def rates(records):
    """Per-level convergence rates (nan for the first level)."""
    out = []
    for i, rec in enumerate(records):
        if i == 0:
            out.append((np.nan, np.nan, np.nan))
            continue
        prev = records[i - 1]
        dh = np.log(prev.h_max / rec.h_max)
        out.append(
            tuple(
                np.log(getattr(prev, k) / getattr(rec, k)) / dh
                for k in ("err_w", "err_u", "err_p")
            )
        )
    return out


# -- runners -------------------------------------------------------------------


def run_manufactured(config: CaseConfig):
    """Convergence study of the sinusoidal solution on Cartesian or curved grids."""
    exact = manufactured_fields()
    patch = unit_square_patch() if config.geometry == "unit-square" else curved_square_patch()
    records = []
    last = None
    for level in range(config.levels):
        spans = config.base_spans * 2**level
        triples = [vvp_spaces(_bases(config.degree + 1, spans))]
        system = assemble_vvp(
            triples[0], patch, nu=config.nu, forcing=exact["forcing"], n_quad=config.quad
        )
        apply_strong_normal_velocity(system, exact["velocity"])
        apply_weak_tangential_velocity(system, exact["velocity"])
        solution = solve(system)
        div_max = np.abs(solution.divergence_cochain(0)).max()
        e_w, e_u, e_p, div_pt = _solution_errors(solution, exact, quad=config.quad)
        records.append(
            ConvergenceRecord(
                level=level,
                h_max=_h_max([patch], triples),
                dofs=system.size,
                err_w=e_w,
                err_u=e_u,
                err_p=e_p,
                div_max=div_max,
                extra={"div_pointwise": div_pt, "residual": solution.residual},
            )
        )
        last = (solution, triples)
    return records, last


def run_taylor_couette(config: CaseConfig):
    """Annulus flow between a rotating inner and a fixed outer cylinder."""
    multipatch = build_taylor_couette()
    exact = {
        "omega": lambda x, y: np.full_like(np.asarray(x, dtype=float), -2.0 / 3.0),
        "velocity": lambda x, y: (
            -couette_speed(np.hypot(x, y)) * y / np.hypot(x, y),
            couette_speed(np.hypot(x, y)) * x / np.hypot(x, y),
        ),
        "pressure": lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
    }
    tangential = {}
    for p in range(4):
        tangential[(p, "left")] = lambda x, y: (-y, x)  # unit angular velocity at r=1
        tangential[(p, "right")] = lambda x, y: (0.0 * x, 0.0 * y)
    records = []
    last = None
    for level in range(config.levels):
        spans = config.base_spans * 2**level
        triples = [vvp_spaces(_bases(config.degree + 1, spans)) for _ in range(4)]
        system = assemble_vvp(triples, multipatch, nu=config.nu, n_quad=config.quad)
        apply_strong_normal_velocity(system)
        apply_weak_tangential_velocity(system, tangential)
        solution = solve(system)
        div_max = max(
            np.abs(solution.divergence_cochain(p)).max() for p in range(4)
        )
        e_w, e_u, e_p, div_pt = _solution_errors(solution, exact, quad=config.quad)
        p_dev = np.abs(solution.p - solution.p.mean()).max()
        # reconstructed speeds on the two cylinders
        t = np.linspace(0.0, 1.0, 33)
        speeds = {}
        for side, uval, r in (("left", 0.0, 1.0), ("right", 1.0, 2.0)):
            _, fu, _ = solution.forms(0)
            comps = fu.eval_grid((np.array([uval]), t))
            uv = np.column_stack((np.full_like(t, uval), t))
            jac = multipatch.patches[0].jacobian(uv)
            det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
            cx = (jac[..., 1, 1] * comps[0][0] - jac[..., 1, 0] * comps[1][0]) / det
            cy = (-jac[..., 0, 1] * comps[0][0] + jac[..., 0, 0] * comps[1][0]) / det
            speeds[r] = np.hypot(cy, -cx)
        records.append(
            ConvergenceRecord(
                level=level,
                h_max=_h_max(multipatch.patches, triples),
                dofs=system.size,
                err_w=e_w,
                err_u=e_u,
                err_p=e_p,
                div_max=div_max,
                extra={
                    "pressure_cochain_dev": p_dev,
                    "speed_err_inner": float(np.abs(speeds[1.0] - 1.0).max()),
                    "speed_err_outer": float(np.abs(speeds[2.0]).max()),
                    "div_pointwise": div_pt,
                    "residual": solution.residual,
                },
            )
        )
        last = (solution, triples)
    return records, last


def _stream_function(solution, patch_index: int = 0):
    """Potential whose discrete gradient reproduces the velocity cochain."""
    sysm = solution.system
    s0, s1, _ = sysm.spaces[patch_index]
    D10 = s0.coboundary_matrix().tocsc().astype(float)
    u = solution.u[sysm.map1[patch_index]]
    L = (D10.T @ D10).tocsc()
    rhs = D10.T @ u
    # pin one coefficient; the potential is defined up to a constant
    psi = np.zeros(s0.dim)
    psi[1:] = spla.spsolve(L[1:, 1:], rhs[1:])
    resid = np.abs(D10 @ psi - u).max()
    return psi, float(resid)


def run_cavity(config: CaseConfig) -> CavityResult:
    """Lid-driven cavity: unit tangential velocity on the top wall."""
    spans = config.spans or 9
    patch = unit_square_patch()
    triple = vvp_spaces(_bases(config.degree + 1, spans))
    system = assemble_vvp(triple, patch, nu=config.nu, n_quad=config.quad)
    apply_strong_normal_velocity(system)
    lid = {(0, "top"): lambda x, y: (np.ones_like(x), np.zeros_like(y))}
    apply_weak_tangential_velocity(system, lid)
    solution = solve(system)
    div_max = float(np.abs(solution.divergence_cochain(0)).max())

    fo, fu, fp = solution.forms(0)
    n = config.profile_points
    line = np.linspace(0.0, 1.0, n)
    comps_v = fu.eval_grid((np.array([0.5]), line))
    vx_center = comps_v[1][0]  # horizontal velocity = dy-component of the flux form
    comps_h = fu.eval_grid((line, np.array([0.5])))
    vy_center = -comps_h[0][:, 0]

    m = config.field_points
    gx = np.linspace(0.0, 1.0, m)
    psi, stream_resid = _stream_function(solution)
    stream = DiscreteForm(system.spaces[0][0], psi).eval_grid((gx, gx))[0]
    vort = fo.eval_grid((gx, gx))[0]
    pres = fp.eval_grid((gx, gx))[0]  # identity map: density = reference values
    return CavityResult(
        spans=spans,
        degree=config.degree,
        dofs=system.size,
        div_max=div_max,
        y_line=line,
        vx_centerline=np.asarray(vx_center),
        x_line=line,
        vy_centerline=np.asarray(vy_center),
        fields={"stream": stream, "vorticity": vort, "pressure": pres},
        stream_residual=stream_resid,
    )


# -- output --------------------------------------------------------------------


def _version_stamp() -> str:
    stamp = f"splineforms {__version__}"
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True,
            text=True,
            cwd=Path(__file__).parent,
            timeout=5,
        )
        if rev.returncode == 0:
            stamp += f" git {rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return stamp


def emit_outputs(config: CaseConfig, records=None, cavity: CavityResult | None = None):
    """Write convergence tables, field grids and profiles; returns the paths."""
    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []

    def emit(path: Path, text: str):
        path.write_text(text)
        written.append(path)

    if records:
        rate_list = rates(records)
        lines = ["level,h_max,dof,err_w,err_u,err_p,div_max,rate_w,rate_u,rate_p"]
        for rec, rate in zip(records, rate_list):
            nums = [
                f"{rec.h_max:.17e}",
                str(rec.dofs),
                f"{rec.err_w:.17e}",
                f"{rec.err_u:.17e}",
                f"{rec.err_p:.17e}",
                f"{rec.div_max:.17e}",
            ] + [("nan" if np.isnan(r) else f"{r:.6f}") for r in rate]
            lines.append(f"{rec.level}," + ",".join(nums))
        emit(out / "convergence.csv", "\n".join(lines) + "\n")

    if cavity is not None:
        prof = np.column_stack((cavity.y_line, cavity.vx_centerline))
        emit(
            out / "profile_horizontal_velocity.dat",
            "\n".join(f"{a:.17e} {b:.17e}" for a, b in prof) + "\n",
        )
        prof = np.column_stack((cavity.x_line, cavity.vy_centerline))
        emit(
            out / "profile_vertical_velocity.dat",
            "\n".join(f"{a:.17e} {b:.17e}" for a, b in prof) + "\n",
        )
        for name, grid in sorted(cavity.fields.items()):
            body = "\n".join(" ".join(f"{v:.17e}" for v in row) for row in grid)
            emit(out / f"field_{name}.dat", body + "\n")

    meta = [f"# {_version_stamp()}"]
    for key in (
        "case",
        "degree",
        "levels",
        "geometry",
        "nu",
        "quad",
        "out_dir",
        "base_spans",
        "spans",
        "profile_points",
        "field_points",
    ):
        meta.append(f"{key}={getattr(config, key)}")
    if records:
        for rec in records:
            extra = " ".join(f"{k}={v:.17e}" for k, v in sorted(rec.extra.items()))
            meta.append(f"# level {rec.level}: {extra}")
    if cavity is not None:
        meta.append(f"# cavity dofs={cavity.dofs} div_max={cavity.div_max:.17e}")
        meta.append(f"# stream_residual={cavity.stream_residual:.17e}")
    emit(out / "run_metadata.txt", "\n".join(meta) + "\n")
    return written
