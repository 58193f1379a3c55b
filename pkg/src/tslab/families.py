"""Closed-form and ODE-defined reference translators.

Everything here is ground truth for the rest of the suite: tilted grim
reapers sampled by arclength, the rotationally symmetric bowl from its
radial ODE, and the calibration surfaces (planes, shrinker cylinder)
with known entropy values.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

from tslab.mesh import TriMesh
from tslab.primitives import cylinder, grid_mesh, rect_graph

__all__ = ["FamilySpec", "grim_reaper", "grim_reaper_height", "bowl",
           "bowl_profile", "calibration_surface", "family_suite"]

_LOG2 = float(np.log(2.0))


def grim_reaper_height(x, y, zeta=0.0):
    """z = -log cos(x cos zeta) / cos^2 zeta - y tan zeta."""
    c = np.cos(zeta)
    return -np.log(np.cos(np.asarray(x) * c)) / (c * c) \
        - np.asarray(y) * np.tan(zeta)


def _reaper_s_samples(s_max, h, tail_start=40.0, growth=1.3, cap=4.0):
    """One-sided arclength samples 0..s_max, coarsening in the far tail."""
    if s_max <= tail_start:
        n = max(3, int(np.ceil(s_max / h)))
        return np.linspace(0.0, s_max, n + 1)
    pos = list(np.linspace(0.0, tail_start, int(np.ceil(tail_start / h)) + 1))
    step = h
    while pos[-1] < s_max:
        step = min(step * growth, cap)
        pos.append(min(pos[-1] + step, s_max))
    return np.asarray(pos)


def grim_reaper(zeta=0.0, h=0.05, y_extent=8.0, z_cap=None) -> TriMesh:
    """Tilted grim reaper graph, sampled by arclength in the x direction.

    The strip boundary is where z blows up, so the domain is trimmed at
    height z_cap (profile part); arclength sampling keeps triangle
    quality uniform all the way up the nearly-vertical sides.  For
    zeta = 0 the parameterization x = atan(sinh s), z = log cosh s is
    exact and supports very tall truncations (z_cap in the hundreds);
    sampling then coarsens beyond s = 40 where the surface is
    numerically a pair of vertical planes.
    """
    zeta = float(zeta)
    c = np.cos(zeta)
    if abs(c) < 1e-12:
        raise ValueError("zeta = pi/2 makes the reaper formula singular")
    half_width = np.pi / (2.0 * abs(c))
    if z_cap is None:
        z_cap = max(10.0 * half_width, -np.log(h * abs(c)) / (c * c) + 2.0)

    if zeta == 0.0:
        # exact arclength parameterization
        s_max = z_cap + np.log1p(np.sqrt(max(0.0, 1.0 - np.exp(-2.0 * z_cap))))
        s_pos = _reaper_s_samples(s_max, h)
        s = np.concatenate([-s_pos[::-1], s_pos[1:]])
        x = np.arctan(np.sinh(np.clip(np.abs(s), None, 40.0))) * np.sign(s)
        z_prof = np.logaddexp(s, -s) - _LOG2     # log cosh s
        tan_z = 0.0
    else:
        u_wall = max(np.exp(-z_cap * c * c), 5e-17)
        x_trim = np.arccos(u_wall) / abs(c)
        xs = np.linspace(0.0, x_trim, 20001)
        integrand = np.sqrt(1.0 + np.tan(np.clip(abs(c) * xs, None,
                                                 np.pi / 2 - 1e-14)) ** 2
                            / (c * c))
        s_tab = cumulative_trapezoid(integrand, xs, initial=0.0)
        n = max(3, int(np.ceil(s_tab[-1] / h)))
        s_t = np.linspace(0.0, s_tab[-1], n + 1)
        x_pos = np.interp(s_t, s_tab, xs)
        x = np.concatenate([-x_pos[::-1], x_pos[1:]])
        z_prof = -np.log(np.cos(np.clip(x * c, -np.pi / 2 + 1e-16,
                                        np.pi / 2 - 1e-16))) / (c * c)
        tan_z = np.tan(zeta)

    dy = h * abs(c)
    ny = max(3, int(np.ceil(2.0 * y_extent / dy)))
    y = np.linspace(-y_extent, y_extent, ny + 1)
    Z = z_prof[:, None] - tan_z * y[None, :]
    return grid_mesh(x, y, Z)


def bowl_profile(r_max, step=1e-3, r0=1e-3):
    """Radial profile table (r, f, f') of the bowl translator.

    Integrates f'' = (1 - f'/r)(1 + f'^2) from the r -> 0 series
    f = r^2/4 + r^4/128 + O(r^6) starting at r = r0.
    """
    if r_max <= r0:
        raise ValueError("r_max too small")
    f0 = r0 * r0 / 4.0 + r0 ** 4 / 128.0
    d0 = r0 / 2.0 + r0 ** 3 / 32.0

    def rhs(r, y):
        f, d = y
        return [d, (1.0 - d / r) * (1.0 + d * d)]

    r_eval = np.arange(r0, r_max + step / 2, step)
    if r_eval[-1] < r_max:
        r_eval = np.append(r_eval, r_max)
    sol = solve_ivp(rhs, (r0, r_max), [f0, d0], t_eval=r_eval,
                    method="RK45", rtol=1e-12, atol=1e-12)
    if not sol.success:
        raise RuntimeError(f"bowl ODE integration failed: {sol.message}")
    table = np.column_stack([sol.t, sol.y[0], sol.y[1]])
    return np.vstack([[0.0, 0.0, 0.0], table])


def bowl(r_max, h=0.1):
    """Bowl translator truncated at radius r_max; returns (mesh, profile).

    The mesh is a square grid restricted to faces whose vertices all
    lie within r_max of the axis; heights interpolate the ODE profile.
    """
    if r_max <= 1.0:
        raise ValueError("r_max must exceed 1")
    profile = bowl_profile(r_max * (1.0 + 1e-9) + 2e-3)
    n = int(np.ceil(2.0 * r_max / h))
    mesh = rect_graph(
        lambda x, y: np.interp(np.hypot(x, y), profile[:, 0], profile[:, 1]),
        -r_max, r_max, -r_max, r_max, n, n)
    r_vert = np.hypot(mesh.v[:, 0], mesh.v[:, 1])
    keep = (r_vert[mesh.f] <= r_max).all(axis=1)
    return mesh.submesh(keep), profile


def calibration_surface(tag, h=0.5, x0=0.0, extent=20.0, radius=np.sqrt(2.0),
                        z_extent=12.0, n_theta=640) -> TriMesh:
    """Known-entropy reference surfaces.

    "plane": square patch of the vertical plane {x = x0}, side length
    ``extent``, entropy exactly 1.  "shrinker_cylinder": tube of the
    given radius about the z axis (radius sqrt(2) is the self-shrinker
    normalization; its Gaussian density peak is sqrt(2*pi/e)).
    """
    if tag == "plane":
        half = extent / 2.0
        n = max(2, int(np.ceil(extent / h)))
        patch = rect_graph(lambda yy, zz: np.zeros_like(yy),
                           -half, half, -half, half, n, n)
        # built in (y, z, 0) coordinates; permute into the plane x = x0
        v = np.column_stack([np.full(patch.n_vertices, float(x0)),
                             patch.v[:, 0], patch.v[:, 1]])
        return TriMesh(v, patch.f, validate=False)
    if tag == "shrinker_cylinder":
        n_z = max(8, int(np.ceil(2.0 * z_extent / h)))
        return cylinder(radius, -z_extent, z_extent, n_theta=n_theta, n_z=n_z)
    raise ValueError(f"unknown calibration tag {tag!r}")


@dataclass
class FamilySpec:
    """Tagged recipe for one reference surface."""
    family: str                       # plane | grim_reaper | bowl | shrinker_cylinder
    h: float = 0.05
    params: dict = dc_field(default_factory=dict)

    def build(self) -> TriMesh:
        if self.family == "grim_reaper":
            return grim_reaper(h=self.h, **self.params)
        if self.family == "bowl":
            return bowl(self.params.get("r_max", 6.0), h=self.h)[0]
        if self.family in ("plane", "shrinker_cylinder"):
            return calibration_surface(self.family, h=self.h, **self.params)
        raise ValueError(f"unknown family {self.family!r}")

    @property
    def is_translator(self) -> bool:
        return self.family != "shrinker_cylinder"

    @property
    def is_planar(self) -> bool:
        return self.family == "plane"

    def label(self) -> str:
        bits = [self.family] + [f"{k}={v:.4g}" if isinstance(v, float)
                                else f"{k}={v}" for k, v in self.params.items()]
        return " ".join(bits)


def family_suite(h=0.05) -> list:
    """The standard closed-form batch the property suites run over."""
    return [
        FamilySpec("plane", h=0.25, params={"x0": 0.0, "extent": 20.0}),
        FamilySpec("grim_reaper", h=h, params={"zeta": 0.0}),
        FamilySpec("grim_reaper", h=h, params={"zeta": np.pi / 4}),
        FamilySpec("grim_reaper", h=h, params={"zeta": np.pi / 3}),
        FamilySpec("bowl", h=0.1, params={"r_max": 6.0}),
        FamilySpec("shrinker_cylinder", h=0.25, params={}),
    ]
