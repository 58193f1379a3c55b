"""Differential quantities on meshes: normals, mean curvature, the
translator residual, exponentially weighted area, and slab fitting.

Sign conventions used throughout the package:

* vertex normals are area-weighted averages of incident face normals,
  so orientation follows face winding;
* the mean curvature vector is the cotangent umbrella divided by twice
  the barycentric vertex area (sum-of-principal-curvatures scale: the
  unit sphere has |vecH| = 2);
* the scalar is H = -<vecH, N>.  An outward-oriented unit sphere gets
  H = +2, and an upward-oriented graph z = -log cos x gets H = -cos x.

The residual |H + <e3, N>| is exactly invariant under a global
orientation flip (both terms change sign), so it needs no convention
from the caller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from tslab import kernels
from tslab.mesh import TriMesh

__all__ = ["DifferentialData", "SlabFit", "differential_quantities",
           "vertex_normals", "translator_residual", "g_area", "fit_slab",
           "project_out"]


@dataclass
class DifferentialData:
    normal: np.ndarray         # (n, 3) unit vertex normals
    mean_curv_vec: np.ndarray  # (n, 3)
    mean_curv: np.ndarray      # (n,) scalar H = -<vecH, N>
    vertex_area: np.ndarray    # (n,) barycentric areas


def vertex_normals(mesh: TriMesh) -> np.ndarray:
    """Area-weighted unit vertex normals (zero where a vertex is unused)."""
    fn = mesh.face_normals()  # unnormalized, |fn| = 2 * area
    acc = np.zeros((mesh.n_vertices, 3))
    for c in range(3):
        idx = mesh.f[:, c]
        for d in range(3):
            acc[:, d] += np.bincount(idx, weights=fn[:, d],
                                     minlength=mesh.n_vertices)
    norms = np.linalg.norm(acc, axis=1)
    ok = norms > 0
    acc[ok] /= norms[ok, None]
    return acc


def differential_quantities(mesh: TriMesh) -> DifferentialData:
    """Per-vertex N, vecH, scalar H and barycentric area, cached on the mesh.

    Boundary vertices have incomplete one-rings; their H is biased and
    should be masked with ``mesh.boundary_vertex_mask()`` by consumers.
    """
    if "diff" in mesh._cache:
        return mesh._cache["diff"]
    lap, area = kernels.cotan_lap_areas(mesh.v, mesh.f)
    normal = vertex_normals(mesh)
    vec = np.zeros_like(lap)
    ok = area > 0
    vec[ok] = lap[ok] / (2.0 * area[ok, None])
    scalar = -(vec * normal).sum(axis=1)
    data = DifferentialData(normal=normal, mean_curv_vec=vec,
                            mean_curv=scalar, vertex_area=area)
    mesh._cache["diff"] = data
    return data


def translator_residual(mesh: TriMesh):
    """Per-vertex |H + <e3, N>| and its max over interior vertices.

    Zero (to discretization error) iff the surface translates with unit
    vertical speed under its mean curvature. The interior max is nan
    when the mesh has no interior vertices.
    """
    d = differential_quantities(mesh)
    res = np.abs(d.mean_curv + d.normal[:, 2])
    interior = ~mesh.boundary_vertex_mask()
    interior &= d.vertex_area > 0
    interior_max = float(res[interior].max()) if interior.any() else float("nan")
    return res, interior_max


def g_area(mesh: TriMesh) -> float:
    """Area weighted by e^z, evaluated at face centroids.

    Exactly multiplicative under vertical shifts: translating the mesh
    by c*e3 multiplies the result by e^c.
    """
    z = mesh.face_centroids()[:, 2]
    return float(np.sum(np.exp(z) * mesh.face_areas()))


def project_out(points, axis: int) -> np.ndarray:
    """Drop one coordinate: axis=2 maps (x,y,z) to (x,y), and so on."""
    points = np.asarray(points, dtype=np.float64)
    keep = [d for d in range(3) if d != axis]
    return points[..., keep]


@dataclass
class SlabFit:
    normal: np.ndarray  # horizontal unit vector (cos phi, sin phi, 0)
    offset: float       # midpoint of the vertex extent along the normal
    width: float        # full extent (slab thickness)
    phi: float          # angle of the normal in [0, pi)


def _golden_min(fun, lo, hi, tol=1e-12):
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return (a + b) / 2.0


def fit_slab(mesh: TriMesh, scan_step: float = 0.001) -> SlabFit:
    """Thinnest vertical slab containing the mesh.

    Scans horizontal directions (cos phi, sin phi, 0) for phi in
    [0, pi) at ``scan_step`` resolution, then refines the best angle by
    golden section.  Ties go to the smaller phi.  The search only needs
    the convex hull of the xy projection, which keeps the scan cheap on
    large meshes.
    """
    xy = mesh.v[:, :2]
    if xy.shape[0] > 8:
        try:
            xy = xy[ConvexHull(xy).vertices]
        except QhullError:
            pass  # flat or collinear projection, scan all points

    def width_of(phi):
        s = xy[:, 0] * np.cos(phi) + xy[:, 1] * np.sin(phi)
        return float(s.max() - s.min())

    phis = np.arange(0.0, np.pi, scan_step)
    proj = xy @ np.vstack([np.cos(phis), np.sin(phis)])
    widths = proj.max(axis=0) - proj.min(axis=0)
    k = int(np.argmin(widths))  # argmin takes the first, smallest phi
    lo = max(phis[k] - scan_step, 0.0)
    hi = min(phis[k] + scan_step, np.pi)
    phi_ref = _golden_min(width_of, lo, hi)
    cands = [(widths[k], phis[k]), (width_of(phi_ref), phi_ref)]
    w, phi = min(cands, key=lambda t: (t[0], t[1]))
    xi = np.array([np.cos(phi), np.sin(phi), 0.0])
    s = mesh.v[:, 0] * xi[0] + mesh.v[:, 1] * xi[1]
    return SlabFit(normal=xi, offset=float((s.max() + s.min()) / 2.0),
                   width=float(s.max() - s.min()), phi=float(phi))
