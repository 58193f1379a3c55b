"""Reference meshes: spheres, cylinders, graphs over grids and disks.

These builders exist mostly to feed tests and calibration runs with
surfaces whose geometry is known in closed form.
"""

from __future__ import annotations

import numpy as np

from tslab.mesh import TriMesh

__all__ = ["icosphere", "cylinder", "rect_graph", "grid_graph", "grid_mesh",
           "disk_graph", "annulus", "monkey_saddle"]


def _lattice_faces(n_rows, n_cols, diag="alt"):
    """Triangulate an (n_rows x n_cols) node lattice, row-major ids."""
    ii, jj = np.meshgrid(np.arange(n_rows - 1), np.arange(n_cols - 1),
                         indexing="ij")
    p00 = (ii * n_cols + jj).astype(np.int64)
    p10, p01 = p00 + n_cols, p00 + 1
    p11 = p10 + 1
    if diag == "alt":
        even = ((ii + jj) % 2 == 0)[..., None]
    elif diag == "/":
        even = np.ones(ii.shape + (1,), bool)
    else:
        even = np.zeros(ii.shape + (1,), bool)
    t1 = np.where(even, np.stack([p00, p10, p11], axis=-1),
                  np.stack([p00, p10, p01], axis=-1))
    t2 = np.where(even, np.stack([p00, p11, p01], axis=-1),
                  np.stack([p10, p11, p01], axis=-1))
    return np.concatenate([t1.reshape(-1, 3),
                           t2.reshape(-1, 3)]).astype(np.int32)


def icosphere(subdivisions: int = 3, radius: float = 1.0,
              center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Subdivided icosahedron projected to a sphere, outward orientation."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts[0])
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int32)

    for _ in range(subdivisions):
        vlist = list(verts)
        midpoint = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in midpoint:
                p = vlist[i] + vlist[j]
                p /= np.linalg.norm(p)
                midpoint[key] = len(vlist)
                vlist.append(p)
            return midpoint[key]

        new_faces = []
        for (a, b, c) in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        verts = np.asarray(vlist)
        faces = np.asarray(new_faces, dtype=np.int32)

    v = verts * radius + np.asarray(center, dtype=np.float64)
    return TriMesh(v, faces)


def cylinder(radius: float, z0: float, z1: float, n_theta: int = 64,
             n_z: int = 32, axis_offset=(0.0, 0.0)) -> TriMesh:
    """Open tube around the z axis with outward orientation."""
    theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    z = np.linspace(z0, z1, n_z + 1)
    tt, zz = np.meshgrid(theta, z, indexing="ij")
    v = np.column_stack([
        radius * np.cos(tt).ravel() + axis_offset[0],
        radius * np.sin(tt).ravel() + axis_offset[1],
        zz.ravel(),
    ])

    ii, jj = np.meshgrid(np.arange(n_theta), np.arange(n_z), indexing="ij")
    p00 = (ii * (n_z + 1) + jj).astype(np.int64)
    p10 = (((ii + 1) % n_theta) * (n_z + 1) + jj).astype(np.int64)
    p11, p01 = p10 + 1, p00 + 1
    faces = np.concatenate([
        np.stack([p00, p10, p11], axis=-1).reshape(-1, 3),
        np.stack([p00, p11, p01], axis=-1).reshape(-1, 3),
    ]).astype(np.int32)
    return TriMesh(v, faces)


def rect_graph(height, x0, x1, y0, y1, nx, ny, diag="alt") -> TriMesh:
    """Graph z = height(x, y) over a rectangle, normals pointing up.

    ``height`` is a vectorized callable.  ``diag`` picks how grid cells
    split into triangles: "/" or "\\" for a fixed diagonal, "alt" to
    alternate with cell parity (the more isotropic choice).
    """
    x = np.linspace(x0, x1, nx + 1)
    y = np.linspace(y0, y1, ny + 1)
    return grid_graph(height, x, y, diag=diag)


def grid_graph(height, x, y, diag="alt") -> TriMesh:
    """Like rect_graph but over explicit (possibly nonuniform) grid lines."""
    x = np.asarray(x, dtype=np.float64)
    xx, yy = np.meshgrid(x, np.asarray(y, dtype=np.float64), indexing="ij")
    return grid_mesh(x, y, height(xx, yy), diag=diag)


def grid_mesh(x, y, z_values, diag="alt") -> TriMesh:
    """Graph mesh from grid lines and a precomputed (nx, ny) height array.

    Useful when heights come from a parameterization rather than a
    function of (x, y), e.g. arclength-sampled profiles.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    zz = np.asarray(z_values, dtype=np.float64)
    if zz.shape != (x.size, y.size):
        raise ValueError(f"height array {zz.shape} does not match grid "
                         f"{(x.size, y.size)}")
    xx, yy = np.meshgrid(x, y, indexing="ij")
    v = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])
    return TriMesh(v, _lattice_faces(x.size, y.size, diag=diag))


def disk_graph(height, radius: float, n_r: int = 24, n_theta: int = 48,
               theta_offset: float = 0.0, center=(0.0, 0.0)) -> TriMesh:
    """Graph z = height(x, y) over a disk, fan at the center, normals up."""
    cx, cy = center
    verts = [[cx, cy, float(height(np.float64(cx), np.float64(cy)))]]
    for i in range(1, n_r + 1):
        r = radius * i / n_r
        for j in range(n_theta):
            th = theta_offset + 2.0 * np.pi * j / n_theta
            x, y = cx + r * np.cos(th), cy + r * np.sin(th)
            verts.append([x, y, float(height(np.float64(x), np.float64(y)))])

    def vid(i, j):
        # ring i >= 1, slot j mod n_theta
        return 1 + (i - 1) * n_theta + (j % n_theta)

    faces = []
    for j in range(n_theta):
        faces.append([0, vid(1, j), vid(1, j + 1)])
    for i in range(1, n_r):
        for j in range(n_theta):
            p00, p10 = vid(i, j), vid(i + 1, j)
            p11, p01 = vid(i + 1, j + 1), vid(i, j + 1)
            faces.append([p00, p10, p11])
            faces.append([p00, p11, p01])
    return TriMesh(np.asarray(verts), np.asarray(faces, dtype=np.int32))


def annulus(r_in: float, r_out: float, n_r: int = 8, n_theta: int = 48,
            height=None, theta_offset: float = 0.0) -> TriMesh:
    """Planar (or graph) annulus mesh, Euler characteristic 0."""
    if height is None:
        height = lambda x, y: np.zeros_like(x)
    verts = []
    for i in range(n_r + 1):
        r = r_in + (r_out - r_in) * i / n_r
        for j in range(n_theta):
            th = theta_offset + 2.0 * np.pi * j / n_theta
            x, y = r * np.cos(th), r * np.sin(th)
            verts.append([x, y, float(height(np.float64(x), np.float64(y)))])

    def vid(i, j):
        return i * n_theta + (j % n_theta)

    faces = []
    for i in range(n_r):
        for j in range(n_theta):
            p00, p10 = vid(i, j), vid(i + 1, j)
            p11, p01 = vid(i + 1, j + 1), vid(i, j + 1)
            faces.append([p00, p10, p11])
            faces.append([p00, p11, p01])
    return TriMesh(np.asarray(verts), np.asarray(faces, dtype=np.int32))


def monkey_saddle(radius: float = 1.0, n_r: int = 20, n_theta: int = 12,
                  theta_offset: float = np.pi / 12.0) -> TriMesh:
    """Graph of z = x^3 - 3 x y^2 = r^3 cos(3 theta) over a disk.

    The default angular offset keeps ring vertices away from the three
    zero lines of cos(3 theta), so vertex height signs alternate cleanly
    around the origin.
    """
    return disk_graph(lambda x, y: x**3 - 3.0 * x * y**2, radius,
                      n_r=n_r, n_theta=n_theta, theta_offset=theta_offset)
