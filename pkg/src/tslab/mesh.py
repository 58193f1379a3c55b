"""Triangle mesh container, topology queries and OBJ round-tripping.

Vertices are float64 ``(n, 3)`` arrays, faces int32 ``(m, 3)`` arrays of
vertex indices with counter-clockwise winding relative to the chosen
surface orientation.  A mesh is validated on construction: indices in
range, no repeated vertex inside a face, finite coordinates, no
degenerate faces, and consistent orientation (each undirected interior
edge is traversed once in each direction).
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["MeshError", "TriMesh", "read_obj", "write_obj", "euler_characteristic"]

DEGENERATE_AREA = 1e-12


class MeshError(Exception):
    """Raised for invalid mesh data (bad indices, non-manifold edges...)."""


class TriMesh:
    def __init__(self, vertices, faces, validate=True):
        self.v = np.ascontiguousarray(vertices, dtype=np.float64)
        self.f = np.ascontiguousarray(faces, dtype=np.int32)
        if self.v.ndim != 2 or self.v.shape[1] != 3:
            raise MeshError(f"vertices must be (n, 3), got {self.v.shape}")
        if self.f.ndim != 2 or self.f.shape[1] != 3:
            raise MeshError(f"faces must be (m, 3), got {self.f.shape}")
        self._cache = {}
        if validate:
            self._validate()

    # -- basic counts ------------------------------------------------

    @property
    def n_vertices(self):
        return self.v.shape[0]

    @property
    def n_faces(self):
        return self.f.shape[0]

    def _validate(self):
        if self.f.size and (self.f.min() < 0 or self.f.max() >= self.n_vertices):
            raise MeshError("face index out of range")
        if not np.isfinite(self.v).all():
            raise MeshError("non-finite vertex coordinate")
        f = self.f
        if f.size:
            if ((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])).any():
                raise MeshError("face with repeated vertex")
            areas = self.face_areas()
            bad = np.nonzero(areas < DEGENERATE_AREA)[0]
            if bad.size:
                raise MeshError(f"degenerate face(s), e.g. index {bad[0]} "
                                f"with area {areas[bad[0]]:.3e}")
        # orientation: a directed edge may appear at most once, and an
        # undirected edge is shared by at most two faces.
        de = self.directed_edges()
        key = de[:, 0].astype(np.int64) * self.n_vertices + de[:, 1]
        uniq, counts = np.unique(key, return_counts=True)
        if (counts > 1).any():
            k = uniq[np.argmax(counts > 1)]
            i, j = divmod(int(k), self.n_vertices)
            raise MeshError(f"inconsistent orientation or non-manifold edge ({i}, {j})")

    # -- topology ----------------------------------------------------

    def directed_edges(self):
        """(3m, 2) array: every face contributes (i,j), (j,k), (k,i)."""
        if "de" not in self._cache:
            f = self.f
            self._cache["de"] = np.concatenate(
                [f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=0)
        return self._cache["de"]

    def edges(self):
        """Undirected edges, each once, as a sorted (e, 2) int array."""
        if "edges" not in self._cache:
            de = np.sort(self.directed_edges(), axis=1)
            self._cache["edges"] = np.unique(de, axis=0)
        return self._cache["edges"]

    def boundary_edge_mask(self):
        """Bool mask over edges(): True where only one face is incident."""
        if "bedge" not in self._cache:
            de = np.sort(self.directed_edges(), axis=1)
            key = de[:, 0].astype(np.int64) * self.n_vertices + de[:, 1]
            uniq, counts = np.unique(key, return_counts=True)
            e = self.edges()
            ekey = e[:, 0].astype(np.int64) * self.n_vertices + e[:, 1]
            cnt = counts[np.searchsorted(uniq, ekey)]
            self._cache["bedge"] = cnt == 1
        return self._cache["bedge"]

    def boundary_vertex_mask(self):
        if "bvert" not in self._cache:
            mask = np.zeros(self.n_vertices, dtype=bool)
            be = self.edges()[self.boundary_edge_mask()]
            mask[be.ravel()] = True
            self._cache["bvert"] = mask
        return self._cache["bvert"]

    def face_normals(self):
        """Unnormalized face normals (cross product of edge vectors)."""
        v = self.v
        f = self.f
        e1 = v[f[:, 1]] - v[f[:, 0]]
        e2 = v[f[:, 2]] - v[f[:, 0]]
        return np.cross(e1, e2)

    def face_areas(self):
        return 0.5 * np.linalg.norm(self.face_normals(), axis=1)

    def face_centroids(self):
        v, f = self.v, self.f
        return (v[f[:, 0]] + v[f[:, 1]] + v[f[:, 2]]) / 3.0

    def vertex_rings(self):
        """Ordered one-rings.

        Returns a list of (neighbors, closed) pairs, where ``neighbors``
        is the cyclically ordered ring of an interior vertex (or the
        open chain of a boundary vertex) and ``closed`` says which.
        Ordering follows face winding.
        """
        if "rings" in self._cache:
            return self._cache["rings"]
        n = self.n_vertices
        succ = [dict() for _ in range(n)]  # at corner i of (i,j,k): j -> k
        for (i, j, k) in self.f:
            succ[i][j] = k
            succ[j][k] = i
            succ[k][i] = j
        rings = []
        for i in range(n):
            nxt = succ[i]
            if not nxt:
                rings.append((np.empty(0, dtype=np.int32), False))
                continue
            targets = set(nxt.values())
            starts = [a for a in nxt if a not in targets]
            if starts:
                start, closed = starts[0], False
            else:
                start, closed = next(iter(nxt)), True
            chain = [start]
            cur = start
            while cur in nxt:
                cur = nxt[cur]
                if cur == start:
                    break
                chain.append(cur)
                if len(chain) > len(nxt) + 1:
                    raise MeshError(f"non-disk vertex star at vertex {i}")
            rings.append((np.asarray(chain, dtype=np.int32), closed))
        self._cache["rings"] = rings
        return rings

    def is_closed(self):
        return not self.boundary_edge_mask().any()

    def bbox(self):
        return self.v.min(axis=0), self.v.max(axis=0)

    def median_edge_length(self):
        e = self.edges()
        return float(np.median(np.linalg.norm(self.v[e[:, 0]] - self.v[e[:, 1]],
                                              axis=1)))

    def translated(self, offset):
        return TriMesh(self.v + np.asarray(offset, dtype=np.float64), self.f,
                       validate=False)

    def flipped(self):
        """Same surface with the opposite orientation."""
        return TriMesh(self.v, self.f[:, [0, 2, 1]], validate=False)

    def submesh(self, face_mask):
        """Mesh from a subset of faces; vertices are compacted."""
        f = self.f[face_mask]
        used = np.unique(f)
        remap = np.full(self.n_vertices, -1, dtype=np.int32)
        remap[used] = np.arange(used.size, dtype=np.int32)
        return TriMesh(self.v[used], remap[f], validate=False)

    def content_hash(self):
        h = hashlib.sha256()
        h.update(self.v.tobytes())
        h.update(self.f.tobytes())
        return h.hexdigest()


def euler_characteristic(mesh: TriMesh) -> int:
    """V - E + F (2 for a sphere, 1 for a disk, 0 for an annulus)."""
    return mesh.n_vertices - len(mesh.edges()) + mesh.n_faces


# -- OBJ I/O ---------------------------------------------------------

def write_obj(mesh: TriMesh, path) -> None:
    """ASCII OBJ with 17 significant digits (float64 round-trip safe)."""
    with open(path, "w") as fh:
        fh.write(f"# tslab mesh: {mesh.n_vertices} vertices, {mesh.n_faces} faces\n")
        for x, y, z in mesh.v:
            fh.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for i, j, k in mesh.f + 1:
            fh.write(f"f {i} {j} {k}\n")


def read_obj(path, validate=True) -> TriMesh:
    verts = []
    faces = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MeshError(f"{path}:{lineno}: short vertex line")
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            elif tag == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) < 3:
                    raise MeshError(f"{path}:{lineno}: face with <3 vertices")
                # fan-triangulate polygons; OBJ indices are 1-based
                for a, b in zip(idx[1:-1], idx[2:]):
                    faces.append([idx[0] - 1, a - 1, b - 1])
            # other tags (vn, vt, o, g, s, usemtl...) are ignored
    if not verts:
        raise MeshError(f"{path}: no vertices")
    return TriMesh(np.asarray(verts), np.asarray(faces, dtype=np.int32),
                   validate=validate)
