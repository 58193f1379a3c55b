"""Finite-difference solver for graphical translators in a slab direction.

The graph direction is v_theta = sin(theta) e3 + cos(theta) e2.  Heights
u(a, b) live over the plane spanned by e1 and w_theta = cos(theta) e3 -
sin(theta) e2, and embed as

    X(a, b) = (a, -b sin(theta) + u cos(theta), b cos(theta) + u sin(theta)).

The interior equation div(grad u / W) = (sin theta - cos theta u_b) / W,
W = sqrt(1 + |grad u|^2), is discretized with central differences
(three-point weights on nonuniform tensor grids) after the substitution
v = exp(-u), which clears it to a polynomial identity:

    (v^2 + v_b^2)(v_a^2 - v v_aa) - 2 v_a v_b (v_a v_b - v v_ab)
        + (v^2 + v_a^2)(v_b^2 - v v_bb)
        - v (v^2 + v_a^2 + v_b^2)(v sin theta + v_b cos theta) = 0.

The substitution is what makes capped problems tractable: u climbs like
-K log(dist) along a capped wall, so in u every wall cell carries O(1)
second differences however fine the mesh, while v vanishes there like a
smooth power of the distance.  The polynomial form is homogeneous of
degree 4, so the gauge freedom u -> u + c acts as the exact discrete
scaling v -> exp(-c) v, and in one dimension it collapses to the linear
oscillator v'' + v = 0.  Newton iterates on the divided residual (the
polynomial over v (v^2 + v_a^2 + v_b^2)^{3/2}), which is equal in value
to the familiar graph-equation residual wherever v > 0 and is invariant
under the gauge scaling, so the damped iteration commutes with it
exactly.

Beyond the generic Dirichlet solver the module builds the two capped
problems the rest of the suite leans on: a convex wing over a wide strip
(finite cap M standing in for +infinity walls) and a half-pitchfork
whose axis wall flips from -M to +M, plus the reflect-and-stitch
doubling that closes the half-pitchfork across the z axis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from tslab.mesh import TriMesh

__all__ = ["HeightField", "SolveReport", "SolveError", "pde_residual",
           "solve_dirichlet", "delta_wing", "pitchfork_piece",
           "reflect_double", "wall_profile", "strip_profile", "delta_trim",
           "save_field_csv"]


class SolveError(Exception):
    pass


@dataclass
class SolveReport:
    iterations: int
    residual: float
    damping: list
    converged: bool
    message: str = ""


@dataclass
class HeightField:
    theta: float
    a: np.ndarray          # (na,) strictly increasing
    b: np.ndarray          # (nb,) strictly increasing
    u: np.ndarray          # (na, nb)
    dirichlet: np.ndarray  # (na, nb) bool, True where the value is pinned
    h: float               # nominal spacing
    meta: dict = dc_field(default_factory=dict)

    def interior_mask(self):
        return ~self.dirichlet

    def embed(self):
        """Vertex positions (na, nb, 3) of the graph in space."""
        sin_t, cos_t = np.sin(self.theta), np.cos(self.theta)
        shape = self.u.shape
        x = np.broadcast_to(self.a[:, None], shape)
        y = -self.b[None, :] * sin_t + self.u * cos_t
        z = self.b[None, :] * cos_t + self.u * sin_t
        return np.stack([x, np.broadcast_to(y, shape), z], axis=-1)

    def to_mesh(self) -> TriMesh:
        """Triangulated graph, oriented toward +v_theta."""
        verts = self.embed().reshape(-1, 3)
        faces = _grid_faces(self.a.size, self.b.size)
        v_t = np.array([0.0, np.cos(self.theta), np.sin(self.theta)])
        mesh = TriMesh(verts, faces, validate=False)
        if float((mesh.face_normals() @ v_t).sum()) < 0.0:
            mesh = TriMesh(verts, faces[:, [0, 2, 1]], validate=False)
        return mesh


def _grid_faces(na, nb, diag="alt"):
    """Vectorized triangulation of an (na x nb) node grid."""
    ii, jj = np.meshgrid(np.arange(na - 1), np.arange(nb - 1), indexing="ij")
    p00 = (ii * nb + jj).astype(np.int64)
    p10 = p00 + nb
    p11 = p10 + 1
    p01 = p00 + 1
    even = ((ii + jj) % 2 == 0) if diag == "alt" else np.ones(ii.shape, bool)
    t1 = np.where(even[..., None],
                  np.stack([p00, p10, p11], axis=-1),
                  np.stack([p00, p10, p01], axis=-1))
    t2 = np.where(even[..., None],
                  np.stack([p00, p11, p01], axis=-1),
                  np.stack([p10, p11, p01], axis=-1))
    return np.concatenate([t1.reshape(-1, 3), t2.reshape(-1, 3)]).astype(np.int32)


# -- nonuniform central-difference weights ---------------------------

def _d1_weights(x):
    """(wl, wc, wr) for the first derivative at x[1:-1]."""
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    return (-hp / (hm * (hm + hp)),
            (hp - hm) / (hm * hp),
            hm / (hp * (hm + hp)))


def _d2_weights(x):
    """(wl, wc, wr) for the second derivative at x[1:-1]."""
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    return (2.0 / (hm * (hm + hp)),
            -2.0 / (hm * hp),
            2.0 / (hp * (hm + hp)))


class _Stencil:
    """Precomputed interior derivative stencils for one tensor grid."""

    def __init__(self, a, b):
        self.a = np.asarray(a, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)
        if self.a.size < 3 or self.b.size < 3:
            raise SolveError("grid needs at least 3 nodes per axis")
        if (np.diff(self.a) <= 0).any() or (np.diff(self.b) <= 0).any():
            raise SolveError("grid axes must be strictly increasing")
        self.a1 = [w[:, None] for w in _d1_weights(self.a)]
        self.a2 = [w[:, None] for w in _d2_weights(self.a)]
        self.b1 = [w[None, :] for w in _d1_weights(self.b)]
        self.b2 = [w[None, :] for w in _d2_weights(self.b)]

    def derivs(self, u):
        """p, q, r, s, t at interior nodes, each (na-2, nb-2)."""
        a1, a2, b1, b2 = self.a1, self.a2, self.b1, self.b2
        ui = u[1:-1, 1:-1]
        p = a1[0] * u[:-2, 1:-1] + a1[1] * ui + a1[2] * u[2:, 1:-1]
        r = a2[0] * u[:-2, 1:-1] + a2[1] * ui + a2[2] * u[2:, 1:-1]
        q = b1[0] * u[1:-1, :-2] + b1[1] * ui + b1[2] * u[1:-1, 2:]
        t = b2[0] * u[1:-1, :-2] + b2[1] * ui + b2[2] * u[1:-1, 2:]
        # cross derivative: a-derivative first (all b columns), then b
        pa = self.a1[0] * u[:-2, :] + self.a1[1] * u[1:-1, :] + self.a1[2] * u[2:, :]
        s = b1[0] * pa[:, :-2] + b1[1] * pa[:, 1:-1] + b1[2] * pa[:, 2:]
        return p, q, r, s, t


def _g_divided(p, q, r, s, t, theta):
    """The graph-equation residual div(grad u / W) - drive / W.

    Reference form in the height u itself with p = u_a, q = u_b,
    r = u_aa, s = u_ab, t = u_bb.  The solver iterates on v = exp(-u)
    instead (see _gv_divided); this form is kept for cross-checking the
    two discretizations against each other on smooth fields.
    """
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    w2 = 1.0 + p * p + q * q
    w = np.sqrt(w2)
    aterm = (1.0 + q * q) * r - 2.0 * p * q * s + (1.0 + p * p) * t
    return aterm / (w2 * w) - (sin_t - cos_t * q) / w


def _gv_divided(v, va, vb, vaa, vab, vbb, theta, want_partials=False):
    """Scale-free graph-equation residual through v = exp(-u), with
    optional partials for the Newton linearization.

    Substituting u = -log v into the divided form and simplifying with
    S = v^2 + va^2 + vb^2 gives

        [(v^2+vb^2)(va^2 - v vaa) - 2 va vb (va vb - v vab)
         + (v^2+va^2)(vb^2 - v vbb)] / (v S^{3/2})
        - (v sin theta + vb cos theta) / sqrt(S),

    equal in value to the u form but built from differences of v, which
    stays smooth through capped wall layers where u diverges.

    Newton must linearize this quotient, not just its polynomial
    numerator: the numerator is homogeneous of degree 4, so scaling v
    toward zero (pushing u toward +inf) kills it identically, and from
    a capped plateau the numerator-only Newton direction runs down that
    spurious ray.  The quotient terms remove the radial component, and
    the residual itself satisfies F(c v) = F(v), so the damped
    iteration commutes exactly with the gauge shift u -> u + const.
    """
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    e = v * sin_t + vb * cos_t
    ss = v * v + va * va + vb * vb
    ca = v * v + vb * vb
    cb = v * v + va * va
    k1 = va * va - v * vaa
    k2 = va * vb - v * vab
    k3 = vb * vb - v * vbb
    g = ca * k1 - 2.0 * va * vb * k2 + cb * k3 - v * ss * e
    root = np.sqrt(ss)
    den = v * ss * root
    f = g / den
    if not want_partials:
        return f
    gva = (2.0 * va * (ca + k3) - 2.0 * vb * k2 - 2.0 * va * vb * vb
           - 2.0 * v * va * e)
    gvb = (2.0 * vb * (cb + k1) - 2.0 * va * k2 - 2.0 * va * va * vb
           - 2.0 * v * vb * e - v * ss * cos_t)
    gv0 = (2.0 * v * (k1 + k3) - ca * vaa + 2.0 * va * vb * vab - cb * vbb
           - (ss + 2.0 * v * v) * e - v * ss * sin_t)
    # quotient rule against the denominator v S^{3/2}
    fva = (gva - f * 3.0 * v * va * root) / den
    fvb = (gvb - f * 3.0 * v * vb * root) / den
    fv0 = (gv0 - f * (ss + 3.0 * v * v) * root) / den
    return f, (fva, fvb, -v * ca / den, 2.0 * v * va * vb / den,
               -v * cb / den, fv0)


def pde_residual(field: HeightField) -> np.ndarray:
    """Pointwise residual of the graph equation; nan at boundary nodes.

    Evaluated through v = exp(-u) with the same stencils the solver
    iterates on, so a converged field reports the residual it was
    actually stopped on.
    """
    st = _Stencil(field.a, field.b)
    v = np.exp(-field.u)
    out = np.full(field.u.shape, np.nan)
    out[1:-1, 1:-1] = _gv_divided(v[1:-1, 1:-1], *st.derivs(v), field.theta)
    return out


# -- Newton solver ---------------------------------------------------

def _interior_index(na, nb):
    idx = -np.ones((na, nb), dtype=np.int64)
    idx[1:-1, 1:-1] = np.arange((na - 2) * (nb - 2)).reshape(na - 2, nb - 2)
    return idx


def _assemble_jacobian(st, coef, na, nb):
    """Sparse interior Jacobian from per-node partials.

    coef = (gp, gq, gr, gs, gt, g0) arrays on the interior grid:
    partials with respect to the two first derivatives, the two second
    derivatives, the cross derivative, and the node value itself (the
    substituted equation depends on v directly, so the diagonal carries
    a value term).  Couplings to Dirichlet (boundary) nodes are
    dropped: their increments vanish.
    """
    gp, gq, gr, gs, gt, g0 = coef
    idx = _interior_index(na, nb)
    ii, jj = np.meshgrid(np.arange(1, na - 1), np.arange(1, nb - 1),
                         indexing="ij")
    rows_base = idx[1:-1, 1:-1]
    a1 = {-1: st.a1[0], 0: st.a1[1], 1: st.a1[2]}
    a2 = {-1: st.a2[0], 0: st.a2[1], 1: st.a2[2]}
    b1 = {-1: st.b1[0], 0: st.b1[1], 1: st.b1[2]}
    b2 = {-1: st.b2[0], 0: st.b2[1], 1: st.b2[2]}
    rows, cols, vals = [], [], []
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            val = gs * a1[di] * b1[dj]
            if dj == 0:
                val = val + gp * a1[di] + gr * a2[di]
            if di == 0:
                val = val + gq * b1[dj] + gt * b2[dj]
                if dj == 0:
                    val = val + g0
            col = idx[1 + di:na - 1 + di, 1 + dj:nb - 1 + dj]
            keep = col >= 0
            rows.append(rows_base[keep])
            cols.append(col[keep])
            vals.append(np.broadcast_to(val, rows_base.shape)[keep])
    n = (na - 2) * (nb - 2)
    jac = sp.coo_matrix((np.concatenate(vals),
                         (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n, n))
    return jac.tocsr()


def _sparse_solve(jac, rhs):
    """Row-equilibrated spsolve with one diagonal-shift retry.

    Graded grids give row magnitudes spanning many decades (wall cells
    vs. interior); scaling each row by its largest entry keeps the
    factorization accurate.
    """
    row_max = np.maximum(np.abs(jac).max(axis=1).toarray().ravel(), 1e-300)
    d_inv = sp.diags(1.0 / row_max)
    jac_s = (d_inv @ jac).tocsr()
    rhs_s = rhs / row_max
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        try:
            du = spsolve(jac_s, rhs_s)
            if np.isfinite(du).all():
                return du
        except (MatrixRankWarning, RuntimeError):
            pass
        shifted = jac_s + 1e-8 * sp.eye(jac.shape[0], format="csr")
        try:
            du = spsolve(shifted, rhs_s)
        except (MatrixRankWarning, RuntimeError) as exc:
            raise SolveError(f"singular Jacobian: {exc}") from None
    if not np.isfinite(du).all():
        raise SolveError("singular Jacobian (non-finite Newton step)")
    return du


def _harmonic_init(st, data, na, nb):
    """Linear 5-point Laplace solve (in u) for the initial guess."""
    zeros = np.zeros((na - 2, nb - 2))
    ones = np.ones((na - 2, nb - 2))
    jac = _assemble_jacobian(st, (zeros, zeros, ones, zeros, ones, zeros),
                             na, nb)
    # boundary contributions of the same operator move to the rhs
    u_bc = data.copy()
    u_bc[1:-1, 1:-1] = 0.0
    lap_bc = st.a2[0] * u_bc[:-2, 1:-1] + st.a2[1] * u_bc[1:-1, 1:-1] \
        + st.a2[2] * u_bc[2:, 1:-1] \
        + st.b2[0] * u_bc[1:-1, :-2] + st.b2[1] * u_bc[1:-1, 1:-1] \
        + st.b2[2] * u_bc[1:-1, 2:]
    sol = _sparse_solve(jac, -lap_bc.ravel())
    u = data.copy()
    u[1:-1, 1:-1] = sol.reshape(na - 2, nb - 2)
    return u


def solve_dirichlet(a, b, theta, data, tol=1e-10, max_iter=200,
                    max_halvings=20, initial=None, h=None):
    """Damped Newton solve of the graph equation with Dirichlet data.

    ``data`` is a full (na, nb) array whose boundary ring prescribes the
    values in u (interior entries are ignored).  The iteration is
    damped Newton on the scale-free divided residual with log v as the
    working unknown: the direction solves the v-linearization column
    scaled by v, and updates multiply, v <- v exp(lam dphi).  That
    keeps v positive for every step length and makes a unit of motion
    mean the same thing (one unit of height) in the far field and deep
    inside a wall layer, where v spans many decades.

    Two guards keep the globalization from being held hostage by stiff
    boundary-layer rows.  The applied log-step is capped at 2 per node,
    so a handful of near-cliff cells (boundary data can legitimately
    jump by tens of height units across one wall cell, below any
    practical resolution) move a bounded factor per iteration while the
    smooth bulk still takes full Newton steps.  And the line-search
    merit is the cell-area weighted square sum, the discrete analogue
    of the integral of F^2, so those same cells, which carry area many
    orders below a bulk cell's, cannot veto a step that improves the
    field everywhere else.  The stop test stays the plain max norm over
    every interior node.  Returns (HeightField, SolveReport); the
    report's ``converged`` flag must be checked, a failed solve does
    not raise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    data = np.asarray(data, dtype=np.float64)
    na, nb = a.size, b.size
    if data.shape != (na, nb):
        raise SolveError(f"data shape {data.shape} != grid {(na, nb)}")
    if not np.isfinite(data).all():
        raise SolveError("non-finite boundary data")
    st = _Stencil(a, b)
    if initial is None:
        u0 = _harmonic_init(st, data, na, nb)
    else:
        u0 = initial.copy()
        u0[0, :], u0[-1, :] = data[0, :], data[-1, :]
        u0[:, 0], u0[:, -1] = data[:, 0], data[:, -1]
    v = np.exp(-u0)

    def resid(vv):
        return _gv_divided(vv[1:-1, 1:-1], *st.derivs(vv), theta)

    def finish(report):
        u = -np.log(v)
        u[0, :], u[-1, :] = data[0, :], data[-1, :]
        u[:, 0], u[:, -1] = data[:, 0], data[:, -1]
        return _finish_field(theta, a, b, u, h, report), report

    area = (0.5 * (a[2:] - a[:-2]))[:, None] * (0.5 * (b[2:] - b[:-2]))[None, :]
    area = area / area.sum()

    def merit_of(g):
        return float((area * g * g).sum())

    damping = []
    g = resid(v)
    res = float(np.abs(g).max())
    merit = merit_of(g)
    for it in range(1, max_iter + 1):
        if res <= tol:
            break
        gf, partials = _gv_divided(v[1:-1, 1:-1], *st.derivs(v), theta, True)
        jac = _assemble_jacobian(st, partials, na, nb)
        # column scaling by v turns the unknown into dphi = d(log v)
        jac = (jac @ sp.diags(v[1:-1, 1:-1].ravel())).tocsr()
        try:
            dphi = _sparse_solve(jac, -gf.ravel())
        except SolveError as exc:
            return finish(SolveReport(it, res, damping, False, str(exc)))
        dphi = dphi.reshape(na - 2, nb - 2)
        lam = 1.0
        accepted = False
        for _ in range(max_halvings + 1):
            v_try = v.copy()
            v_try[1:-1, 1:-1] = v[1:-1, 1:-1] * np.exp(
                np.clip(lam * dphi, -2.0, 2.0))
            g_try = resid(v_try)
            merit_try = merit_of(g_try)
            if merit_try < merit:
                v, merit = v_try, merit_try
                res = float(np.abs(g_try).max())
                damping.append(lam)
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            return finish(SolveReport(it, res, damping, False,
                                      "line search stalled"))
    else:
        return finish(SolveReport(max_iter, res, damping, False,
                                  "max iterations reached"))
    return finish(SolveReport(len(damping), res, damping, True))


def _finish_field(theta, a, b, u, h, report):
    mask = np.zeros(u.shape, dtype=bool)
    mask[0, :] = mask[-1, :] = True
    mask[:, 0] = mask[:, -1] = True
    if h is None:
        h = float(np.median(np.diff(a)))
    return HeightField(theta=float(theta), a=a, b=b, u=u, dirichlet=mask,
                       h=float(h), meta={"report": report})


# -- capped boundary profiles ----------------------------------------

def wall_profile(s):
    """-log sin s capped at its minimum: the universal wall asymptote.

    Solves the 1D vertical-graph equation near a slab wall; +inf at
    s = 0, zero from s = pi/2 on.
    """
    s = np.asarray(s, dtype=np.float64)
    return -np.log(np.sin(np.clip(s, None, np.pi / 2.0)))


def strip_profile(a, width):
    """1D translator profile spanning (-width/2, width/2), min 0 at 0.

    For width > pi this is the cross-section of the linearly-tilted
    solution: u = -A^2 log cos(a / A) with A = width / pi.
    """
    a = np.asarray(a, dtype=np.float64)
    big = width / np.pi
    return -big * big * np.log(np.cos(a / big))


def delta_trim(M):
    """Distance at which the wall profile reaches the cap M."""
    return float(np.arcsin(np.exp(-M)))


def _reaper_column_init(a, valley, cap):
    """Column-wise initial surface for capped strip problems.

    Each column gets an effective-width reaper m - A^2 log cos(a / A)
    that dips to its valley height m at a = 0 and meets the cap exactly
    at both trimmed edges, with A found by bisection.  Columns built
    this way carry genuine wall layers (v = exp(-u) vanishing like a
    power of the wall distance), which is what the graded mesh is
    shaped for; clipping a plateau against the wall instead would park
    order-one divided residuals on the tiny wall cells, whose rows are
    so stiff that the damped Newton iteration strands there.
    """
    from scipy.optimize import brentq

    a = np.asarray(a, dtype=np.float64)
    valley = np.atleast_1d(np.asarray(valley, dtype=np.float64))
    edge = max(abs(a[0]), abs(a[-1]))
    lo = 2.0 * edge / np.pi
    shallow = 0.5 * edge * edge  # drop of the infinitely-wide parabola
    out = np.empty((a.size, valley.size))
    for j, m in enumerate(valley):
        drop = cap - min(m, cap - shallow - 0.25)

        def f(A):
            return A * A * (-np.log(np.cos(edge / A))) - drop

        A = brentq(f, lo * (1.0 + 1e-15), 1e6, rtol=8.9e-16)
        out[:, j] = (cap - drop) - A * A * np.log(np.cos(a / A))
    return out


def profile_1d(a, left, right):
    """Solve u'' = 1 + u'^2 on [a[0], a[-1]] with the given end values,
    returning the solution at the nodes ``a``.

    This is the b-independent reduction of the graph equation; it is the
    natural short-side data because wings become y-translation-invariant
    far out.  The substitution v = exp(-u) turns the equation into the
    linear oscillator v'' + v = 0, so every solution has the closed form
    c - log cos(a - a0) and the end conditions pin down (a0, c).  The
    equation therefore has no solution at all on intervals of width >= pi
    (cos would need a full period), and SolveError is raised there.

    The angle between the blowup of the cos branch and the steeper end is
    found by bisection in a form that stays accurate even when that angle
    is ~1e-16 rad, which happens for strongly asymmetric end values; the
    result is exact to roundoff rather than to discretization error.

    On (delta, pi - delta) with ends (M, M) and delta = delta_trim(M) the
    solution is exactly -log sin a.  With ends (-M, M) it sags: the
    minimum is -2M + log 2 + O(delta^2), far below both end values, which
    is why capped pitchfork pieces dip below -M + log 2 near b = -L.
    """
    from scipy.optimize import brentq

    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1 or a.size < 2 or np.any(np.diff(a) <= 0):
        raise ValueError("a must be strictly increasing, size >= 2")
    a_lo, a_hi = float(a[0]), float(a[-1])
    width = a_hi - a_lo
    if not width < np.pi:
        raise SolveError(f"no 1d profile on interval of width {width:.6g}")
    diff = abs(float(right) - float(left))

    def f(psi):
        return np.log(np.sin(width + psi)) - np.log(np.sin(psi)) - diff

    hi = (np.pi - width) * (1.0 - 1e-13)
    if f(hi) > 0.0:
        raise SolveError("end values too asymmetric for this interval")
    rho = brentq(f, 1e-290, hi, xtol=1e-300, rtol=8.9e-16)
    if right >= left:
        # blowup adjacent to the right end: cos(a - a0) = sin(rho + a_hi - a)
        u = left + np.log(np.sin(width + rho)) - np.log(np.sin(rho + (a_hi - a)))
    else:
        u = right + np.log(np.sin(width + rho)) - np.log(np.sin(rho + (a - a_lo)))
    u[0], u[-1] = left, right
    return u


def _wall_graded_axis(lo, hi, m_cap, h, dz=None, wall_lo=True, wall_hi=True):
    """Grid on [lo, hi] graded so capped walls are cut at equal height steps.

    Near a wall the solution tracks the wall profile; uniform spacing in
    a would produce embedded cells of height ~M.  Nodes are placed where
    the wall profile crosses levels m_cap, m_cap - dz, ... until the
    spacing reaches h, then uniformly.

    The level step dz is a property of the layer, not of h.  The layer
    discretization error is first order in dz (each geometric cell
    contributes the same-signed relative truncation), so tying dz to h
    would contaminate h-refinement studies with a slowly decaying layer
    term; keeping dz fixed makes solves at different h share the layer
    structure bit for bit, and differences between them measure the
    smooth interior truncation only.
    """
    if dz is None:
        dz = 0.16
    span = hi - lo
    s_edge = float(np.arcsin(np.exp(-m_cap)))  # endpoint's distance to the wall

    def wall_offsets():
        # Levels snap to global multiples of dz so grids built for
        # different caps share every node below the lower cap; the
        # cap-independence certificate compares two such grids and any
        # node mismatch would show up as spurious interior deltas.
        offs = [0.0]
        j = int(np.floor(m_cap / dz))
        if j * dz >= m_cap - 1e-12:
            j -= 1
        while j > 0:
            s = float(np.arcsin(np.exp(-j * dz))) - s_edge
            if s - offs[-1] >= h or s > 0.45 * span:
                break
            offs.append(s)
            j -= 1
        return np.asarray(offs)

    left = lo + (wall_offsets() if wall_lo else np.array([0.0]))
    right = hi - (wall_offsets() if wall_hi else np.array([0.0]))[::-1]
    gap = right[0] - left[-1]
    n_mid = max(1, int(np.ceil(gap / h)))
    mid = np.linspace(left[-1], right[0], n_mid + 1)[1:-1]
    return np.concatenate([left, mid, right])


def _band_graded_axis(L, h, band_half, band_nodes, far_start=2.0,
                      growth=1.15, far_cap_mult=6.0):
    """Symmetric grid on [-L, L]: uniform fine band, geometric shoulders,
    body spacing h, slowly coarsening far field."""
    hf = 2.0 * band_half / band_nodes
    pos = list(np.arange(0.0, band_half + hf / 2, hf))
    step = hf
    while pos[-1] < 3.0 * band_half and step < h:
        step = min(step * 1.25, h)
        pos.append(pos[-1] + step)
    while pos[-1] < min(far_start, L):
        pos.append(min(pos[-1] + h, L))
    step = h
    far_cap = far_cap_mult * h
    while pos[-1] < L:
        step = min(step * growth, far_cap)
        pos.append(min(pos[-1] + step, L))
    pos = np.asarray(pos)
    return np.concatenate([-pos[::-1], pos[1:]])


def _certified_box(ok):
    """Largest sub-box of an ok-mask found by greedy margin peeling.

    Repeatedly trims whichever of the four sides currently carries the
    most failing cells, until the remaining box is clean.  Margins are
    independent per side, which matters when the cap-dependent region
    hugs one end (the sag zone of a pitchfork piece sits at b = -L
    only).  Returns (slice, slice) or None if nothing survives.
    """
    na, nb = ok.shape
    i0, i1, j0, j1 = 0, na, 0, nb
    while i1 - i0 > 0 and j1 - j0 > 0:
        sub = ok[i0:i1, j0:j1]
        if sub.all():
            return (slice(i0, i1), slice(j0, j1))
        edges = [
            (np.count_nonzero(~sub[0, :]), 0),
            (np.count_nonzero(~sub[-1, :]), 1),
            (np.count_nonzero(~sub[:, 0]), 2),
            (np.count_nonzero(~sub[:, -1]), 3),
        ]
        _, side = max(edges)
        if side == 0:
            i0 += 1
        elif side == 1:
            i1 -= 1
        elif side == 2:
            j0 += 1
        else:
            j1 -= 1
    return None


def _certify(field, build_fn, m_cap, probe_h, tol=1e-4):
    """Cap-independence certificate: re-solve with the cap raised by 2
    on its own grid and record where the two surfaces agree.

    The recheck runs on its own wall-graded mesh (the original mesh
    cannot resolve the steeper layers of a higher cap), so the two
    fields live on different grids; both are sampled on a common
    uniform probe grid by bicubic splines and compared there.  Wall
    layers and sag zones legitimately move with the cap and are trimmed
    away by the box scan; the certified box is where the surface has
    forgotten the cap.
    """
    from scipy.interpolate import RectBivariateSpline

    try:
        field2 = build_fn(m_cap + 2.0)
    except SolveError as err:
        return {"cap": m_cap, "recheck_cap": m_cap + 2.0, "tol": tol,
                "converged": False, "message": str(err), "box": None,
                "max_delta_in_box": None}
    pa = np.arange(max(field.a[0], field2.a[0]),
                   min(field.a[-1], field2.a[-1]), probe_h)
    pb = np.arange(max(field.b[0], field2.b[0]),
                   min(field.b[-1], field2.b[-1]), probe_h)
    s1 = RectBivariateSpline(field.a, field.b, field.u)
    s2 = RectBivariateSpline(field2.a, field2.b, field2.u)
    delta = np.abs(s1(pa, pb) - s2(pa, pb))
    box = _certified_box(delta <= tol)
    cert = {
        "cap": m_cap,
        "recheck_cap": m_cap + 2.0,
        "tol": tol,
        "probe_h": float(probe_h),
        "converged": True,
        "max_delta": float(delta.max()),
        "box": None,
        "max_delta_in_box": None,
    }
    if box is not None:
        sa, sb = box
        cert["box"] = {
            "a": (float(pa[sa.start]), float(pa[sa.stop - 1])),
            "b": (float(pb[sb.start]), float(pb[sb.stop - 1])),
        }
        cert["max_delta_in_box"] = float(delta[sa, sb].max())
    return cert


# -- the two capped problems -----------------------------------------

def delta_wing(w, m_cap=12.0, L=None, h=0.05, certify=True, tol=3e-5):
    """Convex translator graph over the strip (-w, w), walls capped at M.

    Solves on (-w + delta, w - delta) x (-L, L) with constant cap data
    on the long sides and the capped width-2w reaper profile on the
    short sides.  (The b-independent ODE has no solution on strips
    wider than pi, so the short sides use the scaled reaper ramp, whose
    corner values match the cap.)  The meta dict carries a
    cap-independence certificate: the sub-box where raising the cap by
    2 moves u by at most 1e-4.

    Default tol reflects the roundoff floor of the residual on the
    graded wall cells next to the flat-cap corners; interior accuracy
    is governed by h, not by this figure.
    """
    if w <= np.pi / 2:
        raise SolveError("strip half-width must exceed pi/2")
    if L is None:
        L = 4.0 * w
    delta = delta_trim(m_cap)
    a = _wall_graded_axis(-w + delta, w - delta, m_cap, h)
    b = np.linspace(-L, L, 2 * max(3, int(np.ceil(L / h))) + 1)
    tan_tilt = np.sqrt(max(4.0 * w * w / (np.pi * np.pi) - 1.0, 0.0))

    def make_data(cap):
        data = np.zeros((a.size, b.size))
        data[0, :] = data[-1, :] = cap
        short = np.minimum(cap, strip_profile(a, 2.0 * w))
        data[:, 0] = short
        data[:, -1] = short
        data[0, :] = data[-1, :] = cap   # corners belong to the walls
        return data

    def solve_once(cap, initial=None):
        if initial is None:
            # reaper columns dipping to the tilted-asymptote valley
            rise = (np.abs(b) - L) * tan_tilt
            initial = _reaper_column_init(a, rise, cap)
        return solve_dirichlet(a, b, np.pi / 2, make_data(cap), tol=tol,
                               initial=np.array(initial), h=h)

    field, report = solve_once(m_cap)
    if not report.converged:
        field, report = _cap_continuation(solve_once, m_cap)
    if not report.converged:
        raise SolveError(f"wing solve failed: {report.message}")
    field.meta.update({"kind": "delta_wing", "w": float(w), "cap": m_cap,
                       "L": float(L), "h": h, "delta": delta,
                       "solve": {"iterations": report.iterations,
                                 "residual": report.residual}})
    if certify:
        field.meta["certificate"] = _certify(
            field, lambda cap: delta_wing(w, m_cap=cap, L=L, h=h,
                                          certify=False, tol=tol),
            m_cap, h)
    return field


def pitchfork_piece(w=np.pi, m_cap=12.0, L=None, h=0.05, certify=True,
                    band_nodes=600, tol=3e-5):
    """Half-pitchfork graph on (delta, w - delta) x (-L, L), theta = pi/2.

    Boundary data: the axis wall a = delta carries -M for b < -2h and
    +M for b > 2h with a linear ramp between; the far wall a = w - delta
    carries +M; the short sides b = +/-L carry the b-independent 1D
    translator profiles with matching corner values ((M, M) on top,
    (-M, M) on the bottom; the latter genuinely sags to about
    -2M + log 2 mid-strip, the convex capped stand-in for the down
    tail).  The b grid is uniformly fine across the ramp zone
    |b| <= 2h (``band_nodes`` intervals) so the doubled surface
    resolves the normal twist along the axis.
    """
    if w < np.pi:
        raise SolveError("pitchfork needs half-width w >= pi")
    if L is None:
        L = 6.0 * w
    delta = delta_trim(m_cap)
    a = _wall_graded_axis(delta, w - delta, m_cap, h)
    b = _band_graded_axis(L, h, 2.0 * h, band_nodes)
    ramp_slope = m_cap / (2.0 * h)

    def make_data(cap):
        data = np.zeros((a.size, b.size))
        data[0, :] = np.clip(ramp_slope * b, -cap, cap)
        data[-1, :] = cap
        data[:, -1] = profile_1d(a, cap, cap)
        data[:, 0] = profile_1d(a, -cap, cap)
        return data

    def solve_once(cap, initial=None):
        data = make_data(cap)
        if initial is None:
            # Blend the two short-side profiles in u with the weight that
            # reproduces the axis ramp, so the blend matches the boundary
            # data exactly on all four sides and keeps genuine wall layers
            # at both walls (a height blend of layered profiles is still
            # layered).  The twist this packs into the ramp band is steep
            # in b, but that is exactly where the microcells sit.
            beta = np.clip((data[0, :] + cap) / (2.0 * cap), 0.0, 1.0)
            initial = (beta[None, :] * data[:, -1][:, None]
                       + (1.0 - beta)[None, :] * data[:, 0][:, None])
        return solve_dirichlet(a, b, np.pi / 2, data, tol=tol,
                               initial=np.array(initial), h=h)

    field, report = solve_once(m_cap)
    if not report.converged:
        field, report = _cap_continuation(solve_once, m_cap)
    if not report.converged:
        raise SolveError(f"pitchfork solve failed: {report.message}")
    field.meta.update({"kind": "pitchfork", "w": float(w), "cap": m_cap,
                       "L": float(L), "h": h, "delta": delta,
                       "band_half": 2.0 * h, "band_nodes": band_nodes,
                       "solve": {"iterations": report.iterations,
                                 "residual": report.residual}})
    if certify:
        field.meta["certificate"] = _certify(
            field, lambda cap: pitchfork_piece(w, m_cap=cap, L=L, h=h,
                                               certify=False,
                                               band_nodes=band_nodes,
                                               tol=tol),
            m_cap, h)
    return field


def _cap_continuation(solve_once, m_cap, start=4.0, step=2.0):
    """Ramp the cap up on a fixed grid, warm-starting each solve.

    Intermediate caps only provide warm starts, so their stalls are
    tolerated (heavily clipped data leaves flat plateaus on the tiny
    wall cells, where the attainable residual is limited by roundoff);
    only the final full-cap solve must converge.
    """
    caps = list(np.arange(start, m_cap, step)) + [m_cap]
    field, report = None, None
    initial = None
    for cap in caps:
        field, report = solve_once(cap, initial=initial)
        initial = field.u
    return field, report


# -- doubling --------------------------------------------------------

def reflect_double(field: HeightField) -> TriMesh:
    """Union of the half-pitchfork with its 180-degree rotation about
    the z axis, stitched across the axis by a twisted band.

    The image faces get reversed winding so the doubled surface is
    consistently oriented (the scalar mean curvature then changes sign
    across the band, which is what makes the zero set nonempty).  Only
    wall nodes inside the ramp zone |b| <= band_half are stitched, each
    to its own rotated image at equal height; the b = 0 pair coincides
    at the origin and is merged into one vertex.
    """
    meta = field.meta
    if meta.get("kind") != "pitchfork":
        raise SolveError("reflect_double expects a pitchfork field")
    band_half = meta["band_half"]
    na, nb = field.a.size, field.b.size
    verts_p = field.embed().reshape(-1, 3)
    faces_p = _grid_faces(na, nb)
    v_t = np.array([0.0, np.cos(field.theta), np.sin(field.theta)])
    mp = TriMesh(verts_p, faces_p, validate=False)
    if float((mp.face_normals() @ v_t).sum()) < 0.0:
        faces_p = faces_p[:, [0, 2, 1]]

    n = verts_p.shape[0]
    verts_i = verts_p * np.array([-1.0, -1.0, 1.0])
    faces_i = faces_p[:, [0, 2, 1]] + n  # rotated copy, reversed winding

    # wall row (axis side, a index 0) and its stitch zone
    wall = np.arange(nb)                    # piece vertex ids 0..nb-1
    in_band = np.abs(field.b) <= band_half + 1e-12
    j0 = int(np.argmin(np.abs(field.b)))
    if abs(field.b[j0]) > 1e-12:
        raise SolveError("band grid must contain b = 0")

    # stitching gap: the strip the band spans in x has width 2*delta
    gap = 2.0 * float(field.a[0])
    if gap > 2.0 * field.h:
        raise SolveError(f"stitching gap {gap:.3g} exceeds 2h at the axis "
                         f"(a0 = {field.a[0]:.3g})")

    # merge the coincident b = 0 pair into one vertex at the midpoint
    vmap_image = np.arange(n) + n
    vmap_image[j0] = j0
    verts = np.concatenate([verts_p, verts_i])
    verts[j0] = [0.0, 0.0, verts_p[j0, 2]]
    faces_i = vmap_image[faces_i - n]

    # band triangles between wall node j and j+1, only inside the band
    piece_dir = set(map(tuple, np.concatenate(
        [faces_p[:, [0, 1]], faces_p[:, [1, 2]], faces_p[:, [2, 0]]]).tolist()))
    band_faces = []
    for j in range(nb - 1):
        if not (in_band[j] and in_band[j + 1]):
            continue
        wj, wj1 = int(wall[j]), int(wall[j + 1])
        rj, rj1 = int(vmap_image[wj]), int(vmap_image[wj1])
        if (wj, wj1) in piece_dir:
            quad = [(wj1, wj, rj), (wj1, rj, rj1)]
        else:
            quad = [(wj, wj1, rj1), (wj, rj1, rj)]
        for tri in quad:
            if len(set(tri)) == 3:
                band_faces.append(tri)

    faces = np.concatenate([faces_p, faces_i,
                            np.asarray(band_faces, dtype=np.int32)])

    # drop the unused image twin of the merged vertex
    used = np.zeros(verts.shape[0], dtype=bool)
    used[faces.ravel()] = True
    remap = -np.ones(verts.shape[0], dtype=np.int64)
    remap[used] = np.arange(int(used.sum()))
    mesh = TriMesh(verts[used], remap[faces].astype(np.int32))
    return mesh


# -- serialization ---------------------------------------------------

def save_field_csv(field: HeightField, csv_path, header_path=None):
    """CSV rows (a, b, u) plus an optional JSON sidecar with the grid info."""
    import json

    aa = np.repeat(field.a, field.b.size)
    bb = np.tile(field.b, field.a.size)
    arr = np.column_stack([aa, bb, field.u.ravel()])
    with open(csv_path, "w") as fh:
        fh.write("a,b,u\n")
        for row in arr:
            fh.write(f"{row[0]:.17g},{row[1]:.17g},{row[2]:.17g}\n")
    if header_path is not None:
        hdr = {
            "theta": field.theta,
            "h": field.h,
            "domain": [float(field.a[0]), float(field.a[-1]),
                       float(field.b[0]), float(field.b[-1])],
            "shape": [int(field.a.size), int(field.b.size)],
            "dirichlet": "rectangle-boundary",
            "meta": {k: v for k, v in field.meta.items()
                     if isinstance(v, (int, float, str, bool))},
        }
        with open(header_path, "w") as fh:
            json.dump(hdr, fh, indent=2, sort_keys=True)
            fh.write("\n")
