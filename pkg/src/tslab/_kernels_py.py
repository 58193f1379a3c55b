"""Pure numpy implementations of the two hot kernels.

These are the reference implementations; ``tslab._kernels_cy`` holds the
compiled twins.  Both must produce the same numbers up to summation
order, and ``tslab.kernels`` picks whichever is available.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def cotan_lap_areas(v, f):
    """Cotangent-weighted umbrella sums and barycentric vertex areas.

    Returns ``(lap, area)`` where

        lap[i]  = sum over edges (i, j) of (cot a + cot b) (v[j] - v[i])
        area[i] = one third of the total area of faces touching i

    with a, b the angles opposite edge (i, j) in its incident faces.
    """
    n = v.shape[0]
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    dbl = np.linalg.norm(np.cross(b - a, c - a), axis=1)  # 2 * face area
    cot0 = ((b - a) * (c - a)).sum(1) / dbl
    cot1 = ((c - b) * (a - b)).sum(1) / dbl
    cot2 = ((a - c) * (b - c)).sum(1) / dbl

    # angle at corner 0 sits opposite edge (1, 2), and so on cyclically
    c0 = cot0[:, None] * (c - b)
    c1 = cot1[:, None] * (a - c)
    c2 = cot2[:, None] * (b - a)
    idx = np.concatenate([f[:, 1], f[:, 2], f[:, 2], f[:, 0], f[:, 0], f[:, 1]])
    vals = np.concatenate([c0, -c0, c1, -c1, c2, -c2])
    lap = np.empty((n, 3))
    for d in range(3):
        lap[:, d] = np.bincount(idx, weights=vals[:, d], minlength=n)
    area = np.bincount(f.ravel(), weights=np.repeat(dbl / 6.0, 3), minlength=n)
    return lap, area


def gaussian_area_sum(v, f, x0, s0, split=0.25, exp_cut=46.0, max_depth=14):
    """Integral of the backward heat kernel over a triangle mesh.

        (1 / 4 pi s0) * integral of exp(-|x - x0|^2 / (4 s0)) dA

    Centroid quadrature with 4-way triangle subdivision until a face's
    longest edge drops below ``split * sqrt(s0)``.  Faces whose closest
    possible point is farther than ``sqrt(4 s0 exp_cut)`` are dropped
    (relative contribution below exp(-exp_cut)).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    A = v[f[:, 0]] - x0
    B = v[f[:, 1]] - x0
    C = v[f[:, 2]] - x0
    thresh = split * np.sqrt(s0)
    inv4s = 1.0 / (4.0 * s0)
    total = 0.0
    for depth in range(max_depth + 1):
        if A.shape[0] == 0:
            break
        diam = np.maximum(np.linalg.norm(B - C, axis=1),
                          np.maximum(np.linalg.norm(C - A, axis=1),
                                     np.linalg.norm(A - B, axis=1)))
        cen = (A + B + C) / 3.0
        d2 = (cen * cen).sum(1)
        dc = np.sqrt(d2)
        gap = dc - diam
        cut = (gap > 0.0) & (gap * gap * inv4s > exp_cut)
        keep = ~cut
        final = keep & ((diam <= thresh) | (depth == max_depth))
        if final.any():
            area = 0.5 * np.linalg.norm(np.cross(B[final] - A[final],
                                                 C[final] - A[final]), axis=1)
            total += float((area * np.exp(-d2[final] * inv4s)).sum())
        split_mask = keep & ~final
        if not split_mask.any():
            break
        As, Bs, Cs = A[split_mask], B[split_mask], C[split_mask]
        mab = 0.5 * (As + Bs)
        mbc = 0.5 * (Bs + Cs)
        mca = 0.5 * (Cs + As)
        A = np.concatenate([As, Bs, Cs, mab])
        B = np.concatenate([mab, mbc, mca, mbc])
        C = np.concatenate([mca, mab, mbc, mca])
    return total / (4.0 * np.pi * s0)
