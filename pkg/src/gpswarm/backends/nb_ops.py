"""Numba-compiled twins of the hot kernels in ``np_ops``.

Plain sequential @njit loops: no prange, no fastmath, so results are
deterministic and track the numpy backend to the last few ulps.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def se_cross(x1, x2, inv_l0, inv_l1, sig_f2):
    n1 = x1.shape[0]
    n2 = x2.shape[0]
    out = np.empty((n1, n2))
    for i in range(n1):
        xi0 = x1[i, 0]
        xi1 = x1[i, 1]
        for j in range(n2):
            d0 = xi0 - x2[j, 0]
            d1 = xi1 - x2[j, 1]
            out[i, j] = sig_f2 * math.exp(-0.5 * (inv_l0 * d0 * d0 + inv_l1 * d1 * d1))
    return out


@njit(cache=True)
def consensus_sweep(alphas, betas, edges, weights):
    new_a = alphas.copy()
    new_b = betas.copy()
    n_edges = edges.shape[0]
    e_dim = betas.shape[1]
    for m in range(n_edges):
        i = edges[m, 0]
        j = edges[m, 1]
        w = weights[m]
        for a in range(e_dim):
            for b in range(e_dim):
                da = w * (alphas[j, a, b] - alphas[i, a, b])
                new_a[i, a, b] += da
                new_a[j, a, b] -= da
            db = w * (betas[j, a] - betas[i, a])
            new_b[i, a] += db
            new_b[j, a] -= db
    return new_a, new_b


@njit(cache=True)
def entity_map(h, w, x0, y0, cell_w, cell_h, centers, radii, values):
    out = np.zeros((h, w))
    for k in range(centers.shape[0]):
        cx = centers[k, 0]
        cy = centers[k, 1]
        r2 = radii[k] * radii[k]
        for r in range(h):
            dy = y0 + (r + 0.5) * cell_h - cy
            for c in range(w):
                dx = x0 + (c + 0.5) * cell_w - cx
                if dx * dx + dy * dy < r2:
                    out[r, c] = values[k]
    return out


@njit(cache=True)
def signal_many(points, targets, amps, scale):
    n = points.shape[0]
    m = targets.shape[0]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for k in range(m):
            d0 = points[i, 0] - targets[k, 0]
            d1 = points[i, 1] - targets[k, 1]
            acc += amps[k] * math.exp(-0.5 * (d0 * d0 + d1 * d1) / scale)
        out[i] = acc
    return out
