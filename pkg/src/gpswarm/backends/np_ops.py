"""Pure-numpy implementations of the hot numeric kernels.

This is the reference backend: every function here has a numba twin in
``nb_ops`` that must produce the same values (up to last-ulp rounding
differences from operation fusion).
"""

import numpy as np


def se_cross(x1, x2, inv_l0, inv_l1, sig_f2):
    """Squared-exponential kernel matrix between two point sets.

    x1: (n1, 2), x2: (n2, 2); inv_l0/inv_l1 are the inverse diagonal
    entries of the squared-length-scale matrix. Returns (n1, n2).
    """
    d0 = x1[:, 0:1] - x2[None, :, 0]
    d1 = x1[:, 1:2] - x2[None, :, 1]
    q = 0.5 * (inv_l0 * d0 * d0 + inv_l1 * d1 * d1)
    return sig_f2 * np.exp(-q)


def consensus_sweep(alphas, betas, edges, weights):
    """One synchronous neighbor-averaging round over the whole network.

    alphas: (N, E, E), betas: (N, E); edges: (m, 2) int pairs; weights:
    (m,) per-edge averaging weights. All agents read the pre-round
    snapshot; returns fresh arrays.
    """
    new_a = alphas.copy()
    new_b = betas.copy()
    for (i, j), w in zip(edges, weights):
        da = alphas[j] - alphas[i]
        db = betas[j] - betas[i]
        new_a[i] += w * da
        new_a[j] -= w * da
        new_b[i] += w * db
        new_b[j] -= w * db
    return new_a, new_b


def entity_map(h, w, x0, y0, cell_w, cell_h, centers, radii, values):
    """Render filled disks onto an h*w grid of cell centers.

    Entities are drawn in order; later disks overwrite earlier ones.
    A cell belongs to a disk when its center lies strictly inside the
    disk radius. Returns (h, w) with row r at y = y0 + (r + 0.5)*cell_h.
    """
    out = np.zeros((h, w))
    ys = y0 + (np.arange(h) + 0.5) * cell_h
    xs = x0 + (np.arange(w) + 0.5) * cell_w
    for k in range(centers.shape[0]):
        dx = xs[None, :] - centers[k, 0]
        dy = ys[:, None] - centers[k, 1]
        mask = dx * dx + dy * dy < radii[k] * radii[k]
        out[mask] = values[k]
    return out


def signal_many(points, targets, amps, scale):
    """Summed radial intensity field evaluated at many points.

    points: (B, 2); targets: (M, 2); amps: (M,). Each target contributes
    amp * exp(-0.5 * d^2 / scale). Returns (B,).
    """
    if targets.shape[0] == 0:
        return np.zeros(points.shape[0])
    d0 = points[:, 0:1] - targets[None, :, 0]
    d1 = points[:, 1:2] - targets[None, :, 1]
    return np.exp(-0.5 * (d0 * d0 + d1 * d1) / scale) @ amps
