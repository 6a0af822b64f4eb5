"""Centralized regression references: full GP posterior and the reduced-rank
estimator on the pooled dataset.

These are the ground-truth oracles the distributed module is checked
against. The full posterior solves the (wN x wN) system; the reduced-rank
estimator works in basis coordinates and only ever factors an E x E matrix.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .basis import kernel_matrix
from .errors import ConditioningError


@dataclass(frozen=True, eq=False)
class Dataset:
    """Pooled measurement set: n_agents agents with per_agent samples each."""

    inputs: np.ndarray  # (w*N, 2)
    outputs: np.ndarray  # (w*N,)
    n_agents: int
    per_agent: int

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64).reshape(-1, 2)
        y = np.asarray(self.outputs, dtype=np.float64).ravel()
        if x.shape[0] != y.shape[0]:
            raise ValueError("inputs and outputs disagree in length")
        if x.shape[0] != self.n_agents * self.per_agent:
            raise ValueError("dataset size must equal n_agents * per_agent")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "outputs", y)

    @property
    def size(self):
        return self.inputs.shape[0]

    @classmethod
    def empty(cls, n_agents=1):
        return cls(np.zeros((0, 2)), np.zeros(0), n_agents, 0)


def _spd_solve(mat, rhs):
    try:
        return cho_solve(cho_factor(mat, lower=True), rhs)
    except (LinAlgError, np.linalg.LinAlgError) as exc:
        raise ConditioningError(f"SPD factorization failed: {exc}") from exc


def full_gp_posterior(params, data, x):
    """Exact GP posterior (mean, variance) at one query position."""
    mean, var = full_gp_posterior_many(params, data, np.asarray(x, dtype=np.float64)[None, :])
    return float(mean[0]), float(var[0])


def full_gp_posterior_many(params, data, queries):
    """Exact GP posterior over a (B, 2) batch of query positions.

    Factors (K + noise*I) once per call; the empty dataset returns the
    prior (zero mean, k(x,x) variance).
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    prior_var = params.signal_variance * np.ones(queries.shape[0])
    if data.size == 0:
        return np.zeros(queries.shape[0]), prior_var

    gram = kernel_matrix(params, data.inputs, data.inputs)
    gram[np.diag_indices_from(gram)] += params.noise_variance
    cross = kernel_matrix(params, data.inputs, queries)  # (n, B)

    fac = _spd_solve(gram, np.column_stack([data.outputs[:, None], cross]))
    alpha = fac[:, 0]
    solved_cross = fac[:, 1:]
    mean = cross.T @ alpha
    var = prior_var - np.sum(cross * solved_cross, axis=0)
    return mean, var


def _pooled_state(basis, data):
    """(G^T G / wN, G^T y / wN) for the pooled dataset."""
    g = basis.features(data.inputs)  # (wN, E)
    n = data.size
    return g.T @ g / n, g.T @ data.outputs / n


def _ridge(basis, wn):
    """Per-mode regularizer noise/(wN) * 1/lambda_e added to the normal matrix."""
    return basis.kernel.noise_variance / wn / basis.eigenvalues


def central_e_dim_estimate(basis, data, x):
    """Reduced-rank posterior mean on the pooled dataset at one position."""
    return float(central_e_dim_estimate_many(basis, data, np.asarray(x)[None, :])[0])


def central_e_dim_estimate_many(basis, data, queries):
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if data.size == 0:
        return np.zeros(queries.shape[0])
    a_mat, b_vec = _pooled_state(basis, data)
    a_mat = a_mat + np.diag(_ridge(basis, data.size))
    coeff = _spd_solve(a_mat, b_vec)
    return basis.features(queries) @ coeff


def central_e_dim_variance_many(basis, data, queries):
    """Reduced-rank posterior variance on the pooled dataset.

    Same formula the per-agent estimator uses, evaluated on the exact
    pooled moments; serves as the convergence target for consensus.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    prior = basis.kernel.signal_variance
    if data.size == 0:
        return np.full(queries.shape[0], prior)
    a_raw, _ = _pooled_state(basis, data)
    a_mat = a_raw + np.diag(_ridge(basis, data.size))
    m = _spd_solve(a_mat, a_raw * basis.eigenvalues[None, :])
    feats = basis.features(queries)
    quad = np.sum((feats @ m) * feats, axis=1)
    return np.clip(prior - quad, 0.0, prior)
