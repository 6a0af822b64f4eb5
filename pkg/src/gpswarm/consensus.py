"""Per-agent fused GP states, neighbor averaging, and the distributed
mean/variance estimators.

Each agent carries a pair (alpha, beta): the running average of feature
outer products and of feature-weighted measurements. Those two objects are
all the network ever exchanges; neighbor averaging with Metropolis weights
drives every agent's copy to the network mean, at which point the local
estimator coincides with the centralized reduced-rank one on the pooled
data.
"""

import struct
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from . import backends
from .errors import ConditioningError

_MAGIC = b"GPGS"
_VERSION = 1


@dataclass(frozen=True, eq=False)
class GpState:
    """Sufficient statistics one agent holds after fusing its measurements."""

    alpha: np.ndarray  # (E, E) symmetric PSD
    beta: np.ndarray  # (E,)
    count: int  # measurements fused so far (the w in the update rule)
    agent_id: int = 0

    @classmethod
    def zero(cls, n_modes, agent_id=0):
        return cls(np.zeros((n_modes, n_modes)), np.zeros(n_modes), 0, agent_id)

    @property
    def n_modes(self):
        return self.beta.shape[0]


@dataclass(frozen=True)
class CommGraph:
    """Proximity communication graph: undirected, no self-edges."""

    n_agents: int
    edges: tuple  # sorted (i, j) pairs with i < j

    @property
    def degrees(self):
        deg = np.zeros(self.n_agents, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def metropolis_weights(self):
        """Per-edge weight 1 / (1 + max(deg_i, deg_j)); doubly stochastic."""
        deg = self.degrees
        return np.array([1.0 / (1.0 + max(deg[i], deg[j])) for i, j in self.edges])

    def is_connected(self):
        if self.n_agents <= 1:
            return True
        seen = {0}
        frontier = [0]
        adj = [[] for _ in range(self.n_agents)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        while frontier:
            node = frontier.pop()
            for nxt in adj[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return len(seen) == self.n_agents


def build_graph(positions, d_comm):
    """Edges between every pair strictly closer than d_comm."""
    pos = np.atleast_2d(np.asarray(positions, dtype=np.float64))
    n = pos.shape[0]
    if n < 1:
        raise ValueError("need at least one agent")
    edges = []
    for i in range(n):
        diff = pos[i + 1 :] - pos[i]
        dist = np.sqrt(np.sum(diff * diff, axis=1))
        for off in np.nonzero(dist < d_comm)[0]:
            edges.append((i, i + 1 + int(off)))
    return CommGraph(n, tuple(edges))


def fuse_measurement(state, basis, x, y):
    """Fold one (position, value) sample into the running moments.

    alpha' = w/(w+1) alpha + 1/(w+1) phi phi^T, and likewise for beta;
    starting from zero this reproduces the batch average exactly (up to
    the incremental-recursion rounding).
    """
    phi = basis.features(np.asarray(x, dtype=np.float64))
    w = state.count
    frac_old = w / (w + 1.0)
    frac_new = 1.0 / (w + 1.0)
    return GpState(
        alpha=frac_old * state.alpha + frac_new * np.outer(phi, phi),
        beta=frac_old * state.beta + frac_new * phi * y,
        count=w + 1,
        agent_id=state.agent_id,
    )


def consensus_round(states, graph):
    """One synchronous Metropolis averaging round; returns new states.

    Every agent reads its neighbors' pre-round states, so the result is
    independent of agent ordering. Measurement counts are untouched; the
    network-wide mean of every entry is preserved.
    """
    if len(states) != graph.n_agents:
        raise ValueError("state count does not match the graph")
    dims = {s.n_modes for s in states}
    if len(dims) != 1:
        raise ValueError("states disagree in dimension")
    counts = {s.count for s in states}
    if len(counts) != 1:
        raise ValueError("consensus assumes identical measurement counts")
    if not graph.edges:
        return list(states)

    alphas = np.ascontiguousarray(np.stack([s.alpha for s in states]))
    betas = np.ascontiguousarray(np.stack([s.beta for s in states]))
    edges = np.asarray(graph.edges, dtype=np.int64).reshape(-1, 2)
    weights = graph.metropolis_weights()
    new_a, new_b = backends.consensus_sweep(alphas, betas, edges, weights)
    return [
        GpState(new_a[i], new_b[i], states[i].count, states[i].agent_id)
        for i in range(graph.n_agents)
    ]


def _regularized(state, basis, n_agents):
    if state.count == 0:
        raise ValueError("state holds no measurements")
    ridge = basis.kernel.noise_variance / (state.count * n_agents) / basis.eigenvalues
    return state.alpha + np.diag(ridge)


def _spd_solve(mat, rhs):
    try:
        return cho_solve(cho_factor(mat, lower=True), rhs)
    except (LinAlgError, np.linalg.LinAlgError) as exc:
        raise ConditioningError(f"SPD factorization failed: {exc}") from exc


def dist_mean(state, basis, n_agents, x):
    """This agent's posterior-mean estimate at one position."""
    return float(dist_mean_many(state, basis, n_agents, np.asarray(x)[None, :])[0])


def dist_mean_many(state, basis, n_agents, queries):
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if state.count == 0:
        return np.zeros(queries.shape[0])
    return dist_mean_features(state, basis, n_agents, basis.features(queries))


def dist_mean_features(state, basis, n_agents, feats):
    """Mean estimate applied to precomputed feature rows (B, E)."""
    if state.count == 0:
        return np.zeros(feats.shape[0])
    coeff = _spd_solve(_regularized(state, basis, n_agents), state.beta)
    return feats @ coeff


def dist_var(state, basis, n_agents, x):
    """This agent's posterior-variance estimate, clamped to [0, k(x,x)]."""
    return float(dist_var_many(state, basis, n_agents, np.asarray(x)[None, :])[0])


def dist_var_many(state, basis, n_agents, queries):
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if state.count == 0:
        return np.full(queries.shape[0], basis.kernel.signal_variance)
    return dist_var_features(state, basis, n_agents, basis.features(queries))


def dist_var_features(state, basis, n_agents, feats):
    """Variance estimate applied to precomputed feature rows (B, E)."""
    prior = basis.kernel.signal_variance
    if state.count == 0:
        return np.full(feats.shape[0], prior)
    m = _spd_solve(
        _regularized(state, basis, n_agents),
        state.alpha * basis.eigenvalues[None, :],
    )
    quad = np.sum((feats @ m) * feats, axis=1)
    return np.clip(prior - quad, 0.0, prior)


def save_state(state, path):
    """Same binary container idiom as the basis file: magic, version, payload."""
    e_dim = state.n_modes
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<IIQ", state.agent_id, e_dim, state.count))
        fh.write(np.ascontiguousarray(state.alpha).tobytes())
        fh.write(np.ascontiguousarray(state.beta).tobytes())


def load_state(path):
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a GP state file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        agent_id, e_dim, count = struct.unpack("<IIQ", fh.read(16))
        alpha = (
            np.frombuffer(fh.read(8 * e_dim * e_dim), dtype=np.float64)
            .reshape(e_dim, e_dim)
            .copy()
        )
        beta = np.frombuffer(fh.read(8 * e_dim), dtype=np.float64).copy()
    return GpState(alpha, beta, count, agent_id)
