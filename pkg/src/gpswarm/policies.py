"""Built-in controllers: a seeded random policy and a map-driven heuristic.

Both implement the same two-method surface (act/reset) that remote learned
policies satisfy on the other side of the wire protocol. The heuristic
works purely from the observation image: it extracts entity positions from
the entity channel, detects intensity peaks on the mean channel, assigns
agents to peaks, and steers unassigned agents toward the most uncertain
promising cell.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .env import CODE_EGO, CODE_OBSTACLE, CODE_OTHER_AGENT


class Policy:
    """Minimal controller surface shared by local and remote policies."""

    def act(self, observation, agent_id):
        raise NotImplementedError

    def reset(self):
        """Per-episode hook; stateless policies ignore it."""


def random_act(rng, a_max):
    """One action drawn uniformly from the acceleration disk."""
    radius = a_max * np.sqrt(rng.uniform())
    angle = rng.uniform(0.0, 2.0 * np.pi)
    return np.array([radius * np.cos(angle), radius * np.sin(angle)])


class RandomPolicy(Policy):
    def __init__(self, seed, a_max=0.5):
        self.seed = seed
        self.a_max = a_max
        self.rng = np.random.default_rng(seed)

    def act(self, observation, agent_id):
        return random_act(self.rng, self.a_max)

    def reset(self):
        self.rng = np.random.default_rng(self.seed)


@dataclass(frozen=True)
class HeuristicConfig:
    peak_threshold: float = 0.15  # mean-channel level that counts as a found target
    ucb_weight: float = 0.6  # exploration score is mean + weight * std
    k_p: float = 2.5  # waypoint attraction gain
    k_d: float = 2.0  # velocity damping gain
    obstacle_gain: float = 6e-3  # per-cell repulsion strength
    obstacle_cutoff: float = 0.3  # repulsion range from obstacle cells

    def __post_init__(self):
        for name in ("peak_threshold", "ucb_weight", "k_p", "k_d", "obstacle_gain", "obstacle_cutoff"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def detect_peaks(mean_channel, threshold):
    """Cells strictly greater than their 8-neighborhood and above threshold.

    Returns (row, col) index pairs ordered by flattened raster index.
    """
    m = np.asarray(mean_channel)
    padded = np.full((m.shape[0] + 2, m.shape[1] + 2), -np.inf)
    padded[1:-1, 1:-1] = m
    is_peak = m > threshold
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            is_peak &= m > padded[1 + dr : m.shape[0] + 1 + dr, 1 + dc : m.shape[1] + 1 + dc]
    rows, cols = np.nonzero(is_peak)
    return list(zip(rows.tolist(), cols.tolist()))


def _components(mask):
    """Connected components (8-neighborhood) of a boolean raster mask."""
    visited = np.zeros_like(mask, dtype=bool)
    comps = []
    h, w = mask.shape
    for r in range(h):
        for c in range(w):
            if not mask[r, c] or visited[r, c]:
                continue
            stack = [(r, c)]
            visited[r, c] = True
            cells = []
            while stack:
                cr, cc = stack.pop()
                cells.append((cr, cc))
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        nr, nc = cr + dr, cc + dc
                        if 0 <= nr < h and 0 <= nc < w and mask[nr, nc] and not visited[nr, nc]:
                            visited[nr, nc] = True
                            stack.append((nr, nc))
            comps.append(cells)
    return comps


def _cell_world(cells_grid, rc_pairs):
    """World coordinates of (row, col) cells; cells_grid is (H, W, 2)."""
    idx = np.asarray(rc_pairs, dtype=np.int64)
    return cells_grid[idx[:, 0], idx[:, 1]]


def heuristic_act(observation, peaks, config, cells_grid, a_max=0.5):
    """Deterministic search-and-track action from one observation.

    peaks is the shared list of detected target cells (row, col). The
    agent recovers its own and the other agents' positions from the
    entity channel, runs the agents-to-peaks assignment, and either
    tracks its assigned peak or moves to the highest mean + c*std cell.
    A short-range repulsion away from obstacle cells is added, and the
    result is clipped to the acceleration disk.

    Agent rows are ordered by position before the assignment so that
    every agent, computing this from its own observation of a shared
    map, lands on a consistent matching.
    """
    image = observation.image
    mean_ch, std_ch, entity = image[0], image[1], image[2]

    ego_cells = np.argwhere(entity == CODE_EGO)
    if len(ego_cells) == 0:
        ego_pos = cells_grid.reshape(-1, 2).mean(axis=0)
    else:
        ego_pos = _cell_world(cells_grid, ego_cells).mean(axis=0)

    agent_positions = [ego_pos]
    for comp in _components(entity == CODE_OTHER_AGENT):
        agent_positions.append(_cell_world(cells_grid, comp).mean(axis=0))
    agent_positions = np.array(agent_positions)
    order = np.lexsort((agent_positions[:, 0], agent_positions[:, 1]))
    agent_positions = agent_positions[order]
    ego_row = int(np.nonzero(order == 0)[0][0])

    waypoint = None
    if peaks:
        peak_pos = _cell_world(cells_grid, peaks)
        cost = np.linalg.norm(agent_positions[:, None, :] - peak_pos[None, :, :], axis=2)
        rows, cols = linear_sum_assignment(cost)
        for r, c in zip(rows, cols):
            if r == ego_row:
                waypoint = peak_pos[c]
                break
    if waypoint is None:
        score = mean_ch + config.ucb_weight * std_ch
        flat = int(np.argmax(score))
        waypoint = cells_grid.reshape(-1, 2)[flat]

    action = config.k_p * (waypoint - ego_pos) - config.k_d * observation.velocity

    obstacle_cells = np.argwhere(entity == CODE_OBSTACLE)
    if len(obstacle_cells) > 0:
        obs_pos = _cell_world(cells_grid, obstacle_cells)
        delta = ego_pos[None, :] - obs_pos
        dist = np.linalg.norm(delta, axis=1)
        near = dist < config.obstacle_cutoff
        if np.any(near):
            # Classic potential-field term: zero at the cutoff, steep at contact.
            d = np.maximum(dist[near], 1e-6)
            strength = (1.0 / d - 1.0 / config.obstacle_cutoff) / (d * d)
            action = action + config.obstacle_gain * np.sum(
                (delta[near] / d[:, None]) * strength[:, None], axis=0
            )

    norm = float(np.linalg.norm(action))
    if norm > a_max:
        action = action * (a_max / norm)
    return action


class HeuristicPolicy(Policy):
    """Search-and-track baseline driven entirely by the observation image."""

    def __init__(self, env_config, heuristic_config=HeuristicConfig()):
        self.config = heuristic_config
        self.a_max = env_config.a_max
        h = env_config.raster_size
        self.cells_grid = env_config.workspace.cell_centers(h).reshape(h, h, 2)

    def act(self, observation, agent_id):
        peaks = detect_peaks(observation.image[0], self.config.peak_threshold)
        return heuristic_act(
            observation, peaks, self.config, self.cells_grid, a_max=self.a_max
        )
