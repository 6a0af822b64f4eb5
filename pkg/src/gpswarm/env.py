"""Multi-agent particle world over an unknown multi-target intensity field.

Agents move under double-integrator dynamics with speed/acceleration
limits, sense the summed target intensity with additive Gaussian noise,
fuse samples into their GP states, run a few neighbor-averaging rounds,
and receive a shared reward built from optimally assigned agent-target
distances gated by collisions. Observations are world-frame images: GP
mean, GP standard deviation, and an entity map.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import backends
from .basis import KernelParams, Workspace, build_basis
from .consensus import (
    GpState,
    build_graph,
    consensus_round,
    dist_mean_features,
    dist_var_features,
    fuse_measurement,
)
from .errors import ConfigError, EpisodeDone, PlacementError

_MAX_PLACEMENT_REJECTS = 10_000

# Entity-map intensity codes, later draws overwrite earlier ones.
CODE_OBSTACLE = 0.3
CODE_OTHER_AGENT = 0.6
CODE_EGO = 1.0


@dataclass(frozen=True)
class EnvConfig:
    workspace: Workspace = Workspace(-1.0, -1.0, 1.0, 1.0)
    n_agents: int = 3
    n_targets: int = 3
    n_obstacles: int = 2
    agent_radius: float = 0.05
    target_radius: float = 0.1
    obstacle_radius: float = 0.1
    v_max: float = 0.1
    a_max: float = 0.5
    dt: float = 0.1
    damping: float = 0.25
    d_comm: float = 2.0
    episode_len: int = 100
    d_char: float = 0.2
    target_amplitude: float = 1.0
    intensity_scale: float = 0.06
    noise_std: float = 0.1
    raster_size: int = 32
    consensus_rounds: int = 5
    n_modes: int = 40
    grid_side: int = 41
    signal_variance: float = 1.0
    length_scale_sq: tuple = (0.05, 0.05)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "length_scale_sq", tuple(self.length_scale_sq))
        positives = (
            "n_agents n_targets agent_radius target_radius obstacle_radius "
            "v_max a_max dt d_comm d_char target_amplitude intensity_scale "
            "raster_size consensus_rounds n_modes grid_side signal_variance"
        ).split()
        for name in positives:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.n_obstacles < 0 or self.noise_std < 0 or self.damping < 0:
            raise ConfigError("n_obstacles, noise_std and damping must be >= 0")
        if self.episode_len < 1:
            raise ConfigError("episode_len must be >= 1")
        if self.raster_size < 8:
            raise ConfigError("raster_size must be >= 8")

    @property
    def kernel_params(self):
        return KernelParams(
            signal_variance=self.signal_variance,
            length_scale_sq=tuple(self.length_scale_sq),
            noise_variance=self.noise_std**2,
        )

    def scenario(self, n_agents=None, n_targets=None, n_obstacles=None):
        """Copy with entity counts overridden (the AxTyOz scenarios)."""
        return replace(
            self,
            n_agents=self.n_agents if n_agents is None else n_agents,
            n_targets=self.n_targets if n_targets is None else n_targets,
            n_obstacles=self.n_obstacles if n_obstacles is None else n_obstacles,
        )


@dataclass
class WorldState:
    agent_pos: np.ndarray  # (N, 2)
    agent_vel: np.ndarray  # (N, 2)
    target_pos: np.ndarray  # (M, 2)
    target_amp: np.ndarray  # (M,)
    obstacle_pos: np.ndarray  # (O, 2)
    step_idx: int
    rng: np.random.Generator


@dataclass(frozen=True, eq=False)
class Observation:
    """World-frame image stack plus the agent's own velocity.

    Channel 0: GP mean; channel 1: GP standard deviation clamped to [0,1];
    channel 2: entity disks (ego 1.0, other agents 0.6, obstacles 0.3).
    Row r of the image corresponds to y = ymin + (r + 0.5) * cell height.
    """

    image: np.ndarray  # (3, H, W)
    velocity: np.ndarray  # (2,)


@dataclass(frozen=True, eq=False)
class StepResult:
    observations: list
    reward: float
    done: bool
    info: dict  # aa_collision, ao_collision, distances


@dataclass(frozen=True)
class Metrics:
    r_avg: float
    d_final: float
    cr_aa: float
    cr_ao: float


def signal_field(target_pos, target_amp, x, intensity_scale=0.06):
    """Summed radial intensity at position x (scalar form of the field)."""
    pts = np.asarray(x, dtype=np.float64).reshape(1, 2)
    return float(
        backends.signal_many(
            pts,
            np.asarray(target_pos, dtype=np.float64).reshape(-1, 2),
            np.asarray(target_amp, dtype=np.float64).ravel(),
            intensity_scale,
        )[0]
    )


def measure(world, config, agent_id, rng=None):
    """One noisy sensor reading at the agent's current position."""
    rng = world.rng if rng is None else rng
    value = signal_field(
        world.target_pos, world.target_amp, world.agent_pos[agent_id], config.intensity_scale
    )
    if config.noise_std > 0:
        value += config.noise_std * rng.standard_normal()
    return value


def assign_targets(agent_pos, target_pos):
    """Per-target distance under the optimal one-to-one agent assignment.

    Rectangular min-cost matching on the Euclidean distance matrix; with
    more targets than agents, unmatched targets score their distance to
    the nearest agent so every target contributes to the reward.
    """
    agents = np.atleast_2d(np.asarray(agent_pos, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(target_pos, dtype=np.float64))
    cost = np.linalg.norm(agents[:, None, :] - targets[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    dist = cost.min(axis=0)
    dist[cols] = cost[rows, cols]
    return dist


def _any_overlap(pos_a, rad_a, pos_b, rad_b):
    if len(pos_a) == 0 or len(pos_b) == 0:
        return False
    gap = np.linalg.norm(pos_a[:, None, :] - pos_b[None, :, :], axis=2)
    return bool(np.any(gap < rad_a + rad_b))


def detect_collisions(agent_pos, obstacle_pos, config):
    """(agent-agent, agent-obstacle) overlap flags at current positions."""
    n = agent_pos.shape[0]
    aa = False
    for i in range(n):
        diff = agent_pos[i + 1 :] - agent_pos[i]
        if np.any(np.sum(diff * diff, axis=1) < (2 * config.agent_radius) ** 2):
            aa = True
            break
    ao = _any_overlap(
        agent_pos, config.agent_radius, np.atleast_2d(obstacle_pos), config.obstacle_radius
    )
    return aa, ao


def compute_reward(distances, agent_pos, obstacle_pos, config):
    """Shared step reward: target-proximity score gated by any collision."""
    factors = 0.1 + 0.9 * np.exp(-np.asarray(distances) / config.d_char)
    r_target = float(np.prod(factors) ** (1.0 / len(factors)))
    aa, ao = detect_collisions(agent_pos, obstacle_pos, config)
    reward = 0.0 if (aa or ao) else r_target
    return reward, aa, ao


def rasterize_observation(world, config, agent_id, gp_mean_fn, gp_std_fn, cells=None):
    """Build one agent's 3-channel world-frame observation image.

    gp_mean_fn/gp_std_fn map an (H*W, 2) array of cell centers to (H*W,)
    values; the std channel is clamped to [0, 1]. Entities are drawn as
    filled disks at their true radii: obstacles first, then the other
    agents, the ego agent last so it always shows on top.
    """
    h = w = config.raster_size
    ws = config.workspace
    cell_w = (ws.xmax - ws.xmin) / w
    cell_h = (ws.ymax - ws.ymin) / h
    if cells is None:
        cells = raster_cells(config)

    mean = np.asarray(gp_mean_fn(cells), dtype=np.float64).reshape(h, w)
    std = np.clip(np.asarray(gp_std_fn(cells), dtype=np.float64), 0.0, 1.0).reshape(h, w)

    others = np.delete(world.agent_pos, agent_id, axis=0)
    obstacles = world.obstacle_pos.reshape(-1, 2)
    centers = np.vstack([obstacles, others, world.agent_pos[agent_id]])
    radii = np.concatenate(
        [
            np.full(len(obstacles), config.obstacle_radius),
            np.full(len(others), config.agent_radius),
            [config.agent_radius],
        ]
    )
    values = np.concatenate(
        [
            np.full(len(obstacles), CODE_OBSTACLE),
            np.full(len(others), CODE_OTHER_AGENT),
            [CODE_EGO],
        ]
    )
    entity = backends.entity_map(
        h,
        w,
        ws.xmin,
        ws.ymin,
        cell_w,
        cell_h,
        np.ascontiguousarray(centers, dtype=np.float64),
        radii,
        values,
    )
    image = np.stack([mean, std, entity])
    return Observation(image=image, velocity=world.agent_vel[agent_id].copy())


def raster_cells(config):
    """(H*W, 2) world coordinates of raster cell centers, row-major."""
    return config.workspace.cell_centers(config.raster_size)


def episode_metrics(trace):
    """Aggregate a list of StepResult into the four summary metrics."""
    if not trace:
        raise ValueError("empty trace")
    rewards = np.array([s.reward for s in trace])
    return Metrics(
        r_avg=float(rewards.mean()),
        d_final=float(np.mean(trace[-1].info["distances"])),
        cr_aa=float(np.mean([s.info["aa_collision"] for s in trace])),
        cr_ao=float(np.mean([s.info["ao_collision"] for s in trace])),
    )


def _clip_norm(vecs, limit):
    """Scale rows of (N, 2) down to the given Euclidean norm limit."""
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    factor = np.minimum(1.0, limit / np.maximum(norms, 1e-300))
    return vecs * factor


_BASIS_CACHE = {}


def basis_for(config):
    """Build (or reuse) the eigenbasis matching an EnvConfig."""
    key = (
        config.workspace,
        config.grid_side,
        config.n_modes,
        config.signal_variance,
        tuple(config.length_scale_sq),
        config.noise_std,
    )
    if key not in _BASIS_CACHE:
        _BASIS_CACHE[key] = build_basis(
            config.kernel_params, config.workspace, config.grid_side, config.n_modes
        )
    return _BASIS_CACHE[key]


class SwarmEnv:
    """One mutable episode-stepped world; not safe for concurrent mutation."""

    def __init__(self, config=EnvConfig(), basis=None):
        self.config = config
        self.basis = basis_for(config) if basis is None else basis
        self.world = None
        self.gp_states = None
        self._done = True
        self._cells = raster_cells(config)
        self._cell_feats = self.basis.features(self._cells)  # (H*W, E)

    def reset(self, seed):
        """Place entities (rejection-sampled non-overlapping), zero GP states."""
        cfg = self.config
        rng = np.random.default_rng(seed)
        radii = np.concatenate(
            [
                np.full(cfg.n_agents, cfg.agent_radius),
                np.full(cfg.n_targets, cfg.target_radius),
                np.full(cfg.n_obstacles, cfg.obstacle_radius),
            ]
        )
        placed = np.zeros((0, 2))
        rejects = 0
        low = (cfg.workspace.xmin, cfg.workspace.ymin)
        high = (cfg.workspace.xmax, cfg.workspace.ymax)
        for k in range(radii.shape[0]):
            while True:
                cand = rng.uniform(low, high)
                if placed.shape[0] == 0 or np.all(
                    np.linalg.norm(placed - cand, axis=1) >= radii[:k] + radii[k]
                ):
                    placed = np.vstack([placed, cand])
                    break
                rejects += 1
                if rejects > _MAX_PLACEMENT_REJECTS:
                    raise PlacementError(
                        f"no non-overlapping layout found after {rejects} rejections"
                    )
        n, m = cfg.n_agents, cfg.n_targets
        self.world = WorldState(
            agent_pos=placed[:n].copy(),
            agent_vel=np.zeros((n, 2)),
            target_pos=placed[n : n + m].copy(),
            target_amp=np.full(m, cfg.target_amplitude),
            obstacle_pos=placed[n + m :].copy(),
            step_idx=0,
            rng=rng,
        )
        self.gp_states = [GpState.zero(self.basis.n_modes, i) for i in range(n)]
        self._done = False
        return [self._observe(i) for i in range(n)]

    def step(self, actions):
        """Advance dynamics, sense, fuse, average, observe, and score."""
        if self.world is None:
            raise EpisodeDone("reset() must be called before step()")
        if self._done:
            raise EpisodeDone("episode already finished")
        cfg = self.config
        acts = np.asarray(actions, dtype=np.float64)
        if acts.shape != (cfg.n_agents, 2):
            raise ValueError(f"expected {cfg.n_agents}x2 actions, got {acts.shape}")
        if not np.all(np.isfinite(acts)):
            raise ValueError("non-finite action")

        w = self.world
        accel = _clip_norm(acts, cfg.a_max)
        vel = (1.0 - cfg.damping * cfg.dt) * w.agent_vel + accel * cfg.dt
        vel = _clip_norm(vel, cfg.v_max)
        pos = w.agent_pos + vel * cfg.dt
        pos[:, 0] = np.clip(pos[:, 0], cfg.workspace.xmin, cfg.workspace.xmax)
        pos[:, 1] = np.clip(pos[:, 1], cfg.workspace.ymin, cfg.workspace.ymax)
        w.agent_pos, w.agent_vel = pos, vel

        graph = build_graph(pos, cfg.d_comm)
        for i in range(cfg.n_agents):
            y = measure(w, cfg, i)
            self.gp_states[i] = fuse_measurement(self.gp_states[i], self.basis, pos[i], y)
        for _ in range(cfg.consensus_rounds):
            self.gp_states = consensus_round(self.gp_states, graph)

        observations = [self._observe(i) for i in range(cfg.n_agents)]
        distances = assign_targets(pos, w.target_pos)
        reward, aa, ao = compute_reward(distances, pos, w.obstacle_pos, cfg)

        w.step_idx += 1
        self._done = w.step_idx >= cfg.episode_len
        return StepResult(
            observations=observations,
            reward=reward,
            done=self._done,
            info={"aa_collision": aa, "ao_collision": ao, "distances": distances},
        )

    @property
    def done(self):
        return self._done

    def _observe(self, agent_id):
        state = self.gp_states[agent_id]
        n = self.config.n_agents
        mean_fn = lambda cells: dist_mean_features(state, self.basis, n, self._cell_feats)
        std_fn = lambda cells: np.sqrt(
            dist_var_features(state, self.basis, n, self._cell_feats)
        )
        return rasterize_observation(
            self.world, self.config, agent_id, mean_fn, std_fn, cells=self._cells
        )


def run_episode(env, policy, seed):
    """Roll one full episode under a policy; returns (Metrics, trace)."""
    observations = env.reset(seed)
    policy.reset()
    trace = []
    while not env.done:
        actions = np.stack(
            [policy.act(observations[i], i) for i in range(env.config.n_agents)]
        )
        result = env.step(actions)
        observations = result.observations
        trace.append(result)
    return episode_metrics(trace), trace
