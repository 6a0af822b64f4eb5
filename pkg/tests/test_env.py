import itertools
import math

import numpy as np
import pytest

from gpswarm.consensus import dist_mean, dist_var
from gpswarm.env import (
    EnvConfig,
    Metrics,
    StepResult,
    SwarmEnv,
    assign_targets,
    compute_reward,
    episode_metrics,
    measure,
    rasterize_observation,
    run_episode,
    signal_field,
)
from gpswarm.errors import ConfigError, EpisodeDone, PlacementError
from gpswarm.policies import RandomPolicy


class TestSignalField:
    def test_at_lone_target(self):
        assert signal_field(np.array([[0.2, 0.2]]), np.ones(1), (0.2, 0.2)) == pytest.approx(1.0)

    def test_two_targets_at_same_distance(self):
        # Hand evaluation: 2 * exp(-0.5 * 0.36 / 0.06) = 2 * exp(-3).
        targets = np.array([[0.6, 0.0], [-0.6, 0.0]])
        value = signal_field(targets, np.ones(2), (0.0, 0.0))
        assert value == pytest.approx(2.0 * math.exp(-3.0), rel=1e-12)

    def test_no_targets(self):
        assert signal_field(np.zeros((0, 2)), np.zeros(0), (0.1, 0.1)) == 0.0

    def test_lipschitz_probe(self):
        # h'(d) peaks at sqrt(scale): |h'| <= sqrt(scale)/scale * exp(-1/2).
        rng = np.random.default_rng(3)
        targets = rng.uniform(-1, 1, (3, 2))
        amps = np.ones(3)
        lip = 3 * (math.sqrt(0.06) / 0.06) * math.exp(-0.5) * 1.001
        for _ in range(100):
            x = rng.uniform(-1, 1, 2)
            delta = rng.standard_normal(2)
            delta = 1e-4 * delta / np.linalg.norm(delta)
            diff = abs(
                signal_field(targets, amps, x + delta) - signal_field(targets, amps, x)
            )
            assert diff <= lip * 1e-4


class TestMeasure:
    def test_noise_free_equals_field(self, shared_env):
        env = SwarmEnv(EnvConfig(noise_std=0.0), basis=shared_env.basis)
        env.reset(seed=5)
        w = env.world
        for i in range(env.config.n_agents):
            expected = signal_field(w.target_pos, w.target_amp, w.agent_pos[i])
            assert measure(w, env.config, i) == expected

    def test_fixed_seed_reproducible(self, shared_env):
        vals1 = []
        vals2 = []
        for vals in (vals1, vals2):
            shared_env.reset(seed=9)
            for _ in range(10):
                vals.append(measure(shared_env.world, shared_env.config, 0))
        assert vals1 == vals2

    def test_noise_mean_clt(self, shared_env):
        shared_env.reset(seed=13)
        w = shared_env.world
        cfg = shared_env.config
        truth = signal_field(w.target_pos, w.target_amp, w.agent_pos[0])
        n = 100_000
        draws = np.array([measure(w, cfg, 0) for _ in range(n)])
        assert abs(draws.mean() - truth) < 3 * cfg.noise_std / math.sqrt(n)


class TestReset:
    def test_same_seed_bit_identical(self, shared_env):
        shared_env.reset(seed=21)
        w1 = shared_env.world
        pos1, tgt1, obs1 = w1.agent_pos.copy(), w1.target_pos.copy(), w1.obstacle_pos.copy()
        shared_env.reset(seed=21)
        w2 = shared_env.world
        assert np.array_equal(pos1, w2.agent_pos)
        assert np.array_equal(tgt1, w2.target_pos)
        assert np.array_equal(obs1, w2.obstacle_pos)

    def test_entities_do_not_overlap(self, shared_env):
        cfg = shared_env.config
        for seed in range(5):
            shared_env.reset(seed=seed)
            w = shared_env.world
            pos = np.vstack([w.agent_pos, w.target_pos, w.obstacle_pos])
            radii = np.concatenate(
                [
                    np.full(cfg.n_agents, cfg.agent_radius),
                    np.full(cfg.n_targets, cfg.target_radius),
                    np.full(cfg.n_obstacles, cfg.obstacle_radius),
                ]
            )
            assert pos.shape[0] == 8  # A3 T3 O2
            for i, j in itertools.combinations(range(pos.shape[0]), 2):
                assert np.linalg.norm(pos[i] - pos[j]) >= radii[i] + radii[j]

    def test_initial_observation_is_prior(self, shared_env):
        observations = shared_env.reset(seed=2)
        for o in observations:
            assert np.all(o.image[0] == 0.0)
            assert np.all(o.image[1] == 1.0)
            assert np.array_equal(o.velocity, np.zeros(2))

    def test_overcrowded_config_fails(self):
        cfg = EnvConfig(n_agents=2, n_targets=1, n_obstacles=60, obstacle_radius=0.4,
                        grid_side=11, n_modes=10)
        env = SwarmEnv(cfg)
        with pytest.raises(PlacementError):
            env.reset(seed=0)


class TestStep:
    def test_zero_action_from_rest(self, shared_env):
        shared_env.reset(seed=31)
        before = shared_env.world.agent_pos.copy()
        result = shared_env.step(np.zeros((3, 2)))
        assert np.array_equal(shared_env.world.agent_pos, before)
        assert np.array_equal(shared_env.world.agent_vel, np.zeros((3, 2)))
        assert isinstance(result, StepResult)

    def test_acceleration_clipped(self, shared_env):
        cfg = shared_env.config
        shared_env.reset(seed=33)
        actions = np.tile([2.0, 0.0], (3, 1))
        shared_env.step(actions)
        # applied accel was (0.5, 0): one step from rest gives v = a_max * dt
        expected = cfg.a_max * cfg.dt
        assert np.allclose(shared_env.world.agent_vel[:, 0], expected, atol=1e-15)
        assert np.all(shared_env.world.agent_vel[:, 1] == 0.0)

    def test_speed_saturates_at_v_max(self, shared_env):
        cfg = shared_env.config
        shared_env.reset(seed=35)
        for k in range(10):
            shared_env.step(np.tile([cfg.a_max, 0.0], (3, 1)))
        speeds = np.linalg.norm(shared_env.world.agent_vel, axis=1)
        assert np.all(speeds <= cfg.v_max + 1e-12)
        assert np.allclose(speeds, cfg.v_max, atol=1e-12)

    def test_limits_never_violated_under_random_actions(self, shared_env):
        cfg = shared_env.config
        rng = np.random.default_rng(37)
        shared_env.reset(seed=37)
        for _ in range(200):
            if shared_env.done:
                shared_env.reset(seed=int(rng.integers(1 << 31)))
            prev_vel = shared_env.world.agent_vel.copy()
            result = shared_env.step(rng.uniform(-3, 3, (3, 2)))
            vel = shared_env.world.agent_vel
            assert np.all(np.linalg.norm(vel, axis=1) <= cfg.v_max + 1e-12)
            implied_a = (vel - (1 - cfg.damping * cfg.dt) * prev_vel) / cfg.dt
            assert np.all(np.linalg.norm(implied_a, axis=1) <= cfg.a_max + 1e-9)
            assert 0.0 <= result.reward <= 1.0

    def test_positions_stay_in_workspace(self, shared_env):
        cfg = shared_env.config
        shared_env.reset(seed=39)
        for _ in range(60):
            shared_env.step(np.tile([cfg.a_max, cfg.a_max], (3, 1)))
        assert np.all(cfg.workspace.contains(shared_env.world.agent_pos))

    def test_done_at_episode_end_and_step_after_raises(self):
        cfg = EnvConfig(episode_len=3)
        env = SwarmEnv(cfg)
        env.reset(seed=41)
        for k in range(3):
            result = env.step(np.zeros((3, 2)))
        assert result.done
        with pytest.raises(EpisodeDone):
            env.step(np.zeros((3, 2)))

    def test_action_validation(self, shared_env):
        shared_env.reset(seed=43)
        with pytest.raises(ValueError):
            shared_env.step(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            shared_env.step(np.full((3, 2), np.nan))

    def test_full_determinism(self, env_config):
        rng = np.random.default_rng(45)
        actions = rng.uniform(-1, 1, (100, 3, 2))
        traces = []
        for _ in range(2):
            env = SwarmEnv(env_config)
            env.reset(seed=99)
            rows = []
            for k in range(100):
                r = env.step(actions[k])
                rows.append(
                    (
                        r.reward,
                        r.info["aa_collision"],
                        r.info["ao_collision"],
                        r.info["distances"].tobytes(),
                        env.world.agent_pos.tobytes(),
                        env.world.agent_vel.tobytes(),
                        np.stack([o.image for o in r.observations]).tobytes(),
                    )
                )
            traces.append(rows)
        assert traces[0] == traces[1]


class TestAssignment:
    def test_coincident_agents_and_targets(self):
        pos = np.array([[0.1, 0.1], [0.5, -0.5]])
        assert np.allclose(assign_targets(pos, pos), 0.0)

    def test_crossing_assignment_has_zero_cost(self):
        agents = np.array([[0.0, 0.0], [1.0, 0.0]])
        targets = np.array([[1.0, 0.0], [0.0, 0.0]])
        assert np.allclose(assign_targets(agents, targets), 0.0)

    @pytest.mark.parametrize("n_agents,n_targets", [(3, 3), (2, 4), (4, 2), (1, 3), (5, 5)])
    def test_matches_brute_force(self, n_agents, n_targets):
        rng = np.random.default_rng(n_agents * 10 + n_targets)
        for _ in range(25):
            agents = rng.uniform(-1, 1, (n_agents, 2))
            targets = rng.uniform(-1, 1, (n_targets, 2))
            dist = assign_targets(agents, targets)
            cost = np.linalg.norm(agents[:, None] - targets[None, :], axis=2)
            best_total, matched_targets = brute_force_assignment(cost)
            if n_agents >= n_targets:
                # every target matched: distances must sum to the optimum
                assert float(dist.sum()) == pytest.approx(best_total, abs=1e-12)
            else:
                # matched targets carry the optimal assignment, the rest
                # fall back to their nearest agent
                assert dist[sorted(matched_targets)].sum() == pytest.approx(
                    best_total, abs=1e-12
                )
                for m in range(n_targets):
                    if m not in matched_targets:
                        assert dist[m] == pytest.approx(cost[:, m].min(), abs=1e-12)

    def test_unmatched_targets_use_nearest_agent(self):
        agents = np.array([[0.0, 0.0]])
        targets = np.array([[1.0, 0.0], [0.0, 2.0], [0.0, 0.1]])
        dist = assign_targets(agents, targets)
        # The single agent is optimally assigned to the closest target;
        # the other two report their distance to that (only) agent.
        assert dist[2] == pytest.approx(0.1)
        assert dist[0] == pytest.approx(1.0)
        assert dist[1] == pytest.approx(2.0)


def brute_force_assignment(cost):
    """Exhaustive minimum-cost one-to-one matching of the smaller side.

    Returns (total cost, set of matched target columns).
    """
    n, m = cost.shape
    k = min(n, m)
    best = np.inf
    best_cols = None
    if n <= m:
        for cols in itertools.permutations(range(m), k):
            total = sum(cost[i, c] for i, c in enumerate(cols))
            if total < best:
                best, best_cols = total, set(cols)
    else:
        for rows in itertools.permutations(range(n), k):
            total = sum(cost[r, j] for j, r in enumerate(rows))
            if total < best:
                best, best_cols = total, set(range(m))
    return best, best_cols


class TestReward:
    def test_perfect_positions_no_collision(self):
        cfg = EnvConfig()
        agents = np.array([[0.5, 0.5], [-0.5, -0.5], [0.5, -0.5]])
        reward, aa, ao = compute_reward(np.zeros(3), agents, np.zeros((0, 2)), cfg)
        assert reward == pytest.approx(1.0)
        assert not aa and not ao

    def test_overlap_zeroes_reward(self):
        cfg = EnvConfig()
        agents = np.array([[0.0, 0.0], [0.05, 0.0], [0.8, 0.8]])  # dist 0.05 < 0.1
        reward, aa, ao = compute_reward(np.zeros(3), agents, np.zeros((0, 2)), cfg)
        assert reward == 0.0
        assert aa and not ao

    def test_obstacle_overlap(self):
        cfg = EnvConfig()
        agents = np.array([[0.0, 0.0], [0.5, 0.5], [-0.5, 0.5]])
        obstacles = np.array([[0.1, 0.0]])  # dist 0.1 < 0.15
        reward, aa, ao = compute_reward(np.ones(3), agents, obstacles, cfg)
        assert reward == 0.0
        assert ao and not aa

    def test_characteristic_distance_value(self):
        # Hand case: single target at d = d_char gives 0.1 + 0.9/e.
        cfg = EnvConfig(n_targets=1)
        agents = np.array([[0.9, 0.9], [-0.9, -0.9], [0.9, -0.9]])
        reward, _, _ = compute_reward(np.array([cfg.d_char]), agents, np.zeros((0, 2)), cfg)
        assert reward == pytest.approx(0.1 + 0.9 * math.exp(-1.0), abs=1e-6)

    def test_reward_bounds(self):
        cfg = EnvConfig()
        rng = np.random.default_rng(55)
        agents = np.array([[0.5, 0.5], [-0.5, -0.5], [0.5, -0.5]])
        for _ in range(100):
            d = rng.uniform(0, 3, 3)
            r, _, _ = compute_reward(d, agents, np.zeros((0, 2)), cfg)
            assert 0.1 < r <= 1.0

    def test_collision_symmetry(self):
        cfg = EnvConfig(n_agents=2)
        a = np.array([[0.0, 0.0], [0.09, 0.0]])
        r1, aa1, _ = compute_reward(np.zeros(3), a, np.zeros((0, 2)), cfg)
        r2, aa2, _ = compute_reward(np.zeros(3), a[::-1], np.zeros((0, 2)), cfg)
        assert aa1 == aa2 == True  # noqa: E712


class TestRasterization:
    def test_shape_and_codes(self, shared_env):
        obs = shared_env.reset(seed=61)
        for o in obs:
            assert o.image.shape == (3, 32, 32)
            assert set(np.unique(o.image[2])) <= {0.0, 0.3, 0.6, 1.0}

    def test_mean_channel_equals_dist_mean_at_cells(self, shared_env):
        shared_env.reset(seed=63)
        result = shared_env.step(np.zeros((3, 2)))
        o = result.observations[1]
        state = shared_env.gp_states[1]
        cells = shared_env._cells
        flat_mean = o.image[0].ravel()
        flat_std = o.image[1].ravel()
        for idx in (0, 107, 500, 1023):
            m = dist_mean(state, shared_env.basis, 3, cells[idx])
            v = dist_var(state, shared_env.basis, 3, cells[idx])
            assert flat_mean[idx] == pytest.approx(m, abs=1e-12)
            assert flat_std[idx] == pytest.approx(math.sqrt(v), abs=1e-12)

    def test_ego_cell_marked(self, env_config, shared_env):
        shared_env.reset(seed=65)
        w = shared_env.world
        cells = shared_env._cells
        # Move agent 0 exactly onto a cell center, then rasterize.
        w.agent_pos[0] = cells[33 * 1 + 5].copy()
        obs = shared_env._observe(0)
        h = env_config.raster_size
        image = obs.image[2].ravel()
        idx = int(np.argmin(np.linalg.norm(cells - w.agent_pos[0], axis=1)))
        assert image[idx] == 1.0

    def test_draw_order_ego_on_top(self, shared_env):
        shared_env.reset(seed=67)
        w = shared_env.world
        w.agent_pos[1] = w.agent_pos[0].copy()  # overlap another agent with ego
        obs0 = shared_env._observe(0)
        # ego disk hides the other agent's disk where they coincide
        ego_cells = obs0.image[2] == 1.0
        assert ego_cells.sum() >= 1

    def test_injected_map_functions(self, shared_env):
        shared_env.reset(seed=69)
        cfg = shared_env.config
        obs = rasterize_observation(
            shared_env.world,
            cfg,
            0,
            lambda cells: np.full(cells.shape[0], 0.25),
            lambda cells: np.full(cells.shape[0], 2.0),
        )
        assert np.all(obs.image[0] == 0.25)
        assert np.all(obs.image[1] == 1.0)  # std clamped to [0, 1]


class TestMetrics:
    def _mk(self, reward, aa=False, ao=False, dist=(0.1, 0.2)):
        return StepResult(
            observations=[],
            reward=reward,
            done=False,
            info={
                "aa_collision": aa,
                "ao_collision": ao,
                "distances": np.asarray(dist),
            },
        )

    def test_all_ones(self):
        m = episode_metrics([self._mk(1.0) for _ in range(10)])
        assert m.r_avg == 1.0

    def test_collision_rate(self):
        trace = [self._mk(0.5, aa=(k < 5)) for k in range(100)]
        m = episode_metrics(trace)
        assert m.cr_aa == pytest.approx(0.05)
        assert m.cr_ao == 0.0

    def test_final_distance(self):
        trace = [self._mk(0.5), self._mk(0.5, dist=(0.3, 0.5))]
        assert episode_metrics(trace).d_final == pytest.approx(0.4)

    def test_empty_trace_rejected(self):
        with pytest.raises(ValueError):
            episode_metrics([])

    def test_metrics_from_episode_in_bounds(self, shared_env):
        m, trace = run_episode(shared_env, RandomPolicy(71, 0.5), seed=71)
        assert isinstance(m, Metrics)
        assert 0.0 <= m.r_avg <= 1.0
        assert 0.0 <= m.cr_aa <= 1.0
        assert 0.0 <= m.cr_ao <= 1.0
        assert len(trace) == shared_env.config.episode_len


class TestConfigValidation:
    def test_defaults_valid(self):
        EnvConfig()

    def test_bad_values_rejected(self):
        with pytest.raises(ConfigError):
            EnvConfig(n_agents=0)
        with pytest.raises(ConfigError):
            EnvConfig(episode_len=0)
        with pytest.raises(ConfigError):
            EnvConfig(raster_size=4)
        with pytest.raises(ConfigError):
            EnvConfig(noise_std=-0.1)

    def test_scenario_override(self):
        cfg = EnvConfig().scenario(n_agents=5, n_obstacles=0)
        assert cfg.n_agents == 5
        assert cfg.n_targets == 3
        assert cfg.n_obstacles == 0
