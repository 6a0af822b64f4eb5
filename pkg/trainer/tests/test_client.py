import numpy as np
import pytest

from swarm_marl.client import EnvClient, ProtocolError


class TestEnvClient:
    def test_hello_reports_geometry(self, client):
        cfg = client.hello()
        assert cfg["n_agents"] == 3
        assert cfg["h"] == cfg["w"] == 32
        assert cfg["episode_len"] == 20
        assert cfg["a_max"] == 0.5

    def test_reset_and_step_arrays(self, client):
        obs, vel = client.reset(seed=3)
        assert obs.shape == (3, 3, 32, 32)
        assert obs.dtype == np.float32
        assert vel.shape == (3, 2)
        next_obs, next_vel, reward, done, info = client.step(np.zeros((3, 2)))
        assert next_obs.shape == obs.shape
        assert 0.0 <= reward <= 1.0
        assert done is False
        assert set(info) == {"aa", "ao", "dist"}
        assert len(info["dist"]) == 3

    def test_same_seed_same_initial_obs(self, client):
        a, _ = client.reset(seed=11)
        b, _ = client.reset(seed=11)
        assert np.array_equal(a, b)

    def test_episode_runs_to_done(self, client):
        client.reset(seed=5)
        done = False
        steps = 0
        while not done:
            _, _, _, done, _ = client.step(np.zeros((3, 2)))
            steps += 1
        assert steps == 20

    def test_protocol_error_surfaces(self, client):
        with pytest.raises(ProtocolError):
            client.step(np.zeros((3, 2)).tolist() + [[0.0, 0.0]])  # wrong arity

    def test_entity_channel_codes(self, client):
        obs, _ = client.reset(seed=7)
        codes = np.unique(obs[:, 2])
        allowed = np.array([0.0, 0.3, 0.6, 1.0], dtype=np.float32)
        assert np.isin(codes, allowed).all()
        assert np.float32(1.0) in codes
