import numpy as np
import pytest

from gpswarm.basis import KernelParams, Workspace, build_basis
from gpswarm.env import EnvConfig, SwarmEnv, basis_for


@pytest.fixture(scope="session")
def params():
    return KernelParams()


@pytest.fixture(scope="session")
def workspace():
    return Workspace()


@pytest.fixture(scope="session")
def basis(params, workspace):
    """Default simulation basis: 41x41 grid, 40 modes."""
    return build_basis(params, workspace, grid_side=41, n_modes=40)


@pytest.fixture(scope="session")
def basis80(params, workspace):
    return build_basis(params, workspace, grid_side=41, n_modes=80)


@pytest.fixture(scope="session")
def full_basis(params, workspace):
    """Every numerically positive eigenpair retained."""
    with pytest.warns(UserWarning):
        return build_basis(params, workspace, grid_side=41, n_modes=None)


@pytest.fixture(scope="session")
def env_config():
    return EnvConfig()


@pytest.fixture(scope="session")
def shared_env(env_config):
    """One reusable environment (reset per test with explicit seeds)."""
    return SwarmEnv(env_config, basis=basis_for(env_config))


def random_dataset(rng, n_points, amplitude=1.0):
    """Smooth random field samples used as regression inputs in tests."""
    x = rng.uniform(-1.0, 1.0, (n_points, 2))
    y = amplitude * np.sin(2.0 * x[:, 0]) * np.cos(1.5 * x[:, 1])
    y = y + 0.1 * rng.standard_normal(n_points)
    return x, y
