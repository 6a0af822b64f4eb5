import pytest

from swarm_marl.client import EnvClient, ServerProcess


@pytest.fixture(scope="session")
def short_episode_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "short.cfg"
    path.write_text("episode_len = 20\n")
    return path


@pytest.fixture(scope="session")
def server(short_episode_config):
    with ServerProcess(config_path=short_episode_config, port=0) as srv:
        yield srv


@pytest.fixture
def client(server):
    c = EnvClient(server.host, server.port)
    yield c
    c.close()
