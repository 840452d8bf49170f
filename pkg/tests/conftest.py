import numpy as np
import pytest

from shapepbdw.config import TrainingConfig
from shapepbdw.mesh import GeometryDescriptor, generate_mesh

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def venturi():
    return GeometryDescriptor(0.14, 2.0, 2.0)


@pytest.fixture(scope="session")
def venturi_mesh(venturi):
    return generate_mesh(venturi, 0.04)


@pytest.fixture(scope="session")
def coarse_mesh():
    return generate_mesh(GeometryDescriptor(0.16, 2.0, 2.5), 0.08)


@pytest.fixture(scope="session")
def small_config():
    """2 x 2 template grid, 4 samples each; about ten seconds end to end."""
    return TrainingConfig(S_r=[0.14, 0.18], S_x=[2.0, 3.0], n_samples=4, n=6,
                          test_S_r=[0.16], test_S_x=[2.4], n_target=2, native_samples=5)


@pytest.fixture(scope="session")
def small_atlas(small_config, tmp_path_factory):
    from shapepbdw import pipeline
    return pipeline.train(small_config, tmp_path_factory.mktemp("atlas"))


@pytest.fixture(scope="session")
def desk_config():
    return TrainingConfig()


@pytest.fixture(scope="session")
def desk_atlas(desk_config, tmp_path_factory):
    from shapepbdw import pipeline
    return pipeline.train(desk_config, tmp_path_factory.mktemp("desk"))


@pytest.fixture(scope="session")
def desk_report(desk_atlas, tmp_path_factory):
    from shapepbdw import pipeline
    out = tmp_path_factory.mktemp("desk_report")
    return pipeline.benchmark(desk_atlas, out_dir=out), out
