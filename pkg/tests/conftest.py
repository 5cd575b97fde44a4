import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ofmkit.flow import FlowConfig
from ofmkit.graph import build_graph
from ofmkit.scenes import crop_image, make_texture

settings.register_profile(
    "ofmkit", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ofmkit")


def crop_line(n: int, spacing: float = 5.0, side: int = 64, seed: int = 4) -> list:
    """Crops sliding along a texture row: a 1-parameter translation family."""
    tex = make_texture(side + 128, side + 128, seed=seed)
    return [crop_image(tex, 40.0 + spacing * i, 48.0, side, side) for i in range(n)]


@pytest.fixture(scope="session")
def line_images():
    return crop_line(3)


@pytest.fixture(scope="session")
def line_graph(line_images):
    graph = build_graph(line_images, FlowConfig())
    assert graph.edges, "translation line produced no consistent pairs"
    return graph


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
