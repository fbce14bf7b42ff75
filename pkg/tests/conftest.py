import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pseudoshrink.randmat import SpectralModel, generate_observations, sample_haar_basis

settings.register_profile(
    "pkg", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("pkg")

# filled by the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


def draw(p: int, n: int, seed: int = 0, identity: bool = False, dist: str = "normal"):
    """(model, observations) with a Haar-rotated mixed spectrum, or Sigma = I."""
    rng = np.random.default_rng(seed)
    if identity:
        model = SpectralModel.identity(p)
    else:
        model = SpectralModel.paper_mix(p, sample_haar_basis(p, rng))
    return model, generate_observations(model, n, dist, seed=rng)


@pytest.fixture
def wide_sample():
    return draw(120, 50, seed=11)


@pytest.fixture
def tall_sample():
    return draw(40, 120, seed=12)
