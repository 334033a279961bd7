import pytest

from roadparallax import default_scene, ground_truth


@pytest.fixture(scope="session")
def scene():
    return default_scene()


@pytest.fixture(scope="session")
def gt(scene):
    # one full render pair shared by everything that needs real data
    return ground_truth(scene)
