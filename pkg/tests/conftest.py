import hypothesis
import pytest

hypothesis.settings.register_profile(
    "ci", max_examples=25, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.register_profile(
    "thorough", max_examples=200, deadline=None)
hypothesis.settings.load_profile("ci")


@pytest.fixture(scope="session")
def segment65():
    from cdkn import generate_example
    return generate_example("segment", n=65)


@pytest.fixture(scope="session")
def segment9():
    from cdkn import generate_example
    return generate_example("segment", n=9)


@pytest.fixture(scope="session")
def theta16():
    from cdkn import generate_example
    return generate_example("theta", k=16)


@pytest.fixture(scope="session")
def grid17():
    from cdkn import generate_example
    return generate_example("grid2d", m=17)


@pytest.fixture(scope="session")
def circle32():
    from cdkn import generate_example
    return generate_example("circle", n=32)


@pytest.fixture(scope="session")
def tripod8():
    from cdkn import generate_example
    return generate_example("tripod", arm_length=1, k=8)
