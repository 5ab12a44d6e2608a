import numpy as np
import pytest

from martlab.families import SampledFunction, Tabulated

WIDE = np.linspace(-30.0, 30.0, 1201)


def sampled(fn, t_max=2.5, points=401):
    """Finely sampled c(t) on [0, t_max]."""
    return SampledFunction.from_callable(fn, np.linspace(0.0, t_max, points))


@pytest.fixture(scope="session")
def cube_table():
    # wide hull: quadrature nodes reach roughly +/- 16 sqrt(t)
    return Tabulated.from_function(lambda x: x**3, WIDE, "cube")


@pytest.fixture
def cube_csv(tmp_path):
    path = tmp_path / "cube.csv"
    rows = "".join(f"{x!r},{x**3!r}\n" for x in map(float, WIDE))
    path.write_text("x,f\n" + rows)
    return path
