import numpy as np
import pytest

from ewsd.gf2core import GeneratorMatrix

EXAMPLE_TEXT = "01001\n00111\n00001\n"
EXAMPLE_Q = [0.2, 0.2, 0.4, 0, 0, 0, 0, 0.2]


@pytest.fixture
def example_G():
    return GeneratorMatrix.from_text(EXAMPLE_TEXT)


@pytest.fixture
def example_q():
    return np.array(EXAMPLE_Q)


@pytest.fixture
def example_file(tmp_path):
    path = tmp_path / "example.txt"
    path.write_text(EXAMPLE_TEXT)
    return path


def random_generator(rng: np.random.Generator, kappa: int, n: int) -> GeneratorMatrix:
    return GeneratorMatrix(kappa, tuple(int(c) for c in rng.integers(0, 1 << kappa, size=n)))


def random_simplex_point(rng: np.random.Generator, size: int, pin_zero: bool = False) -> np.ndarray:
    x = rng.dirichlet(np.ones(size))
    if pin_zero:
        x[0] = 0.0
        x /= x.sum()
    return x
