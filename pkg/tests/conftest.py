import numpy as np
import pytest

from maxentlab.mixtures import GaussianMixture, recenter_zero_mean


def random_spd(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(n, n)) / np.sqrt(n)
    return scale * (a @ a.T) + 0.05 * scale * np.eye(n)


def random_mixture(
    rng: np.random.Generator, n: int, m: int, mean_scale: float = 2.0, centered: bool = True
) -> GaussianMixture:
    weights = rng.dirichlet(np.ones(m))
    means = rng.normal(scale=mean_scale, size=(m, n))
    covs = np.stack([random_spd(rng, n) for _ in range(m)])
    mix = GaussianMixture(weights, means, covs)
    return recenter_zero_mean(mix) if centered else mix


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240803)
