"""Shared helpers for the test suite."""

import numpy as np
import pytest

from ggmlink import ScenarioSpec, SymmetricMatrix
from ggmlink import draw_samples, perturb_model, random_model, sample_covariance


def random_pd(dim, rng, scale=1.0):
    """Random symmetric positive definite matrix (shifted Gram form)."""
    a = rng.standard_normal((dim, dim))
    arr = a @ a.T / dim + scale * np.eye(dim)
    return SymmetricMatrix.from_array(arr, tol=1e-9)


def random_symmetric(dim, rng):
    a = np.tril(rng.standard_normal((dim, dim)))
    return SymmetricMatrix.from_array(a + np.tril(a, -1).T, tol=0.0)


def make_instance(seed, dim=6, density=0.3, n_add=1, n_remove=1, n_obs=300):
    """Prior model, perturbed truth, and a sample covariance from it."""
    state = np.random.SeedSequence(seed).generate_state(3)
    prior = random_model(dim, density, int(state[0]))
    truth = perturb_model(prior, ScenarioSpec(
        dim=dim, edge_density=density, n_add=n_add, n_remove=n_remove,
        seed=int(state[1])))
    t_hat = sample_covariance(draw_samples(truth.covariance, n_obs, int(state[2])))
    return prior, truth, t_hat


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
