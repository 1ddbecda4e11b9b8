"""Diversity statistic and spectrum diagnostics."""

import numpy as np
import pytest

from maxentlab.diversity import (
    analytic_diversity,
    empirical_diversity,
    spectrum_csv_rows,
    spectrum_tail_mass,
    top_principal_components,
)
from maxentlab.errors import DomainError, NotCenteredError, ShapeError
from maxentlab.mixtures import GaussianMixture, sample

from conftest import random_mixture


def two_point_mixture():
    return GaussianMixture.from_components(
        [
            (0.5, [1.0, 0.0], 0.25 * np.eye(2)),
            (0.5, [-1.0, 0.0], 0.25 * np.eye(2)),
        ]
    )


class TestAnalytic:
    def test_standard_normal(self):
        mix = GaussianMixture(np.array([1.0]), np.zeros((1, 2)), np.eye(2)[None])
        rep = analytic_diversity(mix)
        assert rep.nu == pytest.approx(2.0)
        np.testing.assert_allclose(rep.eigenvalues, [1.0, 1.0])
        assert rep.source == "analytic" and rep.sample_count is None

    def test_two_point(self):
        rep = analytic_diversity(two_point_mixture())
        assert rep.nu == pytest.approx(1.5)
        np.testing.assert_allclose(rep.eigenvalues, [1.25, 0.25])

    def test_point_mass_at_origin(self):
        mix = GaussianMixture(np.array([1.0]), np.zeros((1, 2)), np.zeros((1, 2, 2)))
        assert analytic_diversity(mix).nu == pytest.approx(0.0)

    def test_requires_centered(self):
        mix = GaussianMixture(np.array([1.0]), np.array([[1.0, 0.0]]), np.eye(2)[None])
        with pytest.raises(NotCenteredError):
            analytic_diversity(mix)

    def test_nu_equals_eigenvalue_sum(self, rng):
        for _ in range(10):
            rep = analytic_diversity(random_mixture(rng, n=6, m=3))
            assert rep.nu == pytest.approx(float(rep.eigenvalues.sum()), rel=1e-8)


class TestEmpirical:
    def test_identical_rows(self):
        rep = empirical_diversity(np.tile([1.0, 2.0], (10, 1)))
        assert rep.nu == pytest.approx(0.0)
        assert rep.sample_count == 10

    def test_symmetric_two_point(self):
        rep = empirical_diversity(np.array([[-1.0], [1.0]]))
        assert rep.nu == pytest.approx(1.0)

    def test_convergence_to_analytic(self):
        mix = two_point_mixture()
        x = sample(mix, 10_000, seed=3).features
        nu_hat = empirical_diversity(x).nu
        assert 1.425 <= nu_hat <= 1.575

    def test_needs_two_rows(self):
        with pytest.raises(ShapeError):
            empirical_diversity(np.zeros((1, 3)))

    def test_rotation_invariance(self, rng):
        x = rng.normal(size=(500, 5)) @ np.diag([3.0, 2.0, 1.0, 0.5, 0.1])
        q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
        assert empirical_diversity(x).nu == pytest.approx(
            empirical_diversity(x @ q).nu, rel=1e-8
        )


class TestTailMass:
    def test_no_tail(self):
        rep = analytic_diversity(two_point_mixture())
        assert spectrum_tail_mass(rep, rep.dim) == 0.0

    def test_whole_mass(self):
        rep = analytic_diversity(two_point_mixture())
        assert spectrum_tail_mass(rep, 0) == pytest.approx(1.0)

    def test_two_point_value(self):
        rep = analytic_diversity(two_point_mixture())
        assert spectrum_tail_mass(rep, 1) == pytest.approx(1.0 / 6.0)

    def test_zero_spectrum_convention(self):
        mix = GaussianMixture(np.array([1.0]), np.zeros((1, 2)), np.zeros((1, 2, 2)))
        assert spectrum_tail_mass(analytic_diversity(mix), 1) == 0.0

    def test_out_of_range(self):
        rep = analytic_diversity(two_point_mixture())
        with pytest.raises(DomainError):
            spectrum_tail_mass(rep, rep.dim + 1)


class TestTopComponents:
    def test_collinear_rank_one(self, rng):
        direction = np.array([1.0, 2.0, -1.0])
        x = np.outer(rng.normal(size=50), direction)
        _, ratios = top_principal_components(x, 1)
        assert ratios[0] == pytest.approx(1.0)

    def test_diagonal_ratios(self):
        mix = GaussianMixture(np.array([1.0]), np.zeros((1, 2)), np.diag([4.0, 1.0])[None])
        x = sample(mix, 10**5, seed=11).features
        _, ratios = top_principal_components(x, 2)
        assert abs(ratios[0] - 0.8) < 0.01
        assert abs(ratios[1] - 0.2) < 0.01

    def test_full_projection_preserves_distances(self, rng):
        x = rng.normal(size=(60, 4))
        projected, _ = top_principal_components(x, 4)
        orig = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2)
        proj = np.linalg.norm(projected[:, None, :] - projected[None, :, :], axis=2)
        np.testing.assert_allclose(proj, orig, atol=1e-8)

    def test_sign_convention(self, rng):
        x = rng.normal(size=(200, 3)) @ np.diag([5.0, 1.0, 0.2])
        # projecting the flipped data must give the same ratios and a basis
        # whose first nonzero coordinate is positive either way
        _, r1 = top_principal_components(x, 2)
        _, r2 = top_principal_components(-x, 2)
        np.testing.assert_allclose(r1, r2, atol=1e-12)

    def test_k_bounds(self, rng):
        x = rng.normal(size=(10, 3))
        with pytest.raises(ShapeError):
            top_principal_components(x, 0)
        with pytest.raises(ShapeError):
            top_principal_components(x, 4)


class TestSpectrumRows:
    def test_log_column(self):
        rep = analytic_diversity(two_point_mixture())
        rows = spectrum_csv_rows(rep)
        assert rows[0][0] == 1 and rows[0][1] == pytest.approx(1.25)
        assert rows[0][2] == pytest.approx(np.log(1.25))

    def test_zero_eigenvalue_gives_minus_inf(self):
        mix = GaussianMixture(np.array([1.0]), np.zeros((1, 2)), np.diag([1.0, 0.0])[None])
        rows = spectrum_csv_rows(analytic_diversity(mix))
        assert rows[1][2] == float("-inf")
