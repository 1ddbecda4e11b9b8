"""Shipped synthetic regimes embody the diversity separation they claim."""

import numpy as np

from maxentlab.diversity import analytic_diversity, spectrum_tail_mass
from maxentlab.fixtures import make_regime_fixtures, make_spectrum_fixture
from maxentlab.mixtures import validate


class TestRegimePair:
    def test_diversity_ratio_at_most_tenth(self):
        fine, large = make_regime_fixtures(7)
        ratio = analytic_diversity(fine).nu / analytic_diversity(large).nu
        assert ratio <= 0.1

    def test_ratio_holds_across_seeds(self):
        for seed in (0, 1, 42, 99):
            fine, large = make_regime_fixtures(seed)
            assert analytic_diversity(fine).nu <= analytic_diversity(large).nu / 10

    def test_deterministic(self):
        a_fine, a_large = make_regime_fixtures(7)
        b_fine, b_large = make_regime_fixtures(7)
        assert a_fine.means.tobytes() == b_fine.means.tobytes()
        assert a_large.covariances.tobytes() == b_large.covariances.tobytes()

    def test_zero_mean(self):
        fine, large = make_regime_fixtures(7)
        assert np.linalg.norm(fine.mixture_mean()) <= 1e-10
        assert np.linalg.norm(large.mixture_mean()) <= 1e-10

    def test_fine_means_are_scaled_copies(self):
        fine, large = make_regime_fixtures(7)
        np.testing.assert_allclose(fine.means, large.means * 0.1)
        np.testing.assert_allclose(fine.covariances, large.covariances)

    def test_valid_mixtures(self):
        fine, large = make_regime_fixtures(7)
        validate(fine)
        validate(large)


class TestSpectrumFixture:
    def test_top_heavy_raw_spectrum(self):
        mix = make_spectrum_fixture(7)
        rep = analytic_diversity(mix)
        # the two nuisance directions dominate; little mass past the top quarter
        assert spectrum_tail_mass(rep, mix.dim // 4) < 0.3
        assert rep.eigenvalues[0] >= 5 * rep.eigenvalues[2]

    def test_deterministic_and_centered(self):
        a = make_spectrum_fixture(7)
        b = make_spectrum_fixture(7)
        assert a.means.tobytes() == b.means.tobytes()
        assert np.linalg.norm(a.mixture_mean()) <= 1e-10
