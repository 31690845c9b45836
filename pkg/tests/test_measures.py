"""Discrete measures and the kernel integrals built on them."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kercorr.errors import DegenerateVarianceError, InputError
from kercorr.kernels import (
    GaussianKernel,
    LaplaceKernel,
    LinearKernel,
    MixtureGaussianKernel,
    SetwiseKernel,
)
from kercorr.measures import (
    DiscreteMeasure,
    degeneracy_statistic,
    diag_minus_double,
    dk2_double_integral,
    double_integral,
    mc_discretize,
    moments_from_measure_pairs,
)

from oracles import gaussian_kernel_square_integral, stick_breaking_dp

GAUSS = GaussianKernel(sigma=1.0)

# frozen from the 200-point Gauss-Legendre tensor rule in oracles.py
UNIFORM_SQUARE_INTEGRAL = 0.9243101032095652


def test_oracle_value_is_stable():
    assert gaussian_kernel_square_integral() == pytest.approx(UNIFORM_SQUARE_INTEGRAL, abs=1e-12)


class TestDiscreteMeasure:
    def test_weight_sum_must_match_mass(self):
        with pytest.raises(InputError):
            DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([0.5, 0.6]))

    def test_negative_weights_rejected(self):
        with pytest.raises(InputError):
            DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([1.5, -0.5]))

    def test_unnormalised_mass_is_explicit(self):
        mu = DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([1.0, 2.0]), total_mass=3.0)
        assert not mu.is_probability
        assert mu.scaled(1.0 / 3.0).is_probability

    def test_pooled_keeps_total_mass(self):
        parts = [DiscreteMeasure.dirac(0.0), DiscreteMeasure.dirac(1.0)]
        pooled = DiscreteMeasure.pooled(parts)
        assert pooled.total_mass == 2.0 and pooled.n_atoms == 2


class TestDoubleIntegral:
    def test_single_atoms(self):
        mu = DiscreteMeasure.dirac(0.4)
        assert double_integral(GAUSS, mu, mu) == pytest.approx(1.0)

    def test_two_atom_hand_expansion(self):
        mu = DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([0.5, 0.5]))
        nu = DiscreteMeasure.dirac(0.0)
        assert double_integral(GAUSS, mu, nu) == pytest.approx(
            0.5 * (1.0 + math.exp(-0.5)), abs=1e-14)

    def test_setwise_factorises_into_masses(self):
        k = SetwiseKernel.interval(0.0, 0.5)
        rng = np.random.default_rng(0)
        mu = DiscreteMeasure.empirical(rng.uniform(0, 1, 40))
        nu = DiscreteMeasure.empirical(rng.uniform(0, 1, 25))
        assert double_integral(k, mu, nu) == pytest.approx(
            k.measure_mass(mu) * k.measure_mass(nu), abs=1e-14)

    def test_bilinear_in_weights_and_symmetric(self):
        rng = np.random.default_rng(1)
        atoms = rng.uniform(-1, 1, 6)
        w = rng.dirichlet(np.ones(6))
        mu = DiscreteMeasure(atoms.reshape(-1, 1), w)
        nu = DiscreteMeasure.empirical(rng.uniform(-1, 1, 4))
        assert double_integral(GAUSS, mu, nu) == pytest.approx(
            double_integral(GAUSS, nu, mu), abs=1e-14)
        half = DiscreteMeasure(atoms.reshape(-1, 1), 0.5 * w, total_mass=0.5)
        assert double_integral(GAUSS, half, nu) == pytest.approx(
            0.5 * double_integral(GAUSS, mu, nu), abs=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            double_integral(GaussianKernel(sigma=1.0, dim=2), DiscreteMeasure.dirac(0.0),
                            DiscreteMeasure.dirac(0.0))


class TestDiagMinusDouble:
    def test_single_atom_has_zero_spread(self):
        assert diag_minus_double(GAUSS, DiscreteMeasure.dirac(2.0)) == 0.0

    def test_two_atom_value(self):
        mu = DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([0.5, 0.5]))
        assert diag_minus_double(GAUSS, mu) == pytest.approx(
            0.5 * (1.0 - math.exp(-0.5)), abs=1e-14)

    def test_setwise_is_bernoulli_variance(self):
        k = SetwiseKernel.interval(0.0, 0.5)
        rng = np.random.default_rng(2)
        mu = DiscreteMeasure.empirical(rng.uniform(0, 1, 30))
        p = k.measure_mass(mu)
        assert diag_minus_double(k, mu) == pytest.approx(p * (1.0 - p), abs=1e-12)

    def test_requires_probability(self):
        mu = DiscreteMeasure(np.array([[0.0]]), np.array([2.0]), total_mass=2.0)
        with pytest.raises(InputError):
            diag_minus_double(GAUSS, mu)

    @pytest.mark.parametrize("k", [
        GAUSS, LaplaceKernel(beta=0.8), LinearKernel(low=-2, high=2),
        SetwiseKernel.interval(0.2, 0.7), MixtureGaussianKernel(s0=0.5, sigma=1.0),
    ], ids=lambda k: k.text)
    def test_half_dk2_identity(self, k):
        # int k(x,x) dmu - iint k dmu dmu == (1/2) iint d_k^2 dmu dmu
        rng = np.random.default_rng(3)
        for _ in range(10):
            n = rng.integers(2, 12)
            atoms = rng.uniform(-1.5, 1.5, n)
            mu = DiscreteMeasure(atoms.reshape(-1, 1), rng.dirichlet(np.ones(n)))
            lhs = diag_minus_double(k, mu)
            rhs = 0.5 * dk2_double_integral(k, mu, mu)
            assert abs(lhs - rhs) <= 1e-10


class TestMcDiscretize:
    def test_deterministic_sampler(self):
        mu = mc_discretize(lambda rng, n: np.full(n, 0.7), 50, np.random.default_rng(0))
        assert mu.n_atoms == 50 and mu.is_probability
        assert np.all(mu.atoms == 0.7)

    def test_uniform_square_integral(self):
        rng = np.random.default_rng(7)
        mu = mc_discretize(lambda r, n: r.uniform(0, 1, n), 20_000, rng)
        assert double_integral(GAUSS, mu, mu) == pytest.approx(
            UNIFORM_SQUARE_INTEGRAL, abs=5e-3)

    def test_normal_spread_matches_identity(self):
        # spread of the gaussian kernel against Normal(0, t^2) has the
        # closed value 1 - sqrt(sigma^2 / (2 t^2 + sigma^2))
        rng = np.random.default_rng(8)
        t2, sigma = 0.8, 1.2
        mu = mc_discretize(lambda r, n: math.sqrt(t2) * r.standard_normal(n), 20_000, rng)
        k = GaussianKernel(sigma=sigma)
        closed = 1.0 - math.sqrt(sigma**2 / (2.0 * t2 + sigma**2))
        assert diag_minus_double(k, mu) == pytest.approx(closed, abs=5e-3)

    def test_needs_positive_size(self):
        with pytest.raises(InputError):
            mc_discretize(lambda r, n: r.uniform(0, 1, n), 0, np.random.default_rng(0))


class TestDegeneracyStatistic:
    def test_constant_sequence_is_zero(self):
        assert degeneracy_statistic(GAUSS, np.full(10, 0.3)) == 0.0

    def test_setwise_all_inside_is_zero(self):
        k = SetwiseKernel.interval(0.0, 0.5)
        assert degeneracy_statistic(k, np.full(5, 0.2) + 0.01 * np.arange(5)) == 0.0

    def test_two_points_is_half_dk2(self):
        for k in (GAUSS, LaplaceKernel(beta=1.0), SetwiseKernel.interval(0.0, 0.5)):
            assert degeneracy_statistic(k, np.array([0.1, 0.9])) == pytest.approx(
                0.5 * k.dk2(0.1, 0.9), abs=1e-14)

    def test_large_sample_limit(self):
        # limit is 2 (1 - iint k dP dP) for Unif[0,1]; quadrature oracle value
        rng = np.random.default_rng(3)
        stat = degeneracy_statistic(GAUSS, rng.uniform(0, 1, 10_000))
        assert stat == pytest.approx(2.0 * (1.0 - UNIFORM_SQUARE_INTEGRAL), abs=5e-3)

    def test_empty_sequence_rejected(self):
        with pytest.raises(InputError):
            degeneracy_statistic(GAUSS, np.empty(0))


@given(st.integers(2, 8), st.integers(0, 2**31 - 1))
@settings(max_examples=60, deadline=None)
def test_sm_identity_holds_for_random_measures(n, seed):
    rng = np.random.default_rng(seed)
    atoms = rng.uniform(-2, 2, n)
    mu = DiscreteMeasure(atoms.reshape(-1, 1), rng.dirichlet(np.ones(n)))
    for k in (GAUSS, LinearKernel(low=-2, high=2), SetwiseKernel.interval(-1, 0.5)):
        assert abs(diag_minus_double(k, mu) - 0.5 * dk2_double_integral(k, mu, mu)) <= 1e-10


class TestMomentsFromMeasurePairs:
    def test_identical_deterministic_pairs_are_degenerate(self):
        mu = DiscreteMeasure.empirical([0.1, 0.6])
        with pytest.raises(DegenerateVarianceError):
            moments_from_measure_pairs(GAUSS, [(mu, mu)] * 8)

    def test_point_mass_pairs_under_linear_kernel(self):
        # both margins are the same uniform draw shifted by one, so the
        # embedded measures are perfectly collinear
        rng = np.random.default_rng(4)
        k = LinearKernel(low=0.0, high=2.0)
        pairs = []
        for _ in range(300):
            x = rng.uniform(0, 1)
            pairs.append((DiscreteMeasure.dirac(x), DiscreteMeasure.dirac(x + 1.0)))
        report = moments_from_measure_pairs(k, pairs)
        assert report.corr == pytest.approx(1.0, abs=1e-10)

    def test_independent_dp_draws_are_uncorrelated(self):
        rng = np.random.default_rng(5)
        k = SetwiseKernel.interval(0.0, 0.5)
        estimates = []
        for _ in range(20):
            pairs = [
                (stick_breaking_dp(1.0, lambda r, n: r.uniform(0, 1, n), rng, 400),
                 stick_breaking_dp(1.0, lambda r, n: r.uniform(0, 1, n), rng, 400))
                for _ in range(60)
            ]
            estimates.append(moments_from_measure_pairs(k, pairs).corr)
        estimates = np.asarray(estimates)
        se = estimates.std(ddof=1) / math.sqrt(len(estimates))
        assert abs(estimates.mean()) <= 3.0 * se

    def test_needs_at_least_two_pairs(self):
        mu = DiscreteMeasure.dirac(0.0)
        with pytest.raises(InputError):
            moments_from_measure_pairs(GAUSS, [(mu, mu)])


class TestSetwiseFlipExample:
    """A common random jump onto two distinct fixed atoms: the set-wise
    correlation is +1 when the set excludes both atoms and -1 when it
    separates them, for the same pair of random measures."""

    @staticmethod
    def _pairs():
        base = DiscreteMeasure.empirical([0.3, 0.45, 0.6])
        x1, x2 = 0.9, 0.05
        pairs = []
        for w in np.linspace(0.005, 0.995, 199):
            atoms1 = np.array([x1, 0.3, 0.45, 0.6]).reshape(-1, 1)
            atoms2 = np.array([x2, 0.3, 0.45, 0.6]).reshape(-1, 1)
            weights = np.concatenate([[w], (1 - w) * base.weights])
            pairs.append((DiscreteMeasure(atoms1, weights), DiscreteMeasure(atoms2, weights)))
        return pairs

    def test_set_excluding_both_atoms_gives_plus_one(self):
        k = SetwiseKernel.interval(0.25, 0.75)
        report = moments_from_measure_pairs(k, self._pairs())
        assert report.corr == pytest.approx(1.0, abs=1e-8)

    def test_set_separating_the_atoms_gives_minus_one(self):
        # contains x1 plus part of the shared base mass, excludes x2: the
        # first mass increases in the jump size while the second decreases
        k = SetwiseKernel.interval(0.5, 1.0)
        report = moments_from_measure_pairs(k, self._pairs())
        assert report.corr == pytest.approx(-1.0, abs=1e-8)
