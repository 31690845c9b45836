"""Latent-table state, predictive sampling, Gibbs sweeps, and the exact
small-instance posterior."""

import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kercorr.distributions import NormalBase, UniformBase, parse_base
from kercorr.errors import CapacityError, DegenerateVarianceError, InputError
from kercorr.hdp import (
    HdpParams,
    HdpState,
    enumerate_table_posterior,
    generate_joint_data,
    gibbs_sweep,
    predictive_step,
    prior_corr_closed,
    prior_lambda,
    prior_setwise_moments,
    sample_posterior_block,
    stirling_unsigned,
)
from kercorr.kernels import SetwiseKernel
from kercorr.measures import moments_from_measure_pairs

from oracles import replication_se, stick_breaking_hdp_pair

PARAMS = HdpParams(c=1.0, c0=1.0)


class TestPriorClosedForms:
    def test_prior_corr_values(self):
        assert prior_corr_closed(HdpParams(c=1.0, c0=1.0)) == pytest.approx(2.0 / 3.0)
        assert prior_corr_closed(HdpParams(c=2.0, c0=3.0)) == pytest.approx(0.5)

    def test_tiny_root_concentration_approaches_one(self):
        assert prior_corr_closed(HdpParams(c=1.0, c0=1e-12)) == pytest.approx(1.0, abs=1e-12)

    def test_setwise_moments_values(self):
        var, cov = prior_setwise_moments(HdpParams(c=1.0, c0=1.0), 0.5)
        assert var == pytest.approx(3.0 / 16.0)
        assert cov == pytest.approx(1.0 / 8.0)

    def test_ratio_consistent_with_correlation(self):
        p = HdpParams(c=0.7, c0=2.3)
        var, cov = prior_setwise_moments(p, 0.31)
        assert cov / var == pytest.approx(prior_corr_closed(p), abs=1e-14)

    def test_degenerate_set_mass_rejected(self):
        with pytest.raises(DegenerateVarianceError):
            prior_setwise_moments(PARAMS, 1.0)

    def test_vanishing_set_mass_vanishes(self):
        var, cov = prior_setwise_moments(PARAMS, 1e-9)
        assert var < 1e-8 and cov < 1e-8

    def test_nonpositive_concentrations_rejected(self):
        with pytest.raises(InputError):
            HdpParams(c=0.0, c0=1.0)

    def test_matches_stick_breaking_oracle_for_setwise_kernel(self):
        # truncated stick-breaking draws against the closed prior moments
        rng = np.random.default_rng(21)
        k = SetwiseKernel.interval(0.0, 0.5)
        var_closed, cov_closed = prior_setwise_moments(PARAMS, 0.5)
        covs, var1s = [], []
        for _ in range(25):
            pairs = [stick_breaking_hdp_pair(1.0, 1.0, lambda r, n: r.uniform(0, 1, n),
                                             rng, truncation=400) for _ in range(60)]
            rep = moments_from_measure_pairs(k, pairs)
            covs.append(rep.cov)
            var1s.append(rep.var1)
        assert abs(np.mean(covs) - cov_closed) <= 3.0 * replication_se(covs)
        assert abs(np.mean(var1s) - var_closed) <= 3.0 * replication_se(var1s)


class TestStirling:
    def test_boundary_identities(self):
        for n in range(8):
            assert stirling_unsigned(n, n) == 1
        for n in range(1, 9):
            assert stirling_unsigned(n, 1) == math.factorial(n - 1)

    def test_hand_values(self):
        assert stirling_unsigned(3, 2) == 3
        assert stirling_unsigned(4, 2) == 11

    def test_out_of_range_is_zero(self):
        assert stirling_unsigned(3, 5) == 0
        assert stirling_unsigned(4, 0) == 0
        assert stirling_unsigned(0, 0) == 1

    @given(st.integers(1, 30), st.integers(1, 30))
    @settings(max_examples=100, deadline=None)
    def test_recurrence_property(self, n, l):
        assert stirling_unsigned(n + 1, l) == n * stirling_unsigned(n, l) + stirling_unsigned(n, l - 1)

    def test_row_sums_to_factorial(self):
        # sum_l |s(n, l)| = n!
        for n in range(1, 12):
            assert sum(stirling_unsigned(n, l) for l in range(n + 1)) == math.factorial(n)


class TestStateInvariants:
    def test_initial_labels_all_distinct(self):
        state = HdpState([0.1, 0.1, 0.2], [0.2, 0.3])
        assert state.total_tables == 5
        assert state.n_dishes == 3
        state.check_invariants()

    def test_tables_not_shared_across_groups(self):
        state = HdpState([0.1], [0.1])
        assert state.labels[0][0] != state.labels[1][0]

    def test_invariants_hold_across_many_sweeps(self):
        rng = np.random.default_rng(30)
        x1, x2 = generate_joint_data(PARAMS, 12, 9, rng)
        state = HdpState(x1, x2)
        for _ in range(200):
            gibbs_sweep(state, PARAMS, rng)
            state.check_invariants()
            assert state.n_dishes <= state.total_tables <= state.n1 + state.n2

    def test_sweep_never_moves_the_dish_partition(self):
        rng = np.random.default_rng(31)
        x1, x2 = generate_joint_data(PARAMS, 10, 10, rng)
        state = HdpState(x1, x2)
        dishes_before = state.dish_summary()[1].copy()
        for _ in range(50):
            gibbs_sweep(state, PARAMS, rng)
        assert np.array_equal(state.dish_summary()[1], dishes_before)

    def test_json_round_trip(self):
        rng = np.random.default_rng(32)
        x1, x2 = generate_joint_data(PARAMS, 6, 4, rng)
        state = HdpState(x1, x2)
        gibbs_sweep(state, PARAMS, rng)
        clone = HdpState.from_json(state.to_json())
        assert clone.table_counts_key() == state.table_counts_key()
        assert clone.obs == state.obs


class TestPredictiveStep:
    def test_empty_state_draws_fresh_dish(self):
        rng = np.random.default_rng(33)
        state = HdpState()
        values = {predictive_step(state, PARAMS, 1, rng)[0] for _ in range(50)}
        assert len(values) == 50  # atomless base, fresh table every time

    def test_tiny_concentration_always_copies(self):
        params = HdpParams(c=1e-12, c0=1.0)
        rng = np.random.default_rng(34)
        state = HdpState([0.4, 0.8], [])
        for _ in range(200):
            value, label = predictive_step(state, params, 1, rng)
            assert value in (0.4, 0.8)
            assert label in state.labels[0]

    def test_single_observation_transition_probabilities(self):
        # one customer, c = c0 = 1: copy w.p. 1/2, new table with the same
        # dish w.p. 1/4, fresh dish w.p. 1/4
        rng = np.random.default_rng(35)
        state = HdpState([0.5], [])
        outcomes = Counter()
        n = 120_000
        for _ in range(n):
            value, label = predictive_step(state, PARAMS, 1, rng)
            if label == state.labels[0][0]:
                outcomes["copy"] += 1
            elif value == 0.5:
                outcomes["new_table_same_dish"] += 1
            else:
                outcomes["fresh"] += 1
        assert outcomes["copy"] / n == pytest.approx(0.5, abs=0.01)
        assert outcomes["new_table_same_dish"] / n == pytest.approx(0.25, abs=0.01)
        assert outcomes["fresh"] / n == pytest.approx(0.25, abs=0.01)

    def test_state_is_not_mutated(self):
        rng = np.random.default_rng(36)
        state = HdpState([0.5], [0.7])
        before = state.to_json()
        predictive_step(state, PARAMS, 2, rng)
        assert state.to_json() == before


class TestEnumeration:
    def test_distinct_singletons_have_one_configuration(self):
        post = enumerate_table_posterior([0.1], [0.9], PARAMS)
        assert len(post) == 1
        ((ell1, ell2), prob), = post.items()
        assert ell1 == (1, 0) and ell2 == (0, 1)
        assert prob == pytest.approx(1.0)

    def test_two_equal_observations(self):
        post = enumerate_table_posterior([0.7, 0.7], [], PARAMS)
        assert post[((1,), (0,))] == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert post[((2,), (0,))] == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_probabilities_sum_to_one(self):
        post = enumerate_table_posterior([0.1, 0.1, 0.4], [0.4, 0.4], HdpParams(c=1.3, c0=0.7))
        assert sum(post.values()) == pytest.approx(1.0, abs=1e-12)

    def test_capacity_error_on_huge_instances(self):
        data = list(np.linspace(0, 1, 40)) * 40
        with pytest.raises(CapacityError):
            enumerate_table_posterior(data, data, PARAMS)


def gibbs_table_distribution(g1, g2, params, sweeps, burnin, seed):
    rng = np.random.default_rng(seed)
    state = HdpState(g1, g2)
    for _ in range(burnin):
        gibbs_sweep(state, params, rng)
    counts = Counter()
    for _ in range(sweeps):
        gibbs_sweep(state, params, rng)
        counts[state.table_counts_key()] += 1
    return {key: c / sweeps for key, c in counts.items()}


def total_variation(p, q):
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


class TestGibbsAgainstEnumeration:
    @pytest.mark.parametrize("g1,g2,seed", [
        ([0.7, 0.7], [], 1),
        ([0.7, 0.7], [0.7], 2),
        ([0.1, 0.7], [0.7, 0.7, 0.1], 3),
    ])
    def test_stationary_distribution_matches(self, g1, g2, seed):
        exact = enumerate_table_posterior(g1, g2, PARAMS)
        empirical = gibbs_table_distribution(g1, g2, PARAMS, sweeps=40_000,
                                             burnin=500, seed=seed)
        assert total_variation(exact, empirical) < 0.02

    def test_single_customer_is_deterministic(self):
        empirical = gibbs_table_distribution([0.5], [], PARAMS, sweeps=200,
                                             burnin=10, seed=4)
        assert empirical == {((1,), (0,)): 1.0}


class TestPosteriorBlock:
    def test_block_leaves_observation_count_unchanged(self):
        rng = np.random.default_rng(37)
        x1, x2 = generate_joint_data(PARAMS, 5, 5, rng)
        state = HdpState(x1, x2)
        block = sample_posterior_block(state, PARAMS, rng)
        assert (state.n1, state.n2) == (5, 5)
        state.check_invariants()
        for value in block:
            assert isinstance(value, float)

    def test_large_root_concentration_decouples_groups(self):
        # a huge root concentration makes fresh dishes near-certain, so
        # the two groups' first draws almost never coincide
        params = HdpParams(c=1.0, c0=1e6)
        rng = np.random.default_rng(38)
        state = HdpState()
        same = sum(
            sample_posterior_block(state, params, rng).x11
            == sample_posterior_block(state, params, rng).x21
            for _ in range(500)
        )
        assert same == 0

    def test_within_block_copy_has_positive_probability(self):
        rng = np.random.default_rng(39)
        state = HdpState()
        copies = 0
        n = 20_000
        for _ in range(n):
            b = sample_posterior_block(state, PARAMS, rng)
            copies += b.x11 == b.x12
        # second within-group draw repeats the first with probability
        # 1/(c+1) + c/(c+1) * 1/(c0+1) = 3/4 at c = c0 = 1
        assert copies / n == pytest.approx(0.75, abs=0.015)


class TestBaseMeasures:
    def test_parse_round_trip(self):
        for text in ("uniform:a=0,b=1", "normal:mu=0,var=2"):
            assert parse_base(text).text == text

    def test_normal_var_is_variance(self):
        base = NormalBase(mu=0.0, var=4.0)
        draws = base.sample(np.random.default_rng(0), 200_000)
        assert np.var(draws) == pytest.approx(4.0, rel=0.02)

    def test_uniform_bounds(self):
        base = UniformBase(a=-1.0, b=2.0)
        draws = base.sample(np.random.default_rng(1), 1000)
        assert draws.min() >= -1.0 and draws.max() < 2.0

    def test_unknown_family_rejected(self):
        with pytest.raises(InputError):
            parse_base("cauchy:x0=0")
