import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_belief, random_model
from distlearn.core import BeliefState, DegeneratePosteriorError, LikelihoodModel, uniform_prior
from distlearn.graphs import lazy_metropolis_weights, path_graph, random_connected_graph
from distlearn.rules import (AgentMemory, NetworkState, PoolKind, UpdateRuleKind, accelerated_update,
                             bayes_update, externally_bayesian_check, geometric_pool_update,
                             likelihood_sharing_update, linear_rule_update, linear_swap_gap, network_step,
                             qlop_pool, weighted_log_sum)

BINARY = LikelihoodModel.with_realized_floor([[0.8, 0.2], [0.2, 0.8]], [0.8, 0.2])


def B(*p):
    return BeliefState.from_probabilities(np.array(p, dtype=float))


def probs(b):
    return b.probabilities


class TestBayes:
    def test_uniform_prior(self):
        np.testing.assert_allclose(probs(bayes_update(uniform_prior(2), BINARY, 0)), [0.8, 0.2], atol=1e-15)

    def test_point_mass_stays(self):
        out = bayes_update(B(0, 1), BINARY, 0)
        assert probs(out).tolist() == [0.0, 1.0]

    def test_two_updates_equal_squared_likelihood(self):
        two = bayes_update(bayes_update(B(0.3, 0.7), BINARY, 1), BINARY, 1)
        ref = np.array([0.3 * 0.2 ** 2, 0.7 * 0.8 ** 2])
        np.testing.assert_allclose(probs(two), ref / ref.sum(), rtol=1e-14)

    def test_disjoint_support_is_degenerate(self):
        model = LikelihoodModel([[1.0, 0.0], [1.0, 0.0]], [1.0, 0.0], 1.0)
        with pytest.raises(DegeneratePosteriorError):
            bayes_update(B(0.5, 0.5), model, 1)


class TestGeometric:
    def test_self_only_equals_bayes(self):
        prior = B(0.1, 0.9)
        a = geometric_pool_update([(1.0, prior)], BINARY, 1)
        np.testing.assert_array_equal(a.log_belief, bayes_update(prior, BINARY, 1).log_belief)

    def test_consensus_fixed_point(self):
        b = B(0.2, 0.3, 0.5)
        model = LikelihoodModel.with_realized_floor(np.full((3, 2), 0.5), [0.5, 0.5])
        out = geometric_pool_update([(0.3, b), (0.7, b)], model, None)
        np.testing.assert_allclose(probs(out), probs(b), atol=1e-15)

    def test_hand_computed_geometric_mean(self):
        out = geometric_pool_update([(0.5, B(0.9, 0.1)), (0.5, B(0.5, 0.5))], BINARY, None)
        ref = np.array([math.sqrt(0.45), math.sqrt(0.05)])
        np.testing.assert_allclose(probs(out), ref / ref.sum(), rtol=1e-14)

    def test_zero_belief_with_zero_weight_is_ignored(self):
        out = geometric_pool_update([(1.0, B(0.5, 0.5)), (0.0, B(1.0, 0.0))], BINARY, None)
        np.testing.assert_allclose(probs(out), [0.5, 0.5], atol=1e-15)

    def test_all_hypotheses_annihilated(self):
        with pytest.raises(DegeneratePosteriorError):
            geometric_pool_update([(0.5, B(1.0, 0.0)), (0.5, B(0.0, 1.0))], BINARY, None)


class TestAccelerated:
    sigma = 17 / 19

    def test_equal_histories_reduce_to_geometric(self):
        prior = uniform_prior(2)
        mem = AgentMemory.initial(prior)
        nb_prev = [(0.75, mem.previous, mem.prev_loglik_term), (0.25, prior, np.zeros(2))]
        out = accelerated_update([(0.75, prior), (0.25, prior)], nb_prev, self.sigma, BINARY, 0)
        ref = geometric_pool_update([(0.75, prior), (0.25, prior)], BINARY, 0)
        np.testing.assert_allclose(out.log_belief, ref.log_belief, atol=1e-14)

    def test_single_agent_equals_bayes(self):
        b = B(0.3, 0.7)
        out = accelerated_update([(1.0, b)], [(1.0, b, np.zeros(2))], 0.6, BINARY, 1)
        np.testing.assert_allclose(out.log_belief, bayes_update(b, BINARY, 1).log_belief, atol=1e-14)

    def test_two_agent_hand_evaluation(self):
        # two agents on one edge, two hypotheses, two rounds so the memory term is active
        A = lazy_metropolis_weights(path_graph(2)).entries
        s = 1 - 2 / (9 * 2 + 1)
        lik = [np.array([[0.8, 0.2], [0.2, 0.8]]), np.array([[0.6, 0.4], [0.3, 0.7]])]
        models = [LikelihoodModel.with_realized_floor(t, t[0]) for t in lik]
        sig1, sig2 = (0, 1), (1, 1)
        mu0 = [np.array([0.5, 0.5])] * 2

        def lin_step(mu_k, mu_km1, prev_sig, sig):
            out = []
            for i in range(2):
                v = np.ones(2)
                for th in range(2):
                    num = 1.0
                    den = 1.0
                    for j in range(2):
                        num *= mu_k[j][th] ** ((1 + s) * A[i, j])
                        prevlik = lik[j][th, prev_sig[j]] if prev_sig is not None else 1.0
                        den *= (mu_km1[j][th] * prevlik) ** (s * A[i, j])
                    v[th] = num / den * lik[i][th, sig[i]]
                out.append(v / v.sum())
            return out

        mu1 = lin_step(mu0, mu0, None, sig1)
        mu2 = lin_step(mu1, mu0, sig1, sig2)

        b0 = [BeliefState.from_probabilities(m) for m in mu0]
        got1 = [accelerated_update([(A[i, j], b0[j]) for j in range(2)],
                                   [(A[i, j], b0[j], np.zeros(2)) for j in range(2)], s, models[i], sig1[i])
                for i in range(2)]
        prev_terms = [models[j].log_likelihood(sig1[j]) for j in range(2)]
        got2 = [accelerated_update([(A[i, j], got1[j]) for j in range(2)],
                                   [(A[i, j], b0[j], prev_terms[j]) for j in range(2)], s, models[i], sig2[i])
                for i in range(2)]
        for i in range(2):
            np.testing.assert_allclose(probs(got1[i]), mu1[i], rtol=1e-12)
            np.testing.assert_allclose(probs(got2[i]), mu2[i], rtol=1e-12)

    def test_zero_over_zero_stays_zero(self):
        z = B(0.0, 1.0)
        out = accelerated_update([(1.0, z)], [(1.0, z, np.zeros(2))], 0.5, BINARY, None)
        assert out.log_belief[0] == -np.inf

    def test_zero_only_in_denominator_is_degenerate(self):
        cur, prev = B(0.5, 0.5), B(0.0, 1.0)
        with pytest.raises(DegeneratePosteriorError):
            accelerated_update([(1.0, cur)], [(1.0, prev, np.zeros(2))], 0.5, BINARY, None)


class TestPools:
    @pytest.mark.parametrize("kind", list(PoolKind))
    def test_identical_beliefs(self, kind):
        b = B(0.1, 0.6, 0.3)
        np.testing.assert_allclose(probs(qlop_pool(kind, [0.2, 0.8], [b, b])), probs(b), atol=1e-15)

    def test_linear_mean(self):
        np.testing.assert_allclose(probs(qlop_pool("linear", [0.5, 0.5], [B(1, 0), B(0, 1)])), [0.5, 0.5])

    def test_log_pool_matches_geometric_example(self):
        out = qlop_pool("logarithmic", [0.5, 0.5], [B(0.9, 0.1), B(0.5, 0.5)])
        ref = np.array([math.sqrt(0.45), math.sqrt(0.05)])
        np.testing.assert_allclose(probs(out), ref / ref.sum(), rtol=1e-14)

    def test_log_pool_degenerate(self):
        with pytest.raises(DegeneratePosteriorError):
            qlop_pool("logarithmic", [0.5, 0.5], [B(1, 0), B(0, 1)])


class TestLinearRules:
    def test_single_agent_reduces_to_bayes(self):
        b = B(0.4, 0.6)
        ref = probs(bayes_update(b, BINARY, 0))
        a = linear_rule_update(UpdateRuleKind.LINEAR_THEN_BAYES, [(1.0, b)], BINARY, 0)
        c = linear_rule_update(UpdateRuleKind.BAYES_THEN_LINEAR, [(1.0, b)], neighbor_models=[BINARY],
                               neighbor_signals=[0])
        np.testing.assert_allclose(probs(a), ref, rtol=1e-14)
        np.testing.assert_allclose(probs(c), ref, rtol=1e-14)

    def test_uniform_stays_uniform(self):
        flat = LikelihoodModel.with_realized_floor(np.full((2, 2), 0.5), [0.5, 0.5])
        u = uniform_prior(2)
        for kind in (UpdateRuleKind.LINEAR_THEN_BAYES, UpdateRuleKind.BAYES_THEN_LINEAR):
            out = linear_rule_update(kind, [(0.5, u), (0.5, u)], flat, 1, [flat, flat], [0, 1])
            np.testing.assert_allclose(probs(out), [0.5, 0.5], atol=1e-15)

    def test_two_agent_hand_evaluation(self):
        other = LikelihoodModel.with_realized_floor([[0.3, 0.7], [0.6, 0.4]], [0.3, 0.7])
        b1, b2 = B(0.7, 0.3), B(0.2, 0.8)
        nb = [(0.6, b1), (0.4, b2)]
        # pool first: 0.6*(0.7,0.3) + 0.4*(0.2,0.8) = (0.5, 0.5), then own likelihood at s=0
        pool_first = linear_rule_update(UpdateRuleKind.LINEAR_THEN_BAYES, nb, BINARY, 0)
        np.testing.assert_allclose(probs(pool_first), [0.8, 0.2], rtol=1e-14)
        # update first: each neighbour uses its own model and signal
        p1 = np.array([0.7 * 0.8, 0.3 * 0.2]); p1 /= p1.sum()
        p2 = np.array([0.2 * 0.7, 0.8 * 0.4]); p2 /= p2.sum()
        ref = 0.6 * p1 + 0.4 * p2
        update_first = linear_rule_update(UpdateRuleKind.BAYES_THEN_LINEAR, nb, neighbor_models=[BINARY, other],
                                          neighbor_signals=[0, 1])
        np.testing.assert_allclose(probs(update_first), ref, rtol=1e-14)
        assert np.abs(probs(update_first) - probs(pool_first)).max() > 1e-3

    def test_requires_neighbour_data(self):
        with pytest.raises(ValueError):
            linear_rule_update(UpdateRuleKind.BAYES_THEN_LINEAR, [(1.0, B(0.5, 0.5))])
        with pytest.raises(ValueError):
            linear_rule_update(UpdateRuleKind.GEOMETRIC, [(1.0, B(0.5, 0.5))], BINARY, 0)


class TestLikelihoodSharing:
    def test_uniform_rows_leave_belief(self):
        b = B(0.25, 0.75)
        out = likelihood_sharing_update(b, [0.5, 0.5], [np.array([0.5, 0.5]), np.array([0.3, 0.3])])
        np.testing.assert_allclose(probs(out), probs(b), atol=1e-15)

    def test_single_agent_is_bayes(self):
        b = B(0.25, 0.75)
        out = likelihood_sharing_update(b, [1.0], [BINARY.table[:, 1]])
        np.testing.assert_allclose(probs(out), probs(bayes_update(b, BINARY, 1)), rtol=1e-14)

    def test_two_agents_geometric_mean_of_rows(self):
        b = B(0.4, 0.6)
        r1, r2 = np.array([0.9, 0.3]), np.array([0.2, 0.5])
        ref = np.array([0.4, 0.6]) * np.sqrt(r1 * r2)
        out = likelihood_sharing_update(b, [0.5, 0.5], [r1, r2])
        np.testing.assert_allclose(probs(out), ref / ref.sum(), rtol=1e-14)


class TestExternallyBayesian:
    def test_single_neighbour_is_exact(self):
        assert externally_bayesian_check([1.0], [B(0.3, 0.7)], BINARY, 0) == 0.0

    def test_identical_neighbours(self):
        b = B(0.3, 0.7)
        assert externally_bayesian_check([0.25, 0.75], [b, b], BINARY, 1) == pytest.approx(0.0, abs=1e-16)

    def test_random_instances(self):
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(1000):
            m, S = int(rng.integers(2, 7)), int(rng.integers(2, 5))
            model = random_model(rng, m, S)
            w = rng.dirichlet(np.ones(5))
            beliefs = [random_belief(rng, m) for _ in range(5)]
            worst = max(worst, externally_bayesian_check(w, beliefs, model, int(rng.integers(S))))
        assert worst <= 1e-12

    def test_linear_pool_is_not_externally_bayesian(self):
        rng = np.random.default_rng(6)
        gaps = []
        for _ in range(50):
            model = random_model(rng, 3, 3)
            beliefs = [random_belief(rng, 3) for _ in range(3)]
            gaps.append(linear_swap_gap(rng.dirichlet(np.ones(3)), beliefs, model, int(rng.integers(3))))
        assert max(gaps) > 1e-3


# -- network level --------------------------------------------------------------------------

def _net(rng, n, m, zeros=False):
    g = random_connected_graph(n, rng, 0.3)
    A = lazy_metropolis_weights(g).entries
    models = [random_model(rng, m, 3) for _ in range(n)]
    L = np.stack([random_belief(rng, m, zeros).log_belief for _ in range(n)])
    sig = [int(rng.integers(3)) if rng.random() < 0.7 else None for _ in range(n)]
    ll = np.stack([mdl.log_likelihood(s) if s is not None else np.zeros(m) for mdl, s in zip(models, sig)])
    return A, models, L, sig, ll


def test_network_step_matches_per_agent_functions():
    rng = np.random.default_rng(8)
    for _ in range(40):
        n, m = int(rng.integers(1, 9)), int(rng.integers(2, 6))
        A, models, L, sig, ll = _net(rng, n, m)
        beliefs = [BeliefState(row) for row in L]
        nb = lambda i: [(A[i, j], beliefs[j]) for j in range(n)]

        geo = network_step(UpdateRuleKind.GEOMETRIC, NetworkState(L), A, ll).log_beliefs
        lpb = network_step(UpdateRuleKind.LINEAR_THEN_BAYES, NetworkState(L), A, ll).log_beliefs
        bpl = network_step(UpdateRuleKind.BAYES_THEN_LINEAR, NetworkState(L), A, ll).log_beliefs
        shr = network_step(UpdateRuleKind.LIKELIHOOD_SHARING, NetworkState(L), A, ll).log_beliefs
        for i in range(n):
            np.testing.assert_allclose(geo[i], geometric_pool_update(nb(i), models[i], sig[i]).log_belief,
                                       atol=1e-12)
            np.testing.assert_allclose(
                lpb[i], linear_rule_update(UpdateRuleKind.LINEAR_THEN_BAYES, nb(i), models[i], sig[i]).log_belief,
                atol=1e-12)
            np.testing.assert_allclose(
                bpl[i], linear_rule_update(UpdateRuleKind.BAYES_THEN_LINEAR, nb(i), neighbor_models=models,
                                           neighbor_signals=sig).log_belief, atol=1e-12)
            rows = [np.exp(ll[j]) for j in range(n)]
            np.testing.assert_allclose(shr[i], likelihood_sharing_update(beliefs[i], A[i], rows).log_belief,
                                       atol=1e-12)

        # accelerated, two rounds so the memory is exercised
        sigma = 1 - 2 / (9 * n + 1)
        st0 = NetworkState.initial(UpdateRuleKind.ACCELERATED, L)
        st1 = network_step(UpdateRuleKind.ACCELERATED, st0, A, ll, sigma)
        _, _, _, sig2, ll2 = _net(rng, n, m)
        sig2 = [s if s is None else s % 3 for s in sig2]
        ll2 = np.stack([models[i].log_likelihood(s) if s is not None else np.zeros(m) for i, s in enumerate(sig2)])
        st2 = network_step(UpdateRuleKind.ACCELERATED, st1, A, ll2, sigma)
        b1 = [BeliefState(r) for r in st1.log_beliefs]
        for i in range(n):
            ref = accelerated_update([(A[i, j], b1[j]) for j in range(n)],
                                     [(A[i, j], beliefs[j], ll[j]) for j in range(n)], sigma, models[i], sig2[i])
            np.testing.assert_allclose(st2.log_beliefs[i], ref.log_belief, atol=1e-11)


def test_centralized_is_bayes_on_all_signals():
    rng = np.random.default_rng(9)
    A, models, _, sig, ll = _net(rng, 4, 3)
    priors = np.stack([uniform_prior(3).log_belief] * 4)
    st = network_step(UpdateRuleKind.CENTRALIZED, NetworkState.initial(UpdateRuleKind.CENTRALIZED, priors), A, ll)
    ref = np.ones(3)
    for mdl, s in zip(models, sig):
        if s is not None:
            ref = ref * mdl.table[:, s]
    np.testing.assert_allclose(np.exp(st.log_beliefs), np.tile(ref / ref.sum(), (4, 1)), rtol=1e-12)


def test_accelerated_first_step_equals_geometric_on_random_graphs():
    rng = np.random.default_rng(10)
    for _ in range(50):
        n, m = int(rng.integers(1, 11)), int(rng.integers(2, 5))
        A, _, _, _, ll = _net(rng, n, m)
        L = np.tile(uniform_prior(m).log_belief, (n, 1))
        acc = network_step(UpdateRuleKind.ACCELERATED, NetworkState.initial(UpdateRuleKind.ACCELERATED, L), A, ll,
                           1 - 2 / (9 * n + 1))
        geo = network_step(UpdateRuleKind.GEOMETRIC, NetworkState(L), A, ll)
        np.testing.assert_allclose(acc.log_beliefs, geo.log_beliefs, atol=1e-13)


def test_degenerate_row_is_identified():
    A = np.array([[0.5, 0.5], [0.5, 0.5]])
    with np.errstate(divide="ignore"):
        L = np.log(np.array([[1.0, 0.0], [0.5, 0.5]]))
    ll = np.log(np.array([[1e-300, 1.0], [1.0, 1.0]]))
    ll[0] = [-np.inf, 0.0]
    with pytest.raises(DegeneratePosteriorError) as info:
        network_step(UpdateRuleKind.GEOMETRIC, NetworkState(L), A, ll, step=17)
    assert info.value.agent == 0 and info.value.step == 17


def test_parse_rule_names():
    assert UpdateRuleKind.parse("GeometricPool") is UpdateRuleKind.GEOMETRIC
    assert UpdateRuleKind.parse("bayes_then_linear") is UpdateRuleKind.BAYES_THEN_LINEAR
    assert UpdateRuleKind.ACCELERATED.requires_static_graph
    with pytest.raises(ValueError):
        UpdateRuleKind.parse("quantum")


def test_weighted_log_sum_zero_handling():
    lv = np.array([[-np.inf, 0.0], [0.0, 0.0]])
    np.testing.assert_array_equal(weighted_log_sum(np.array([0.0, 1.0]), lv), [0.0, 0.0])
    np.testing.assert_array_equal(weighted_log_sum(np.array([0.5, 0.5]), lv), [-np.inf, 0.0])


RULES = [UpdateRuleKind.GEOMETRIC, UpdateRuleKind.ACCELERATED, UpdateRuleKind.LINEAR_THEN_BAYES,
         UpdateRuleKind.BAYES_THEN_LINEAR, UpdateRuleKind.LIKELIHOOD_SHARING, UpdateRuleKind.CENTRALIZED]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(RULES))
def test_permutation_equivariance_and_normalization(seed, kind):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 7)), int(rng.integers(2, 6))
    A, _, L, _, ll = _net(rng, n, m)
    if kind is UpdateRuleKind.ACCELERATED:
        L = np.tile(uniform_prior(m).log_belief, (n, 1))
    perm = rng.permutation(m)
    sigma = 1 - 2 / (9 * n + 1)
    s0 = NetworkState.initial(kind, L)
    s0p = NetworkState.initial(kind, L[:, perm])
    out = network_step(kind, network_step(kind, s0, A, ll, sigma), A, ll, sigma).log_beliefs
    outp = network_step(kind, network_step(kind, s0p, A, ll[:, perm], sigma), A, ll[:, perm], sigma).log_beliefs
    np.testing.assert_allclose(outp, out[:, perm], atol=1e-12)
    np.testing.assert_allclose(np.exp(out).sum(axis=1), 1.0, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([UpdateRuleKind.GEOMETRIC, UpdateRuleKind.ACCELERATED]))
def test_zero_persistence(seed, kind):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 7)), int(rng.integers(2, 6))
    A, _, L, _, ll = _net(rng, n, m)
    dead = int(rng.integers(m))
    L = L.copy()
    L[:, dead] = -np.inf
    L = L - np.log(np.exp(L).sum(axis=1, keepdims=True))
    state = NetworkState.initial(kind, L)
    for _ in range(3):
        state = network_step(kind, state, A, ll, 1 - 2 / (9 * n + 1))
        assert np.isneginf(state.log_beliefs[:, dead]).all()
