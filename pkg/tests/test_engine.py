import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import random_instance, random_observation
from reconbelief import (
    Belief,
    Configuration,
    ConfigurationSpace,
    DependencyModel,
    FeatureSchema,
    JointBelief,
    KnowledgeBase,
    NetworkBelief,
    NodeIdentity,
    Observation,
    bayes_update,
    casestudy,
    chain_rule_prior,
    enumerate_space,
    estimate_kb,
    joint_update_oracle,
    map_estimate,
    uniform_belief,
    update_network,
    update_stream,
)
from reconbelief.errors import (
    DegeneratePrior,
    IncompleteDependencyModel,
    SchemaViolation,
    SpaceTooLarge,
    TotalEvidenceZeroWarning,
    ValidationError,
)

UBUNTU_SAMPLE = Observation({"ttl_class": "64", "window_bin": "8192-32768"})
WIN, UBUNTU, MAC = (Configuration(o) for o in casestudy.OS_LABELS)


def masses(belief, labels=casestudy.OS_LABELS):
    return [belief.mass(Configuration(o)) for o in labels]


class TestChainRulePrior:
    def test_degenerates_to_uniform(self, three_os_space):
        assert chain_rule_prior(three_os_space).allclose(uniform_belief(three_os_space), atol=1e-15)

    def test_bernoulli_split(self):
        space = ConfigurationSpace(("o",), ("s",))
        dep = DependencyModel(("s",), {("s", ("o", frozenset())): 0.7})
        b = chain_rule_prior(space, {"o": 1.0}, dep)
        assert b.mass(Configuration("o", frozenset({"s"}))) == pytest.approx(0.7, abs=1e-15)
        assert b.mass(Configuration("o")) == pytest.approx(0.3, abs=1e-15)

    def test_two_software_chain(self):
        space = ConfigurationSpace(("o",), ("s1", "s2"))
        dep = DependencyModel(("s1", "s2"), {
            ("s1", ("o", frozenset())): 0.5,
            ("s2", ("o", frozenset({"s1"}))): 0.8,
            ("s2", ("o", frozenset())): 0.2,
        })
        b = chain_rule_prior(space, {"o": 1.0}, dep)
        expected = {(): 0.40, ("s1",): 0.10, ("s2",): 0.10, ("s1", "s2"): 0.40}
        for sw, p in expected.items():
            assert b.mass(Configuration("o", frozenset(sw))) == pytest.approx(p, abs=1e-12)

    def test_renormalizes_over_admissible(self):
        space = ConfigurationSpace(("o",), ("s",), (Configuration("o", frozenset({"s"})),))
        dep = DependencyModel(("s",), {("s", ("o", frozenset())): 0.7})
        b = chain_rule_prior(space, {"o": 1.0}, dep)
        assert b.mass(Configuration("o", frozenset({"s"}))) == 1.0

    def test_os_dependency(self):
        # Windows-only software never appears on the other OS
        space = ConfigurationSpace(("win", "ubuntu"), ("paintnet",))
        dep = DependencyModel.independent(("paintnet",), {("paintnet", "win"): 0.6, ("paintnet", "ubuntu"): 0.0})
        b = chain_rule_prior(space, {"win": 0.5, "ubuntu": 0.5}, dep)
        assert b.mass(Configuration("ubuntu", frozenset({"paintnet"}))) == 0.0
        assert b.mass(Configuration("win", frozenset({"paintnet"}))) == pytest.approx(0.3)
        assert b.mass(Configuration("ubuntu")) == pytest.approx(0.5)

    def test_errors(self):
        space = ConfigurationSpace(("o",), ("s1", "s2"))
        with pytest.raises(IncompleteDependencyModel):
            chain_rule_prior(space, {"o": 1.0})
        with pytest.raises(IncompleteDependencyModel):
            chain_rule_prior(space, {"o": 1.0}, DependencyModel(("s1",), {}))
        partial = DependencyModel(("s1", "s2"), {("s1", ("o", frozenset())): 0.5, ("s2", ("o", frozenset())): 0.5})
        with pytest.raises(IncompleteDependencyModel):
            chain_rule_prior(space, {"o": 1.0}, partial)
        with pytest.raises(ValidationError):
            chain_rule_prior(space, {"o": 0.5}, partial)
        adm = ConfigurationSpace(("o",), ("s",), (Configuration("o", frozenset({"s"})),))
        with pytest.raises(DegeneratePrior):
            chain_rule_prior(adm, {"o": 1.0}, DependencyModel(("s",), {("s", ("o", frozenset())): 0.0}))


class TestBayesUpdate:
    def test_first_case_study_observation(self):
        post = bayes_update(uniform_belief(casestudy.space()), UBUNTU_SAMPLE, casestudy.knowledge_base())
        assert masses(post) == pytest.approx([0.0055, 0.5359, 0.4586], abs=5e-5)

    def test_second_observation_from_rounded_prior(self):
        prior = Belief.from_mapping(casestudy.space(), {WIN: 0.0055, UBUNTU: 0.5359, MAC: 0.4586})
        post = bayes_update(prior, UBUNTU_SAMPLE, casestudy.knowledge_base())
        assert masses(post)[1:] == pytest.approx([0.5773, 0.4227], abs=1e-4)

    def test_empty_observation_is_identity(self):
        rng = np.random.default_rng(3)
        _, kb, belief = random_instance(rng)
        assert bayes_update(belief, Observation({}), kb).allclose(belief, atol=0)

    def test_hand_computed(self, tiny_kb):
        space = ConfigurationSpace(("o", "p"), ("s1",))
        prior = uniform_belief(space)
        post = bayes_update(prior, Observation({"ttl_class": "64", "banner": "b"}), tiny_kb)
        # likelihoods: o 0.5, o+s1 0.5*0.6, p 0.8, p+s1 0.8*0.6
        lik = {"o": 0.5, "o+s1": 0.3, "p": 0.8, "p+s1": 0.48}
        z = sum(lik.values())
        for c, p in post.items():
            assert p == pytest.approx(lik[c.label] / z, abs=1e-15)

    def test_total_evidence_zero_keeps_prior(self):
        schema = FeatureSchema(("ttl",), (), {"ttl": ("64", "128")})
        kb = estimate_kb([("os", "a", Observation({"ttl": "64"})), ("os", "b", Observation({"ttl": "64"}))], schema, alpha=0)
        space = ConfigurationSpace(("a", "b"))
        prior = uniform_belief(space)
        with pytest.warns(TotalEvidenceZeroWarning):
            post = bayes_update(prior, Observation({"ttl": "128"}), kb)
        assert post is prior
        with pytest.warns(TotalEvidenceZeroWarning, match="observation 2"):
            traj = update_stream(prior, [Observation({"ttl": "64"}), Observation({"ttl": "128"})], kb)
        assert traj.rejected == (2,)
        assert len(traj) == 3

    def test_exact_zeros_without_smoothing(self):
        schema = FeatureSchema(("ttl",), (), {"ttl": ("64", "128")})
        kb = estimate_kb([("os", "win", Observation({"ttl": "128"})), ("os", "ubuntu", Observation({"ttl": "64"}))],
                         schema, alpha=0, os_labels=["mac"])
        post = bayes_update(uniform_belief(ConfigurationSpace(("win", "ubuntu", "mac"))), Observation({"ttl": "64"}), kb)
        assert post.mass(Configuration("win")) == 0.0

    def test_no_underflow_on_long_streams(self):
        schema = FeatureSchema(("f",), (), {"f": tuple(f"v{i}" for i in range(1000))})
        rows = {
            "a": {"f": {f"v{i}": (0.5 if i == 0 else 0.5 / 999) for i in range(1000)}},
            "b": {"f": {f"v{i}": (0.25 if i == 0 else 0.75 / 999) for i in range(1000)}},
        }
        kb = KnowledgeBase(schema, rows)
        space = ConfigurationSpace(("a", "b"))
        # per-step likelihoods ~5e-4: their product over 200 steps is ~1e-660, far below float range
        final = update_stream(uniform_belief(space), [Observation({"f": "v7"})] * 200, kb).final
        odds = final.mass(Configuration("a")) / final.mass(Configuration("b"))
        assert odds == pytest.approx((2 / 3) ** 200, rel=1e-9)
        assert abs(final.probabilities.sum() - 1) < 1e-12


class TestProperties:
    @settings(max_examples=150, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_normalized_and_absorbing(self, seed):
        rng = np.random.default_rng(seed)
        space, kb, belief = random_instance(rng)
        p = belief.probabilities.copy()
        p[rng.random(len(p)) < 0.3] = 0.0
        if p.sum() == 0:
            p[0] = 1.0
        belief = Belief(space, belief.configurations, p / p.sum())
        post = bayes_update(belief, random_observation(rng, kb.schema), kb)
        assert abs(post.probabilities.sum() - 1) <= 1e-9
        for c, m in belief.items():
            if m == 0.0:
                assert post.mass(c) == 0.0

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_order_invariance(self, seed):
        rng = np.random.default_rng(seed)
        _, kb, belief = random_instance(rng)
        stream = [random_observation(rng, kb.schema) for _ in range(int(rng.integers(1, 7)))]
        forward = update_stream(belief, stream, kb).final
        assert update_stream(belief, stream[::-1], kb).final.allclose(forward, 1e-9)
        shuffled = [stream[i] for i in rng.permutation(len(stream))]
        assert update_stream(belief, shuffled, kb).final.allclose(forward, 1e-9)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(1.01, 10), st.integers(1, 50), st.floats(0.05, 0.95))
    def test_odds_dynamics(self, r, k, prior_a):
        p_b = 0.9 / r
        p_a = 0.9
        schema = FeatureSchema(("f",), (), {"f": ("hit", "miss")})
        kb = KnowledgeBase(schema, {"a": {"f": {"hit": p_a, "miss": 1 - p_a}}, "b": {"f": {"hit": p_b, "miss": 1 - p_b}}})
        space = ConfigurationSpace(("a", "b"))
        prior = Belief(space, enumerate_space(space), [prior_a, 1 - prior_a])
        final = update_stream(prior, [Observation({"f": "hit"})] * k, kb).final
        odds = final.mass(Configuration("a")) / final.mass(Configuration("b"))
        expected = prior_a / (1 - prior_a) * (p_a / p_b) ** k
        assert odds == pytest.approx(expected, rel=1e-6)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 1.0))
    def test_constant_likelihood_scaling(self, seed, c):
        # a feature whose row is identical for every OS scales all likelihoods by one constant
        rng = np.random.default_rng(seed)
        space, kb, belief = random_instance(rng, n_sw=0)
        schema = FeatureSchema(kb.schema.os_features + ("noise",), (), {**kb.schema.domains, "noise": ("x", "y")})
        tables = {o: {**rows, "noise": {"x": c, "y": 1 - c}} for o, rows in kb.os_tables.items()}
        scaled = KnowledgeBase(schema, tables)
        obs = random_observation(rng, kb.schema, p_present=1.0)
        plain = bayes_update(belief, obs, kb)
        noisy = bayes_update(belief, Observation({**obs.values, "noise": "x"}), scaled)
        assert noisy.allclose(plain, 1e-9)
        assert map_estimate(noisy).configuration == map_estimate(plain).configuration


class TestMap:
    def test_argmax(self):
        space = ConfigurationSpace(("a", "b"))
        est = map_estimate(Belief.from_mapping(space, {Configuration("a"): 0.9, Configuration("b"): 0.1}))
        assert est == (Configuration("a"), 0.9, False)

    def test_tie_goes_to_enumeration_order(self, three_os_space):
        est = map_estimate(uniform_belief(three_os_space))
        assert est.configuration == Configuration("win")
        assert est.tie

    def test_tie_independent_of_storage_order(self, three_os_space):
        configs = enumerate_space(three_os_space)[::-1]
        est = map_estimate(Belief(three_os_space, configs, [0.4, 0.2, 0.4]))
        assert est.configuration == Configuration("win") and est.tie


class TestUpdateStream:
    def test_empty(self, three_os_space, tiny_kb):
        prior = uniform_belief(three_os_space)
        traj = update_stream(prior, [], tiny_kb)
        assert len(traj) == 1 and traj.final is prior
        assert traj.map_sequence == (Configuration("win"),)

    def test_fifteen_observations(self):
        traj = update_stream(uniform_belief(casestudy.space()), [UBUNTU_SAMPLE] * 15, casestudy.knowledge_base())
        assert [i for i, _ in traj.steps] == list(range(16))
        assert traj.final.mass(UBUNTU) == pytest.approx(0.9120, abs=0.005)
        assert map_estimate(traj.final) == (UBUNTU, pytest.approx(0.912, abs=0.005), False)
        assert traj.map_sequence[1:] == (UBUNTU,) * 15

    def test_error_names_observation(self, tiny_kb):
        prior = uniform_belief(ConfigurationSpace(("o", "p")))
        with pytest.raises(SchemaViolation, match="observation 2"):
            update_stream(prior, [Observation({"ttl_class": "64"}), Observation({"ttl_class": "1"})], tiny_kb)

    def test_csv_long_and_wide(self):
        traj = update_stream(uniform_belief(casestudy.space()), [UBUNTU_SAMPLE] * 2, casestudy.knowledge_base())
        long = traj.to_csv().splitlines()
        assert long[0] == "obs_index,configuration_label,probability"
        assert len(long) == 1 + 3 * 3
        assert long[1].startswith("0,win,0.333")
        wide = traj.to_csv(wide=True).splitlines()
        assert wide[0] == "step,win,ubuntu,mac"
        assert wide[1].startswith("init. belief,0.333") and wide[3].startswith("obs. 2,")


def _two_node_setup(seed):
    rng = np.random.default_rng(seed)
    space, kb, b1 = random_instance(rng, n_os=2, n_sw=1)
    b2 = Belief(space, b1.configurations, rng.dirichlet(np.ones(len(b1))))
    n1, n2 = NodeIdentity.of("10.0.0.1"), NodeIdentity.of("10.0.0.2")
    streams = {n: [random_observation(rng, kb.schema) for _ in range(3)] for n in (n1, n2)}
    return kb, NetworkBelief({n1: b1, n2: b2}), streams


class TestJointOracle:
    def test_single_node(self):
        rng = np.random.default_rng(11)
        _, kb, belief = random_instance(rng)
        node = NodeIdentity.of("10.0.0.9")
        stream = [random_observation(rng, kb.schema) for _ in range(4)]
        joint = joint_update_oracle(JointBelief.from_network(NetworkBelief({node: belief})), {node: stream}, kb)
        final = update_stream(belief, stream, kb).final
        for c, p in joint.marginal(node).items():
            assert p == pytest.approx(final.mass(c), abs=1e-12)

    def test_two_nodes_outer_product(self):
        kb, net, streams = _two_node_setup(5)
        joint = joint_update_oracle(JointBelief.from_network(net), streams, kb)
        factored = JointBelief.from_network(update_network(net, streams, kb))
        assert np.allclose(joint.probabilities, factored.probabilities, atol=1e-12, rtol=0)

    def test_correlated_prior_breaks_factorization(self):
        # perfectly correlated prior: both nodes share one OS
        space = ConfigurationSpace(("a", "b"))
        schema = FeatureSchema(("f",), (), {"f": ("x", "y")})
        kb = KnowledgeBase(schema, {"a": {"f": {"x": 0.9, "y": 0.1}}, "b": {"f": {"x": 0.2, "y": 0.8}}})
        n1, n2 = NodeIdentity.of("10.0.0.1"), NodeIdentity.of("10.0.0.2")
        configs = tuple(enumerate_space(space))
        prior = JointBelief((n1, n2), (configs, configs), np.array([[0.5, 0.0], [0.0, 0.5]]))
        streams = {n1: [Observation({"f": "x"})], n2: []}
        joint = joint_update_oracle(prior, streams, kb)
        m1, m2 = joint.marginal(n1), joint.marginal(n2)
        product = np.outer([m1[c] for c in configs], [m2[c] for c in configs])
        assert not np.allclose(joint.probabilities, product)
        # observing node 1 moved node 2's marginal, which per-node updates never do
        assert m2[Configuration("a")] == pytest.approx(0.9 / 1.1)

    def test_too_large(self):
        space = ConfigurationSpace(("a",), tuple(f"s{i}" for i in range(6)))
        b = uniform_belief(space)
        nodes = {NodeIdentity.of(f"10.0.0.{i}"): b for i in range(1, 4)}
        with pytest.raises(SpaceTooLarge):
            joint_update_oracle(JointBelief.from_network(NetworkBelief(nodes)), {}, None)
