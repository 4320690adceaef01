import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import F, N, P, chain_graph, ev, random_graph
from oracles import rules as rule_oracle
from provguard._utils import perturb_count
from provguard.augmentation import (
    DEFAULT_RULES,
    AugmentationPlan,
    LogicAwareAugmenter,
    LogicRuleSet,
    augment,
    augment_edges,
    augment_features,
    augment_nodes,
    forged_edges,
    make_views,
    rule_violations,
)
from provguard.graph import Edge, Node, NodeKind, ProvenanceGraph, build_graph, dump_graph, topology_key


def test_default_table_matches_reference():
    for src, dst in itertools.product(NodeKind, NodeKind):
        assert set(DEFAULT_RULES.labels_for(src, dst)) == rule_oracle.ALLOWED.get((src.value, dst.value), set())
    assert {(a.value, b.value) for a, b in DEFAULT_RULES.forbidden} >= {
        ("Network", "Process"),
        ("File", "Network"),
        ("Network", "File"),
        ("Network", "Network"),
    }


def test_rule_set_must_partition_pairs():
    with pytest.raises(ValueError, match="cover"):
        LogicRuleSet(allowed={(P, F): ("read",)}, forbidden=frozenset())
    with pytest.raises(ValueError, match="overlap"):
        LogicRuleSet(forbidden=DEFAULT_RULES.forbidden | {(P, F)})


def test_file_to_network_never_allowed():
    assert not DEFAULT_RULES.is_allowed(F, N, "send")
    assert DEFAULT_RULES.labels_for(F, N) == ()


@pytest.mark.parametrize("gamma", [-0.1, 1.5])
def test_plan_rejects_bad_gamma(gamma):
    with pytest.raises(ValueError):
        AugmentationPlan(gamma=gamma)


def test_plan_rejects_bad_kinds():
    with pytest.raises(ValueError):
        AugmentationPlan(kinds=frozenset())
    with pytest.raises(ValueError):
        AugmentationPlan(kinds=frozenset({"XA"}))


def test_ops_require_enabled_kind(small_graph):
    plan = AugmentationPlan(kinds=frozenset({"FA"}))
    with pytest.raises(ValueError):
        augment_edges(small_graph, plan)
    with pytest.raises(ValueError):
        augment_nodes(small_graph, plan)


@pytest.mark.parametrize("op", [augment_edges, augment_nodes, augment_features])
def test_gamma_zero_is_identity(op, small_graph):
    assert op(small_graph, AugmentationPlan(gamma=0.0)) is small_graph


def _ten_edge_graph():
    events = [ev(f"p{i}", P, f"f{i}", F, "write", i) for i in range(5)]
    events += [ev(f"p{i}", P, f"p{i+1}", P, "fork", 10 + i) for i in range(4)]
    events.append(ev("p0", P, "n0", N, "connect", 20))
    return build_graph(events)


def test_edge_slots_on_ten_edges():
    g = _ten_edge_graph()
    assert g.n_edges == 10
    assert perturb_count(0.2, g.n_edges) == 2
    seen = set()
    for seed in range(300):
        out = augment_edges(g, AugmentationPlan(gamma=0.2, seed=seed))
        assert 8 <= out.n_edges <= 12
        assert not rule_violations(g, out)
        before = {(e.src, e.dst, e.kind, e.t) for e in g.edges}
        after = {(e.src, e.dst, e.kind, e.t) for e in out.edges}
        # two slots, each one edit; the second may undo the first
        assert len(before - after) + len(after - before) in (0, 2)
        seen.add(out.n_edges)
    assert seen == {8, 10, 12}


def test_edge_removal_never_empties():
    g = build_graph([ev("p", P, "f", F, "read", 0)])
    for seed in range(50):
        out = augment_edges(g, AugmentationPlan(gamma=1.0, seed=seed))
        assert out.n_edges >= 1
        assert not rule_violations(g, out)


def test_edge_addition_skips_forbidden_pairs():
    # only File and Network nodes besides one process: F->N must never appear
    g = build_graph([ev("p", P, "f", F, "read", 0), ev("p", P, "n", N, "send", 1)])
    for seed in range(100):
        out = augment_edges(g, AugmentationPlan(gamma=1.0, seed=seed))
        for e in forged_edges(g, out):
            assert rule_oracle.is_allowed(out.nodes[e.src].kind, out.nodes[e.dst].kind, e.kind)


def test_node_slots_on_chain():
    g = chain_graph(5)
    assert perturb_count(0.2, g.n_nodes) == 1
    for seed in range(200):
        out = augment_nodes(g, AugmentationPlan(gamma=0.2, seed=seed))
        assert abs(out.n_nodes - g.n_nodes) == 1
        assert not rule_violations(g, out)
        assert out.n_edges >= 1
        assert min(out.degree().values()) >= 1


def test_new_network_node_edges_are_process_to_network(small_graph):
    found = 0
    for seed in range(300):
        out = augment_nodes(small_graph, AugmentationPlan(gamma=0.2, seed=seed))
        for n in set(out.nodes) - set(small_graph.nodes):
            if out.nodes[n].kind is N:
                found += 1
                inc = [e for e in out.edges if n in (e.src, e.dst)]
                assert 1 <= len(inc) <= 3
                for e in inc:
                    assert e.dst == n and out.nodes[e.src].kind is P
                    assert e.kind in ("connect", "send", "recv")
    assert found > 0


def test_node_slot_skipped_without_attachment(caplog):
    # with nothing allowed no new node can attach, and removing either node would empty the graph
    g = ProvenanceGraph({"a": Node(N, "Network"), "b": Node(N, "Network")}, (Edge("a", "b", "send", 0),))
    pairs = frozenset(itertools.product(NodeKind, NodeKind))
    rules = LogicRuleSet(allowed={}, forbidden=pairs)
    out = augment_nodes(g, AugmentationPlan(gamma=1.0, seed=0, rules=rules))
    assert dump_graph(out) == dump_graph(g)
    assert caplog.text.count("skipped") == 2


def test_features_keep_kind_and_topology():
    rng = np.random.default_rng(0)
    for seed in range(50):
        g = random_graph(rng, 10, 16, labels=True)
        out = augment_features(g, AugmentationPlan(gamma=0.5, seed=seed))
        assert topology_key(out) == topology_key(g)
        for n in g.nodes:
            assert out.nodes[n].kind == g.nodes[n].kind
            donors = {m.feature for m in g.nodes.values() if m.kind == g.nodes[n].kind}
            assert out.nodes[n].feature in donors


def test_feature_slot_on_single_file_node_is_skipped():
    g = build_graph(
        [ev("p1", P, "f", F, "read", 0, "Process/a", "File/x"), ev("p1", P, "p2", P, "fork", 1, "Process/a", "Process/b")]
    )
    for seed in range(50):
        out = augment_features(g, AugmentationPlan(gamma=1.0, seed=seed))
        assert out.nodes["f"].feature == "File/x"
        assert topology_key(out) == topology_key(g)


def test_views_deterministic_and_distinct():
    rng = np.random.default_rng(7)
    g = random_graph(rng, 20, 40, legal_only=True, labels=True)
    plan = AugmentationPlan(gamma=0.5, seed=11)
    a = make_views(g, plan)
    b = make_views(g, plan)
    assert [dump_graph(x) for x in a] == [dump_graph(x) for x in b]
    dumps = {dump_graph(x) for x in a}
    assert len(dumps) == 2 and dump_graph(g) not in dumps


def test_views_gamma_zero_are_copies(small_graph):
    views = make_views(small_graph, AugmentationPlan(gamma=0.0), 3)
    assert len(views) == 3
    assert all(dump_graph(v) == dump_graph(small_graph) for v in views)


def test_make_views_needs_two(small_graph):
    with pytest.raises(ValueError):
        make_views(small_graph, AugmentationPlan(), 1)


def test_augmenter_estimator(small_graph):
    aug = LogicAwareAugmenter(gamma=0.5, seed=3)
    assert aug.get_params()["gamma"] == 0.5
    out1 = aug.fit_transform([small_graph, small_graph])
    out2 = aug.transform([small_graph, small_graph])
    assert [dump_graph(g) for g in out1] == [dump_graph(g) for g in out2]
    with pytest.raises(ValueError):
        LogicAwareAugmenter(gamma=2.0).fit([small_graph])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 1), st.integers(5, 14))
def test_augment_properties(seed, gamma, n_nodes):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n_nodes, 2 * n_nodes)
    plan = AugmentationPlan(gamma=gamma, seed=seed)
    e_out = augment_edges(g, plan)
    assert abs(e_out.n_edges - g.n_edges) <= perturb_count(gamma, g.n_edges)
    n_out = augment_nodes(g, plan)
    assert abs(n_out.n_nodes - g.n_nodes) <= perturb_count(gamma, g.n_nodes)
    for out in (e_out, n_out, augment(g, plan, np.random.default_rng(seed))):
        # input edges may break the table; only forged ones are audited
        for e in forged_edges(g, out):
            assert rule_oracle.is_allowed(out.nodes[e.src].kind, out.nodes[e.dst].kind, e.kind)
        assert out.n_edges >= 1
        assert not out.edges or min(out.degree().values()) >= 1


@given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 500))
def test_slot_count_monotone(g1, g2, n):
    lo, hi = sorted((g1, g2))
    assert perturb_count(lo, n) <= perturb_count(hi, n)
    if lo > 0 and n > 0:
        assert perturb_count(lo, n) >= 1


def test_perturb_count_float_noise():
    assert perturb_count(0.1, 30) == 3
    assert perturb_count(0.2, 10) == 2
    assert perturb_count(0.5, 5) == 3
