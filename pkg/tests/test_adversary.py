from dataclasses import replace

import numpy as np
import pytest

from helpers import F, N, P, ev, random_graph
from provguard.adversary import (
    AttackSpec,
    apply_attack,
    apply_swaps,
    cgpa,
    fpa_graph,
    gfpa,
    gfpa_graph,
    gspa,
    gspa_graph,
    parse_attack,
    spa,
    spa_graph,
)
from provguard.augmentation import DEFAULT_RULES
from provguard.exceptions import ConfigError, DataError
from provguard.graph import build_graph, dump_graph, topology_key


def _labelled(n_bad=10, n_good=10):
    """Malicious processes m* writing files, benign processes b* reading them."""
    events, gt = [], {}
    for i in range(n_bad):
        events.append(ev(f"m{i}", P, f"mf{i}", F, "write", i, "Process/implant", "File/temp"))
        gt[f"m{i}"] = gt[f"mf{i}"] = True
    for i in range(n_good):
        events.append(ev(f"b{i}", P, f"bf{i}", F, "read", 100 + i, "Process/worker", "File/data"))
        events.append(ev(f"b{i}", P, f"h{i}", N, "connect", 200 + i, "Process/worker", "Network/remote"))
        gt[f"b{i}"] = gt[f"bf{i}"] = gt[f"h{i}"] = False
    return build_graph(events, gt)


def _twenty_thirty():
    events = [ev(f"p{i}", P, f"p{i+1}", P, "fork", i) for i in range(9)]
    events += [ev(f"p{i}", P, f"f{i}", F, "write", 10 + i) for i in range(10)]
    events += [ev(f"p{i}", P, f"f{(i + 3) % 10}", F, "read", 20 + i) for i in range(10)]
    events.append(ev("p9", P, "p0", P, "clone", 30))
    g = build_graph(events)
    assert (g.n_nodes, g.n_edges) == (20, 30)
    return g


@pytest.mark.parametrize("kind", ["GSPA", "GFPA", "CGPA", "SPA", "FPA"])
def test_rate_zero_is_identity(kind):
    g = _labelled()
    out = apply_attack(g, AttackSpec(kind, 0.0, seed=3))
    assert dump_graph(out) == dump_graph(g)


@pytest.mark.parametrize("kind", ["GSPA", "GFPA", "CGPA", "SPA", "FPA"])
def test_deterministic(kind):
    g = _labelled()
    spec = AttackSpec(kind, 0.4, seed=7)
    assert dump_graph(apply_attack(g, spec)) == dump_graph(apply_attack(g, spec))


def test_gspa_ten_malicious_nodes():
    g = _labelled(n_bad=5)
    assert len(g.malicious_nodes()) == 10
    for seed in range(20):
        out = gspa(g, AttackSpec("GSPA", 0.2, seed=seed))
        new = out.edges[g.n_edges :]
        assert out.edges[: g.n_edges] == g.edges and len(new) == 2
        for e in new:
            assert g.ground_truth[e.src] and not g.ground_truth[e.dst]
            labels = DEFAULT_RULES.labels_for(g.nodes[e.src].kind, g.nodes[e.dst].kind)
            assert e.kind in labels or not labels


def test_gspa_edge_count_property(rng):
    for _ in range(30):
        g = _labelled(int(rng.integers(1, 6)), int(rng.integers(1, 6)))
        y = float(rng.uniform(0, 1))
        out = gspa(g, AttackSpec("GSPA", y, seed=int(rng.integers(100))))
        assert out.n_edges == g.n_edges + int(np.ceil(y * len(g.malicious_nodes()) - 1e-9))


def test_gspa_needs_ground_truth(small_graph):
    with pytest.raises(DataError, match="malicious"):
        gspa(small_graph, AttackSpec("GSPA", 0.2))
    out = gspa(small_graph, AttackSpec("GSPA", 0.5, target_policy="random"))
    assert out.n_edges == small_graph.n_edges + 3


def test_gfpa_full_rate_mimics_benign():
    g = _labelled()
    out = gfpa(g, AttackSpec("GFPA", 1.0, seed=1))
    benign = {n.feature for v, n in g.nodes.items() if not g.ground_truth[v]}
    for v in g.malicious_nodes():
        assert out.nodes[v].feature in benign
        assert out.nodes[v].kind == g.nodes[v].kind
    assert topology_key(out) == topology_key(g)
    assert all(out.nodes[v] == g.nodes[v] for v in g.nodes if not g.ground_truth[v])


def test_gfpa_random_policy_keeps_shape(rng):
    for seed in range(20):
        g = random_graph(rng, 10, 15, labels=True)
        out = gfpa(g, AttackSpec("GFPA", 0.6, seed=seed, target_policy="random"))
        assert topology_key(out) == topology_key(g)
        assert [n.kind for n in out.nodes.values()] == [n.kind for n in g.nodes.values()]


def test_cgpa_is_half_and_half():
    g = _labelled()
    spec = AttackSpec("CGPA", 0.2, seed=5)
    r1, r2 = (np.random.default_rng(s) for s in np.random.SeedSequence(5).spawn(2))
    expect = gfpa_graph(gspa_graph(g, 0.1, r1), 0.1, r2)
    out = cgpa(g, spec)
    assert dump_graph(out) == dump_graph(expect)
    assert out.n_edges == g.n_edges + 2


def test_spa_counts():
    g = _twenty_thirty()
    for seed in range(20):
        _, ops = spa_graph(g, 0.2, np.random.default_rng(seed))
        kinds = [op for op, _ in ops]
        assert kinds.count("insert_node") == 2
        assert len(kinds) - 2 == 3


def test_spa_on_corpus(rng):
    graphs = [random_graph(rng, 8, 12) for _ in range(4)]
    out = spa(graphs, AttackSpec("SPA", 0.5, seed=2))
    assert len(out) == 4
    assert any(dump_graph(a) != dump_graph(b) for a, b in zip(graphs, out))
    for h in out:
        assert not h.edges or min(h.degree().values()) >= 1


def test_fpa_six_nodes_full_rate():
    g = build_graph(
        [ev("p1", P, "f1", F, "write", 0, "Process/a", "File/x"), ev("p1", P, "p2", P, "fork", 1, "Process/a", "Process/b"),
         ev("p2", P, "n1", N, "send", 2, "Process/b", "Network/c"), ev("f2", F, "p2", P, "exec", 3, "File/y", "Process/b"),
         ev("p2", P, "f3", F, "read", 4, "Process/b", "File/z")]
    )
    assert g.n_nodes == 6
    for seed in range(10):
        out, swaps = fpa_graph(g, 1.0, np.random.default_rng(seed))
        assert len(swaps) == 3
        assert sorted(v for pair in swaps for v in pair) == g.sorted_ids()
        assert topology_key(out) == topology_key(g)
        assert all(out.nodes[v].kind == g.nodes[v].kind for v in g.nodes)
        assert dump_graph(apply_swaps(out, swaps)) == dump_graph(g)


def test_fpa_odd_count_rounds_to_pairs():
    g = build_graph([ev("p", P, "f", F, "read", 0), ev("p", P, "n", N, "send", 1)])
    out, swaps = fpa_graph(g, 1.0, np.random.default_rng(0))
    assert len(swaps) == 1


def test_parse_attack():
    spec = parse_attack("cgpa:y=0.2:seed=7")
    assert (spec.kind, spec.rate, spec.seed, spec.phase, spec.target_policy) == ("CGPA", 0.2, 7, "detection", "malicious_nodes")
    assert parse_attack("spa:y=0.1", target_policy="random", seed=4).seed == 4
    assert parse_attack("gspa:y=1:policy=random", target_policy="malicious_nodes").target_policy == "random"
    assert parse_attack(spec.describe()) == spec


@pytest.mark.parametrize("text", ["", "gspa", "gspa:y=abc", "gspa:rate=0.2", "gspa:y=1.5", "xxx:y=0.1", "gspa:y=0.1:policy=all"])
def test_parse_attack_rejects(text):
    with pytest.raises(ConfigError):
        parse_attack(text)


def test_phase_consistency():
    with pytest.raises(ConfigError):
        AttackSpec("GSPA", 0.1, phase="training")
    with pytest.raises(ConfigError):
        AttackSpec("FPA", 0.1, phase="detection")
    with pytest.raises(ConfigError):
        apply_attack(_labelled(), AttackSpec("GSPA", 0.1), phase="training")
    assert AttackSpec("spa", 0.1).phase == "training"


def test_graph_level_fallback_to_random(small_graph):
    graphs = [small_graph, replace(small_graph)]
    out = apply_attack(graphs, AttackSpec("GSPA", 0.5, seed=1))
    assert all(h.n_edges == small_graph.n_edges + 3 for h in out)
    clean = build_graph([ev("p", P, "f", F, "read", 0), ev("p", P, "n", N, "send", 1)], {"p": False})
    assert apply_attack([clean], AttackSpec("GSPA", 0.5))[0] is clean


def test_sequence_uses_per_graph_seeds():
    g = _labelled()
    a, b = apply_attack([g, g], AttackSpec("GSPA", 0.5, seed=0))
    assert dump_graph(a) != dump_graph(b)
