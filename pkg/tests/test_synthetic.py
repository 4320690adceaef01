import filecmp

import networkx as nx
import numpy as np
import pytest

from provguard import pipeline
from provguard.augmentation import DEFAULT_RULES
from provguard.config import load_config
from provguard.graph import build_graph
from provguard.synthetic import TEMPLATES, graph_level_dataset, node_level_streams, template_events


@pytest.fixture(scope="module")
def demo():
    return graph_level_dataset(100, 25, seed=0)


def test_requested_counts(demo):
    assert len(demo.graphs) == 125 and int(demo.labels.sum()) == 25
    assert set(demo.templates) == set(TEMPLATES)
    assert not demo.labels[demo.train_idx].any()
    assert len(demo.train_idx) == 60 and len(demo.test_idx) == 65
    assert min(g.n_nodes for g in demo.graphs) >= 10


def test_ground_truth_consistent(demo):
    for g, bad in zip(demo.graphs, demo.labels):
        assert g.is_malicious == bool(bad)
        if bad:
            kinds = {g.nodes[n].feature for n in g.malicious_nodes()}
            assert {"Process/daemon", "Network/remote", "File/temp"} <= kinds


def test_only_legal_edges(demo):
    for g in demo.graphs:
        for e in g.edges:
            assert DEFAULT_RULES.is_allowed(g.nodes[e.src].kind, g.nodes[e.dst].kind, e.kind)


def _motif(template):
    g = build_graph(template_events(template, seed=0, minimal=True)[0])
    d = nx.MultiDiGraph()
    for n, node in g.nodes.items():
        d.add_node(n, kind=node.kind.value)
    for e in g.edges:
        d.add_edge(e.src, e.dst, label=e.kind)
    return d


def test_templates_pairwise_non_isomorphic():
    motifs = {t: _motif(t) for t in TEMPLATES}
    nm = nx.algorithms.isomorphism.categorical_node_match("kind", None)
    em = nx.algorithms.isomorphism.categorical_multiedge_match("label", None)
    for i, a in enumerate(TEMPLATES):
        assert nx.is_isomorphic(motifs[a], _motif(a), node_match=nm, edge_match=em)
        for b in TEMPLATES[i + 1 :]:
            assert not nx.is_isomorphic(motifs[a], motifs[b], node_match=nm, edge_match=em)
            assert not nx.is_isomorphic(motifs[a].to_undirected(), motifs[b].to_undirected())


def test_same_seed_same_graphs():
    a = graph_level_dataset(20, 5, seed=3)
    b = graph_level_dataset(20, 5, seed=3)
    assert [x.edges for x in a.graphs] == [x.edges for x in b.graphs]
    assert np.array_equal(a.labels, b.labels)
    c = graph_level_dataset(20, 5, seed=4)
    assert [x.edges for x in a.graphs] != [x.edges for x in c.graphs]


def test_size_checks():
    with pytest.raises(ValueError):
        graph_level_dataset(10, 5)
    with pytest.raises(ValueError):
        graph_level_dataset(20, 5, train_fraction=1.0)


def test_generated_files_identical(tmp_path):
    cfg = load_config(None, ["gen.benign=30", "gen.malicious=6"], env={})
    a = pipeline.generate(cfg, tmp_path / "a")
    b = pipeline.generate(cfg, tmp_path / "b")
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert len(files) == 36 + 3
    match, mismatch, errors = filecmp.cmpfiles(a, b, [str(f) for f in files], shallow=False)
    assert not mismatch and not errors
    flags = (a / "labels.json").read_text()
    assert flags.count('"malicious"') == 6


def test_node_level_streams():
    train, test, labels = node_level_streams(6, 3, 2, seed=1)
    assert train and test
    assert any(labels.values()) and not all(labels.values())
    test_ids = {n for e in test for n in (e.src_id, e.dst_id)}
    assert set(labels) == test_ids
    assert not {n for e in train for n in (e.src_id, e.dst_id)} & test_ids
    ts = [e.timestamp for e in test]
    assert ts == sorted(ts)
