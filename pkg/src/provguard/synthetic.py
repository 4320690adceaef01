"""Desk-scale synthetic provenance data.

Benign activity comes from three templates that only use edge patterns the
logic rules allow:

* ``web``: a browser exec'd from its binary loads libraries and forks
  renderers; each renderer talks to a few remote hosts and reads/writes
  cache files.
* ``build``: a make process forks compilers exec'd from a shared compiler
  binary; compilers read sources and headers and write objects, a linker
  reads the objects and writes the output binary.
* ``service``: a daemon reads its configuration and clones workers that
  exchange traffic with clients, read data files and append to a shared log.

Nodes carry finer ``Kind/subtype`` feature labels (binaries, libraries,
configuration, user data, long-running versus short-lived processes).

The malicious motif is a dropper: a process from the host graph writes a
payload file that is exec'd into an implant, which forks several children
that each beacon repeatedly to one command-and-control host and read a
sensitive file.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import (
    DEFAULT_WINDOW_NS,
    EventRecord,
    NodeKind,
    ProvenanceGraph,
    build_graph,
    cleanup,
    reduce_cpr,
)

P, F, N = NodeKind.PROCESS, NodeKind.FILE, NodeKind.NETWORK

TEMPLATES = ("web", "build", "service")

SUBTYPES = {
    "firefox_bin": "File/binary",
    "make_bin": "File/binary",
    "cc_bin": "File/binary",
    "daemon_bin": "File/binary",
    "lib": "File/library",
    "Makefile": "File/config",
    "conf": "File/config",
    "secret": "File/config",
    "cache": "File/temp",
    "payload": "File/temp",
    "src": "File/data",
    "header": "File/data",
    "obj": "File/data",
    "a_out": "File/data",
    "data": "File/data",
    "log": "File/log",
    "firefox": "Process/daemon",
    "daemon": "Process/daemon",
    "make": "Process/daemon",
    "implant": "Process/daemon",
    "renderer": "Process/worker",
    "worker": "Process/worker",
    "beacon": "Process/worker",
    "cc": "Process/tool",
    "ld": "Process/tool",
    "host": "Network/remote",
    "c2": "Network/remote",
    "client": "Network/local",
}


class _Trace:
    def __init__(self, rng, prefix: str = "", t0: int = 0):
        self.rng = rng
        self.prefix = prefix
        self.t = t0
        self.events: list[EventRecord] = []
        self.kinds: dict[str, NodeKind] = {}
        self.labels: dict[str, str] = {}
        self.counter = 0

    def node(self, kind: NodeKind, name: str) -> str:
        node_id = f"{self.prefix}{name}{self.counter}"
        self.counter += 1
        self.kinds[node_id] = kind
        self.labels[node_id] = SUBTYPES.get(name, kind.value)
        return node_id

    def ev(self, src: str, dst: str, label: str, repeat: int = 1, spaced: bool = False):
        for _ in range(repeat):
            # spaced repeats survive edge reduction, bursts collapse into one edge
            gap = DEFAULT_WINDOW_NS + int(self.rng.integers(1, 10**8)) if spaced else int(self.rng.integers(10**5, 10**7))
            self.t += gap
            self.events.append(
                EventRecord(src, self.kinds[src], dst, self.kinds[dst], label, self.t, self.labels[src], self.labels[dst])
            )


def _web(tr: _Trace, renderers: int, hosts: tuple[int, int], caches: tuple[int, int]):
    rng = tr.rng
    binary = tr.node(F, "firefox_bin")
    browser = tr.node(P, "firefox")
    tr.ev(binary, browser, "exec")
    for _ in range(2):
        tr.ev(tr.node(F, "lib"), browser, "load")
    procs = [browser]
    for _ in range(renderers):
        r = tr.node(P, "renderer")
        tr.ev(browser, r, "fork")
        procs.append(r)
        for _ in range(int(rng.integers(hosts[0], hosts[1] + 1))):
            host = tr.node(N, "host")
            tr.ev(r, host, "connect")
            tr.ev(r, host, "send")
            tr.ev(r, host, "recv", repeat=int(rng.integers(1, 4)))
        for _ in range(int(rng.integers(caches[0], caches[1] + 1))):
            f = tr.node(F, "cache")
            tr.ev(r, f, "read")
            tr.ev(r, f, "write")
    return procs


def _build(tr: _Trace, compilers: int, sources: tuple[int, int]):
    rng = tr.rng
    make_bin = tr.node(F, "make_bin")
    make = tr.node(P, "make")
    tr.ev(make_bin, make, "exec")
    tr.ev(make, tr.node(F, "Makefile"), "read")
    cc_bin = tr.node(F, "cc_bin")
    header = tr.node(F, "header")
    objects = []
    procs = [make]
    for _ in range(compilers):
        cc = tr.node(P, "cc")
        tr.ev(make, cc, "fork")
        tr.ev(cc_bin, cc, "exec")
        tr.ev(cc, header, "read")
        for _ in range(int(rng.integers(sources[0], sources[1] + 1))):
            tr.ev(cc, tr.node(F, "src"), "read")
        obj = tr.node(F, "obj")
        tr.ev(cc, obj, "write")
        objects.append(obj)
        procs.append(cc)
    ld = tr.node(P, "ld")
    tr.ev(make, ld, "fork")
    for obj in objects:
        tr.ev(ld, obj, "read")
    tr.ev(ld, tr.node(F, "a_out"), "write")
    procs.append(ld)
    return procs


def _service(tr: _Trace, workers: int, clients: tuple[int, int], data: tuple[int, int]):
    rng = tr.rng
    binary = tr.node(F, "daemon_bin")
    daemon = tr.node(P, "daemon")
    tr.ev(binary, daemon, "exec")
    for _ in range(2):
        tr.ev(daemon, tr.node(F, "conf"), "read")
    log = tr.node(F, "log")
    procs = [daemon]
    for _ in range(workers):
        w = tr.node(P, "worker")
        tr.ev(daemon, w, "clone")
        procs.append(w)
        for _ in range(int(rng.integers(clients[0], clients[1] + 1))):
            c = tr.node(N, "client")
            tr.ev(w, c, "recv")
            tr.ev(w, c, "send", repeat=2)
        for _ in range(int(rng.integers(data[0], data[1] + 1))):
            tr.ev(w, tr.node(F, "data"), "read")
        tr.ev(w, log, "write")
    return procs


def _benign(tr: _Trace, template: str, minimal: bool = False):
    rng = tr.rng
    if template == "web":
        if minimal:
            return _web(tr, 1, (1, 1), (1, 1))
        return _web(tr, int(rng.integers(2, 5)), (1, 3), (1, 2))
    if template == "build":
        if minimal:
            return _build(tr, 1, (1, 1))
        return _build(tr, int(rng.integers(3, 7)), (1, 3))
    if template == "service":
        if minimal:
            return _service(tr, 1, (1, 1), (1, 1))
        return _service(tr, int(rng.integers(2, 5)), (1, 2), (1, 2))
    raise ValueError(f"unknown template {template!r}")


def _malicious_motif(tr: _Trace, host_procs: list[str]) -> set[str]:
    rng = tr.rng
    parent = host_procs[int(rng.integers(len(host_procs)))]
    payload = tr.node(F, "payload")
    tr.ev(parent, payload, "write")
    implant = tr.node(P, "implant")
    tr.ev(payload, implant, "exec")
    c2 = tr.node(N, "c2")
    tr.ev(implant, c2, "connect")
    bad = {payload, implant, c2}
    for _ in range(int(rng.integers(5, 9))):
        child = tr.node(P, "beacon")
        bad.add(child)
        tr.ev(implant, child, "fork")
        tr.ev(child, c2, "connect")
        tr.ev(child, c2, "send", repeat=int(rng.integers(2, 4)), spaced=True)
        tr.ev(child, tr.node(F, "secret"), "read")
    return bad


def template_events(template: str, seed: int = 0, minimal: bool = False, malicious: bool = False):
    """Events of one template instance plus the set of malicious node ids."""
    tr = _Trace(np.random.default_rng(seed))
    procs = _benign(tr, template, minimal)
    bad = _malicious_motif(tr, procs) if malicious else set()
    return tr.events, bad


def _to_graph(events, bad, window: int = DEFAULT_WINDOW_NS) -> ProvenanceGraph:
    gt = {n: (n in bad) for e in events for n in (e.src_id, e.dst_id)}
    return cleanup(reduce_cpr(build_graph(events, gt), window))


@dataclass
class SyntheticGraphs:
    """In-memory graph-level dataset."""

    graphs: list[ProvenanceGraph]
    labels: np.ndarray  # True = malicious
    templates: list[str]
    raw_events: list[list[EventRecord]]
    train_idx: np.ndarray
    test_idx: np.ndarray

    @property
    def train_graphs(self) -> list[ProvenanceGraph]:
        return [self.graphs[i] for i in self.train_idx]

    @property
    def test_graphs(self) -> list[ProvenanceGraph]:
        return [self.graphs[i] for i in self.test_idx]

    @property
    def test_labels(self) -> np.ndarray:
        return self.labels[self.test_idx]


def graph_level_dataset(
    n_benign: int = 100,
    n_malicious: int = 25,
    seed: int = 0,
    train_fraction: float = 0.6,
    window: int = DEFAULT_WINDOW_NS,
) -> SyntheticGraphs:
    """Benign and malicious graphs in shuffled order with a benign-only training split.

    Graphs keep per-node ground truth, so a graph is malicious exactly when
    it contains motif nodes.
    """
    if n_benign + n_malicious < 20:
        raise ValueError("need at least 20 graphs")
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    plan = [(TEMPLATES[i % 3], False) for i in range(n_benign)]
    plan += [(TEMPLATES[int(rng.integers(3))], True) for _ in range(n_malicious)]
    order = rng.permutation(len(plan))
    seeds = rng.integers(0, 2**62, size=len(plan))
    graphs, labels, templates, raws = [], [], [], []
    for pos, k in enumerate(order):
        template, bad_graph = plan[k]
        events, bad = template_events(template, int(seeds[pos]), malicious=bad_graph)
        graphs.append(_to_graph(events, bad, window))
        labels.append(bad_graph)
        templates.append(template)
        raws.append(events)
    labels = np.asarray(labels, dtype=bool)
    benign = np.flatnonzero(~labels)
    n_train = max(1, int(round(train_fraction * len(benign))))
    train = np.sort(rng.choice(benign, n_train, replace=False))
    test = np.setdiff1d(np.arange(len(graphs)), train)
    return SyntheticGraphs(graphs, labels, templates, raws, train, test)


def node_level_streams(
    n_train_instances: int = 30,
    n_test_benign: int = 10,
    n_test_malicious: int = 3,
    seed: int = 0,
):
    """Benign training stream, mixed test stream and node labels for the test stream."""
    rng = np.random.default_rng(seed)

    def stream(specs, prefix):
        t = 0
        events, bad = [], set()
        for i, (template, mal) in enumerate(specs):
            tr = _Trace(np.random.default_rng(int(rng.integers(0, 2**62))), f"{prefix}{i}:", t)
            procs = _benign(tr, template)
            if mal:
                bad |= _malicious_motif(tr, procs)
            events += tr.events
            t = tr.t
        return events, bad

    train_specs = [(TEMPLATES[int(rng.integers(3))], False) for _ in range(n_train_instances)]
    test_specs = [(TEMPLATES[int(rng.integers(3))], False) for _ in range(n_test_benign)]
    test_specs += [(TEMPLATES[int(rng.integers(3))], True) for _ in range(n_test_malicious)]
    test_specs = [test_specs[i] for i in rng.permutation(len(test_specs))]
    train_events, _ = stream(train_specs, "tr")
    test_events, bad = stream(test_specs, "te")
    labels = {n: (n in bad) for e in test_events for n in (e.src_id, e.dst_id)}
    return train_events, test_events, labels
