from provguard.graph import DEFAULT_EDGE_KINDS, EventRecord, NodeKind, build_graph

P, F, N = NodeKind.PROCESS, NodeKind.FILE, NodeKind.NETWORK

LEGAL = {
    (P, F): ("read", "write"),
    (P, N): ("connect", "send", "recv"),
    (F, P): ("exec", "load"),
    (P, P): ("fork", "clone"),
}


def ev(src, sk, dst, dk, label, t, sl=None, dl=None):
    return EventRecord(src, sk, dst, dk, label, t, sl, dl)


def random_graph(rng, n_nodes=8, n_edges=14, legal_only=False, labels=False):
    """Random connected-ish provenance graph with at least one Process node."""
    kinds = [P] + [(P, F, N)[rng.integers(3)] for _ in range(n_nodes - 1)]
    ids = [f"n{i}" for i in range(n_nodes)]
    subtypes = {P: ("Process", "Process/worker"), F: ("File", "File/data", "File/binary"), N: ("Network",)}
    feats = [subtypes[k][rng.integers(len(subtypes[k]))] if labels else None for k in kinds]
    events = []
    t = 0
    tries = 0
    while len(events) < n_edges and tries < 50 * n_edges:
        tries += 1
        a, b = rng.choice(n_nodes, 2, replace=False)
        pair = (kinds[a], kinds[b])
        if legal_only:
            if pair not in LEGAL:
                continue
            options = LEGAL[pair]
        else:
            options = DEFAULT_EDGE_KINDS
        t += int(rng.integers(1, 5)) * 10**9
        events.append(ev(ids[a], kinds[a], ids[b], kinds[b], options[rng.integers(len(options))], t, feats[a], feats[b]))
    return build_graph(events)


def chain_graph(n=5):
    """p0 -> p1 -> ... fork chain."""
    return build_graph([ev(f"p{i}", P, f"p{i+1}", P, "fork", 10**9 * i) for i in range(n - 1)])
