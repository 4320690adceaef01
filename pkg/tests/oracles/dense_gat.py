"""Loop-based forward pass of the two-layer attention encoder.

Works on one graph straight from its edge list: messages flow from source
to destination, every node also receives a message from itself, and each
message is the sender's state with the edge label one-hot appended (zeros
on the self message).
"""

import math


def _leaky(x, slope=0.2):
    return x if x > 0 else slope * x


def _matvec_rows(v, W):
    # row vector times matrix
    cols = len(W[0])
    return [sum(v[i] * W[i][j] for i in range(len(v))) for j in range(cols)]


def layer(H, node_ids, edges, W, b, a, edge_kinds, use_edges):
    n_out = len(b)
    pos = {n: i for i, n in enumerate(node_ids)}
    inbox = {n: [] for n in node_ids}
    for src, dst, kind in edges:
        inbox[dst].append((src, kind))
    for n in node_ids:
        inbox[n].append((n, None))
    a_dst, a_src = a[:n_out], a[n_out:]
    out = []
    for v in node_ids:
        own = _matvec_rows(H[pos[v]] + ([0.0] * len(edge_kinds) if use_edges else []), W)
        msgs = []
        for u, kind in inbox[v]:
            onehot = [1.0 if (kind is not None and k == kind) else 0.0 for k in edge_kinds]
            x = H[pos[u]] + (onehot if use_edges else [])
            msgs.append(_matvec_rows(x, W))
        scores = [
            _leaky(sum(a_dst[j] * own[j] for j in range(n_out)) + sum(a_src[j] * m[j] for j in range(n_out)))
            for m in msgs
        ]
        top = max(scores)
        ws = [math.exp(s - top) for s in scores]
        total = sum(ws)
        alpha = [w / total for w in ws]
        agg = [sum(alpha[i] * msgs[i][j] for i in range(len(msgs))) for j in range(n_out)]
        out.append([max(0.0, agg[j] + b[j]) for j in range(n_out)])
    return out


def forward(X, node_ids, edges, params, edge_kinds, use_edges=True):
    """Node embeddings and their mean for one graph; ``params`` as nested lists."""
    H1 = layer(X, node_ids, edges, params["W0"], params["b0"], params["a0"], edge_kinds, use_edges)
    Z = layer(H1, node_ids, edges, params["W1"], params["b1"], params["a1"], edge_kinds, use_edges)
    z = [sum(row[j] for row in Z) / len(Z) for j in range(len(Z[0]))]
    return Z, z
