import math


def cosine(u, v):
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    return dot / (nu * nv)


def loss(vectors, pairs, tau):
    """Mean over anchors of -log(exp(sim(i, pos)/tau) / sum_{k != i} exp(sim(i, k)/tau))."""
    partner = {}
    for i, j in pairs:
        partner[i] = j
        partner[j] = i
    terms = []
    for i in range(len(vectors)):
        num = math.exp(cosine(vectors[i], vectors[partner[i]]) / tau)
        den = sum(math.exp(cosine(vectors[i], vectors[k]) / tau) for k in range(len(vectors)) if k != i)
        terms.append(-math.log(num / den))
    return sum(terms) / len(terms)


# Worked example: two pairs of identical unit vectors on orthogonal axes, tau = 1.
# Each anchor sees its partner at cosine 1 and the other two at cosine 0.
WORKED_VECTORS = [(1.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.0, 1.0)]
WORKED_PAIRS = [(0, 1), (2, 3)]
WORKED_VALUE = loss(WORKED_VECTORS, WORKED_PAIRS, 1.0)
WORKED_CLOSED_FORM = -math.log(math.e / (math.e + 2.0))
