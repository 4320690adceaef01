import numpy as np
import pytest

from helpers import F, N, P, ev
from provguard.graph import build_graph


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_graph():
    return build_graph(
        [
            ev("bin", F, "sh", P, "exec", 0),
            ev("sh", P, "conf", F, "read", 10),
            ev("sh", P, "host", N, "connect", 20),
            ev("sh", P, "child", P, "fork", 30),
            ev("child", P, "out", F, "write", 40),
            ev("child", P, "host", N, "send", 50),
        ]
    )
