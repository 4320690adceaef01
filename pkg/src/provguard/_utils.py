import math

import numpy as np


def perturb_count(rate: float, n: int) -> int:
    """ceil(rate * n), robust to float noise such as 0.1 * 30 = 3.0000000000000004.

    Any positive rate on a non-empty set gives at least one.
    """
    if rate <= 0 or n <= 0:
        return 0
    return max(1, math.ceil(rate * n - 1e-9))


def derive_seed(*entropy: int) -> int:
    """Stable 63-bit seed derived from a tuple of integers."""
    ss = np.random.SeedSequence([int(x) & 0xFFFFFFFFFFFFFFFF for x in entropy])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
