import numpy as np
import pytest

import matchboot as mb


@pytest.fixture
def toy():
    """Four units whose M=1 matches and estimates are known by hand."""
    x = np.array([0.1, 0.2, 0.4, 0.9])
    d = np.array([1, 0, 1, 0])
    y = np.array([1.0, 0.0, 2.0, 1.0])
    return mb.as_dataset(x, d, y)


def make_instance(rng, n_lo=10, n_hi=50, m_hi=3, M_hi=3):
    """Random dataset plus match count, both arms large enough to match."""
    n = int(rng.integers(n_lo, n_hi + 1))
    m = int(rng.integers(1, m_hi + 1))
    M = int(rng.integers(1, M_hi + 1))
    while True:
        d = (rng.random(n) < 0.5).astype(np.int64)
        if min(d.sum(), n - d.sum()) >= max(M, 2):
            break
    ds = mb.as_dataset(rng.random((n, m)), d, rng.standard_normal(n))
    return ds, M
