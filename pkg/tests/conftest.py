"""Shared oracles and fixtures.

The oracles here avoid the package's own contraction code so that a bug in
``tt_to_dense`` or ``tt_dot`` cannot hide itself.
"""

import itertools

import numpy as np
import pytest

from ttquad.tensor_train import TTTensor


def dense_oracle(cores):
    """Full tensor from TT cores by explicit per-entry matrix products."""
    shape = tuple(c.shape[1] for c in cores)
    out = np.empty(shape)
    for idx in itertools.product(*(range(n) for n in shape)):
        v = np.ones((1, 1))
        for c, i in zip(cores, idx):
            v = v @ c[:, i, :]
        out[idx] = v[0, 0]
    return out


def random_tt(rng, shape, ranks):
    cores = [rng.standard_normal((ranks[k], shape[k], ranks[k + 1])) for k in range(len(shape))]
    return TTTensor(cores)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
