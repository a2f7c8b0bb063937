import os

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import numpy as np
import pytest
from hypothesis import settings

from regae import autodiff as ad
from regae.cells import CellConfig, ModelParams
from regae.graph import Graph

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")


def numeric_grad(fn, arrays, h=1e-3):
    """Central differences of scalar ``fn()`` w.r.t. each array in ``arrays`` (mutated in place)."""
    grads = []
    for arr in arrays:
        g = np.zeros(arr.shape, dtype=np.float64)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = arr[idx]
            arr[idx] = old + h
            up = fn()
            arr[idx] = old - h
            down = fn()
            arr[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def rel_error(a, b, floor=1e-8):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), floor))


def tiny_model(m=4, l=1, hidden=(6,), seed=0, vae=False):
    return ModelParams(CellConfig(m, l, hidden, hidden, vae=vae), seed=seed)


@pytest.fixture
def float64():
    with ad.precision(np.float64):
        yield


def triangle():
    return Graph(3, frozenset({(0, 1), (1, 2), (0, 2)}))


def path(n):
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)))


def star(leaves):
    return Graph(leaves + 1, frozenset((0, k) for k in range(1, leaves + 1)))


def cycle(n):
    return Graph(n, frozenset((i, (i + 1) % n) for i in range(n)))


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
