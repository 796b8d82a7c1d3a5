import sys

import numpy as np
import pytest

from twoweight import Instance, Lattice


def make_instance(generations, parent, mu, nu, alpha, p=2.0, q=1.0):
    lat = Lattice(generations, parent)
    alpha_arr = np.zeros(lat.n_cells)
    for c, a in alpha.items():
        alpha_arr[lat.position[c]] = a
    order = {c: i for i, c in enumerate(lat.leaves)}
    mu_arr = np.zeros(lat.n_leaves)
    nu_arr = np.zeros(lat.n_leaves)
    for c, m in mu.items():
        mu_arr[order[c]] = m
    for c, m in nu.items():
        nu_arr[order[c]] = m
    return Instance(lat, mu_arr, nu_arr, alpha_arr, p, q)


def single_cell(a=1.5, m=0.7, w=2.0, p=2.0, q=1.0):
    return make_instance([[0]], {}, {0: m}, {0: w}, {0: a}, p, q)


def binary(depth, mu=None, nu=None, alpha=None, p=2.0, q=1.0):
    """Complete binary lattice; cell ids in heap order (root 1, children 2c, 2c+1)."""
    generations = [list(range(2 ** n, 2 ** (n + 1))) for n in range(depth + 1)]
    parent = {c: c // 2 for gen in generations[1:] for c in gen}
    leaves = generations[-1]
    mu = mu or {c: 1.0 / len(leaves) for c in leaves}
    nu = nu or {c: 1.0 / len(leaves) for c in leaves}
    alpha = alpha if alpha is not None else {c: 1.0 for gen in generations for c in gen}
    return make_instance(generations, parent, mu, nu, alpha, p, q)


@pytest.fixture
def binary2():
    return binary(2)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
