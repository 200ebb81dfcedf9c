import itertools
import math

import numpy as np
import pytest

from bhlr.fock import enumerate_basis
from bhlr.lattice import make_lattice


def brute_states(L, N, cap):
    """All occupation vectors of length L summing to N with entries <= cap, lexicographic."""
    return [s for s in itertools.product(range(cap + 1), repeat=L) if sum(s) == N]


def dense_hamiltonian(lat, states, sites, J=1.0, U=0.0, mu=0.0, cap=None):
    """Hubbard Hamiltonian built entry by entry from the definition (test oracle)."""
    idx = {s: i for i, s in enumerate(states)}
    cap = cap if cap is not None else max(max(s) for s in states)
    D = len(states)
    H = np.zeros((D, D))
    sites = list(sites)
    for s in states:
        i = idx[s]
        H[i, i] += sum(U * s[x] * (s[x] - 1) - mu * s[x] for x in sites)
        for x in sites:
            for y in sites:
                if x != y and np.isclose(lat.distance(x, y), 1.0) and s[y] > 0 and s[x] < cap:
                    t = list(s)
                    t[x] += 1
                    t[y] -= 1
                    H[idx[tuple(t)], i] += J * math.sqrt((s[x] + 1) * s[y])
    return H


@pytest.fixture
def chain5():
    lat = make_lattice(1, [5])
    return lat, enumerate_basis(lat, 2, 2)


@pytest.fixture
def square3():
    lat = make_lattice(2, [3, 3])
    return lat, enumerate_basis(lat, 2, 2)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
