import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bhlr.errors import InvalidArgument, NotInBasis
from bhlr.fock import apply_hop, capped_compositions, enumerate_basis
from bhlr.lattice import make_lattice
from conftest import brute_states


def test_three_sites_two_bosons():
    b = enumerate_basis(make_lattice(1, [3]), 2, 2)
    assert b.dim == 6


def test_vacuum_sector():
    b = enumerate_basis(make_lattice(1, [4]), 0, 3)
    assert b.dim == 1 and b.states.sum() == 0


@pytest.mark.parametrize("L, N, cap", [(2, 3, 1), (1, 2, 1)])
def test_infeasible_sector(L, N, cap):
    with pytest.raises(InvalidArgument):
        enumerate_basis(make_lattice(1, [L]), N, cap)


def test_bad_cap_and_count():
    lat = make_lattice(1, [3])
    with pytest.raises(InvalidArgument):
        enumerate_basis(lat, 1, 0)
    with pytest.raises(InvalidArgument):
        enumerate_basis(lat, -1, 2)


@pytest.mark.parametrize("L", range(1, 7))
@pytest.mark.parametrize("N", range(0, 7))
@pytest.mark.parametrize("cap", range(1, 5))
def test_enumeration_matches_brute_force(L, N, cap):
    want = brute_states(L, N, cap)
    if not want:
        with pytest.raises(InvalidArgument):
            enumerate_basis(make_lattice(1, [L]), N, cap)
        return
    b = enumerate_basis(make_lattice(1, [L]), N, cap)
    assert [tuple(s) for s in b.states] == want
    assert capped_compositions(L, N, cap) == len(want)


def test_rank_round_trip():
    b = enumerate_basis(make_lattice(1, [4]), 3, 3)
    assert b.rank(b.states[0]) == 0
    assert all(b.rank(s) == i for i, s in enumerate(b.states))
    np.testing.assert_array_equal(b.rank_many(b.states), np.arange(b.dim))


def test_rank_rejects_foreign_vectors():
    b = enumerate_basis(make_lattice(1, [3]), 2, 2)
    for occ in [(1, 1, 1), (3, 0, 0), (1, 1), (-1, 3, 0)]:
        with pytest.raises(NotInBasis):
            b.rank(occ)
        assert not b.contains(occ)


def test_rank_two_dimensional():
    b = enumerate_basis(make_lattice(2, [2, 3]), 3, 2)
    assert all(b.rank(s) == i for i, s in enumerate(b.states))


def test_apply_hop_matrix_element():
    b = enumerate_basis(make_lattice(1, [2]), 3, 3)
    assert apply_hop(b, (1, 2), 0, 1) == ((2, 1), pytest.approx(2.0))


def test_apply_hop_vacuum_and_cap():
    lat = make_lattice(1, [2])
    assert apply_hop(enumerate_basis(lat, 0, 2), (0, 0), 0, 1) is None
    b = enumerate_basis(lat, 3, 2)
    assert apply_hop(b, (2, 1), 0, 1) is None


def test_apply_hop_same_site():
    b = enumerate_basis(make_lattice(1, [2]), 1, 1)
    with pytest.raises(InvalidArgument):
        apply_hop(b, (1, 0), 0, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 5), st.integers(1, 3), st.data())
def test_hop_stays_in_sector(L, N, cap, data):
    if N > L * cap:
        return
    b = enumerate_basis(make_lattice(1, [L]), N, cap)
    occ = tuple(b.states[data.draw(st.integers(0, b.dim - 1))])
    x, y = data.draw(st.tuples(st.integers(0, L - 1), st.integers(0, L - 1)).filter(lambda p: p[0] != p[1]))
    out = apply_hop(b, occ, x, y)
    if occ[y] == 0 or occ[x] == cap:
        assert out is None
    else:
        new, amp = out
        assert b.contains(new)
        assert amp == pytest.approx(math.sqrt((occ[x] + 1) * occ[y]))
