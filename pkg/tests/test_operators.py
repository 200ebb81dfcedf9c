import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bhlr.errors import InvalidArgument
from bhlr.fock import enumerate_basis
from bhlr.lattice import ball, make_lattice
from bhlr.operators import (
    DiagonalOperator,
    HubbardParams,
    build_hamiltonian,
    build_hopping,
    build_potential,
    commutator,
    commutator_expansion_residual,
    hop_operator,
    max_entry,
    number_operator,
    second_quantize,
)
from conftest import brute_states, dense_hamiltonian


def test_hopping_two_sites_one_boson():
    lat = make_lattice(1, [2])
    b = enumerate_basis(lat, 1, 1)
    np.testing.assert_array_equal(build_hopping(b, lat.all_sites(), 1.0).toarray(), [[0, 1], [1, 0]])


def test_hopping_trivial_cases(chain5):
    lat, b = chain5
    assert build_hopping(b, lat.site_set([2]), 1.0).matrix.nnz == 0
    assert build_hopping(b, lat.all_sites(), 0.0).matrix.nnz == 0


@pytest.mark.parametrize("d, ext, N, cap", [(1, [4], 2, 2), (1, [5], 3, 2), (2, [2, 3], 2, 2), (1, [4], 3, 3)])
def test_hamiltonian_matches_entrywise_oracle(d, ext, N, cap):
    lat = make_lattice(d, ext)
    b = enumerate_basis(lat, N, cap)
    p = HubbardParams(J=0.7, U=1.3, mu=0.4)
    want = dense_hamiltonian(lat, brute_states(lat.n_sites, N, cap), range(lat.n_sites), 0.7, 1.3, 0.4, cap)
    np.testing.assert_allclose(build_hamiltonian(b, lat.all_sites(), p).toarray(), want, atol=1e-14)


def test_restricted_hamiltonian_matches_oracle():
    lat = make_lattice(1, [6])
    b = enumerate_basis(lat, 2, 2)
    X = lat.site_set([1, 2, 3])
    want = dense_hamiltonian(lat, brute_states(6, 2, 2), [1, 2, 3], 1.0, 0.5, 0.0, 2)
    np.testing.assert_allclose(build_hamiltonian(b, X, HubbardParams(U=0.5)).toarray(), want, atol=1e-14)


def test_potential_examples():
    lat = make_lattice(1, [2])
    b = enumerate_basis(lat, 3, 3)
    i = b.rank((2, 1))
    pair = build_potential(b, lat.all_sites(), HubbardParams(U=1, form="pairwise", p=2))
    assert pair.values[i] == pytest.approx(4.0)
    onsite = build_potential(b, lat.all_sites(), HubbardParams(U=1))
    assert onsite.values[i] == pytest.approx(2.0)
    vac = enumerate_basis(lat, 0, 2)
    assert build_potential(vac, lat.all_sites(), HubbardParams(U=1, mu=1)).values[0] == 0


def test_pairwise_needs_p_at_least_one():
    with pytest.raises(InvalidArgument):
        HubbardParams(form="pairwise", p=0.5)
    with pytest.raises(InvalidArgument):
        HubbardParams(form="cubic")


def test_hamiltonian_reductions(chain5):
    lat, b = chain5
    lam = lat.all_sites()
    T = build_hopping(b, lam, 1.0)
    H = build_hamiltonian(b, lam, HubbardParams(J=1.0))
    assert max_entry(H - T) == 0
    H0 = build_hamiltonian(b, lam, HubbardParams(J=0.0, U=2.0))
    d = H0.toarray()
    assert np.count_nonzero(d - np.diag(np.diag(d))) == 0


def test_hermitian_and_number_conserving(chain5, square3):
    for lat, b in (chain5, square3):
        for p in (HubbardParams(U=1, mu=0.2), HubbardParams(U=1, form="pairwise", p=3)):
            H = build_hamiltonian(b, lat.all_sites(), p)
            assert H.hermiticity_defect() == 0
            assert max_entry(commutator(H, number_operator(b, lat.all_sites()))) == 0


def test_local_number_is_not_conserved(chain5):
    lat, b = chain5
    H = build_hamiltonian(b, lat.all_sites(), HubbardParams())
    assert max_entry(commutator(H, number_operator(b, lat.site_set([0, 1])))) > 0.5


def test_second_quantize_examples():
    lat = make_lattice(1, [3])
    b = enumerate_basis(lat, 3, 3)
    assert np.all(second_quantize(b, np.ones(3)).values == 3)
    assert second_quantize(b, [0.5, 2.0, -1.5]).values[b.rank((1, 0, 2))] == pytest.approx(0.5 - 3.0)
    assert second_quantize(b, {0: 1.0}).values[b.rank((2, 1, 0))] == 2
    assert second_quantize(b, lambda i: i).values[b.rank((0, 1, 2))] == 5
    B = ball(lat, 1, 0)
    np.testing.assert_array_equal(number_operator(b, B).values, b.states[:, 1])


def test_second_quantize_shape_error(chain5):
    _, b = chain5
    with pytest.raises(InvalidArgument):
        second_quantize(b, [1.0, 2.0])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=5, max_size=5), st.lists(st.floats(-5, 5), min_size=5, max_size=5),
       st.floats(-3, 3), st.floats(-3, 3))
def test_second_quantize_linear(f, g, a, c):
    lat = make_lattice(1, [5])
    b = enumerate_basis(lat, 2, 2)
    lhs = second_quantize(b, a * np.array(f) + c * np.array(g)).values
    rhs = a * second_quantize(b, f).values + c * second_quantize(b, g).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_commutator_basics(chain5):
    lat, b = chain5
    H = build_hamiltonian(b, lat.all_sites(), HubbardParams(U=1))
    assert max_entry(commutator(H, H)) == 0
    V = build_potential(b, lat.all_sites(), HubbardParams(U=1, mu=0.3))
    g = second_quantize(b, [1, -2, 0.5, 3, 0])
    assert max_entry(commutator(g, V)) == 0


def test_commutator_basis_mismatch(chain5):
    lat, b = chain5
    other = enumerate_basis(lat, 1, 2)
    with pytest.raises(InvalidArgument):
        commutator(number_operator(b, lat.all_sites()), number_operator(other, lat.all_sites()))


def test_commutator_expansion_examples():
    p = HubbardParams(J=1.0, U=0.8, mu=0.1)
    lat = make_lattice(1, [4])
    b = enumerate_basis(lat, 2, 2)
    assert commutator_expansion_residual(b, np.full(4, 2.0), p) == 0
    assert commutator_expansion_residual(b, [0, 1, 0, 0], p) <= 1e-12
    sq = make_lattice(2, [3, 3])
    bs = enumerate_basis(sq, 2, 2)
    ramp = sq.coords[:, 0] + 0.5 * sq.coords[:, 1]
    assert commutator_expansion_residual(bs, ramp, p) <= 1e-12


def test_commutator_expansion_dense_oracle():
    # independent route: dense matrices from the entrywise oracle
    lat = make_lattice(1, [4])
    states = brute_states(4, 2, 2)
    H = dense_hamiltonian(lat, states, range(4), 1.0, 0.8, 0.0, 2)
    g = np.array([0.3, -1.0, 2.0, 0.5])
    G = np.diag([g @ np.array(s) for s in states])
    lhs = H @ G - G @ H
    # each hop y -> x carries the weight -(g(x) - g(y))
    idx = {s: i for i, s in enumerate(states)}
    rhs = np.zeros_like(lhs)
    for s in states:
        for x in range(4):
            for y in range(4):
                if abs(x - y) == 1 and s[y] > 0 and s[x] < 2:
                    t = list(s)
                    t[x] += 1
                    t[y] -= 1
                    rhs[idx[tuple(t)], idx[s]] += -(g[x] - g[y]) * np.sqrt((s[x] + 1) * s[y])
    assert np.abs(lhs - rhs).max() <= 1e-12
    assert np.abs(rhs).max() > 0


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=9, max_size=9), st.floats(-2, 2), st.floats(0, 3))
def test_commutator_expansion_random(g, J, U):
    sq = make_lattice(2, [3, 3])
    b = enumerate_basis(sq, 2, 2)
    assert commutator_expansion_residual(b, g, HubbardParams(J=J, U=U)) <= 1e-12 * max(1.0, max(map(abs, g)))


def test_hop_operator_adjoint(chain5):
    _, b = chain5
    A = hop_operator(b, 1, 2, 0.5)
    B = hop_operator(b, 2, 1, 0.5)
    assert max_entry(A.H - B) == 0


def test_diagonal_operator_rejects_nonfinite(chain5):
    _, b = chain5
    with pytest.raises(InvalidArgument):
        DiagonalOperator(b, np.full(b.dim, np.nan))
