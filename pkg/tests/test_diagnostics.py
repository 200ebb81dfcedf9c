import numpy as np
import pytest
import scipy.linalg as sl

from bhlr.diagnostics import (
    SweepRecord,
    commutator_lightcone,
    default_observable,
    lightcone_fit,
    lr_sweep,
    particle_sweep,
    trace_norm,
    truncation_ladder,
)
from bhlr.errors import InsufficientData, InvalidArgument
from bhlr.fock import enumerate_basis
from bhlr.lattice import make_lattice
from bhlr.operators import HubbardParams, hop_operator, site_number
from bhlr.states import product_fock_state, spread_state

P = HubbardParams(J=1.0, U=1.0)


def rec(R, t, value, r=0.0, flag="ok"):
    return SweepRecord("lr", (0,), r, R, t, value, flag=flag)


def test_trace_norm_examples():
    assert trace_norm(np.zeros((3, 3))) == 0
    u, v = np.array([1.0, 2.0, 2.0]), np.array([0.0, 3.0, 4.0])
    assert trace_norm(np.outer(u, v)) == pytest.approx(15.0)
    assert trace_norm(np.diag([1.0, -2.0, 3.0])) == pytest.approx(6.0)


def test_trace_norm_duality():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    W, s, Vh = np.linalg.svd(M)
    B = Vh.conj().T @ W.conj().T  # unitary attaining the supremum
    assert abs(np.trace(M @ B)) == pytest.approx(trace_norm(M))
    for _ in range(20):
        Q, _ = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))
        assert abs(np.trace(M @ Q)) <= trace_norm(M) + 1e-12


def test_record_rejects_negative_values():
    with pytest.raises(InvalidArgument):
        rec(1, 0, -1e-6)
    with pytest.raises(InvalidArgument):
        rec(1, 0, float("nan"))
    assert rec(1, 0, -1e-12).value == -1e-12


def test_fit_power_law():
    records = [rec(R, 0.5, R**-3.0) for R in (2, 3, 5, 8, 13)]
    fit = lightcone_fit(records, "decay-in-gap")
    assert fit.slope == pytest.approx(-3.0, abs=1e-6)
    assert fit.r2 == pytest.approx(1.0)


def test_fit_drops_zeros_and_needs_four_points():
    records = [rec(R, 0.5, R**-2.0) for R in (2, 3, 4, 5)] + [rec(9, 0.5, 0.0)]
    fit = lightcone_fit(records, "decay-in-gap")
    assert (fit.n_used, fit.n_dropped) == (4, 1)
    with pytest.raises(InsufficientData):
        lightcone_fit(records[:3] + [rec(9, 0.5, 0.0)], "decay-in-gap")
    with pytest.raises(InvalidArgument):
        lightcone_fit(records, "quadratic")


def test_fit_exponential():
    records = [rec(R, 0.5, 3 * np.exp(-1.7 * R)) for R in range(1, 7)]
    assert lightcone_fit(records, "exp-decay").slope == pytest.approx(-1.7, abs=1e-9)


def test_front_speed_linear():
    speed = 2.0
    # unit-height profile with an exponential tail moving at constant speed
    records = [rec(R, t, min(1.0, np.exp(-(R - speed * t)))) for t in (0, 1, 2, 3, 4) for R in range(0, 25)]
    fit = lightcone_fit(records, "front-speed", threshold=1e-3)
    assert fit.slope == pytest.approx(speed, abs=1e-9)
    assert fit.n_used == 5


@pytest.fixture(scope="module")
def chain10():
    lat = make_lattice(1, [10])
    b = enumerate_basis(lat, 2, 2)
    return lat, b, spread_state(b, "uniform")


def test_lr_sweep_trivial_limits(chain10):
    lat, b, st = chain10
    X = lat.site_set([lat.origin_index])
    A = default_observable(b, X, 1)
    recs = lr_sweep(st, A, X, P, [(1, 0.0), (20, 0.7)])
    assert recs[0].value <= 1e-12
    assert recs[1].value <= 1e-10


def test_lr_sweep_against_expm(chain10):
    lat, b, st = chain10
    X = lat.site_set([lat.origin_index])
    A = default_observable(b, X, 1)
    from bhlr.operators import build_hamiltonian
    from bhlr.lattice import enlarge

    t = 0.5
    Ad = A.toarray()
    U = sl.expm(-1j * t * build_hamiltonian(b, lat.all_sites(), P).toarray())
    full = U.conj().T @ Ad @ U
    for R, got in zip((1, 3), lr_sweep(st, A, X, P, [(1, t), (3, t)])):
        UR = sl.expm(-1j * t * build_hamiltonian(b, enlarge(X, R), P).toarray())
        # rho is pure, so ||D rho||_1 = ||D psi||
        want = np.linalg.norm((full - UR.conj().T @ Ad @ UR) @ st.data)
        assert got.value == pytest.approx(want, rel=1e-9, abs=1e-13)


def test_lr_sweep_rejects_non_conserving(chain10):
    lat, b, st = chain10
    X = lat.site_set([4, 5])
    leaky = hop_operator(b, 5, 6) + hop_operator(b, 6, 5)
    with pytest.raises(InvalidArgument):
        lr_sweep(st, leaky, X, P, [(1, 0.5)])


def test_lr_monotone_in_R(chain10):
    lat, b, st = chain10
    X = lat.site_set([lat.origin_index])
    vals = [r.value for r in lr_sweep(st, default_observable(b, X, 1), X, P, [(R, 0.5) for R in (1, 2, 3, 4)])]
    assert all(a >= b - 1e-9 for a, b in zip(vals, vals[1:]))
    assert vals[-1] < vals[1]


def test_particle_sweep_values():
    lat = make_lattice(1, [9])
    b = enumerate_basis(lat, 1, 1)
    occ = [0] * 9
    occ[4] = 1
    st = product_fock_state(b, occ)
    recs = particle_sweep(st, 4, 1.0, 3.0, [(2, 5, 0.0), (2, 5, 0.3), (0, 3, 2.0)], P, lam=1.0)
    assert recs[0].value == 1.0
    assert recs[0].extras["initial_R_moment"] == 1.0
    # v|t| < r: the particle has not left the ball
    assert recs[1].value >= 0.9 and recs[1].flag == "ok"
    assert recs[2].flag == "outside_regime"
    assert recs[1].s == pytest.approx(1.0)


def test_particle_sweep_preconditions():
    lat = make_lattice(1, [5])
    b = enumerate_basis(lat, 1, 1)
    st = product_fock_state(b, (0, 0, 1, 0, 0))
    with pytest.raises(InvalidArgument):
        particle_sweep(st, 2, 1.0, 2.0, [(0, 1, 0.0)], P)
    crowded = product_fock_state(enumerate_basis(lat, 4, 4), (0, 0, 4, 0, 0))
    with pytest.warns(UserWarning, match="density"):
        particle_sweep(crowded, 2, 1.0, 3.0, [(0, 2, 0.1)], P, lam=1.0)


def test_particle_sweep_conserves_total():
    lat = make_lattice(1, [7])
    b = enumerate_basis(lat, 2, 2)
    st = spread_state(b, [0, 1, 2, 1, 0, 0, 0])
    recs = particle_sweep(st, 3, 1.0, 3.0, [(10, 12, t) for t in (0.0, 0.5, 1.5)], P)
    assert [r.value for r in recs] == pytest.approx([2.0, 2.0, 2.0], abs=1e-12)


def test_particle_sweep_threads_match_serial():
    lat = make_lattice(1, [7])
    b = enumerate_basis(lat, 2, 2)
    st = spread_state(b, "uniform")
    grid = [(r, r + 2, t) for r in (0, 1) for t in (0.0, 0.2, 0.4, 0.8)]
    a = particle_sweep(st, 3, 2.0, 3.0, grid, P)
    c = particle_sweep(st, 3, 2.0, 3.0, grid, P, threads=4)
    assert [x.value for x in a] == [x.value for x in c]


def test_commutator_lightcone():
    lat = make_lattice(1, [8])
    b = enumerate_basis(lat, 2, 2)
    A, B = site_number(b, 1), site_number(b, 5)
    XA, XB = lat.site_set([1]), lat.site_set([5])
    recs = commutator_lightcone(b, P, A, XA, B, XB, [0.0, 0.5, 2.0], nu=1)
    assert [r.flag for r in recs] == ["full", "truncated"] * 3
    assert recs[0].value <= 1e-12 and recs[1].value <= 1e-12
    for r in recs:
        assert r.value <= r.extras["norm_bound"] + 1e-12
        assert r.R == 4
    with pytest.raises(InvalidArgument):
        commutator_lightcone(b, P, A, XA, A, XA, [0.5])


def test_ladder_triangle_and_trivial_limit():
    lat = make_lattice(1, [5])
    b = enumerate_basis(lat, 2, 2)
    st = spread_state(b, "uniform")
    X = lat.site_set([2])
    A = default_observable(b, X, 1)
    rep = truncation_ladder(st, A, X, 1, 1, 0.6, P)
    assert rep.total >= rep.direct - 1e-12
    full = truncation_ladder(st, A, X, 10, 2, 0.6, P)
    assert max(full.terms) <= 1e-10


def test_ladder_hopping_free_terms_vanish():
    lat = make_lattice(1, [5])
    b = enumerate_basis(lat, 3, 3)
    st = spread_state(b, "uniform")
    X = lat.site_set([2])
    rep = truncation_ladder(st, default_observable(b, X, 1), X, 1, 1, 0.8, HubbardParams(J=0.0, U=1.0))
    assert rep.terms[1] <= 1e-12 and rep.terms[3] <= 1e-12


def test_lr_sweep_flags_small_radii(chain10):
    lat, b, st = chain10
    X = lat.site_set([lat.origin_index])
    recs = lr_sweep(st, default_observable(b, X, 1), X, P, [(R, 0.5) for R in (1, 2, 3)])
    assert [r.flag for r in recs] == ["outside_regime", "outside_regime", "ok"]
