"""Sweeps that measure particle propagation and Lieb-Robinson-type locality.

Every sweep returns :class:`SweepRecord` rows in grid order.  Grid points are
independent, so they may be evaluated on a thread pool; the eigendecompositions they
share are computed once up front and only read afterwards.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import InsufficientData, InvalidArgument
from .fock import FockBasis
from .lattice import SiteSet, ball, enlarge
from .operators import (
    DiagonalOperator,
    HubbardParams,
    build_hamiltonian,
    number_operator,
)
from .dynamics import (
    HEISENBERG_THRESHOLD,
    DenseEvolution,
    Propagator,
    to_dense,
    truncate,
    truncated_hamiltonian,
)
from .states import QuantumState, check_controlled_density

NONNEG_TOL = 1e-10
LR_MIN_RADIUS = 2.0


@dataclass
class SweepRecord:
    experiment: str
    x: tuple[int, ...]
    r: float
    R: float
    t: float
    value: float
    s: Optional[float] = None
    v: Optional[float] = None
    eta: Optional[float] = None
    nu: Optional[int] = None
    lam: Optional[float] = None
    flag: str = "ok"
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value < -NONNEG_TOL:
            raise InvalidArgument(f"measured value {self.value} is not a finite nonnegative number")

    @property
    def gap(self) -> float:
        return self.R - self.r

    @property
    def center_distance(self) -> float:
        return float(np.linalg.norm(self.x))


def trace_norm(M) -> float:
    """Sum of singular values."""
    M = to_dense(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False).sum())


def operator_norm(M) -> float:
    M = to_dense(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[0])


def _map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def default_observable(basis: FockBasis, X: SiteSet, nu_A: Optional[int] = 1) -> DiagonalOperator:
    """``Pi_{X,nu_A} N_X Pi_{X,nu_A}``: bounded, number-conserving, supported on ``X``."""
    N_X = number_operator(basis, X)
    return N_X if nu_A is None else truncate(N_X, X, nu_A)


def _check_conserving(A, X: SiteSet, basis: FockBasis):
    N_X = number_operator(basis, X)
    Ad = to_dense(A)
    defect = np.abs(Ad * (N_X.values[None, :] - N_X.values[:, None])).max(initial=0.0)
    if defect > 1e-12:
        raise InvalidArgument(f"observable does not commute with N_X (defect {defect:.3e}); it is not number-conserving on X")


def _check_dense(basis: FockBasis):
    if basis.dim > HEISENBERG_THRESHOLD:
        raise InvalidArgument(f"basis dimension {basis.dim} exceeds the dense threshold {HEISENBERG_THRESHOLD}")


def particle_sweep(
    state: QuantumState,
    x: int,
    eta: float,
    v: float,
    grid: Iterable[tuple[float, float, float]],
    params: HubbardParams,
    lam: Optional[float] = None,
    delta0: float = 0.5,
    method: str = "auto",
    tol: float = 1e-10,
    krylov_dim: int = 30,
    threads: int = 1,
) -> list[SweepRecord]:
    """Measure ``Tr[N_{B_r(x)}^eta rho(t)]`` under the full dynamics.

    Points outside the propagation regime (``R - r > max(1, delta0 r)`` and
    ``v |t| <= R - r``) are still measured but flagged ``outside_regime``.  Each record
    carries the initial moment at radius ``R`` in ``extras["initial_R_moment"]``.
    """
    basis = state.basis
    lat = basis.lattice
    kappa = 2 * lat.d * abs(params.J)
    if not v > kappa:
        raise InvalidArgument(f"velocity v={v} must exceed 2d|J|={kappa}")
    if lam is not None:
        report = check_controlled_density(state, lam, max(1.0, eta))
        if not report.passed:
            warnings.warn(
                f"initial state violates the controlled density bound at lambda={lam} "
                f"(worst ratio {report.worst_ratio:.3g} at {report.witness})",
                stacklevel=2,
            )
    grid = [(float(r), float(R), float(t)) for r, R, t in grid]
    H = build_hamiltonian(basis, lat.all_sites(), params)
    prop = Propagator(H, method=method, tol=tol, krylov_dim=krylov_dim)
    times = sorted({t for _, _, t in grid})
    evolved = dict(zip(times, _map(lambda t: state if t == 0 else prop.evolve(state, t), times,
                                   threads if prop.method == "dense" else 1)))
    pops0 = state.populations()

    def ball_counts(radius):
        return basis.states[:, list(ball(lat, x, radius).members)].sum(axis=1).astype(float)

    def point(p):
        r, R, t = p
        pops = evolved[t].populations()
        value = float(pops @ ball_counts(r) ** eta)
        ref = float(pops0 @ ball_counts(R) ** eta)
        in_regime = (R - r > max(1.0, delta0 * r)) and (v * abs(t) <= R - r + 1e-12)
        return SweepRecord(
            experiment="particle", x=lat.coord(x), r=r, R=R, t=t, value=max(value, 0.0),
            s=(R - r) / v if R > r else None, v=v, eta=eta, lam=lam,
            flag="ok" if in_regime else "outside_regime",
            extras={"initial_R_moment": ref},
        )

    return _map(point, grid, threads)


def lr_sweep(
    state: QuantumState,
    A,
    X: SiteSet,
    params: HubbardParams,
    grid: Iterable[tuple[float, float]],
    threads: int = 1,
) -> list[SweepRecord]:
    """Measure ``||(tau_t(A) - tau^R_t(A)) rho||_1`` over ``(R, t)`` points.

    The decay estimate behind this sweep needs ``R > 2``; smaller radii are measured
    and flagged ``outside_regime``.
    """
    basis = state.basis
    _check_dense(basis)
    _check_conserving(A, X, basis)
    grid = [(float(R), float(t)) for R, t in grid]
    lat = basis.lattice
    full = DenseEvolution(build_hamiltonian(basis, lat.all_sites(), params))
    Rs = sorted({R for R, _ in grid})
    restricted = {R: DenseEvolution(build_hamiltonian(basis, enlarge(X, R), params)) for R in Rs}
    rho = state.density()
    Ad = to_dense(A)
    x0 = lat.coord(X.members[0])

    def point(p):
        R, t = p
        diff = full.heisenberg(Ad, t) - restricted[R].heisenberg(Ad, t)
        return SweepRecord(experiment="lr", x=x0, r=0.0, R=R, t=t, value=trace_norm(diff @ rho),
                           flag="ok" if R > LR_MIN_RADIUS else "outside_regime")

    return _map(point, grid, threads)


def _separation(lat, S1: SiteSet, S2: SiteSet) -> float:
    c1 = lat.coords[list(S1.members)].astype(float)
    c2 = lat.coords[list(S2.members)].astype(float)
    return float(np.sqrt(((c1[:, None, :] - c2[None, :, :]) ** 2).sum(axis=2)).min())


def commutator_lightcone(
    basis: FockBasis,
    params: HubbardParams,
    A,
    A_support: SiteSet,
    B,
    B_support: SiteSet,
    times: Sequence[float],
    nu: Optional[int] = None,
    Y: Optional[SiteSet] = None,
    threads: int = 1,
) -> list[SweepRecord]:
    """Operator norms ``||[tau_t(A), B]||`` and, with ``nu``, ``||[taubar_t(Abar), Bbar]||``.

    The truncation uses ``Pi_{Y,nu}`` with ``Y`` defaulting to the whole lattice.
    Records store the support separation in ``R``; the flag names the dynamics.
    """
    _check_dense(basis)
    if set(A_support.members) & set(B_support.members):
        raise InvalidArgument("commutator light cone needs disjoint supports")
    lat = basis.lattice
    sep = _separation(lat, A_support, B_support)
    Ad, Bd = to_dense(A), to_dense(B)
    full = DenseEvolution(build_hamiltonian(basis, lat.all_sites(), params))
    trunc = None
    if nu is not None:
        Y = lat.all_sites() if Y is None else Y
        trunc = DenseEvolution(truncated_hamiltonian(basis, Y, nu, params))
        Abar = truncate(Ad, Y, nu, basis=basis)
        Bbar = truncate(Bd, Y, nu, basis=basis)
    x0 = lat.coord(A_support.members[0])
    bound = 2 * operator_norm(Ad) * operator_norm(Bd)

    def point(t):
        At = full.heisenberg(Ad, t)
        out = [SweepRecord(experiment="commutator", x=x0, r=0.0, R=sep, t=float(t), nu=None,
                           value=operator_norm(At @ Bd - Bd @ At), flag="full",
                           extras={"norm_bound": bound})]
        if trunc is not None:
            Abt = trunc.heisenberg(Abar, t)
            out.append(SweepRecord(experiment="commutator", x=x0, r=0.0, R=sep, t=float(t), nu=nu,
                                   value=operator_norm(Abt @ Bbar - Bbar @ Abt), flag="truncated",
                                   extras={"norm_bound": bound}))
        return out

    return [rec for recs in _map(point, times, threads) for rec in recs]


@dataclass(frozen=True)
class FitResult:
    mode: str
    slope: float
    intercept: float
    r2: float
    n_used: int
    n_dropped: int
    points: tuple = ()

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "slope": self.slope, "intercept": self.intercept, "r2": self.r2,
            "n_used": self.n_used, "n_dropped": self.n_dropped, "points": [list(p) for p in self.points],
        }


def _linfit(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(((y - pred) ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def lightcone_fit(
    records: Sequence[SweepRecord],
    mode: str = "decay-in-gap",
    threshold: float = 1e-3,
    distance: Optional[Callable[[SweepRecord], float]] = None,
) -> FitResult:
    """Quantify the decay or the spreading front of a sweep.

    ``decay-in-gap`` fits ``log value`` against ``log distance``; ``exp-decay`` fits
    ``log value`` against ``distance``; ``front-speed`` finds, for every time, the
    smallest distance beyond which all values are below ``threshold * max(value)`` and
    fits that front linearly in ``t``.  ``distance`` defaults to ``R - r``.
    """
    distance = distance or (lambda rec: rec.gap)
    records = list(records)
    if mode in ("decay-in-gap", "exp-decay"):
        usable = [rec for rec in records if rec.value > 0]
        dropped = len(records) - len(usable)
        if len(usable) < 4:
            raise InsufficientData(f"{len(usable)} positive records, need at least 4 ({dropped} zeros dropped)")
        d = np.array([distance(rec) for rec in usable])
        y = np.log([rec.value for rec in usable])
        xs = np.log(d) if mode == "decay-in-gap" else d
        slope, intercept, r2 = _linfit(xs, y)
        return FitResult(mode, slope, intercept, r2, len(usable), dropped, tuple(zip(xs.tolist(), y.tolist())))
    if mode != "front-speed":
        raise InvalidArgument(f"unknown fit mode {mode!r}")
    if len(records) < 4:
        raise InsufficientData(f"{len(records)} records, need at least 4")
    cut = threshold * max(rec.value for rec in records)
    by_t: dict[float, list[SweepRecord]] = {}
    for rec in records:
        by_t.setdefault(rec.t, []).append(rec)
    fronts, dropped = [], 0
    for t in sorted(by_t):
        pts = sorted(((distance(rec), rec.value) for rec in by_t[t]), key=lambda p: p[0])
        front = None
        for i, (d, _) in enumerate(pts):
            if all(val < cut for _, val in pts[i:]):
                front = d
                break
        if front is None:
            dropped += 1
        else:
            fronts.append((t, front))
    if len(fronts) < 4:
        raise InsufficientData(f"front located at {len(fronts)} times, need at least 4")
    slope, intercept, r2 = _linfit([p[0] for p in fronts], [p[1] for p in fronts])
    return FitResult(mode, slope, intercept, r2, len(fronts), dropped, tuple(fronts))


@dataclass(frozen=True)
class LadderReport:
    R: float
    nu: int
    t: float
    terms: tuple[float, float, float, float, float]
    direct: float

    @property
    def total(self) -> float:
        return float(sum(self.terms))


def truncation_ladder(
    state: QuantumState,
    A,
    X: SiteSet,
    R: float,
    nu: int,
    t: float,
    params: HubbardParams,
) -> LadderReport:
    """Split ``tau_t(A) - tau^R_t(A)`` along the five-step truncation route.

    With ``Pi = Pi_{X[R+2],nu}`` and ``Abar = Pi A Pi``, the steps are
    ``tau(A) -> tau(Abar) -> taubar(Abar) -> taubar^R(Abar) -> tau^R(Abar) -> tau^R(A)``,
    where bars on the dynamics mean generators ``Pi H Pi`` and ``Pi H_{X[R]} Pi``.
    Each step is measured as ``sup_{||B||=1} |Tr[rho D B]| = ||rho D||_1``.
    """
    basis = state.basis
    _check_dense(basis)
    _check_conserving(A, X, basis)
    lat = basis.lattice
    Y = enlarge(X, R + 2)
    XR = enlarge(X, R)
    Ad = to_dense(A)
    Abar = truncate(Ad, Y, nu, basis=basis)
    tau = DenseEvolution(build_hamiltonian(basis, lat.all_sites(), params))
    tau_R = DenseEvolution(build_hamiltonian(basis, XR, params))
    taubar = DenseEvolution(truncated_hamiltonian(basis, Y, nu, params))
    taubar_R = DenseEvolution(truncated_hamiltonian(basis, Y, nu, params, X=XR))
    chain = [
        tau.heisenberg(Ad, t),
        tau.heisenberg(Abar, t),
        taubar.heisenberg(Abar, t),
        taubar_R.heisenberg(Abar, t),
        tau_R.heisenberg(Abar, t),
        tau_R.heisenberg(Ad, t),
    ]
    rho = state.density()
    terms = tuple(trace_norm(rho @ (chain[i] - chain[i + 1])) for i in range(5))
    direct = trace_norm(rho @ (chain[0] - chain[5]))
    return LadderReport(R=float(R), nu=int(nu), t=float(t), terms=terms, direct=direct)
