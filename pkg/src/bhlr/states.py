"""Initial states on a fixed-N sector and their particle-number moments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import InvalidArgument, NotInBasis
from .fock import FockBasis
from .lattice import SiteSet, ball, diameter

NORM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Pure state vector or density matrix on one particle-number sector."""

    basis: FockBasis
    data: np.ndarray = field(repr=False)
    kind: str = "pure"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        dim = self.basis.dim
        if self.kind == "pure":
            if data.shape != (dim,):
                raise InvalidArgument(f"state vector has shape {data.shape}, expected ({dim},)")
            if abs(np.linalg.norm(data) - 1) > NORM_TOL:
                raise InvalidArgument(f"state vector norm {np.linalg.norm(data)} != 1")
        elif self.kind == "density":
            if data.shape != (dim, dim):
                raise InvalidArgument(f"density matrix has shape {data.shape}, expected ({dim}, {dim})")
            if abs(np.trace(data) - 1) > NORM_TOL:
                raise InvalidArgument(f"density matrix trace {np.trace(data).real} != 1")
            if np.abs(data - data.conj().T).max(initial=0.0) > NORM_TOL:
                raise InvalidArgument("density matrix is not Hermitian")
            if np.linalg.eigvalsh(data).min(initial=0.0) < -NORM_TOL:
                raise InvalidArgument("density matrix is not positive semidefinite")
        else:
            raise InvalidArgument(f"unknown state kind {self.kind!r}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def is_pure(self) -> bool:
        return self.kind == "pure"

    def density(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return np.array(self.data)

    def populations(self) -> np.ndarray:
        """Probability of every basis state."""
        if self.is_pure:
            return np.abs(self.data) ** 2
        return np.real(np.diag(self.data)).copy()

    def expect_diagonal(self, values: np.ndarray) -> float:
        return float(self.populations() @ np.asarray(values, dtype=float))

    def expect(self, op: np.ndarray) -> complex:
        op = np.asarray(op)
        if self.is_pure:
            return complex(np.vdot(self.data, op @ self.data))
        return complex(np.trace(self.data @ op))


def product_fock_state(basis: FockBasis, occ: Sequence[int]) -> QuantumState:
    """The basis vector ``|occ>``."""
    try:
        i = basis.rank(occ)
    except NotInBasis as exc:
        raise InvalidArgument(str(exc)) from None
    psi = np.zeros(basis.dim, dtype=complex)
    psi[i] = 1.0
    return QuantumState(basis, psi)


def _profile_vector(basis: FockBasis, profile) -> np.ndarray:
    L = basis.n_sites
    if isinstance(profile, str):
        if profile != "uniform":
            raise InvalidArgument(f"unknown profile {profile!r}")
        w = np.ones(L)
    elif isinstance(profile, Mapping):
        w = np.zeros(L)
        for i, val in profile.items():
            w[int(i)] = val
    else:
        w = np.asarray(profile, dtype=float)
    if w.shape != (L,):
        raise InvalidArgument(f"profile has shape {w.shape}, expected ({L},)")
    if np.any(w < 0) or not np.any(w > 0):
        raise InvalidArgument("profile weights must be >= 0 and not all zero")
    return w


def spread_state(basis: FockBasis, profile: Union[str, Sequence[float], Mapping[int, float]], mixed: bool = False) -> QuantumState:
    """All bosons in the orbital ``phi_x ~ sqrt(w_x)``, projected onto the capped sector.

    The amplitude of ``|n>`` is ``sqrt(N! / prod n_x!) prod phi_x^{n_x}``; without a
    cap this gives ``<n_x> = N w_x / sum(w)``.  With ``mixed=True`` the coherences are
    dropped and the populations are returned as a diagonal density matrix.
    """
    w = _profile_vector(basis, profile)
    phi = np.sqrt(w / w.sum())
    occ = basis.states
    logfact = np.array([math.lgamma(n + 1) for n in range(basis.n_max + 1)])
    with np.errstate(divide="ignore", invalid="ignore"):
        logphi = np.log(phi)
        terms = np.where(occ > 0, occ * logphi[None, :], 0.0)
    log_amp = 0.5 * (math.lgamma(basis.N_tot + 1) - logfact[occ].sum(axis=1)) + terms.sum(axis=1)
    amp = np.exp(log_amp)
    norm = np.linalg.norm(amp)
    if norm == 0:
        raise InvalidArgument("profile has no weight inside the capped sector")
    amp = amp / norm
    if mixed:
        return QuantumState(basis, np.diag(amp**2).astype(complex), kind="density")
    return QuantumState(basis, amp.astype(complex))


def moment(state: QuantumState, X: SiteSet, eta: float) -> float:
    """``Tr[N_X^eta rho]``; exact because ``N_X`` is diagonal."""
    if not eta > 0:
        raise InvalidArgument(f"eta must be > 0, got {eta}")
    nx = state.basis.states[:, list(X.members)].sum(axis=1).astype(float)
    return state.expect_diagonal(nx**eta)


@dataclass(frozen=True)
class DensityReport:
    lam: float
    eta_max: float
    worst_ratio: float
    witness: Optional[tuple[int, int, int]]  # (site, radius, moment order)
    passed: bool

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "eta_max": self.eta_max,
            "worst_ratio": self.worst_ratio,
            "witness": list(self.witness) if self.witness else None,
            "passed": self.passed,
        }


def check_controlled_density(state: QuantumState, lam: float, eta_max: float) -> DensityReport:
    """Sweep ``Tr[N_{B_r(x)}^zeta rho] / (lam r^d)^zeta`` over sites, integer radii, orders.

    Radii run over ``1..ceil(diam(Lambda))``; orders over ``1..floor(eta_max)``.
    """
    if not lam > 0:
        raise InvalidArgument(f"lambda must be > 0, got {lam}")
    if eta_max < 1:
        raise InvalidArgument(f"eta_max must be >= 1, got {eta_max}")
    basis = state.basis
    lat = basis.lattice
    pops = state.populations()
    r_top = int(math.ceil(diameter(lat.all_sites())))
    worst, witness = 0.0, None
    for x in range(lat.n_sites):
        for r in range(1, r_top + 1):
            nb = basis.states[:, list(ball(lat, x, r).members)].sum(axis=1).astype(float)
            for zeta in range(1, int(math.floor(eta_max)) + 1):
                ratio = float(pops @ nb**zeta) / (lam * r**lat.d) ** zeta
                if ratio > worst:
                    worst, witness = ratio, (x, r, zeta)
    return DensityReport(lam=lam, eta_max=eta_max, worst_ratio=worst, witness=witness, passed=worst <= 1.0)


def cap_saturation(state: QuantumState) -> float:
    """Probability weight on basis states with some site at the cap ``n_max``."""
    basis = state.basis
    at_cap = (basis.states >= basis.n_max).any(axis=1)
    return float(state.populations()[at_cap].sum())
