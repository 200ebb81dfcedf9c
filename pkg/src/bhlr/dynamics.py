"""Time evolution on one particle-number sector.

Conventions: states evolve as ``psi(t) = exp(-i t H) psi`` and observables as
``tau_t(A) = exp(i t H) A exp(-i t H)``.  Dense eigendecomposition is the reference
propagator; the Lanczos propagator is used above :data:`DENSE_THRESHOLD`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .errors import InvalidArgument, NumericalFailure
from .fock import FockBasis
from .lattice import SiteSet, enlarge
from .operators import (
    DiagonalOperator,
    HubbardParams,
    SparseOperator,
    build_hamiltonian,
    build_hopping,
    build_potential,
)
from .states import QuantumState

log = logging.getLogger(__name__)

DENSE_THRESHOLD = 512
HEISENBERG_THRESHOLD = 2048
KRYLOV_TOL = 1e-10
KRYLOV_DIM = 30
UNITARITY_TOL = 1e-10


def to_dense(op) -> np.ndarray:
    if isinstance(op, (SparseOperator, DiagonalOperator)):
        return op.toarray()
    if sp.issparse(op):
        return op.toarray()
    return np.asarray(op, dtype=complex)


def _as_matrix(H):
    if isinstance(H, (SparseOperator, DiagonalOperator)):
        return H.to_sparse().matrix
    return H


class DenseEvolution:
    """Eigendecomposition of a Hermitian generator, reused across times."""

    def __init__(self, H):
        Hd = to_dense(H)
        self.energies, self.vectors = np.linalg.eigh(Hd)

    @property
    def dim(self) -> int:
        return self.energies.size

    # t == 0 short-circuits so that the identity is exact rather than V V^dagger

    def unitary(self, t: float) -> np.ndarray:
        """``exp(-i t H)``."""
        if t == 0:
            return np.eye(self.dim, dtype=complex)
        return (self.vectors * np.exp(-1j * t * self.energies)) @ self.vectors.conj().T

    def apply(self, psi: np.ndarray, t: float) -> np.ndarray:
        if t == 0:
            return np.array(psi, dtype=complex)
        return self.vectors @ (np.exp(-1j * t * self.energies) * (self.vectors.conj().T @ psi))

    def heisenberg(self, A, t: float) -> np.ndarray:
        """``exp(i t H) A exp(-i t H)``."""
        if t == 0:
            return to_dense(A).astype(complex)
        U = self.unitary(t)
        return U.conj().T @ to_dense(A) @ U

    def evolve_density(self, rho: np.ndarray, t: float) -> np.ndarray:
        if t == 0:
            return np.array(rho, dtype=complex)
        U = self.unitary(t)
        return U @ rho @ U.conj().T


@dataclass
class KrylovStats:
    substeps: int = 0
    rejected: int = 0
    max_error_estimate: float = 0.0


def _lanczos(matvec, v: np.ndarray, m: int):
    """``m`` Lanczos steps with full reorthogonalization.

    Returns the orthonormal basis rows, the tridiagonal coefficients and the norm of
    the next residual (zero on happy breakdown).
    """
    n = v.size
    m = min(m, n)
    beta0 = np.linalg.norm(v)
    V = np.zeros((m + 1, n), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    V[0] = v / beta0
    for j in range(m):
        w = matvec(V[j])
        alpha[j] = np.vdot(V[j], w).real
        w = w - alpha[j] * V[j]
        if j > 0:
            w = w - beta[j - 1] * V[j - 1]
        w = w - V[: j + 1].T @ (V[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] <= 1e-14 * max(1.0, abs(alpha[j])):
            return V[: j + 1], alpha[: j + 1], beta[:j], 0.0
        V[j + 1] = w / beta[j]
    return V[:m], alpha, beta[: m - 1], beta[m - 1]


def krylov_expm(
    H,
    psi: np.ndarray,
    t: float,
    tol: float = KRYLOV_TOL,
    krylov_dim: int = KRYLOV_DIM,
    max_substeps: int = 10_000,
    stats: Optional[KrylovStats] = None,
) -> np.ndarray:
    """``exp(-i t H) psi`` by Lanczos projection with adaptive substeps.

    Each substep accepts the largest step ``tau`` (starting from the remaining time and
    halving) whose a-posteriori error estimate ``|psi| h_{m+1,m} |e_m^T exp(-i tau T) e_1|``
    is below ``tol``.
    """
    M = _as_matrix(H)
    stats = stats if stats is not None else KrylovStats()
    psi = np.asarray(psi, dtype=complex).copy()
    if t == 0:
        return psi
    sign = 1.0 if t > 0 else -1.0
    remaining = abs(t)
    while remaining > 0:
        if stats.substeps >= max_substeps:
            raise NumericalFailure(
                "Krylov propagation did not finish within max_substeps",
                remaining_time=remaining,
                substeps=stats.substeps,
                tol=tol,
                krylov_dim=krylov_dim,
            )
        nrm = np.linalg.norm(psi)
        if nrm == 0:
            return psi
        V, alpha, beta, h_next = _lanczos(lambda x: M @ x, psi, krylov_dim)
        theta, S = np.linalg.eigh(np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1))
        tau = remaining
        for _ in range(80):
            c = S @ (np.exp(-1j * sign * tau * theta) * S[0])
            err = nrm * h_next * abs(c[-1])
            if err <= tol:
                break
            tau *= 0.5
            stats.rejected += 1
        else:
            raise NumericalFailure(
                "Krylov step size underflow", remaining_time=remaining, error_estimate=err, tol=tol
            )
        new = nrm * (V.T @ c)
        if abs(np.linalg.norm(new) - nrm) > UNITARITY_TOL:
            raise NumericalFailure(
                "Krylov step broke unitarity",
                norm_before=nrm,
                norm_after=float(np.linalg.norm(new)),
            )
        psi = new
        remaining -= tau
        if remaining < 1e-15 * abs(t):
            remaining = 0.0
        stats.substeps += 1
        stats.max_error_estimate = max(stats.max_error_estimate, float(err))
    return psi


@dataclass
class Propagator:
    """``exp(-i t H)`` acting on state vectors.

    ``method`` is ``"dense"``, ``"krylov"`` or ``"auto"`` (dense up to
    :data:`DENSE_THRESHOLD`).
    """

    generator: Union[SparseOperator, DiagonalOperator]
    method: str = "auto"
    tol: float = KRYLOV_TOL
    krylov_dim: int = KRYLOV_DIM
    max_substeps: int = 10_000
    stats: KrylovStats = field(default_factory=KrylovStats)

    def __post_init__(self):
        if self.method not in ("auto", "dense", "krylov"):
            raise InvalidArgument(f"unknown propagator method {self.method!r}")
        dim = self.generator.shape[0]
        if self.method == "auto":
            self.method = "dense" if dim <= DENSE_THRESHOLD else "krylov"
        self._dense = DenseEvolution(self.generator) if self.method == "dense" else None

    def apply(self, psi: np.ndarray, t: float) -> np.ndarray:
        if self._dense is not None:
            return self._dense.apply(psi, t)
        return krylov_expm(
            self.generator, psi, t, tol=self.tol, krylov_dim=self.krylov_dim,
            max_substeps=self.max_substeps, stats=self.stats,
        )

    def evolve(self, state: QuantumState, t: float) -> QuantumState:
        if state.is_pure:
            return QuantumState(state.basis, self.apply(state.data, t))
        dense = self._dense or DenseEvolution(self.generator)
        rho = dense.evolve_density(state.density(), t)
        return QuantumState(state.basis, (rho + rho.conj().T) / 2, kind="density")


def evolve_state(H, psi, t: float, method: str = "auto", tol: float = KRYLOV_TOL, krylov_dim: int = KRYLOV_DIM):
    """``exp(-i t H) psi`` for a :class:`QuantumState` or a raw vector."""
    prop = Propagator(H, method=method, tol=tol, krylov_dim=krylov_dim)
    if isinstance(psi, QuantumState):
        if psi.basis is not getattr(H, "basis", psi.basis):
            raise InvalidArgument("state and generator live on different bases")
        return prop.evolve(psi, t)
    return prop.apply(np.asarray(psi, dtype=complex), t)


def _check_dense_size(dim: int, limit: int):
    if dim > limit:
        raise InvalidArgument(
            f"dimension {dim} exceeds the dense threshold {limit}; "
            "evolve states instead and measure expectation values"
        )


def heisenberg(H, A, t: float, max_dim: int = HEISENBERG_THRESHOLD) -> np.ndarray:
    """``exp(i t H) A exp(-i t H)`` as a dense matrix."""
    _check_dense_size(H.shape[0], max_dim)
    return DenseEvolution(H).heisenberg(A, t)


def projector(basis: FockBasis, Y: SiteSet, nu: int) -> DiagonalOperator:
    """``Pi_{Y,nu}``: one on states with at most ``nu`` bosons on every site of ``Y``."""
    if nu < 0:
        raise InvalidArgument(f"nu must be >= 0, got {nu}")
    if nu > basis.n_max:
        raise InvalidArgument(f"nu={nu} exceeds the cap n_max={basis.n_max}; the projector would be trivial")
    occ = basis.states[:, list(Y.members)]
    return DiagonalOperator(basis, (occ <= nu).all(axis=1).astype(float))


def truncate(A, Y: SiteSet, nu: int, basis: Optional[FockBasis] = None):
    """``Pi A Pi`` with ``Pi = Pi_{Y,nu}``; keeps the representation of ``A``."""
    basis = getattr(A, "basis", basis)
    if basis is None:
        raise InvalidArgument("truncating a raw matrix needs the basis")
    p = projector(basis, Y, nu).values
    if isinstance(A, DiagonalOperator):
        return DiagonalOperator(basis, p * A.values)
    if isinstance(A, SparseOperator):
        P = sp.diags(p.astype(complex), format="csr")
        return SparseOperator(basis, P @ A.matrix @ P)
    A = np.asarray(A)
    return p[:, None] * A * p[None, :]


def truncated_hamiltonian(basis: FockBasis, Y: SiteSet, nu: int, params: HubbardParams, X: Optional[SiteSet] = None) -> SparseOperator:
    """``Pi_{Y,nu} H_X Pi_{Y,nu}`` (``X`` defaults to the whole lattice)."""
    X = basis.lattice.all_sites() if X is None else X
    return truncate(build_hamiltonian(basis, X, params), Y, nu)


def truncated_dynamics(basis: FockBasis, Y: SiteSet, nu: int, params: HubbardParams, A, t: float,
                       max_dim: int = HEISENBERG_THRESHOLD) -> np.ndarray:
    """``exp(i t Hbar) A exp(-i t Hbar)`` with ``Hbar = Pi H Pi``."""
    return heisenberg(truncated_hamiltonian(basis, Y, nu, params), A, t, max_dim=max_dim)


def restricted_dynamics(basis: FockBasis, X: SiteSet, R: float, A, t: float, params: HubbardParams,
                        max_dim: int = HEISENBERG_THRESHOLD) -> np.ndarray:
    """Heisenberg evolution under ``H_{X[R]}``."""
    return heisenberg(build_hamiltonian(basis, enlarge(X, R), params), A, t, max_dim=max_dim)


def interaction_picture_check(basis: FockBasis, Y: SiteSet, nu: int, params: HubbardParams, t: float,
                              rtol: float = 1e-12, atol: float = 1e-13) -> float:
    """Operator-norm distance between ``U = exp(i t Hbar) exp(-i t Vbar)`` and an ODE solution.

    ``U`` satisfies ``dU/dt = i U Tint(t)`` with ``Tint(t) = exp(i t Vbar) Tbar exp(-i t Vbar)``
    and ``U(0) = 1``; the ODE is integrated with an adaptive 8th-order Runge-Kutta scheme,
    independently of any matrix exponential.
    """
    _check_dense_size(basis.dim, HEISENBERG_THRESHOLD)
    lam = basis.lattice.all_sites()
    Tbar = to_dense(truncate(build_hopping(basis, lam, params.J), Y, nu))
    vbar = truncate(build_potential(basis, lam, params), Y, nu).values
    Hbar = Tbar + np.diag(vbar)
    # exp(i t Hbar) = (exp(-i t Hbar))^dagger
    U_exact = DenseEvolution(Hbar).unitary(t).conj().T @ np.diag(np.exp(-1j * t * vbar))
    if t == 0:
        return float(np.linalg.norm(U_exact - np.eye(basis.dim), 2))
    dim = basis.dim
    dv = vbar[:, None] - vbar[None, :]

    def rhs(s, y):
        U = y.reshape(dim, dim)
        Tint = np.exp(1j * s * dv) * Tbar
        return (1j * (U @ Tint)).ravel()

    sol = solve_ivp(rhs, (0.0, t), np.eye(dim, dtype=complex).ravel(), method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise NumericalFailure("interaction-picture ODE failed", message=sol.message)
    U_ode = sol.y[:, -1].reshape(dim, dim)
    return float(np.linalg.norm(U_exact - U_ode, 2))
