"""Sparse and diagonal operators on a :class:`~bhlr.fock.FockBasis`.

Every double sum over neighbours runs over *ordered* pairs ``x ~ y``, so each edge is
counted twice and the hopping operator is Hermitian without an explicit ``+ h.c.``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument
from .fock import FockBasis
from .lattice import SiteSet, edges


@dataclass(frozen=True)
class HubbardParams:
    """Couplings of ``H_X = T_X + V_X``.

    ``form="onsite"`` gives ``V_X = sum_x [U n_x (n_x - 1) - mu n_x]``; ``form="pairwise"``
    gives ``V_X = sum_{x~y} [U n_x^{p/2} n_y^{p/2} - mu (n_x + n_y)]``.
    """

    J: float = 1.0
    U: float = 0.0
    mu: float = 0.0
    form: str = "onsite"
    p: float = 2.0

    def __post_init__(self):
        if self.form not in ("onsite", "pairwise"):
            raise InvalidArgument(f"unknown potential form {self.form!r}")
        if self.form == "pairwise" and self.p < 1:
            raise InvalidArgument(f"pairwise potential needs p >= 1, got {self.p}")


@dataclass(frozen=True, eq=False)
class DiagonalOperator:
    basis: FockBasis
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.basis.dim,):
            raise InvalidArgument(f"diagonal of length {values.shape}, basis has {self.basis.dim}")
        if not np.all(np.isfinite(values)):
            raise InvalidArgument("diagonal operator has non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def shape(self):
        return (self.basis.dim, self.basis.dim)

    def to_sparse(self) -> SparseOperator:
        return SparseOperator(self.basis, sp.diags(self.values.astype(complex), format="csr"))

    def toarray(self) -> np.ndarray:
        return np.diag(self.values).astype(complex)

    def norm(self) -> float:
        return float(np.abs(self.values).max(initial=0.0))

    def __add__(self, other):
        if isinstance(other, DiagonalOperator):
            _check_same_basis(self, other)
            return DiagonalOperator(self.basis, self.values + other.values)
        return self.to_sparse() + other

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, c):
        return DiagonalOperator(self.basis, float(c) * self.values)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, DiagonalOperator):
            _check_same_basis(self, other)
            return DiagonalOperator(self.basis, self.values * other.values)
        if isinstance(other, SparseOperator):
            return self.to_sparse() @ other
        return self.values[:, None] * other if np.ndim(other) == 2 else self.values * other


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Row-compressed matrix with sorted column indices (bit-stable across runs)."""

    basis: FockBasis
    matrix: sp.csr_matrix = field(repr=False)

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=complex)
        if m.shape != (self.basis.dim, self.basis.dim):
            raise InvalidArgument(f"matrix shape {m.shape} does not match basis dim {self.basis.dim}")
        m.sum_duplicates()
        m.sort_indices()
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self):
        return self.matrix.shape

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def to_sparse(self) -> SparseOperator:
        return self

    @property
    def H(self) -> SparseOperator:
        return SparseOperator(self.basis, self.matrix.conj().T.tocsr())

    def hermiticity_defect(self) -> float:
        d = self.matrix - self.matrix.conj().T
        return float(abs(d).max()) if d.nnz else 0.0

    def __add__(self, other):
        other = other.to_sparse()
        _check_same_basis(self, other)
        return SparseOperator(self.basis, self.matrix + other.matrix)

    def __radd__(self, other):
        return self + other

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, c):
        return SparseOperator(self.basis, complex(c) * self.matrix)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, (SparseOperator, DiagonalOperator)):
            other = other.to_sparse()
            _check_same_basis(self, other)
            return SparseOperator(self.basis, self.matrix @ other.matrix)
        return self.matrix @ other


Operator = Union[SparseOperator, DiagonalOperator]


def _check_same_basis(a, b):
    if a.basis is not b.basis:
        raise InvalidArgument("operators live on different bases")


def hop_operator(basis: FockBasis, x: int, y: int, amplitude: float = 1.0) -> SparseOperator:
    """``amplitude * b_x^dagger b_y`` on the capped basis."""
    if x == y:
        return number_operator(basis, basis.lattice.site_set([x])).to_sparse() * amplitude
    return _hopping_sum(basis, [((x, y), amplitude)])


def _hopping_sum(basis: FockBasis, weighted_pairs) -> SparseOperator:
    rows, cols, vals = [], [], []
    occ = basis.states
    for (x, y), w in weighted_pairs:
        if w == 0:
            continue
        c = np.flatnonzero((occ[:, y] >= 1) & (occ[:, x] < basis.n_max))
        src = occ[c]
        dst = src.copy()
        dst[:, x] += 1
        dst[:, y] -= 1
        rows.append(basis.rank_many(dst))
        cols.append(c)
        vals.append(w * np.sqrt((src[:, x] + 1) * src[:, y]))
    if not rows:
        return SparseOperator(basis, sp.csr_matrix((basis.dim, basis.dim), dtype=complex))
    m = sp.coo_matrix(
        (np.concatenate(vals).astype(complex), (np.concatenate(rows), np.concatenate(cols))),
        shape=(basis.dim, basis.dim),
    )
    return SparseOperator(basis, m.tocsr())


def build_hopping(basis: FockBasis, X: SiteSet, J: float) -> SparseOperator:
    """``T_X = J sum_{x~y in X} b_x^dagger b_y`` over ordered neighbour pairs."""
    return _hopping_sum(basis, ((e, J) for e in edges(X)))


def build_potential(basis: FockBasis, X: SiteSet, params: HubbardParams) -> DiagonalOperator:
    occ = basis.states.astype(float)
    if params.form == "onsite":
        n = occ[:, list(X.members)]
        values = (params.U * n * (n - 1) - params.mu * n).sum(axis=1)
    else:
        values = np.zeros(basis.dim)
        half = params.p / 2.0
        # real powers of nonnegative integers; exact for even p
        powered = occ**half
        for x, y in edges(X):
            values += params.U * powered[:, x] * powered[:, y] - params.mu * (occ[:, x] + occ[:, y])
    return DiagonalOperator(basis, values)


def build_hamiltonian(basis: FockBasis, X: SiteSet, params: HubbardParams) -> SparseOperator:
    """``H_X = T_X + V_X``."""
    return build_hopping(basis, X, params.J) + build_potential(basis, X, params)


def second_quantize(basis: FockBasis, f: Union[Sequence[float], Mapping[int, float], Callable]) -> DiagonalOperator:
    """``dGamma(f) = sum_x f(x) n_x`` for a real function on the sites."""
    return DiagonalOperator(basis, basis.states @ site_function(basis, f))


def site_function(basis: FockBasis, f) -> np.ndarray:
    """Tabulate a site function given as a sequence, a mapping, or a callable."""
    L = basis.n_sites
    if callable(f):
        fv = np.array([f(i) for i in range(L)], dtype=float)
    elif isinstance(f, Mapping):
        fv = np.zeros(L)
        for i, val in f.items():
            fv[int(i)] = val
    else:
        fv = np.asarray(f, dtype=float)
    if fv.shape != (L,):
        raise InvalidArgument(f"site function has shape {fv.shape}, expected ({L},)")
    return fv


def number_operator(basis: FockBasis, X: SiteSet) -> DiagonalOperator:
    """``N_X``, the number of bosons in ``X``."""
    return second_quantize(basis, X.indicator())


def site_number(basis: FockBasis, x: int) -> DiagonalOperator:
    return DiagonalOperator(basis, basis.states[:, x].astype(float))


def commutator(A: Operator, B: Operator) -> SparseOperator:
    """``AB - BA``."""
    if A.basis is not B.basis:
        raise InvalidArgument("commutator of operators on different bases")
    a, b = A.to_sparse().matrix, B.to_sparse().matrix
    return SparseOperator(A.basis, a @ b - b @ a)


def max_entry(op) -> float:
    """Largest entry magnitude of a sparse or dense operator."""
    if isinstance(op, DiagonalOperator):
        return op.norm()
    if isinstance(op, SparseOperator):
        m = op.matrix
        return float(abs(m).max()) if m.nnz else 0.0
    return float(np.abs(op).max(initial=0.0))


def commutator_expansion_residual(basis: FockBasis, g, params: HubbardParams) -> float:
    """Max-entry residual of ``[H, dGamma(g)] = -J sum_{x~y} (g(x) - g(y)) b_x^dagger b_y``.

    Both sides are assembled independently: the left from the full Hamiltonian, the
    right directly from weighted hops.
    """
    lam = basis.lattice.all_sites()
    H = build_hamiltonian(basis, lam, params)
    gfun = site_function(basis, g)
    lhs = commutator(H, second_quantize(basis, gfun))
    rhs = _hopping_sum(basis, (((x, y), -params.J * (gfun[x] - gfun[y])) for x, y in edges(lam)))
    return max_entry(lhs - rhs)
