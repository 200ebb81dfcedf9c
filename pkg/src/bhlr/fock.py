"""Fixed-particle-number occupation basis with a per-site cap.

States are the occupation vectors ``(n_0, ..., n_{L-1})`` with ``sum n = N_tot`` and
``n_x <= n_max``, listed in ascending lexicographic order.  Ranking is combinatorial:
the index of a state is the number of lexicographically smaller states, counted with
capped stars-and-bars numbers, so a lookup costs ``O(L * n_max)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgument, NotInBasis
from .lattice import Lattice


def capped_compositions(k: int, n: int, cap: int) -> int:
    """Number of ways to place ``n`` bosons on ``k`` sites with at most ``cap`` per site."""
    return int(_count_table(k, n, cap)[k, n])


def _count_table(k_max: int, n_max_total: int, cap: int) -> np.ndarray:
    # table[k, n] = #compositions of n into k parts, each in [0, cap]
    table = np.zeros((k_max + 1, n_max_total + 1), dtype=object)
    table[0, 0] = 1
    for k in range(1, k_max + 1):
        for n in range(n_max_total + 1):
            table[k, n] = sum(table[k - 1, n - v] for v in range(0, min(cap, n) + 1))
    return table


@dataclass(frozen=True, eq=False)
class FockBasis:
    lattice: Lattice
    N_tot: int
    n_max: int
    states: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.states.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    @property
    def n_sites(self) -> int:
        return self.states.shape[1]

    def __len__(self):
        return self.dim

    @cached_property
    def _offsets(self) -> np.ndarray:
        # offsets[i, rem, o] = number of valid states that agree up to site i-1,
        # have `rem` particles left for sites i.., and put fewer than `o` on site i
        L, N, cap = self.n_sites, self.N_tot, self.n_max
        count = _count_table(L, N, cap).astype(np.int64)
        off = np.zeros((L, N + 1, cap + 1), dtype=np.int64)
        for i in range(L):
            tail = L - i - 1
            for rem in range(N + 1):
                acc = 0
                for o in range(cap + 1):
                    off[i, rem, o] = acc
                    if rem - o >= 0:
                        acc += count[tail, rem - o]
        return off

    def rank(self, occ: Sequence[int]) -> int:
        """Index of ``occ`` in :attr:`states`; raises :class:`NotInBasis` if absent."""
        occ = np.asarray(occ, dtype=np.int64)
        if occ.shape != (self.n_sites,):
            raise NotInBasis(f"occupation vector of length {occ.size}, expected {self.n_sites}")
        if occ.min(initial=0) < 0 or occ.max(initial=0) > self.n_max or occ.sum() != self.N_tot:
            raise NotInBasis(f"{tuple(occ)} is not in the sector N={self.N_tot}, n_max={self.n_max}")
        return int(self.rank_many(occ[None, :])[0])

    def rank_many(self, occs: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`rank` for rows already known to lie in the sector."""
        occs = np.asarray(occs, dtype=np.int64)
        rem = np.full(occs.shape[0], self.N_tot, dtype=np.int64)
        idx = np.zeros(occs.shape[0], dtype=np.int64)
        off = self._offsets
        for i in range(self.n_sites):
            idx += off[i, rem, occs[:, i]]
            rem -= occs[:, i]
        return idx

    def contains(self, occ: Sequence[int]) -> bool:
        try:
            self.rank(occ)
        except NotInBasis:
            return False
        return True

    def metadata(self) -> dict:
        return {"dimension": self.dim, "N_tot": self.N_tot, "n_max": self.n_max, "n_sites": self.n_sites}


def _enumerate(L: int, N: int, cap: int) -> np.ndarray:
    out: list[tuple[int, ...]] = []
    prefix = [0] * L

    def rec(i, rem):
        if i == L - 1:
            if rem <= cap:
                prefix[i] = rem
                out.append(tuple(prefix))
            return
        # the remaining L-i-1 sites can absorb at most cap*(L-i-1)
        lo = max(0, rem - cap * (L - i - 1))
        for v in range(lo, min(cap, rem) + 1):
            prefix[i] = v
            rec(i + 1, rem - v)

    rec(0, N)
    return np.array(out, dtype=np.int64).reshape(-1, L)


def enumerate_basis(lat: Lattice, N_tot: int, n_max: int) -> FockBasis:
    """All occupation vectors on ``lat`` with total ``N_tot`` and per-site cap ``n_max``."""
    if N_tot < 0:
        raise InvalidArgument(f"N_tot must be >= 0, got {N_tot}")
    if n_max < 1:
        raise InvalidArgument(f"n_max must be >= 1, got {n_max}")
    if N_tot > n_max * lat.n_sites:
        raise InvalidArgument(
            f"infeasible sector: N_tot={N_tot} > n_max*|sites| = {n_max * lat.n_sites}"
        )
    states = _enumerate(lat.n_sites, int(N_tot), int(n_max))
    return FockBasis(lattice=lat, N_tot=int(N_tot), n_max=int(n_max), states=states)


def apply_hop(
    basis: FockBasis, occ: Sequence[int], x: int, y: int
) -> Optional[tuple[tuple[int, ...], float]]:
    """Action of ``b_x^dagger b_y`` on a basis state.

    Returns the new occupation vector and the amplitude ``sqrt((n_x + 1) n_y)``, or
    ``None`` when ``b_y`` annihilates the state or site ``x`` is already at the cap.
    """
    if x == y:
        raise InvalidArgument("apply_hop needs two distinct sites")
    occ = list(occ)
    if occ[y] < 1 or occ[x] >= basis.n_max:
        return None
    amp = float(np.sqrt((occ[x] + 1) * occ[y]))
    occ[x] += 1
    occ[y] -= 1
    return tuple(occ), amp
