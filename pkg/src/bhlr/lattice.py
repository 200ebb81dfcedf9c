"""Finite boxes in Z^d with the Euclidean metric.

Sites are stored as integer coordinate rows, ordered lexicographically, with
coordinates centered so that the origin is always a site.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument

# slack for comparing Euclidean distances against real radii
_DIST_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class Lattice:
    """Open box of ``prod(extents)`` sites in ``d`` dimensions."""

    d: int
    extents: tuple[int, ...]
    coords: np.ndarray = field(repr=False)
    origin_index: int

    def __post_init__(self):
        self.coords.setflags(write=False)
        object.__setattr__(
            self, "_index", {tuple(int(c) for c in row): i for i, row in enumerate(self.coords)}
        )

    @property
    def n_sites(self) -> int:
        return self.coords.shape[0]

    def __len__(self):
        return self.n_sites

    def index(self, coord) -> int:
        """Return the index of the site with integer coordinates ``coord``."""
        key = tuple(int(c) for c in np.atleast_1d(coord))
        try:
            return self._index[key]
        except KeyError:
            raise InvalidArgument(f"{key} is not a site of the lattice") from None

    def coord(self, i: int) -> tuple[int, ...]:
        return tuple(int(c) for c in self.coords[i])

    def norms(self) -> np.ndarray:
        """Euclidean distance of every site from the origin."""
        return np.sqrt((self.coords.astype(float) ** 2).sum(axis=1))

    def distance(self, i: int, j: int) -> float:
        return float(np.linalg.norm(self.coords[i] - self.coords[j]))

    def all_sites(self) -> SiteSet:
        return SiteSet(self, tuple(range(self.n_sites)))

    def site_set(self, members: Iterable[int]) -> SiteSet:
        return SiteSet.from_indices(self, members)

    def extents_label(self) -> str:
        return "x".join(str(e) for e in self.extents)


@dataclass(frozen=True, eq=False)
class SiteSet:
    """Sorted, duplicate-free subset of the sites of ``parent``."""

    parent: Lattice
    members: tuple[int, ...]

    @classmethod
    def from_indices(cls, lat: Lattice, members: Iterable[int]) -> SiteSet:
        idx = sorted({int(m) for m in members})
        for m in idx:
            if not 0 <= m < lat.n_sites:
                raise InvalidArgument(f"site index {m} out of range")
        return cls(lat, tuple(idx))

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, i):
        return i in self.members

    def __eq__(self, other):
        if not isinstance(other, SiteSet):
            return NotImplemented
        return self.parent is other.parent and self.members == other.members

    def __hash__(self):
        return hash((id(self.parent), self.members))

    def __le__(self, other: SiteSet) -> bool:
        return set(self.members) <= set(other.members)

    def __or__(self, other: SiteSet) -> SiteSet:
        return SiteSet.from_indices(self.parent, self.members + other.members)

    def __and__(self, other: SiteSet) -> SiteSet:
        return SiteSet.from_indices(self.parent, set(self.members) & set(other.members))

    def __sub__(self, other: SiteSet) -> SiteSet:
        return SiteSet.from_indices(self.parent, set(self.members) - set(other.members))

    def complement(self) -> SiteSet:
        return self.parent.all_sites() - self

    def indicator(self) -> np.ndarray:
        f = np.zeros(self.parent.n_sites)
        f[list(self.members)] = 1.0
        return f

    def coords(self) -> list[list[int]]:
        """Coordinate lists, the JSON serialization of a site set."""
        return [list(self.parent.coord(i)) for i in self.members]

    def is_full(self) -> bool:
        return len(self.members) == self.parent.n_sites


def make_lattice(d: int, extents: Sequence[int]) -> Lattice:
    """Build the open box with the given side lengths.

    Side ``L`` uses coordinates ``-(L // 2), ..., L - 1 - L // 2``, so odd sides are
    symmetric about the origin and even sides have one extra site on the negative end.
    """
    if int(d) < 1:
        raise InvalidArgument(f"dimension must be >= 1, got {d}")
    extents = tuple(int(e) for e in extents)
    if len(extents) != d:
        raise InvalidArgument(f"expected {d} extents, got {len(extents)}")
    if any(e < 1 for e in extents):
        raise InvalidArgument(f"extents must be positive, got {extents}")
    axes = [range(-(e // 2), e - e // 2) for e in extents]
    coords = np.array(list(itertools.product(*axes)), dtype=np.int64).reshape(-1, d)
    origin = int(np.flatnonzero((coords == 0).all(axis=1))[0])
    return Lattice(d=int(d), extents=extents, coords=coords, origin_index=origin)


def _distances_to(lat: Lattice, members: Sequence[int]) -> np.ndarray:
    """Distance from every site to the nearest member."""
    diff = lat.coords[:, None, :] - lat.coords[list(members)][None, :, :]
    return np.sqrt((diff.astype(float) ** 2).sum(axis=2)).min(axis=1)


def ball(lat: Lattice, center: int, r: float) -> SiteSet:
    """Sites within Euclidean distance ``r`` of ``center``."""
    if r < 0:
        raise InvalidArgument(f"radius must be >= 0, got {r}")
    if not 0 <= center < lat.n_sites:
        raise InvalidArgument(f"site index {center} out of range")
    dist = _distances_to(lat, [center])
    return SiteSet(lat, tuple(int(i) for i in np.flatnonzero(dist <= r + _DIST_EPS)))


def enlarge(X: SiteSet, R: float) -> SiteSet:
    """The ``R``-enlargement ``X[R] = {x : d(x, X) <= R}``."""
    if len(X) == 0:
        raise InvalidArgument("cannot enlarge an empty site set")
    if R < 0:
        raise InvalidArgument(f"radius must be >= 0, got {R}")
    dist = _distances_to(X.parent, X.members)
    return SiteSet(X.parent, tuple(int(i) for i in np.flatnonzero(dist <= R + _DIST_EPS)))


def diameter(X: SiteSet) -> float:
    """``1 + max |x - y|`` over pairs in ``X``."""
    if len(X) == 0:
        raise InvalidArgument("diameter of an empty site set")
    c = X.parent.coords[list(X.members)].astype(float)
    diff = c[:, None, :] - c[None, :, :]
    return 1.0 + float(np.sqrt((diff**2).sum(axis=2)).max())


def edges(X: SiteSet) -> list[tuple[int, int]]:
    """Ordered nearest-neighbour pairs inside ``X``; both orientations are listed."""
    if len(X) < 2:
        return []
    members = list(X.members)
    c = X.parent.coords[members]
    sq = ((c[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
    ii, jj = np.nonzero(sq == 1)
    return [(members[i], members[j]) for i, j in zip(ii, jj)]
