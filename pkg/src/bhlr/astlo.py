"""Adiabatic space-time localization observables (ASTLOs).

A cutoff ``chi`` of the class used here vanishes on ``(-inf, eps/2]``, equals one on
``[eps, inf)``, is nondecreasing, and has a smooth compactly supported ``sqrt(chi')``.
The concrete member built by :func:`make_cutoff` is the normalized primitive of a
squared bump::

    chi(x) = int_{-inf}^x w / int w,   w(x) = bump((x - eps/2) / (eps/2))**2,
    bump(u) = exp(-1 / (u (1 - u)))  on (0, 1), zero elsewhere,

so ``sqrt(chi') = bump / sqrt(int w)`` is itself a bump.  The ASTLO at time ``t`` is the
second quantization of ``chi_ts(x) = chi((R - v_tilde t - |x|) / s)`` with
``s = (R - r) / v``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import InvalidArgument
from .fock import FockBasis
from .operators import DiagonalOperator, second_quantize

DEFAULT_GRID = 4097
# interpolation error budget folded into every inequality check
INEQUALITY_SLACK = 1e-6

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = (u > 0) & (u < 1)
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (ui * (1.0 - ui)))
    return out


def _bump_prime(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = (u > 0) & (u < 1)
    ui = u[inside]
    g = ui * (1.0 - ui)
    out[inside] = np.exp(-1.0 / g) * (1.0 - 2.0 * ui) / g**2
    return out


@dataclass(frozen=True, eq=False)
class CutoffFunction:
    """Tabulated cutoff on ``[eps/2, eps]`` with cubic Hermite interpolation."""

    epsilon: float
    grid: np.ndarray = field(repr=False)
    chi: np.ndarray = field(repr=False)
    dchi: np.ndarray = field(repr=False)
    sqrt_dchi: np.ndarray = field(repr=False)
    norm: float = field(repr=False)

    def __post_init__(self):
        spline = CubicHermiteSpline(self.grid, self.chi, self.dchi, extrapolate=False)
        object.__setattr__(self, "_spline", spline)

    def _u(self, x):
        return (np.asarray(x, dtype=float) - self.epsilon / 2) / (self.epsilon / 2)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.epsilon / 2, self.epsilon
        out = np.where(x >= hi, 1.0, 0.0)
        inside = (x > lo) & (x < hi)
        if np.any(inside):
            out[inside] = np.clip(self._spline(x[inside]), 0.0, 1.0)
        return out if out.ndim else float(out)

    def derivative(self, x):
        """``chi'(x)``, evaluated analytically."""
        out = _bump(self._u(x)) ** 2 / self.norm
        return out if np.ndim(out) else float(out)

    def sqrt_derivative(self, x):
        """``u(x) = sqrt(chi'(x))``, evaluated analytically."""
        out = _bump(self._u(x)) / np.sqrt(self.norm)
        return out if np.ndim(out) else float(out)

    def sqrt_derivative_prime(self, x):
        out = _bump_prime(self._u(x)) * (2.0 / self.epsilon) / np.sqrt(self.norm)
        return out if np.ndim(out) else float(out)

    def metadata(self) -> dict:
        return {"epsilon": self.epsilon, "grid_points": int(self.grid.size), "interpolation": "cubic-hermite"}


def make_cutoff(epsilon: float, n_grid: int = DEFAULT_GRID) -> CutoffFunction:
    if not epsilon > 0:
        raise InvalidArgument(f"epsilon must be > 0, got {epsilon}")
    if n_grid < 4096:
        raise InvalidArgument(f"need at least 4096 grid points, got {n_grid}")
    half = epsilon / 2
    grid = np.linspace(half, epsilon, n_grid)
    # per-interval Gauss-Legendre integrals of w, accumulated
    a, b = grid[:-1], grid[1:]
    mid, rad = (a + b) / 2, (b - a) / 2
    nodes = mid[:, None] + rad[:, None] * _GL_NODES[None, :]
    w = _bump((nodes - half) / half) ** 2
    pieces = rad * (w * _GL_WEIGHTS[None, :]).sum(axis=1)
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    total = cum[-1]
    chi = cum / total
    chi[0], chi[-1] = 0.0, 1.0
    dchi = _bump((grid - half) / half) ** 2 / total
    return CutoffFunction(
        epsilon=float(epsilon),
        grid=grid,
        chi=chi,
        dchi=dchi,
        sqrt_dchi=np.sqrt(dchi),
        norm=float(total),
    )


@dataclass(frozen=True)
class VelocityParams:
    J: float
    d: int
    v: float
    kappa: float
    v_tilde: float
    epsilon: float
    s: Optional[float] = None

    def with_scale(self, R: float, r: float) -> VelocityParams:
        """Copy with the adiabatic time scale ``s = (R - r) / v``."""
        if not R > r:
            raise InvalidArgument(f"need R > r, got R={R}, r={r}")
        return replace(self, s=(R - r) / self.v)


def velocity_params(J: float, d: int, v: float) -> VelocityParams:
    """``kappa = 2 d |J|``, ``v_tilde = (v + kappa) / 2``, ``epsilon = v - v_tilde``."""
    kappa = 2 * d * abs(J)
    if not v > kappa:
        raise InvalidArgument(f"velocity v={v} must exceed 2d|J|={kappa}")
    v_tilde = (v + kappa) / 2
    return VelocityParams(J=J, d=d, v=v, kappa=kappa, v_tilde=v_tilde, epsilon=v - v_tilde)


def eval_rescaled(chi: CutoffFunction, vp: VelocityParams, R: float, t: float, dist, s: Optional[float] = None):
    """``chi((R - v_tilde t - |x|) / s)`` where ``dist = |x|``."""
    s = vp.s if s is None else s
    if s is None or not s > 0:
        raise InvalidArgument("rescaling needs a positive time scale s")
    return chi((R - vp.v_tilde * t - np.asarray(dist, dtype=float)) / s)


def astlo_operator(
    basis: FockBasis,
    chi: CutoffFunction,
    vp: VelocityParams,
    R: float,
    r: float,
    t: float,
    center: Optional[int] = None,
) -> DiagonalOperator:
    """``dGamma(chi_ts)``, with distances measured from ``center`` (default: origin)."""
    if not np.isclose(chi.epsilon, vp.epsilon, rtol=1e-12, atol=0):
        raise InvalidArgument(f"cutoff epsilon {chi.epsilon} does not match velocity epsilon {vp.epsilon}")
    if r < 0:
        raise InvalidArgument(f"need r >= 0, got {r}")
    vp = vp.with_scale(R, r)
    lat = basis.lattice
    c = lat.origin_index if center is None else center
    dist = np.sqrt(((lat.coords - lat.coords[c]).astype(float) ** 2).sum(axis=1))
    return second_quantize(basis, eval_rescaled(chi, vp, R, t, dist))


@dataclass(frozen=True)
class TaylorReport:
    beta: int
    n_pairs: int
    constant: float  # smallest C with |residual| <= C (x - y)^2 over the sample
    exponent: float  # log-log slope of the residual envelope against |x - y|
    max_residual: float

    @property
    def max_violation(self) -> float:
        return self.constant


def sample_pairs(chi: CutoffFunction, n: int, rng: np.random.Generator, min_sep: float = 1e-3) -> np.ndarray:
    """Random pairs in ``(0, eps)`` with log-uniform separations in ``[min_sep*eps, eps)``."""
    eps = chi.epsilon
    pairs = np.empty((0, 2))
    while len(pairs) < n:
        x = rng.uniform(0, eps, size=2 * n)
        h = eps * 10 ** rng.uniform(np.log10(min_sep), 0, size=2 * n) * rng.choice([-1, 1], size=2 * n)
        y = x + h
        ok = (y > 0) & (y < eps)
        pairs = np.vstack([pairs, np.column_stack([x[ok], y[ok]])])
    return pairs[:n]


def taylor_expansion_check(chi: CutoffFunction, beta: int, pairs, n_bins: int = 12) -> TaylorReport:
    """Measure the remainder of ``chi(x) - chi(y) = (x - y) u(x) u(y) + O((x - y)^2)``.

    The residual after the symmetric first-order term is divided by ``(x - y)^2`` to
    give the constant; its growth order is the slope of ``log max|residual|`` against
    ``log |x - y|`` over logarithmic separation bins.
    """
    if int(beta) < 1:
        raise InvalidArgument(f"beta must be >= 1, got {beta}")
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    x, y = pairs[:, 0], pairs[:, 1]
    h = x - y
    res = chi(x) - chi(y) - h * chi.sqrt_derivative(x) * chi.sqrt_derivative(y)
    res = np.atleast_1d(res)
    nz = h != 0
    constant = float(np.max(np.abs(res[nz]) / h[nz] ** 2, initial=0.0))
    exponent = float("nan")
    usable = nz & (np.abs(res) > 0)
    if usable.sum() >= 2:
        lh = np.log(np.abs(h[usable]))
        lr = np.log(np.abs(res[usable]))
        edges_ = np.linspace(lh.min(), lh.max(), n_bins + 1)
        which = np.clip(np.digitize(lh, edges_) - 1, 0, n_bins - 1)
        bx, by = [], []
        for b in range(n_bins):
            sel = which == b
            if sel.any():
                k = np.argmax(lr[sel])
                bx.append(lh[sel][k])
                by.append(lr[sel][k])
        if len(bx) >= 2:
            exponent = float(np.polyfit(bx, by, 1)[0])
    return TaylorReport(
        beta=int(beta),
        n_pairs=int(len(pairs)),
        constant=constant,
        exponent=exponent,
        max_residual=float(np.max(np.abs(res), initial=0.0)),
    )
