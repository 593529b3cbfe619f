"""Scaled discrete tori and the comparison with the continuous transport
metric on the circle.

The torus chain uses nearest-neighbor rates N^2 (summed per ordered pair
where lattice directions collide, e.g. N = 2), so the chain Laplacian
approximates the continuum one and the discrete transport metric W_N is
directly comparable to the Wasserstein distance W_2 as N grows.

The continuous oracle is one-dimensional: circular W_2 between strictly
positive trigonometric-polynomial densities via quantile functions,

    W_2(rho_0, rho_1)^2 = min over shifts s of
        int_0^1 ( F_0^{-1}(u) - F_1^{-1}(u - s) )^2 du,

with the quantile of the second density unwrapped by F^{-1}(u + k) =
F^{-1}(u) + k.  The shift objective is minimized by a coarse scan plus
golden section (it is convex in s for positive densities)."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chain import MarkovChain, Density, build_chain, density
from .errors import NonPositive
from .metric import DistanceOptions, distance
from .weights import check_weight_properties, theta_harmonic, theta_power


@dataclass(frozen=True)
class TorusChain:
    n_side: int
    dim: int
    chain: MarkovChain


def build_torus(n_side: int, dim: int = 1) -> TorusChain:
    """Nearest-neighbor walk on (Z/NZ)^d with rate N^2 per lattice edge."""
    if n_side < 2:
        raise ValueError(f"need N >= 2, got {n_side}")
    if dim not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {dim}")
    n = n_side**dim
    rate = float(n_side) ** 2
    q = np.zeros((n, n))
    sites = list(itertools.product(range(n_side), repeat=dim))
    index = {site: i for i, site in enumerate(sites)}
    for site, i in index.items():
        for axis in range(dim):
            for step in (-1, 1):
                nb = list(site)
                nb[axis] = (nb[axis] + step) % n_side
                j = index[tuple(nb)]
                if j != i:
                    q[i, j] += rate
    np.fill_diagonal(q, -q.sum(axis=1))
    return TorusChain(n_side=n_side, dim=dim, chain=build_chain(q))


@dataclass(frozen=True)
class CircleDensity:
    """Strictly positive density 1 + sum_j a_j cos(2 pi j x) + b_j sin(2 pi j x)."""

    cos_coeffs: tuple
    sin_coeffs: tuple = ()

    def __post_init__(self):
        x = np.linspace(0.0, 1.0, 4096, endpoint=False)
        if self.value(x).min() <= 0.0:
            raise NonPositive("trigonometric density is not strictly positive")

    def _coeffs(self):
        a = np.asarray(self.cos_coeffs, dtype=float)
        b = np.asarray(self.sin_coeffs, dtype=float)
        j = max(len(a), len(b))
        a = np.pad(a, (0, j - len(a)))
        b = np.pad(b, (0, j - len(b)))
        return a, b, np.arange(1, j + 1)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        a, b, j = self._coeffs()
        if len(j) == 0:
            return np.ones_like(x)
        ang = 2.0 * np.pi * np.multiply.outer(x, j)
        return 1.0 + np.cos(ang) @ a + np.sin(ang) @ b

    def cdf(self, x):
        """int_0^x rho, exact for the trigonometric polynomial."""
        x = np.asarray(x, dtype=float)
        a, b, j = self._coeffs()
        if len(j) == 0:
            return x.copy()
        ang = 2.0 * np.pi * np.multiply.outer(x, j)
        two_pi_j = 2.0 * np.pi * j
        return x + np.sin(ang) @ (a / two_pi_j) + (1.0 - np.cos(ang)) @ (b / two_pi_j)

    def quantiles(self, u, newton_steps: int = 4):
        """F^{-1}(u) for u in [0, 1), by interpolation plus Newton polish."""
        u = np.asarray(u, dtype=float)
        xg = np.linspace(0.0, 1.0, 8192)
        fg = self.cdf(xg)
        x = np.interp(u, fg, xg)
        for _ in range(newton_steps):
            x = x - (self.cdf(x) - u) / self.value(x)
            x = np.clip(x, 0.0, 1.0)
        return x


def discretize(rho_c: CircleDensity, n_side: int) -> Density:
    """Cell averages over [i/N, (i+1)/N), renormalized to exact unit mass."""
    edges = np.arange(n_side + 1) / n_side
    cdf = rho_c.cdf(edges)
    cells = n_side * np.diff(cdf)
    if cells.min() <= 0.0:
        raise NonPositive("cell average is not positive")
    torus = build_torus(n_side, 1)
    return density(torus.chain, cells, normalize=True)


def w2_circle(rho_c0: CircleDensity, rho_c1: CircleDensity, resolution: int = 4096) -> float:
    """Continuous quadratic transport distance on the circle (see module
    docstring); ``resolution`` is the number of quantile quadrature nodes."""
    u = (np.arange(resolution) + 0.5) / resolution
    q0 = rho_c0.quantiles(u)
    q1_base = rho_c1.quantiles(u)

    def cost(s: float) -> float:
        v = u - s
        k = np.floor(v)
        q1 = rho_c1.quantiles(v - k) + k
        d = q0 - q1
        return float(np.mean(d * d))

    scan = np.linspace(-1.0, 1.0, 129)
    vals = [cost(s) for s in scan]
    i = int(np.argmin(vals))
    lo, hi = scan[max(0, i - 1)], scan[min(len(scan) - 1, i + 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = cost(c), cost(d)
    for _ in range(80):
        if b - a < 1e-12:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = cost(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = cost(d)
    best = min(min(vals), fc, fd)
    return math.sqrt(max(best, 0.0))


@dataclass
class GHRow:
    n_side: int
    w_discrete: float
    w_continuous: float
    gap: float


def gh_table(
    m: float,
    n_list: Sequence[int],
    test_pair,
    *,
    n_steps: int = 32,
    resolution: int = 4096,
    options: DistanceOptions | None = None,
):
    """Discrete-vs-continuous distance table for a pair of circle densities.

    For each N: discretize both endpoints on the scaled N-torus, solve the
    discrete transport problem with the power-m weight, and report the gap
    to the circular W_2 oracle.  The gaps should trend down with N."""
    rho_c0, rho_c1 = test_pair
    w2 = w2_circle(rho_c0, rho_c1, resolution)
    theta = theta_power(m)
    rows = []
    for n_side in n_list:
        torus = build_torus(n_side, 1)
        r0 = discretize(rho_c0, n_side)
        r1 = discretize(rho_c1, n_side)
        wn, _ = distance(torus.chain, theta, r0, r1, n_steps, options)
        rows.append(GHRow(n_side=n_side, w_discrete=wn, w_continuous=w2, gap=abs(wn - w2)))
    return rows


@dataclass
class ThetaGHReport:
    m: float
    diagonal_gap: float
    max_hessian_eig: float
    harmonic_bound_violation: float

    def ok(self) -> bool:
        return (
            self.diagonal_gap <= 1e-12
            and self.max_hessian_eig <= 1e-8
            and self.harmonic_bound_violation <= 1e-12
        )


def theta_gh_properties(m: float, grid=None) -> ThetaGHReport:
    """The three structural facts about the power mean that drive the
    convergence of the discrete metrics:

    (1) theta(t,t) = t;  (2) theta is concave;  (3) against the harmonic
    mean ht,  1/ht - 1/theta <= (b-a)^2/(ab) * 1/ht  pointwise."""
    if grid is None:
        grid = np.logspace(-3.0, 3.0, 13)
    grid = np.asarray(grid, dtype=float)
    theta = theta_power(m)

    diag = theta.value(grid, grid)
    diagonal_gap = float(np.abs(diag - grid).max() / max(1.0, grid.max()))

    report = check_weight_properties(theta, grid)

    a, b = np.meshgrid(grid, grid, indexing="ij")
    th = theta.value(a, b)
    ht = theta_harmonic().value(a, b)
    lhs = 1.0 / ht - 1.0 / th
    rhs = (b - a) ** 2 / (a * b) / ht
    violation = float(max(0.0, (lhs - rhs).max()))

    return ThetaGHReport(
        m=m,
        diagonal_gap=diagonal_gap,
        max_hessian_eig=report.max_hessian_eig,
        harmonic_bound_violation=violation,
    )
