"""Edge weight functions: means of two density values with derivatives.

A weight function theta assigns a conductivity theta(rho(x), rho(y)) to each
edge.  Shipped families:

  * ``power:m`` for 0 < m <= 2, the one-parameter family
        theta_m(r,s) = (m-1)/m * (r^m - s^m) / (r^(m-1) - s^(m-1)),
    which interpolates the classical means: m=2 arithmetic, m=1/2 geometric,
    m -> 1 logarithmic.  It is positively homogeneous of degree one and
    concave on the closed quadrant; theta_m(0,t) = 0 exactly when m <= 1.
  * ``log`` the logarithmic mean (r-s)/(log r - log s), equal to power:1.
  * ``harmonic`` 2rs/(r+s), shipped only as a comparison device.
  * ``one`` the constant weight, which turns the transport metric into the
    dual Sobolev (H^-1) distance.
  * ``pair`` the quotient (phi(r)-phi(s)) / (f'(r)-f'(s)) built from an
    entropy pair, with diagonal value phi'(r)/f''(r).

First partial derivatives are hand-derived closed forms.  For the power
family the second partials are also closed forms (used by the concavity
check, where finite differences cannot resolve the exact zero eigenvalue
forced by homogeneity):

  with a = m-1, c = a/m, P = r^a - s^a, N = r^m - s^m,

    d1  = c (m r^a P - a r^(a-1) N) / P^2
    d11 = c a r^(a-2) [ m r P^2 - (a-1) N P - 2 m r^(a+1) P + 2 a r^a N ] / P^3
    d12 = c a [ m (rs)^(a-1) (s-r) P + 2 s^(a-1) (m r^a P - a r^(a-1) N) ] / P^3

and on the diagonal Hess theta_m(t,t) = (m-2)/(6t) * [[1,-1],[-1,1]].
Near the diagonal (|r-s| <= 1e-6 max(r,s)) the quotients are replaced by the
series in x = (s-r)/(s+r):  theta = c (1 + (m-2) x^2 / 3),  c = (r+s)/2,
d1 = 1/2 - (m-2) x / 3, d2 = 1/2 + (m-2) x / 3, so cancellation never costs
more than ~1e-10 relative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ExponentOutOfRange, NonConvexF

DIAG_SWITCH = 1e-6
_PAIR_FD_STEP = 1e-4


def _split(mask):
    return np.nonzero(mask)


def _broadcast_pair(r, s):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    return np.broadcast_arrays(r, s)


def power_theta_with_derivs(m: float, r, s):
    """Vectorized (theta_m, d1, d2) for the power family (m=1: log mean)."""
    r, s = _broadcast_pair(r, s)
    th = np.zeros(r.shape)
    d1 = np.zeros(r.shape)
    d2 = np.zeros(r.shape)

    mx = np.maximum(r, s)
    bnd = (r <= 0.0) | (s <= 0.0)
    near = ~bnd & (np.abs(r - s) <= DIAG_SWITCH * mx)
    gen = ~bnd & ~near

    if bnd.any():
        i = _split(bnd)
        if m > 1.0:
            c = (m - 1.0) / m
            th[i] = c * np.where(r[i] <= 0.0, s[i], r[i])
            if m == 2.0:
                d1[i] = 0.5
                d2[i] = 0.5
            else:
                d1[i] = np.where(r[i] <= 0.0, np.inf, c)
                d2[i] = np.where(s[i] <= 0.0, np.inf, c)
            both = (r[i] <= 0.0) & (s[i] <= 0.0)
            th[i] = np.where(both, 0.0, th[i])
        else:
            pos = (r[i] > 0.0) | (s[i] > 0.0)
            d1[i] = np.where(pos & (r[i] <= 0.0), np.inf, 0.0)
            d2[i] = np.where(pos & (s[i] <= 0.0), np.inf, 0.0)

    if near.any():
        i = _split(near)
        c = 0.5 * (r[i] + s[i])
        x = (s[i] - r[i]) / (r[i] + s[i])
        th[i] = c * (1.0 + (m - 2.0) / 3.0 * x * x)
        d1[i] = 0.5 - (m - 2.0) / 3.0 * x
        d2[i] = 0.5 + (m - 2.0) / 3.0 * x

    if gen.any():
        i = _split(gen)
        ri, si = r[i], s[i]
        if m == 1.0:
            dl = np.log(ri) - np.log(si)
            li = (ri - si) / dl
            th[i] = li
            d1[i] = (1.0 - li / ri) / dl
            d2[i] = (li / si - 1.0) / dl
        else:
            a = m - 1.0
            c = a / m
            ra, sa = ri**a, si**a
            p = ra - sa
            n = ri**m - si**m
            th[i] = c * n / p
            d1[i] = c * (m * ra * p - a * (ra / ri) * n) / (p * p)
            d2[i] = c * (-m * sa * p + a * (sa / si) * n) / (p * p)
    return th, d1, d2


def _power_h11(m: float, r, s):
    """d^2 theta_m / dr^2 away from the diagonal (r, s > 0, r != s)."""
    if m == 1.0:
        dl = np.log(r) - np.log(s)
        li = (r - s) / dl
        g1 = (1.0 - li / r) / dl
        return (li - 2.0 * r * g1) / (r * r * dl)
    a = m - 1.0
    c = a / m
    ra, sa = r**a, s**a
    p = ra - sa
    n = r**m - s**m
    bracket = m * r * p * p - (a - 1.0) * n * p - 2.0 * m * ra * r * p + 2.0 * a * ra * n
    return c * a * (ra / r**2) * bracket / p**3


def _power_h12(m: float, r, s):
    """d^2 theta_m / dr ds away from the diagonal (r, s > 0, r != s)."""
    if m == 1.0:
        dl = np.log(r) - np.log(s)
        li = (r - s) / dl
        g1 = (1.0 - li / r) / dl
        g2 = (li / s - 1.0) / dl
        return (g1 / s - g2 / r) / dl
    a = m - 1.0
    c = a / m
    ra, sa = r**a, s**a
    p = ra - sa
    n = r**m - s**m
    bracket = m * (ra / r) * (sa / s) * (s - r) * p + 2.0 * (sa / s) * (
        m * ra * p - a * (ra / r) * n
    )
    return c * a * bracket / p**3


def _power_second_derivs(m: float, r, s):
    """Closed-form Hessian entries (d11, d12, d22) of theta_m, r, s > 0.

    d22(r,s) = d11(s,r) by symmetry; near the diagonal the homogeneous
    limit Hess = (m-2)/(6t) [[1,-1],[-1,1]] is exact to O(|r-s|/t)."""
    r, s = _broadcast_pair(r, s)
    d11 = np.zeros(r.shape)
    d12 = np.zeros(r.shape)
    d22 = np.zeros(r.shape)

    mx = np.maximum(r, s)
    near = np.abs(r - s) <= 1e-3 * mx
    gen = ~near

    if near.any():
        i = _split(near)
        t = 0.5 * (r[i] + s[i])
        h = (m - 2.0) / (6.0 * t)
        d11[i] = h
        d12[i] = -h
        d22[i] = h

    if gen.any():
        i = _split(gen)
        d11[i] = _power_h11(m, r[i], s[i])
        d12[i] = _power_h12(m, r[i], s[i])
        d22[i] = _power_h11(m, s[i], r[i])
    return d11, d12, d22


def _harmonic_with_derivs(r, s):
    r, s = _broadcast_pair(r, s)
    tot = r + s
    safe = tot > 0.0
    tot = np.where(safe, tot, 1.0)
    th = np.where(safe, 2.0 * r * s / tot, 0.0)
    d1 = np.where(safe, 2.0 * s * s / tot**2, 0.0)
    d2 = np.where(safe, 2.0 * r * r / tot**2, 0.0)
    return th, d1, d2


@dataclass(frozen=True)
class WeightFunction:
    """A symmetric concave mean with first (and where possible second)
    partial derivatives; see the module docstring for the families."""

    kind: str
    m: Optional[float] = None
    pair: Optional[object] = None

    @property
    def name(self) -> str:
        if self.kind == "power":
            return f"power:{self.m:g}"
        return self.kind

    def _scalarize(self, arrays, scalar: bool):
        if scalar:
            return tuple(float(np.asarray(a).ravel()[0]) for a in arrays)
        return arrays

    def value(self, r, s):
        out = self.value_d1_d2(r, s)[0]
        return out

    def d1(self, r, s):
        return self.value_d1_d2(r, s)[1]

    def d2(self, r, s):
        return self.value_d1_d2(r, s)[2]

    def value_d1_d2(self, r, s):
        scalar = np.ndim(r) == 0 and np.ndim(s) == 0
        if self.kind == "power":
            out = power_theta_with_derivs(self.m, r, s)
        elif self.kind == "log":
            out = power_theta_with_derivs(1.0, r, s)
        elif self.kind == "harmonic":
            out = _harmonic_with_derivs(r, s)
        elif self.kind == "one":
            r = np.asarray(r, dtype=float)
            s = np.asarray(s, dtype=float)
            shape = np.broadcast_shapes(r.shape, s.shape)
            out = (np.ones(shape), np.zeros(shape), np.zeros(shape))
        elif self.kind == "pair":
            out = _pair_quotient_with_derivs(self.pair, r, s)
        else:  # pragma: no cover
            raise ValueError(f"unknown weight kind {self.kind!r}")
        return self._scalarize(out, scalar)

    def second_derivs(self, r, s):
        """Hessian entries (d11, d12, d22); analytic for the closed-form
        families, central differences of d1/d2 for pair quotients."""
        scalar = np.ndim(r) == 0 and np.ndim(s) == 0
        if self.kind in ("power", "log"):
            m = 1.0 if self.kind == "log" else self.m
            out = _power_second_derivs(m, r, s)
        elif self.kind == "harmonic":
            r = np.asarray(r, dtype=float)
            s = np.asarray(s, dtype=float)
            r, s = np.broadcast_arrays(r, s)
            tot3 = (r + s) ** 3
            out = (-4.0 * s * s / tot3, 4.0 * r * s / tot3, -4.0 * r * r / tot3)
        elif self.kind == "one":
            r = np.asarray(r, dtype=float)
            s = np.asarray(s, dtype=float)
            shape = np.broadcast_shapes(r.shape, s.shape)
            z = np.zeros(shape)
            out = (z, z.copy(), z.copy())
        else:
            out = _fd_second_derivs(self, r, s)
        return self._scalarize(out, scalar)


def _fd_second_derivs(theta: WeightFunction, r, s):
    r, s = _broadcast_pair(r, s)
    hr = _PAIR_FD_STEP * np.maximum(r, 1e-30)
    hs = _PAIR_FD_STEP * np.maximum(s, 1e-30)
    _, d1p, d2p = theta.value_d1_d2(r + hr, s)
    _, d1m, d2m = theta.value_d1_d2(r - hr, s)
    d11 = (d1p - d1m) / (2.0 * hr)
    d21 = (d2p - d2m) / (2.0 * hr)
    _, d1p, d2p = theta.value_d1_d2(r, s + hs)
    _, d1m, d2m = theta.value_d1_d2(r, s - hs)
    d12 = (d1p - d1m) / (2.0 * hs)
    d22 = (d2p - d2m) / (2.0 * hs)
    return d11, 0.5 * (d12 + d21), d22


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def theta_power(m: float) -> WeightFunction:
    """theta_m for 0 < m <= 2; m = 1 returns the logarithmic mean."""
    if not 0.0 < m <= 2.0:
        raise ExponentOutOfRange(f"power-mean exponent must lie in (0, 2], got {m}")
    if m == 1.0:
        return theta_log()
    return WeightFunction(kind="power", m=float(m))


def theta_log() -> WeightFunction:
    return WeightFunction(kind="log", m=1.0)


def theta_harmonic() -> WeightFunction:
    return WeightFunction(kind="harmonic")


def theta_one() -> WeightFunction:
    return WeightFunction(kind="one")


def theta_from_pair(pair) -> WeightFunction:
    """Weight induced by an entropy pair: (phi(r)-phi(s)) / (f'(r)-f'(s)).

    Known pairs dispatch to their closed forms: the heat pair gives the
    logarithmic mean, a Renyi pair gives power:m, and any pair with f' = phi
    gives the constant weight.  Generic pairs are validated (f' strictly
    increasing on a probe grid) and evaluated as quotients.
    """
    kind = getattr(pair, "kind", None)
    if kind == "heat":
        return theta_log()
    if kind == "renyi":
        return theta_power(pair.m)
    if kind == "hilbertian":
        return theta_one()
    grid = np.logspace(-6, 6, 256)
    fprime = np.asarray(pair.df(grid), dtype=float)
    if not np.all(np.diff(fprime) > 0.0):
        raise NonConvexF("f' is not strictly increasing on the probe grid")
    phivals = np.asarray(pair.phi(grid), dtype=float)
    if not np.all(np.diff(phivals) > 0.0):
        raise NonConvexF("phi is not strictly increasing on the probe grid")
    return WeightFunction(kind="pair", pair=pair)


def _pair_quotient_with_derivs(pair, r, s):
    r, s = _broadcast_pair(r, s)
    th = np.zeros(r.shape)
    d1 = np.zeros(r.shape)
    d2 = np.zeros(r.shape)

    mx = np.maximum(r, s)
    bnd = (r <= 0.0) | (s <= 0.0)
    near = ~bnd & (np.abs(r - s) <= DIAG_SWITCH * mx)
    gen = ~bnd & ~near

    if bnd.any():
        i = _split(bnd)
        if getattr(pair, "df_finite_at_zero", False):
            ri = np.maximum(r[i], 0.0)
            si = np.maximum(s[i], 0.0)
            num = np.asarray(pair.phi(ri) - pair.phi(si), dtype=float)
            den = np.asarray(pair.df(ri) - pair.df(si), dtype=float)
            eq = ri == si
            th[i] = np.where(eq, 0.0, num / np.where(eq, 1.0, den))
        # f'(0) = -inf: the quotient limit is 0, already in place

    if near.any():
        i = _split(near)
        c = 0.5 * (r[i] + s[i])
        th[i] = np.asarray(pair.dphi(c), dtype=float) / np.asarray(pair.d2f(c), dtype=float)
        h = _PAIR_FD_STEP * c
        tp = _pair_value_only(pair, r[i] + h, s[i])
        tm = _pair_value_only(pair, r[i] - h, s[i])
        d1[i] = (tp - tm) / (2.0 * h)
        tp = _pair_value_only(pair, r[i], s[i] + h)
        tm = _pair_value_only(pair, r[i], s[i] - h)
        d2[i] = (tp - tm) / (2.0 * h)

    if gen.any():
        i = _split(gen)
        num = np.asarray(pair.phi(r[i]) - pair.phi(s[i]), dtype=float)
        den = np.asarray(pair.df(r[i]) - pair.df(s[i]), dtype=float)
        th[i] = num / den
        d1[i] = (np.asarray(pair.dphi(r[i]), dtype=float) * den
                 - num * np.asarray(pair.d2f(r[i]), dtype=float)) / (den * den)
        d2[i] = (-np.asarray(pair.dphi(s[i]), dtype=float) * den
                 + num * np.asarray(pair.d2f(s[i]), dtype=float)) / (den * den)
    return th, d1, d2


def _pair_value_only(pair, r, s):
    mx = np.maximum(r, s)
    near = np.abs(r - s) <= DIAG_SWITCH * mx
    out = np.zeros(r.shape)
    if near.any():
        i = _split(near)
        c = 0.5 * (r[i] + s[i])
        out[i] = np.asarray(pair.dphi(c), dtype=float) / np.asarray(pair.d2f(c), dtype=float)
    if (~near).any():
        i = _split(~near)
        num = np.asarray(pair.phi(r[i]) - pair.phi(s[i]), dtype=float)
        den = np.asarray(pair.df(r[i]) - pair.df(s[i]), dtype=float)
        out[i] = num / den
    return out


def theta_from_name(name: str, pair=None) -> WeightFunction:
    """Resolve a config name: log, power:<m>, harmonic, one, pair."""
    if name == "log":
        return theta_log()
    if name == "harmonic":
        return theta_harmonic()
    if name == "one":
        return theta_one()
    if name == "pair":
        if pair is None:
            raise ExponentOutOfRange("weight 'pair' needs an entropy pair")
        return theta_from_pair(pair)
    if name.startswith("power:"):
        return theta_power(float(name.split(":", 1)[1]))
    raise ExponentOutOfRange(f"unknown weight name {name!r}")


# ---------------------------------------------------------------------------
# integral representation and property checks
# ---------------------------------------------------------------------------

def theta_power_integral(m: float, r: float, s: float, quad_points: int = 64) -> float:
    """Gauss-Legendre value of the interpolation integral

        int_0^1 ((1-a) r^(m-1) + a s^(m-1))^(1/(m-1)) da

    (geometric interpolation exp((1-a) log r + a log s) in the m -> 1 limit).
    Agrees with the closed form to 1e-10 for quad_points >= 64.
    """
    if not 0.0 < m <= 2.0:
        raise ExponentOutOfRange(f"power-mean exponent must lie in (0, 2], got {m}")
    if r <= 0.0 or s <= 0.0:
        raise ExponentOutOfRange("integral representation needs r, s > 0")
    if quad_points < 2:
        raise ExponentOutOfRange("need at least 2 quadrature points")
    x, w = np.polynomial.legendre.leggauss(quad_points)
    alpha = 0.5 * (x + 1.0)
    if m == 1.0:
        vals = np.exp((1.0 - alpha) * np.log(r) + alpha * np.log(s))
    else:
        a = m - 1.0
        vals = ((1.0 - alpha) * r**a + alpha * s**a) ** (1.0 / a)
    return float(0.5 * (w @ vals))


@dataclass
class WeightPropertyReport:
    name: str
    symmetry_gap: float
    min_value: float
    monotone_violation: float
    max_hessian_eig: float
    doubling_violation: float
    c_theta: float
    diagonal_gap: float
    hessian_route: str = "analytic"

    def ok(self, concave_tol: float = None) -> bool:
        if concave_tol is None:
            # finite-difference Hessians (pair quotients) carry more noise
            concave_tol = 1e-8 if self.hessian_route == "analytic" else 1e-5
        return (
            self.symmetry_gap <= 1e-12
            and self.min_value > 0.0
            and self.monotone_violation <= 1e-12
            and self.max_hessian_eig <= concave_tol
            and self.doubling_violation <= 1e-12
            and np.isfinite(self.c_theta)
        )


def check_weight_properties(theta: WeightFunction, grid=None) -> WeightPropertyReport:
    """Evaluate the defining properties on a log-spaced grid.

    Symmetry, positivity, monotonicity in each argument, concavity (largest
    Hessian eigenvalue over the grid; the homogeneous families have an exact
    zero eigenvalue in the radial direction, so anything <= 1e-8 counts),
    the doubling bound theta(2s,2t) <= 2 theta(s,t), and finiteness of the
    path-integrability probe C = int_0^1 theta(1-r, 1+r)^(-1/2) dr.
    """
    if grid is None:
        grid = np.logspace(-3.0, 3.0, 13)
    grid = np.asarray(grid, dtype=float)
    r, s = np.meshgrid(grid, grid, indexing="ij")
    th = theta.value(r, s)

    symmetry_gap = float(np.abs(th - th.T).max() / max(1.0, np.abs(th).max()))
    min_value = float(th.min())
    mono = np.diff(th, axis=1)  # s increases along axis 1
    monotone_violation = float(max(0.0, -(mono.min())) / max(1.0, np.abs(th).max()))

    d11, d12, d22 = theta.second_derivs(r, s)
    trace = d11 + d22
    disc = np.sqrt(np.maximum((d11 - d22) ** 2 + 4.0 * d12**2, 0.0))
    max_eig = float((0.5 * (trace + disc)).max())

    dbl = theta.value(2.0 * r, 2.0 * s) - 2.0 * th
    doubling_violation = float(max(0.0, dbl.max()) / max(1.0, np.abs(th).max()))

    u = np.polynomial.legendre.leggauss(128)
    nodes = 0.5 * (u[0] + 1.0)
    wts = 0.5 * u[1]
    tv = theta.value(nodes**2, 2.0 - nodes**2)
    with np.errstate(divide="ignore"):
        integrand = 2.0 * nodes / np.sqrt(tv)
    c_theta = float(wts @ integrand)

    diag = theta.value(grid, grid)
    diagonal_gap = float(np.abs(diag - grid).max() / max(1.0, grid.max()))

    return WeightPropertyReport(
        name=theta.name,
        symmetry_gap=symmetry_gap,
        min_value=min_value,
        monotone_violation=monotone_violation,
        max_hessian_eig=max_eig,
        doubling_violation=doubling_violation,
        c_theta=c_theta,
        diagonal_gap=diagonal_gap,
        hessian_route="fd" if theta.kind == "pair" else "analytic",
    )
