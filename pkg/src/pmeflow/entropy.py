"""Entropy pairs (phi, f) and the functionals they induce.

An entropy pair couples the nonlinearity phi driving the diffusion
d rho / dt = Delta phi(rho) with the strictly convex integrand f of the
entropy F(rho) = sum_x f(rho(x)) pi(x).  Shipped kinds:

  * heat:        phi(r) = r,          f(r) = r log r      (relative entropy)
  * renyi:m      phi(r) = r^m,        f(r) = r^m / (m-1)  for 0 < m <= 2
                 (m = 1 is the logarithmic limit and routes to heat)
  * hilbertian   f = antiderivative of phi, so f' = phi and the induced
                 edge weight is constant (the dual-Sobolev geometry)
  * custom       caller-supplied callables.

Alongside F live the dissipation functional

    I(rho) = 1/2 sum_{x,y} [f'(rho(y)) - f'(rho(x))]
                           [phi(rho(y)) - phi(rho(x))] Q(x,y) pi(x),

nonnegative because f' and phi are both increasing, infinite on the boundary
whenever f'(0) diverges, and the metric gradient of F, the edge function
grad f'(rho).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .chain import MarkovChain, as_values, gradient
from .errors import BoundaryEvaluation, ExponentOutOfRange, NonConvexF

PROBE_GRID = np.logspace(-6.0, 6.0, 256)


@dataclass(frozen=True)
class EntropyPair:
    kind: str
    phi: Callable
    dphi: Callable
    f: Callable
    df: Callable
    d2f: Callable
    m: Optional[float] = None
    df_finite_at_zero: bool = True
    f_continuous_at_zero: bool = True

    @property
    def name(self) -> str:
        if self.kind == "renyi":
            return f"renyi:{self.m:g}"
        if self.kind == "hilbertian":
            return f"hilbertian:{'identity' if self.m is None else f'power:{self.m:g}'}"
        return self.kind


def _validate_pair(pair: EntropyPair) -> EntropyPair:
    phivals = np.asarray(pair.phi(PROBE_GRID), dtype=float)
    if not np.all(np.diff(phivals) > 0.0):
        raise NonConvexF("phi is not strictly increasing on the probe grid")
    fprime = np.asarray(pair.df(PROBE_GRID), dtype=float)
    if not np.all(np.diff(fprime) > 0.0):
        raise NonConvexF("f is not strictly convex on the probe grid")
    return pair


def heat_pair() -> EntropyPair:
    """phi = identity, f = r log r; F is the relative entropy."""

    def f(r):
        r = np.asarray(r, dtype=float)
        return np.where(r > 0.0, r * np.log(np.where(r > 0.0, r, 1.0)), 0.0)

    def df(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(r) + 1.0

    return _validate_pair(
        EntropyPair(
            kind="heat",
            phi=lambda r: np.asarray(r, dtype=float),
            dphi=lambda r: np.ones_like(np.asarray(r, dtype=float)),
            f=f,
            df=df,
            d2f=lambda r: 1.0 / np.asarray(r, dtype=float),
            df_finite_at_zero=False,
        )
    )


def renyi_pair(m: float) -> EntropyPair:
    """phi(r) = r^m, f(r) = r^m/(m-1); m = 1 routes to the heat pair."""
    if not 0.0 < m <= 2.0:
        raise ExponentOutOfRange(f"Renyi exponent must lie in (0, 2], got {m}")
    if m == 1.0:
        return heat_pair()

    def powm(r, e):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            boundary = 0.0 if e > 0 else (1.0 if e == 0 else np.inf)
            return np.where(r > 0.0, np.where(r > 0.0, r, 1.0) ** e, boundary)

    return _validate_pair(
        EntropyPair(
            kind="renyi",
            m=float(m),
            phi=lambda r: powm(r, m),
            dphi=lambda r: m * powm(r, m - 1.0),
            f=lambda r: powm(r, m) / (m - 1.0),
            df=lambda r: m / (m - 1.0) * powm(r, m - 1.0),
            d2f=lambda r: m * powm(r, m - 2.0),
            df_finite_at_zero=m > 1.0,
        )
    )


def hilbertian_pair(phi_kind: str = "identity", m: Optional[float] = None) -> EntropyPair:
    """f = antiderivative of phi, so f' = phi (constant edge weight)."""
    if phi_kind == "identity":

        def phi(r):
            return np.asarray(r, dtype=float)

        def big_phi(r):
            r = np.asarray(r, dtype=float)
            return 0.5 * r * r

        return _validate_pair(
            EntropyPair(
                kind="hilbertian",
                phi=phi,
                dphi=lambda r: np.ones_like(np.asarray(r, dtype=float)),
                f=big_phi,
                df=phi,
                d2f=lambda r: np.ones_like(np.asarray(r, dtype=float)),
            )
        )
    if phi_kind == "power":
        if m is None or not 0.0 < m <= 2.0:
            raise ExponentOutOfRange(f"hilbertian power exponent must lie in (0, 2], got {m}")

        def powm(r, e):
            r = np.asarray(r, dtype=float)
            with np.errstate(divide="ignore"):
                boundary = 0.0 if e > 0 else (1.0 if e == 0 else np.inf)
            return np.where(r > 0.0, np.where(r > 0.0, r, 1.0) ** e, boundary)

        return _validate_pair(
            EntropyPair(
                kind="hilbertian",
                m=float(m),
                phi=lambda r: powm(r, m),
                dphi=lambda r: m * powm(r, m - 1.0),
                f=lambda r: powm(r, m + 1.0) / (m + 1.0),
                df=lambda r: powm(r, m),
                d2f=lambda r: m * powm(r, m - 1.0),
                df_finite_at_zero=True,
            )
        )
    raise ExponentOutOfRange(f"unknown hilbertian phi kind {phi_kind!r}")


def custom_pair(phi, dphi, f, df, d2f, *, df_finite_at_zero=True) -> EntropyPair:
    return _validate_pair(
        EntropyPair(
            kind="custom",
            phi=phi,
            dphi=dphi,
            f=f,
            df=df,
            d2f=d2f,
            df_finite_at_zero=df_finite_at_zero,
        )
    )


def pair_from_name(name: str) -> EntropyPair:
    """Resolve a config name: heat, renyi:<m>, hilbertian:identity,
    hilbertian:power:<m>."""
    if name == "heat":
        return heat_pair()
    if name.startswith("renyi:"):
        return renyi_pair(float(name.split(":", 1)[1]))
    if name.startswith("hilbertian:"):
        rest = name.split(":", 1)[1]
        if rest == "identity":
            return hilbertian_pair("identity")
        if rest.startswith("power:"):
            return hilbertian_pair("power", float(rest.split(":", 1)[1]))
    raise ExponentOutOfRange(f"unknown entropy pair name {name!r}")


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------

def entropy_value(chain: MarkovChain, pair: EntropyPair, rho) -> float:
    """F(rho) = sum_x f(rho(x)) pi(x)."""
    v = as_values(rho)
    if v.min() <= 0.0 and not pair.f_continuous_at_zero:
        raise BoundaryEvaluation("f is not continuous at 0 and rho touches the boundary")
    return float(np.asarray(pair.f(v), dtype=float) @ chain.pi)


def dissipation(chain: MarkovChain, pair: EntropyPair, rho) -> float:
    """Entropy production I(rho); +inf on the boundary when f'(0) diverges."""
    v = as_values(rho)
    if v.min() <= 0.0 and not pair.df_finite_at_zero:
        return math.inf
    fp = np.asarray(pair.df(v), dtype=float)
    ph = np.asarray(pair.phi(v), dtype=float)
    dfp = fp[None, :] - fp[:, None]
    dph = ph[None, :] - ph[:, None]
    terms = np.where(chain.support, dfp * dph * chain.qpi, 0.0)
    return 0.5 * float(terms.sum())


def entropy_gradient(chain: MarkovChain, pair: EntropyPair, rho) -> np.ndarray:
    """Metric gradient of F at interior rho: the edge function grad f'(rho)."""
    v = as_values(rho)
    if v.min() <= 0.0:
        raise BoundaryEvaluation("entropy gradient needs an interior density")
    return gradient(np.asarray(pair.df(v), dtype=float))
