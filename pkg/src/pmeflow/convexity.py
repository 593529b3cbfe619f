"""Entropy Hessian along transport geodesics and its consequences.

The second derivative of the entropy F along a geodesic through an interior
density rho with initial potential psi is an explicit quadratic form

    B(rho, psi) = 1/2 < Dhat_phi rho . grad psi, grad psi >_pi
                  - < rhohat . grad psi, grad(phi'(rho) Delta psi) >_pi,

    Dhat_phi rho(x,y) = d1 theta(rho(x), rho(y)) Delta phi(rho)(x)
                      + d2 theta(rho(x), rho(y)) Delta phi(rho)(y).

Two independent evaluation routes are kept: this compact two-term form
(dense matrix algebra) and the literal expanded triple sum over states (a
kernel); they agree to 1e-10 and one cross-checks the other.

The geodesic-convexity constant of the chain is

    kappa = inf over interior rho of  min_psi  B(rho, psi) / A(rho, psi),

approached from above by a multistart search over the simplex (generalized
eigenvalue problems in psi, Nelder-Mead descent in rho).  On the two-point
chain the constant reduces to a one-variable infimum with a closed-form
integrand, gridded exhaustively.  The module also reproduces the discrete
circle configuration on which quadratic-entropy convexity fails, and checks
the entropy-distance-dissipation (FWI), entropy-dissipation (EDI) and flow
contraction inequalities that a curvature bound implies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.optimize

from .chain import MarkovChain, as_values, cycle_chain, gradient, ip_edge, uniform_density
from .entropy import EntropyPair, dissipation, entropy_value, renyi_pair
from .errors import BoundaryEvaluation
from .flow import solve_pme
from .metric import action, distance
from .weights import WeightFunction, theta_from_pair, theta_power
from . import kernels


def _interior_values(rho, n):
    v = as_values(rho)
    if v.shape != (n,):
        raise BoundaryEvaluation(f"density has shape {v.shape}, expected ({n},)")
    if v.min() <= 0.0:
        raise BoundaryEvaluation("Hessian form needs an interior density")
    return v


def _masked_theta(chain, theta, v):
    rx = np.broadcast_to(v[:, None], (chain.n, chain.n))
    ry = np.broadcast_to(v[None, :], (chain.n, chain.n))
    th, d1, d2 = theta.value_d1_d2(rx, ry)
    z = np.zeros_like(th)
    m = chain.support
    return np.where(m, th, z), np.where(m, d1, z), np.where(m, d2, z)


def hessian_form(chain, pair, theta, rho, psi) -> float:
    """Compact two-term evaluation of B(rho, psi)."""
    v = _interior_values(rho, chain.n)
    psi = np.asarray(psi, dtype=float)
    th, d1, d2 = _masked_theta(chain, theta, v)
    dphi_rho = chain.q @ np.asarray(pair.phi(v), dtype=float)
    dhat = d1 * dphi_rho[:, None] + d2 * dphi_rho[None, :]
    g = gradient(psi)
    term1 = 0.5 * ip_edge(chain, dhat * g, g)
    h = np.asarray(pair.dphi(v), dtype=float) * (chain.q @ psi)
    term2 = ip_edge(chain, th * g, gradient(h))
    return term1 - term2


def hessian_form_expanded(chain, pair, theta, rho, psi) -> float:
    """Independent evaluation of B as the literal triple sum over states."""
    v = _interior_values(rho, chain.n)
    psi = np.ascontiguousarray(psi, dtype=float)
    th, d1, d2 = _masked_theta(chain, theta, v)
    return kernels.bform_triple(
        psi,
        np.ascontiguousarray(chain.q),
        np.ascontiguousarray(chain.pi),
        np.ascontiguousarray(pair.phi(v), dtype=float),
        np.ascontiguousarray(pair.dphi(v), dtype=float),
        np.ascontiguousarray(th),
        np.ascontiguousarray(d1),
        np.ascontiguousarray(d2),
    )


def hessian_matrices(chain, pair, theta, rho):
    """(B, A) as symmetric quadratic-form matrices in psi.

    A is the weighted graph Laplacian of rhohat Q pi (PSD, kernel = the
    constants for interior rho on an irreducible chain)."""
    v = _interior_values(rho, chain.n)
    th, d1, d2 = _masked_theta(chain, theta, v)
    dphi_rho = chain.q @ np.asarray(pair.phi(v), dtype=float)
    dhat = d1 * dphi_rho[:, None] + d2 * dphi_rho[None, :]

    w1 = dhat * chain.qpi
    l_w1 = np.diag(w1.sum(axis=1)) - w1
    w = th * chain.qpi
    a_mat = np.diag(w.sum(axis=1)) - w
    m2 = a_mat @ (np.asarray(pair.dphi(v), dtype=float)[:, None] * chain.q)
    b_raw = 0.5 * l_w1 - m2
    b_mat = 0.5 * (b_raw + b_raw.T)
    return b_mat, 0.5 * (a_mat + a_mat.T)


def _complement_basis(n: int) -> np.ndarray:
    """Orthonormal basis of the complement of the constant vector."""
    v = np.full(n, 1.0 / math.sqrt(n))
    w = v.copy()
    w[0] -= 1.0
    w /= np.linalg.norm(w)
    h = np.eye(n) - 2.0 * np.outer(w, w)
    return h[:, 1:]


def rayleigh_min(b_mat, a_mat, *, return_vector=False, rel_cut=1e-12):
    """Smallest generalized eigenvalue of (B, A) on non-constant potentials.

    A is reduced to the complement of the constants, then near-kernel
    directions (edges with vanishing weight) are dropped before the
    Cholesky-style reduction of the pencil."""
    n = b_mat.shape[0]
    u = _complement_basis(n)
    a_r = u.T @ a_mat @ u
    b_r = u.T @ b_mat @ u
    vals, vecs = np.linalg.eigh(a_r)
    keep = vals > rel_cut * max(vals.max(), 1e-300)
    if not keep.any():
        return (math.inf, np.zeros(n)) if return_vector else math.inf
    t = vecs[:, keep] / np.sqrt(vals[keep])[None, :]
    c = t.T @ b_r @ t
    c = 0.5 * (c + c.T)
    evals, evecs = np.linalg.eigh(c)
    lam = float(evals[0])
    if not return_vector:
        return lam
    psi = u @ (t @ evecs[:, 0])
    return lam, psi


def lambda_min(chain, pair, theta, rho, *, return_vector=False):
    """min_psi B(rho, psi)/A(rho, psi) over non-constant psi."""
    b_mat, a_mat = hessian_matrices(chain, pair, theta, rho)
    return rayleigh_min(b_mat, a_mat, return_vector=return_vector)


@dataclass
class HessianReport:
    """Quadratic forms at one density and their smallest relative eigenvalue."""

    rho: np.ndarray
    b_matrix: np.ndarray
    a_matrix: np.ndarray
    lambda_min: float
    psi_min: np.ndarray


def hessian_report(chain, pair, theta, rho) -> HessianReport:
    b_mat, a_mat = hessian_matrices(chain, pair, theta, rho)
    lam, psi = rayleigh_min(b_mat, a_mat, return_vector=True)
    return HessianReport(
        rho=as_values(rho).copy(), b_matrix=b_mat, a_matrix=a_mat,
        lambda_min=lam, psi_min=psi,
    )


# ---------------------------------------------------------------------------
# kappa search
# ---------------------------------------------------------------------------

@dataclass
class KappaStart:
    origin: str
    value: float
    rho: np.ndarray


@dataclass
class KappaEstimate:
    value: float
    rho: np.ndarray
    psi: np.ndarray
    starts: list = field(default_factory=list)
    converged: bool = True


def kappa_estimate(
    chain: MarkovChain,
    pair: EntropyPair,
    theta: WeightFunction,
    *,
    seed: int,
    starts: int = 64,
    refine: int = 6,
    nm_maxiter: Optional[int] = None,
) -> KappaEstimate:
    """Upper bound on the geodesic-convexity constant by direct search.

    Candidate densities: the uniform one, Dirichlet-random interior points,
    and near-vertex spikes (mass 1-eps at one state); the best few are
    polished by Nelder-Mead in logit coordinates.  The returned value is the
    smallest Rayleigh quotient found, which converges to kappa from above as
    the search refines."""
    n = chain.n
    rng = np.random.default_rng(seed)
    cands = [("uniform", np.ones(n))]
    n_random = max(0, starts - 1 - 3 * n)
    for _ in range(n_random):
        mu = rng.dirichlet(np.ones(n))
        cands.append(("dirichlet", mu / chain.pi))
    for x in range(n):
        for level in (1e-2, 1e-3, 1e-4):
            mu = np.full(n, level / n)
            mu[x] = 1.0 - (n - 1) * level / n
            cands.append((f"vertex:{x}", mu / chain.pi))

    best = KappaEstimate(value=math.inf, rho=np.ones(n), psi=np.zeros(n))
    evaluated = []

    def consider(origin, rho_v):
        lam, psi = lambda_min(chain, pair, theta, rho_v, return_vector=True)
        evaluated.append(KappaStart(origin=origin, value=lam, rho=rho_v.copy()))
        if lam < best.value:
            best.value = lam
            best.rho = rho_v.copy()
            best.psi = psi
        return lam

    for origin, rho_v in cands:
        consider(origin, rho_v)

    order = np.argsort([s.value for s in evaluated])
    tops = [evaluated[i] for i in order[: max(1, refine)]]
    maxiter = nm_maxiter or 250 * (n + 1)
    all_converged = True
    for idx, start in enumerate(tops):
        z0 = np.log(np.maximum(start.rho, 1e-300))

        def obj(z):
            z = z - z.max()
            e = np.exp(z)
            rho_v = e / float(chain.pi @ e)
            return consider(f"nm:{idx}", rho_v)

        res = scipy.optimize.minimize(
            obj,
            z0,
            method="Nelder-Mead",
            options={"maxiter": maxiter, "xatol": 1e-8, "fatol": 1e-10},
        )
        all_converged = all_converged and bool(res.success)

    best.starts = evaluated
    best.converged = all_converged
    return best


def _golden(f, a, b, tol=1e-10, iters=200):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


@dataclass
class TwoPointKappa:
    value: float
    alpha: float
    at_boundary: bool


def two_point_kappa(p: float, q: float, pair: EntropyPair) -> TwoPointKappa:
    """Closed-form two-point convexity constant

        kappa = 1/2 inf over alpha in (-1,1) of
            p phi'(r) + q phi'(s) + theta(r,s) (p f''(r) + q f''(s)),

    with r = (p+q)(1-alpha)/(2q), s = (p+q)(1+alpha)/(2p): the interior
    densities of the two-point chain.  The infimum is evaluated on a dense
    grid (1e5 points) with golden-section refinement; whether it is attained
    inside or at the boundary limit is reported."""
    theta = theta_from_pair(pair)

    def integrand(alpha):
        alpha = np.asarray(alpha, dtype=float)
        r = (p + q) * (1.0 - alpha) / (2.0 * q)
        s = (p + q) * (1.0 + alpha) / (2.0 * p)
        th = theta.value(r, s)
        val = (
            p * np.asarray(pair.dphi(r), dtype=float)
            + q * np.asarray(pair.dphi(s), dtype=float)
            + th * (p * np.asarray(pair.d2f(r), dtype=float)
                    + q * np.asarray(pair.d2f(s), dtype=float))
        )
        return 0.5 * val

    edge = 1.0 - 1e-9
    grid = np.linspace(-edge, edge, 100_001)
    vals = integrand(grid)
    i = int(np.nanargmin(vals))
    lo = grid[max(0, i - 1)]
    hi = grid[min(len(grid) - 1, i + 1)]
    alpha, value = _golden(lambda a: float(integrand(a)), lo, hi, tol=1e-12)
    at_boundary = i <= 1 or i >= len(grid) - 2
    return TwoPointKappa(value=float(value), alpha=float(alpha), at_boundary=at_boundary)


# ---------------------------------------------------------------------------
# the discrete-circle configuration where convexity fails
# ---------------------------------------------------------------------------

@dataclass
class CircleCounterexample:
    n: int
    q: float
    eps: float
    a_value: float
    b_value: float
    ratio: float


def circle_counterexample(n: int, q: float = 1.0, eps: float = 1e-4) -> CircleCounterexample:
    """Quadratic entropy on the circle of length n >= 6: the test
    configuration with a single near-vertex density and a two-level
    potential, on which B is strongly negative while A stays order one."""
    if n < 6:
        raise ValueError(f"need n >= 6, got {n}")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    chain = cycle_chain(n, q)
    psi = np.full(n, 2.0)
    psi[0] = 0.0
    psi[1] = 1.0
    psi[-1] = 0.0
    rho = np.full(n, eps)
    rho[1] = n - (n - 1) * eps
    pair = renyi_pair(2.0)
    theta = theta_power(2.0)
    a_val = action(chain, theta, rho, psi)
    b_val = hessian_form(chain, pair, theta, rho, psi)
    return CircleCounterexample(
        n=n, q=q, eps=eps, a_value=a_val, b_value=b_val, ratio=b_val / a_val
    )


# ---------------------------------------------------------------------------
# functional inequalities and contraction
# ---------------------------------------------------------------------------

def check_fwi(
    chain, pair, theta, rho, kappa, *, n_steps: int = 16, w_value: Optional[float] = None
) -> float:
    """Left minus right of the entropy/distance/dissipation inequality

        F(rho) - F(1) <= W(rho, 1) sqrt(I(rho)) - kappa/2 W(rho, 1)^2.

    Nonpositive means the inequality holds at rho."""
    ones = uniform_density(chain)
    if w_value is None:
        w_value, _ = distance(chain, theta, rho, ones, n_steps)
    f_gap = entropy_value(chain, pair, rho) - entropy_value(chain, pair, ones)
    i_val = dissipation(chain, pair, rho)
    rhs = w_value * math.sqrt(i_val) - 0.5 * kappa * w_value**2 if math.isfinite(i_val) else math.inf
    return f_gap - rhs


def check_edi(chain, pair, rho, lam: float) -> float:
    """Left minus right of F(rho) - F(1) <= I(rho) / (2 lambda), lambda > 0."""
    if lam <= 0.0:
        raise ValueError(f"EDI constant must be positive, got {lam}")
    ones = uniform_density(chain)
    f_gap = entropy_value(chain, pair, rho) - entropy_value(chain, pair, ones)
    i_val = dissipation(chain, pair, rho)
    return f_gap - (i_val / (2.0 * lam) if math.isfinite(i_val) else math.inf)


def contraction_check(
    chain, pair, theta, rho0, sigma0, kappa, t_grid, *, n_steps: int = 16, rtol=1e-9, atol=1e-11
):
    """W(rho_t, sigma_t) - exp(-kappa t) W(rho_0, sigma_0) at the given times.

    Nonpositive (within twice the solver tolerance) verifies the contraction
    property of the flow at rate kappa."""
    t_grid = np.asarray(t_grid, dtype=float)
    t_eval = np.concatenate([[0.0], t_grid])
    tr_rho = solve_pme(chain, pair, rho0, float(t_grid[-1]), t_eval=t_eval, rtol=rtol, atol=atol)
    tr_sig = solve_pme(chain, pair, sigma0, float(t_grid[-1]), t_eval=t_eval, rtol=rtol, atol=atol)
    w0, _ = distance(chain, theta, tr_rho.states[0], tr_sig.states[0], n_steps)
    res = np.empty(len(t_grid))
    for i, t in enumerate(t_grid):
        wt, _ = distance(chain, theta, tr_rho.states[i + 1], tr_sig.states[i + 1], n_steps)
        res[i] = wt - math.exp(-kappa * t) * w0
    return t_grid, res
