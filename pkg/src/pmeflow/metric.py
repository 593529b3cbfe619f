"""Nonlocal transport metric: action, distance solver, geodesics.

The squared distance between two densities is the infimum of the path
action over solutions of the discrete continuity equation.  Discretized on
K uniform time intervals in momentum form it becomes

    minimize   sum_k dt * sum_e w_e V[k,e]^2 / theta(rbar_k(u_e), rbar_k(v_e))
    subject to rho_{k+1} = rho_k - dt * (D V_k),   rho_0 and rho_K fixed,
               rho_k >= 0,

with rbar_k the interval midpoint density, w_e = Q(u,v) pi(u) the symmetric
edge weight and D the rate-weighted incidence map.  Since (v, s) -> v^2/s is
jointly convex and nonincreasing in s while theta is concave, the program is
jointly convex, so the first-order method below finds the global optimum.

Solver: interior-point continuation around a diagonally preconditioned
accelerated projected descent.  Continuity is eliminated exactly (rho is an
affine function of V); the remaining endpoint constraint is affine and is
enforced by an exact projection (one bordered linear solve per step,
factorized once).  Positivity can be active at the optimum (the action
alone does not repel the boundary for every weight), so each solve walks a
decreasing ladder of log-barrier strengths, finishing with a barrier-free
polish whose value error is negligible against the stall tolerance.
Initialization is the linear-interpolation path with the constant momentum
field solving D V = rho_0 - rho_1, which is the exact discrete optimum for
the constant weight (that is how the constant-weight metric reproduces the
dual-Sobolev distance at machine precision).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from . import kernels
from .chain import MarkovChain, as_values, gradient, inner_rho
from .errors import (
    InfeasibleEndpoints,
    InvalidDensity,
    LeftInterior,
    NonConvergence,
    StepFailure,
)
from .weights import WeightFunction
from . import _rk45

MASS_MATCH_TOL = 1e-10


def action(chain: MarkovChain, theta: WeightFunction, rho, psi) -> float:
    """A(rho, psi) = ||grad psi||^2_rho, the instantaneous action."""
    g = gradient(np.asarray(psi, dtype=float))
    return inner_rho(chain, theta, rho, g, g)


@dataclass
class DistanceOptions:
    max_iter: int = 100_000
    stall_tol: float = 1e-9
    stall_window: int = 60
    step_tol: float = 1e-11
    feas_tol: float = 1e-8
    pos_floor: float = 1e-11


@dataclass
class TransportPath:
    """Discrete action-minimizing path: densities at time nodes, edge
    momenta per interval, and solve diagnostics."""

    times: np.ndarray
    densities: np.ndarray  # (K+1, n)
    momenta: np.ndarray  # (K, E) flux along canonical edges u -> v
    edge_u: np.ndarray
    edge_v: np.ndarray
    action: float
    iterations: int
    feas_residual: float
    converged: bool

    @property
    def n_steps(self) -> int:
        return self.momenta.shape[0]

    def momenta_matrices(self) -> np.ndarray:
        """Momenta as antisymmetric (K, n, n) edge functions."""
        k, n = self.n_steps, self.densities.shape[1]
        out = np.zeros((k, n, n))
        out[:, self.edge_u, self.edge_v] = self.momenta
        out[:, self.edge_v, self.edge_u] = -self.momenta
        return out


class _Workspace:
    """Precomputed geometry and buffers for one (chain, theta, K) problem."""

    def __init__(self, chain, theta, rho0, rho1, n_steps):
        if n_steps < 4:
            raise ValueError(f"need at least 4 time steps, got {n_steps}")
        self.chain = chain
        self.theta = theta
        self.K = int(n_steps)
        self.dt = 1.0 / self.K
        r0 = as_values(rho0).astype(float)
        r1 = as_values(rho1).astype(float)
        if r0.shape != (chain.n,) or r1.shape != (chain.n,):
            raise InvalidDensity("endpoint shape mismatch")
        if min(r0.min(), r1.min()) < -MASS_MATCH_TOL:
            raise InvalidDensity("negative endpoint density")
        m0 = float(r0 @ chain.pi)
        m1 = float(r1 @ chain.pi)
        if abs(m0 - m1) > MASS_MATCH_TOL:
            raise InfeasibleEndpoints(f"pi-masses differ: {m0!r} vs {m1!r}")
        if abs(m0 - 1.0) > MASS_MATCH_TOL:
            raise InvalidDensity(f"endpoints are not probability densities (mass {m0!r})")
        self.rho0 = np.maximum(r0, 0.0)
        self.rho1 = np.maximum(r1, 0.0)

        self.eu = chain.edge_u
        self.ev = chain.edge_v
        self.w = chain.edge_w
        self.D = chain.incidence
        self.n = chain.n
        self.E = chain.n_edges

        if theta.kind in ("power", "log"):
            self.theta_code = "power"
            self.m = 1.0 if theta.kind == "log" else theta.m
        elif theta.kind == "one":
            self.theta_code = "one"
            self.m = 0.0
        else:
            self.theta_code = "generic"
            self.m = 0.0

        # linear-interpolation initial path and its momentum field
        u = chain.poisson_solve(self.rho0 - self.rho1)
        self.v_star = u[self.ev] - u[self.eu]
        ts = np.linspace(0.0, 1.0, self.K + 1)[:, None]
        path = (1.0 - ts) * self.rho0[None, :] + ts * self.rho1[None, :]
        rbar = 0.5 * (path[:-1] + path[1:])
        th_init = np.asarray(
            theta.value(rbar[:, self.eu], rbar[:, self.ev]), dtype=float
        )
        theta_bar = th_init.mean(axis=0)
        self.M = self.w / np.maximum(theta_bar, 1e-30)

        a = self.K * (self.D * (1.0 / self.M)[None, :]) @ self.D.T
        bord = np.zeros((self.n + 1, self.n + 1))
        bord[: self.n, : self.n] = a
        bord[: self.n, self.n] = chain.pi
        bord[self.n, : self.n] = chain.pi
        self.bord_lu = scipy.linalg.lu_factor(bord)
        self.g = self.K * (self.rho0 - self.rho1)

        self.gV = np.zeros((self.K, self.E))
        self.gRho = np.zeros((self.K + 1, self.n))

    # -- geometry -----------------------------------------------------------

    def project(self, V: np.ndarray) -> np.ndarray:
        r = self.D @ V.sum(axis=0) - self.g
        lam = scipy.linalg.lu_solve(self.bord_lu, np.concatenate([r, [0.0]]))[: self.n]
        return V - ((self.D.T @ lam) / self.M)[None, :]

    def rho_of(self, V: np.ndarray) -> np.ndarray:
        div = V @ self.D.T
        rho = np.empty((self.K + 1, self.n))
        rho[0] = self.rho0
        rho[1:] = self.rho0[None, :] - self.dt * np.cumsum(div, axis=0)
        return rho

    def min_interior(self, rho: np.ndarray) -> float:
        return float(rho[1 : self.K].min())

    def norm_m2(self, dV: np.ndarray) -> float:
        return float((self.M * dV * dV).sum())

    # -- objective ----------------------------------------------------------

    def cost_grad(self, V, rho, mu: float = 0.0):
        # chain rule: dF/dV_j = gV_j - dt D^T sum_{i > j} gRho_i, where the
        # sum runs over every density row that moves with V (rows 1..K; the
        # endpoint row K is a function of V too, its fixedness is enforced
        # by the affine projection, not by dropping the term).  mu > 0 adds
        # the interior-point barrier -mu sum log rho over the free rows.
        interior = rho[1 : self.K]
        if mu > 0.0 and interior.min() <= 0.0:
            return math.inf, None
        cost = self._kernel(V, rho)
        if not math.isfinite(cost):
            return cost, None
        gV = self.gV.copy()
        if mu > 0.0:
            cost -= mu * float(np.log(interior).sum())
            self.gRho[1 : self.K] -= mu / interior
        trailing = np.cumsum(self.gRho[self.K : 0 : -1], axis=0)[::-1]
        gV += -self.dt * (trailing @ self.D)
        return cost, gV

    def cost_only(self, V, rho, mu: float = 0.0):
        interior = rho[1 : self.K]
        if mu > 0.0 and interior.min() <= 0.0:
            return math.inf
        cost = self._kernel(V, rho)
        if mu > 0.0 and math.isfinite(cost):
            cost -= mu * float(np.log(interior).sum())
        return cost

    def _kernel(self, V, rho):
        if self.theta_code == "power":
            return kernels.bb_cost_grad_power(
                V, rho, self.w, self.eu, self.ev, self.dt, self.m, self.gV, self.gRho
            )
        if self.theta_code == "one":
            self.gV[:, :] = 2.0 * self.dt * self.w * V
            self.gRho[:, :] = 0.0
            return self.dt * float((self.w * V * V).sum())
        rbar = 0.5 * (rho[:-1] + rho[1:])
        th, d1, d2 = self.theta.value_d1_d2(rbar[:, self.eu], rbar[:, self.ev])
        return kernels.bb_cost_grad_generic(
            V,
            np.ascontiguousarray(th),
            np.ascontiguousarray(d1),
            np.ascontiguousarray(d2),
            self.w,
            self.eu,
            self.ev,
            self.dt,
            self.gV,
            self.gRho,
        )


def _fista_stage(ws, v0, mu, floor, lip, stall_abs, step_tol, max_iter, window_len):
    """Accelerated projected descent on F + barrier(mu) from v0.

    Returns (best iterate, Lipschitz estimate, iterations used, converged).
    Gradient restart, monotone bookkeeping via the best iterate, Armijo
    backtracking on the Lipschitz estimate; trial points with infinite cost
    (boundary crossing, vanishing weight under momentum) count as failed
    backtracking steps."""
    x = v0
    fx = ws.cost_only(x, ws.rho_of(x), mu)
    if not math.isfinite(fx):
        return x, lip, 0, False
    y = x.copy()
    t_mom = 1.0
    best_f, best_v = fx, x.copy()
    window = []
    iterations = 0
    while iterations < max_iter:
        iterations += 1
        fy, gy = ws.cost_grad(y, ws.rho_of(y), mu)
        if gy is None:
            # extrapolation left the finite-cost region: restart from x
            y = x.copy()
            t_mom = 1.0
            fy, gy = ws.cost_grad(y, ws.rho_of(y), mu)
            if gy is None:
                break
        accepted = False
        for _ in range(90):
            x_new = ws.project(y - gy / (lip * ws.M)[None, :])
            d = x_new - y
            rho_new = ws.rho_of(x_new)
            if mu <= 0.0 and ws.min_interior(rho_new) < floor:
                lip *= 2.0
                continue
            f_new = ws.cost_only(x_new, rho_new, mu)
            if not math.isfinite(f_new):
                lip *= 2.0
                continue
            quad = fy + float((gy * d).sum()) + 0.5 * lip * ws.norm_m2(d)
            if f_new <= quad + 1e-12 * (1.0 + abs(fy)):
                accepted = True
                break
            lip *= 2.0
        if not accepted:
            if t_mom > 1.0:
                y = x.copy()
                t_mom = 1.0
                lip = max(lip / 256.0, 1e-12)
                continue
            # no descent step resolvable in floating point
            return best_v, lip, iterations, True

        step_sq = ws.norm_m2(x_new - x)
        restart = float((gy * (x_new - x)).sum()) > 0.0
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
        if restart:
            y = x_new.copy()
            t_mom = 1.0
        else:
            y = x_new + ((t_mom - 1.0) / t_new) * (x_new - x)
            t_mom = t_new
        x, fx = x_new, f_new
        lip = max(lip * 0.9, 1e-12)

        if fx < best_f:
            best_f, best_v = fx, x.copy()
        window.append(best_f)
        if len(window) > window_len:
            window.pop(0)
            if window[0] - window[-1] <= stall_abs:
                return best_v, lip, iterations, True
        if step_sq <= step_tol**2 * (1.0 + ws.norm_m2(x)):
            return best_v, lip, iterations, True
    return best_v, lip, iterations, False


def distance(
    chain: MarkovChain,
    theta: WeightFunction,
    rho0,
    rho1,
    n_steps: int = 16,
    options: Optional[DistanceOptions] = None,
):
    """Transport distance between two densities.

    Returns (value, TransportPath).  The value is sqrt of the minimized
    action; the optimizer is the global one up to the stall tolerance since
    the program is convex.
    """
    opts = options or DistanceOptions()
    ws = _Workspace(chain, theta, rho0, rho1, n_steps)
    K = ws.K

    v = ws.project(np.tile(ws.v_star, (K, 1)))
    rho = ws.rho_of(v)
    floor = min(opts.pos_floor, max(0.0, 0.5 * ws.min_interior(rho)))
    f_plain = ws.cost_only(v, rho)
    if not math.isfinite(f_plain):
        raise InfeasibleEndpoints(
            "initial path carries momentum across a vanishing weight"
        )

    # Interior-point continuation: the positivity constraint can be active
    # at the optimum (the action alone does not repel the boundary for
    # every weight), so minimize F - mu sum log rho for a decreasing
    # barrier ladder.  The value error of the final stage is about
    # mu * (K-1) * n, kept well below the optimality tolerance.  A path
    # that starts on the boundary (zeros shared by both endpoints) skips
    # the barrier and relies on step rejection alone.
    n_free = max((K - 1) * ws.n, 1)
    scale = 1.0 + abs(f_plain)
    if ws.min_interior(rho) > 0.0 and ws.theta_code != "one":
        mu_levels = [scale * 10.0**e / n_free for e in range(-2, -10, -1)]
        mu_levels.append(0.0)
    else:
        # constant weight: the initial linear path is already the discrete
        # optimum; boundary-touching starts rely on step rejection alone
        mu_levels = [0.0]

    lip = 1.0
    iterations = 0
    converged = False
    for mu in mu_levels:
        budget = opts.max_iter - iterations
        if budget <= 0:
            break
        stall = max(opts.stall_tol * scale, 0.02 * mu * n_free)
        v, lip, its, stage_conv = _fista_stage(
            ws, v, mu, floor, lip, stall, opts.step_tol, budget, opts.stall_window
        )
        iterations += its
        converged = stage_conv

    if not converged and iterations >= opts.max_iter:
        raise NonConvergence(f"iteration cap {opts.max_iter} reached")

    rho_best = ws.rho_of(v)
    f_best = ws.cost_only(v, rho_best)
    v_best = v
    feas = float(np.abs(rho_best[-1] - ws.rho1).max())
    if feas > opts.feas_tol:
        raise NonConvergence(f"endpoint feasibility residual {feas:g}")
    rho_best[-1] = ws.rho1
    path = TransportPath(
        times=np.linspace(0.0, 1.0, K + 1),
        densities=rho_best,
        momenta=v_best,
        edge_u=ws.eu,
        edge_v=ws.ev,
        action=f_best,
        iterations=iterations,
        feas_residual=feas,
        converged=converged,
    )
    return math.sqrt(max(f_best, 0.0)), path


def continuity_residual(chain: MarkovChain, path: TransportPath) -> float:
    """Max violation of (rho_{k+1}-rho_k)/dt + div V_k = 0 (diagnostic)."""
    dt = path.times[1] - path.times[0]
    div = path.momenta @ chain.incidence.T
    res = (path.densities[1:] - path.densities[:-1]) / dt + div
    return float(np.abs(res).max())


def recover_potentials(chain: MarkovChain, theta: WeightFunction, path: TransportPath):
    """Per-interval potentials psi_k with rhohat grad psi ~ V (weighted LS).

    Solved on edges whose weight rhohat * w exceeds 1e-12 of the maximum;
    the potential is defined up to a constant (pi-mean zero is returned).
    """
    K, n = path.n_steps, path.densities.shape[1]
    eu, ev, w = path.edge_u, path.edge_v, chain.edge_w
    out = np.zeros((K, n))
    rbar = 0.5 * (path.densities[:-1] + path.densities[1:])
    for k in range(K):
        th = np.asarray(theta.value(rbar[k, eu], rbar[k, ev]), dtype=float)
        wk = w * th
        keep = wk > 1e-12 * max(wk.max(), 1e-300)
        lap = np.zeros((n, n))
        rhs = np.zeros(n)
        for e in np.nonzero(keep)[0]:
            a, b = eu[e], ev[e]
            lap[a, a] += wk[e]
            lap[b, b] += wk[e]
            lap[a, b] -= wk[e]
            lap[b, a] -= wk[e]
            rhs[b] += w[e] * path.momenta[k, e]
            rhs[a] -= w[e] * path.momenta[k, e]
        psi, *_ = np.linalg.lstsq(lap, rhs, rcond=None)
        out[k] = psi - float(chain.pi @ psi)
    return out


def action_hvp_min(
    chain: MarkovChain,
    theta: WeightFunction,
    path: TransportPath,
    n_probes: int = 5,
    seed: int = 0,
    eps: float = 1e-6,
) -> float:
    """Minimum Rayleigh quotient of Hessian-vector products of the
    discretized objective at the solved path (convexity certificate)."""
    ws = _Workspace(chain, theta, path.densities[0], path.densities[-1], path.n_steps)
    v = path.momenta
    rng = np.random.default_rng(seed)
    worst = math.inf
    scale = math.sqrt(ws.norm_m2(v)) + 1.0
    for _ in range(n_probes):
        d = rng.standard_normal(v.shape)
        d /= math.sqrt(float((d * d).sum()))
        _, gp = ws.cost_grad(v + eps * scale * d, ws.rho_of(v + eps * scale * d))
        _, gm = ws.cost_grad(v - eps * scale * d, ws.rho_of(v - eps * scale * d))
        if gp is None or gm is None:
            continue
        hvp = (gp - gm) / (2.0 * eps * scale)
        worst = min(worst, float((hvp * d).sum()))
    return worst


# ---------------------------------------------------------------------------
# geodesics
# ---------------------------------------------------------------------------

@dataclass
class GeodesicPath:
    times: np.ndarray
    densities: np.ndarray  # (T, n)
    potentials: np.ndarray  # (T, n)
    action_values: np.ndarray  # (T,)


def geodesic_shoot(
    chain: MarkovChain,
    theta: WeightFunction,
    rho0,
    psi0,
    t_end: float,
    *,
    samples: int = 33,
    interior_floor: float = 1e-9,
    rtol: float = 1e-9,
    atol: float = 1e-12,
) -> GeodesicPath:
    """Integrate the coupled geodesic equations from (rho0, psi0).

        d rho(x)/dt = - sum_y (psi(y) - psi(x)) theta(rho(x), rho(y)) Q(x,y)
        d psi(x)/dt = - 1/2 sum_y (psi(x) - psi(y))^2
                          d_1 theta(rho(x), rho(y)) Q(x,y)

    The action is constant along the exact solution (constant-speed
    property); LeftInterior is raised if the density reaches the floor."""
    rho0 = as_values(rho0).astype(float)
    psi0 = np.asarray(psi0, dtype=float)
    n = chain.n
    if rho0.min() <= interior_floor:
        raise LeftInterior("initial density is not interior")
    q = chain.q
    support = chain.support

    def rhs(t, y):
        rho, psi = y[:n], y[n:]
        rx = np.broadcast_to(rho[:, None], (n, n))
        ry = np.broadcast_to(rho[None, :], (n, n))
        th, d1, _ = theta.value_d1_d2(rx, ry)
        g = psi[None, :] - psi[:, None]
        drho = -np.where(support, g * th * q, 0.0).sum(axis=1)
        dpsi = -0.5 * np.where(support, g * g * d1 * q, 0.0).sum(axis=1)
        return np.concatenate([drho, dpsi])

    last_reject_at_boundary = [False]

    def reject(y):
        hit = bool(y[:n].min() <= interior_floor)
        last_reject_at_boundary[0] = hit
        return hit

    t_eval = np.linspace(0.0, t_end, samples)
    try:
        times, ys = _rk45.integrate(
            rhs, np.concatenate([rho0, psi0]), t_eval, rtol=rtol, atol=atol, reject=reject
        )
    except StepFailure as exc:
        # step collapse while pinned at the floor: the solution is leaving
        # the interior, not merely overshooting on a trial step
        if last_reject_at_boundary[0]:
            raise LeftInterior("geodesic reached the boundary of the simplex") from exc
        raise
    dens = ys[:, :n]
    pots = ys[:, n:]
    acts = np.array([action(chain, theta, dens[i], pots[i]) for i in range(len(times))])
    return GeodesicPath(times=times, densities=dens, potentials=pots, action_values=acts)
