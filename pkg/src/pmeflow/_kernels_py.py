"""Pure-numpy implementations of the hot kernels.

Same call signatures as the compiled extension ``pmeflow._kernels``; the
package selects whichever is importable (see ``pmeflow.kernels``).

Kernels:
  * ``bb_cost_grad_power`` / ``bb_cost_grad_generic`` -- one objective and
    gradient evaluation of the time-discretized transport action
        sum_k dt * sum_e w_e V[k,e]^2 / theta(rbar_k(u_e), rbar_k(v_e)),
    with rbar_k = (rho_k + rho_{k+1})/2.  Writes d(cost)/dV into gV and
    d(cost)/d(rho_k) into gRho (all K+1 rows; the caller discards the fixed
    endpoint rows).  Returns the cost, +inf if some edge carries momentum
    across a vanishing weight (the convex lower-semicontinuous convention:
    0^2/0 = 0, v^2/0 = +inf).
  * ``bform_triple`` -- the entropy Hessian quadratic form evaluated as a
    literal triple sum over states, an independent numerical route used to
    cross-check the compact two-term evaluation.
"""

from __future__ import annotations

import numpy as np

from .weights import power_theta_with_derivs

_THETA_TINY = 1e-300
_V_TINY = 1e-300


def _accumulate(V, th, d1, d2, w, eu, ev, dt, gV, gRho):
    K, E = V.shape
    n = gRho.shape[1]
    bad = th <= _THETA_TINY
    if bad.any() and np.any(np.abs(V[bad]) > _V_TINY):
        return np.inf
    th_safe = np.where(bad, 1.0, th)
    ratio = np.where(bad, 0.0, V / th_safe)
    cost = dt * float((w * V * ratio).sum())

    gV[:, :] = 2.0 * dt * w * ratio
    coeff = -dt * w * ratio * ratio
    d1 = np.where(np.isfinite(d1), d1, 0.0)
    d2 = np.where(np.isfinite(d2), d2, 0.0)
    rows = (np.arange(K)[:, None] * n).repeat(E, axis=1)
    idx_u = (rows + eu[None, :]).ravel()
    idx_v = (rows + ev[None, :]).ravel()
    acc = np.bincount(idx_u, weights=(coeff * d1).ravel(), minlength=K * n)
    acc += np.bincount(idx_v, weights=(coeff * d2).ravel(), minlength=K * n)
    acc = acc.reshape(K, n)
    gRho[:, :] = 0.0
    gRho[:-1] += 0.5 * acc
    gRho[1:] += 0.5 * acc
    return cost


def bb_cost_grad_power(V, rho, w, eu, ev, dt, m, gV, gRho):
    rbar = 0.5 * (rho[:-1] + rho[1:])
    th, d1, d2 = power_theta_with_derivs(m, rbar[:, eu], rbar[:, ev])
    return _accumulate(V, th, d1, d2, w, eu, ev, dt, gV, gRho)


def bb_cost_grad_generic(V, theta, d1, d2, w, eu, ev, dt, gV, gRho):
    return _accumulate(V, theta, d1, d2, w, eu, ev, dt, gV, gRho)


def bform_triple(psi, q, pi, phirho, dphirho, rhohat, d1th, d2th):
    """Entropy Hessian form as the expanded triple sum over (x, y, z)."""
    dpsi = psi[:, None] - psi[None, :]  # psi(x) - psi(y)
    qpi = q * pi[:, None]

    dphi_xz = phirho[None, None, :] - phirho[:, None, None]  # phi(z) - phi(x)
    dphi_yz = phirho[None, None, :] - phirho[None, :, None]  # phi(z) - phi(y)
    q_xz = q[:, None, :]
    q_yz = q[None, :, :]
    inner1 = d1th[:, :, None] * dphi_xz * q_xz + d2th[:, :, None] * dphi_yz * q_yz
    t1 = 0.25 * float(((dpsi**2 * qpi)[:, :, None] * inner1).sum())

    dpsi_zx = psi[None, None, :] - psi[:, None, None]  # psi(z) - psi(x)
    dpsi_zy = psi[None, None, :] - psi[None, :, None]  # psi(z) - psi(y)
    inner2 = (
        dphirho[:, None, None] * q_xz * dpsi_zx
        - dphirho[None, :, None] * q_yz * dpsi_zy
    )
    t2 = 0.5 * float(((dpsi * rhohat * qpi)[:, :, None] * inner2).sum())
    return t1 - t2
