# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: transport-action cost/gradient evaluation and the
expanded Hessian triple sum.  Contracts identical to pmeflow._kernels_py;
the power-family weight is fused into the action kernel so one call per
solver iteration covers the common case."""

from libc.math cimport fabs, log, pow, INFINITY


cdef double DIAG_SWITCH = 1e-6
cdef double THETA_TINY = 1e-300
cdef double V_TINY = 1e-300


cdef inline void theta_power_point(double m, double r, double s,
                                   double* th, double* d1, double* d2) noexcept nogil:
    cdef double mx = r if r > s else s
    cdef double a, cc, c, x, ra, sa, p, n, dl
    if r <= 0.0 or s <= 0.0:
        if m > 1.0:
            cc = (m - 1.0) / m
            if r <= 0.0 and s <= 0.0:
                th[0] = 0.0
                d1[0] = 0.0
                d2[0] = 0.0
            elif r <= 0.0:
                th[0] = cc * s
                d1[0] = 0.5 if m == 2.0 else INFINITY
                d2[0] = 0.5 if m == 2.0 else cc
            else:
                th[0] = cc * r
                d1[0] = 0.5 if m == 2.0 else cc
                d2[0] = 0.5 if m == 2.0 else INFINITY
        else:
            th[0] = 0.0
            d1[0] = INFINITY if (r <= 0.0 and s > 0.0) else 0.0
            d2[0] = INFINITY if (s <= 0.0 and r > 0.0) else 0.0
        return
    if fabs(r - s) <= DIAG_SWITCH * mx:
        c = 0.5 * (r + s)
        x = (s - r) / (r + s)
        th[0] = c * (1.0 + (m - 2.0) / 3.0 * x * x)
        d1[0] = 0.5 - (m - 2.0) / 3.0 * x
        d2[0] = 0.5 + (m - 2.0) / 3.0 * x
        return
    if m == 1.0:
        dl = log(r) - log(s)
        c = (r - s) / dl
        th[0] = c
        d1[0] = (1.0 - c / r) / dl
        d2[0] = (c / s - 1.0) / dl
        return
    a = m - 1.0
    cc = a / m
    ra = pow(r, a)
    sa = pow(s, a)
    p = ra - sa
    n = pow(r, m) - pow(s, m)
    th[0] = cc * n / p
    d1[0] = cc * (m * ra * p - a * (ra / r) * n) / (p * p)
    d2[0] = cc * (-m * sa * p + a * (sa / s) * n) / (p * p)


cdef inline bint _finite(double x) noexcept nogil:
    return x == x and x < INFINITY and x > -INFINITY


cdef double _bb_power(const double[:, ::1] V, const double[:, ::1] rho,
                      const double[::1] w, const int[::1] eu, const int[::1] ev,
                      double dt, double m,
                      double[:, ::1] gV, double[:, ::1] gRho) noexcept nogil:
    cdef Py_ssize_t K = V.shape[0]
    cdef Py_ssize_t E = V.shape[1]
    cdef Py_ssize_t n = gRho.shape[1]
    cdef Py_ssize_t k, e, i, j, u, v
    cdef double cost = 0.0
    cdef double th, d1, d2, r, s, vke, ratio, coeff, half

    for i in range(K + 1):
        for j in range(n):
            gRho[i, j] = 0.0
    for k in range(K):
        for e in range(E):
            u = eu[e]
            v = ev[e]
            r = 0.5 * (rho[k, u] + rho[k + 1, u])
            s = 0.5 * (rho[k, v] + rho[k + 1, v])
            theta_power_point(m, r, s, &th, &d1, &d2)
            vke = V[k, e]
            if th <= THETA_TINY:
                if fabs(vke) > V_TINY:
                    return INFINITY
                gV[k, e] = 0.0
                continue
            ratio = vke / th
            cost += dt * w[e] * vke * ratio
            gV[k, e] = 2.0 * dt * w[e] * ratio
            coeff = -dt * w[e] * ratio * ratio
            if _finite(d1):
                half = 0.5 * coeff * d1
                gRho[k, u] += half
                gRho[k + 1, u] += half
            if _finite(d2):
                half = 0.5 * coeff * d2
                gRho[k, v] += half
                gRho[k + 1, v] += half
    return cost


cdef double _bb_generic(const double[:, ::1] V, const double[:, ::1] theta,
                        const double[:, ::1] d1a, const double[:, ::1] d2a,
                        const double[::1] w, const int[::1] eu, const int[::1] ev,
                        double dt,
                        double[:, ::1] gV, double[:, ::1] gRho) noexcept nogil:
    cdef Py_ssize_t K = V.shape[0]
    cdef Py_ssize_t E = V.shape[1]
    cdef Py_ssize_t n = gRho.shape[1]
    cdef Py_ssize_t k, e, i, j, u, v
    cdef double cost = 0.0
    cdef double th, d1, d2, vke, ratio, coeff, half

    for i in range(K + 1):
        for j in range(n):
            gRho[i, j] = 0.0
    for k in range(K):
        for e in range(E):
            th = theta[k, e]
            vke = V[k, e]
            if th <= THETA_TINY:
                if fabs(vke) > V_TINY:
                    return INFINITY
                gV[k, e] = 0.0
                continue
            u = eu[e]
            v = ev[e]
            d1 = d1a[k, e]
            d2 = d2a[k, e]
            ratio = vke / th
            cost += dt * w[e] * vke * ratio
            gV[k, e] = 2.0 * dt * w[e] * ratio
            coeff = -dt * w[e] * ratio * ratio
            if _finite(d1):
                half = 0.5 * coeff * d1
                gRho[k, u] += half
                gRho[k + 1, u] += half
            if _finite(d2):
                half = 0.5 * coeff * d2
                gRho[k, v] += half
                gRho[k + 1, v] += half
    return cost


def bb_cost_grad_power(const double[:, ::1] V, const double[:, ::1] rho,
                       const double[::1] w, const int[::1] eu, const int[::1] ev,
                       double dt, double m,
                       double[:, ::1] gV, double[:, ::1] gRho):
    cdef double cost
    with nogil:
        cost = _bb_power(V, rho, w, eu, ev, dt, m, gV, gRho)
    return cost


def bb_cost_grad_generic(const double[:, ::1] V, const double[:, ::1] theta,
                         const double[:, ::1] d1a, const double[:, ::1] d2a,
                         const double[::1] w, const int[::1] eu, const int[::1] ev,
                         double dt,
                         double[:, ::1] gV, double[:, ::1] gRho):
    cdef double cost
    with nogil:
        cost = _bb_generic(V, theta, d1a, d2a, w, eu, ev, dt, gV, gRho)
    return cost


cdef double _bform(const double[::1] psi, const double[:, ::1] q, const double[::1] pi,
                   const double[::1] phirho, const double[::1] dphirho,
                   const double[:, ::1] rhohat, const double[:, ::1] d1th,
                   const double[:, ::1] d2th) noexcept nogil:
    cdef Py_ssize_t n = psi.shape[0]
    cdef Py_ssize_t x, y, z
    cdef double t1 = 0.0, t2 = 0.0
    cdef double dpsi, qpixy, inner1, inner2

    for x in range(n):
        for y in range(n):
            qpixy = q[x, y] * pi[x]
            dpsi = psi[x] - psi[y]
            inner1 = 0.0
            inner2 = 0.0
            for z in range(n):
                inner1 += (d1th[x, y] * (phirho[z] - phirho[x]) * q[x, z]
                           + d2th[x, y] * (phirho[z] - phirho[y]) * q[y, z])
                inner2 += (dphirho[x] * q[x, z] * (psi[z] - psi[x])
                           - dphirho[y] * q[y, z] * (psi[z] - psi[y]))
            t1 += dpsi * dpsi * qpixy * inner1
            t2 += dpsi * rhohat[x, y] * qpixy * inner2
    return 0.25 * t1 - 0.5 * t2


def bform_triple(const double[::1] psi, const double[:, ::1] q, const double[::1] pi,
                 const double[::1] phirho, const double[::1] dphirho,
                 const double[:, ::1] rhohat, const double[:, ::1] d1th,
                 const double[:, ::1] d2th):
    cdef double out
    with nogil:
        out = _bform(psi, q, pi, phirho, dphirho, rhohat, d1th, d2th)
    return out
