"""Adaptive embedded Runge-Kutta 5(4) stepper (Dormand-Prince pair, FSAL).

Step-size control by the usual mixed absolute/relative error norm.  Callers
can install a ``reject`` predicate (a state-dependent reason to halve the
step, e.g. a density going negative beyond roundoff) and a ``fixup`` hook
applied to accepted states (e.g. clamping roundoff-level negatives to 0).
"""

from __future__ import annotations

import numpy as np

from .errors import StepFailure

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


def integrate(
    rhs,
    y0: np.ndarray,
    t_eval: np.ndarray,
    *,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    reject=None,
    fixup=None,
    max_halvings_per_step: int = 60,
):
    """Integrate y' = rhs(t, y) from t_eval[0], returning y at every t_eval.

    t_eval must be strictly increasing; output grid points are hit exactly
    (the step is capped, never interpolated).
    """
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.ndim != 1 or len(t_eval) < 2 or np.any(np.diff(t_eval) <= 0.0):
        raise ValueError("t_eval must be strictly increasing with >= 2 points")
    y = np.asarray(y0, dtype=float).copy()
    t = float(t_eval[0])
    span = float(t_eval[-1] - t_eval[0])
    h_min = 1e-14 * max(1.0, abs(span))

    out = np.empty((len(t_eval), len(y)))
    out[0] = y
    k1 = rhs(t, y)
    h = _initial_step(rhs, t, y, k1, rtol, atol, span)

    for iout in range(1, len(t_eval)):
        t_target = float(t_eval[iout])
        while t < t_target - 1e-14 * max(1.0, abs(t_target)):
            h = min(h, t_target - t)
            if h < h_min:
                raise StepFailure(f"step size underflow at t = {t:g}")
            ks = [k1]
            failed = False
            for stage in range(1, 7):
                yi = y + h * sum(a * k for a, k in zip(_A[stage], ks))
                ks.append(rhs(t + _C[stage] * h, yi))
            y_new = y + h * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
            err_vec = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))

            if err > 1.0:
                h = max(h * max(0.2, 0.9 * err ** (-0.2)), h_min * 0.5)
                k1 = ks[0]
                continue
            if reject is not None and reject(y_new):
                h *= 0.5
                k1 = ks[0]
                continue
            if fixup is not None:
                y_fixed = fixup(y_new)
                if y_fixed is not y_new:
                    y_new = y_fixed
                    ks[6] = rhs(t + h, y_new)
            t += h
            y = y_new
            k1 = ks[6]  # FSAL
            h = h * min(5.0, max(0.2, 0.9 * (err + 1e-16) ** (-0.2)))
        out[iout] = y
    return t_eval, out


def _initial_step(rhs, t0, y0, f0, rtol, atol, span):
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, 0.1 * abs(span))
    y1 = y0 + h0 * f0
    f1 = rhs(t0 + h0, y1)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, abs(span))
