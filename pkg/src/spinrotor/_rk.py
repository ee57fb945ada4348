"""Compiled adaptive Dormand-Prince 8(5,3) stepper.

The tableau and error-estimator weights are scipy's DOP853 coefficients; the
step-size controller follows ``scipy.integrate.DOP853``.  What differs is that
the loop runs in numba (long horizons need ~1e7 steps), the solution update
uses compensated summation, a caller-supplied projection runs after every
accepted step (quaternion renormalization, invariant manifolds), and steps
are clipped to land on output times.

Right-hand sides are numba functions ``rhs(t, y, params, out)``; projections
are ``post(t, y, params) -> bool`` and return True if they changed ``y``.
"""

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

N_STAGES = _dop.N_STAGES
_A = np.ascontiguousarray(_dop.A[:N_STAGES, :N_STAGES])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:N_STAGES])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERR_EXP = -1.0 / 8.0

OK = 0
STEP_UNDERFLOW = 1
MAX_STEPS = 2


@njit(cache=True, nogil=True)
def _err_norm(K, h, y, y_new, rtol, atol):
    n = y.shape[0]
    e5 = 0.0
    e3 = 0.0
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), abs(y_new[i]))
        s5 = 0.0
        s3 = 0.0
        for s in range(N_STAGES + 1):
            s5 += _E5[s] * K[s, i]
            s3 += _E3[s] * K[s, i]
        e5 += (s5 / sc) ** 2
        e3 += (s3 / sc) ** 2
    if e5 == 0.0 and e3 == 0.0:
        return 0.0
    return abs(h) * e5 / np.sqrt((e5 + 0.01 * e3) * n)


# not cached: the cache key includes the rhs/post dispatchers, which are new
# objects in every process, so cached entries would only pile up and go stale
@njit(nogil=True)
def solve(rhs, post, params, t0, y0, t_out, rtol, atol, max_step, max_steps):
    """Integrate from ``t0`` through the (monotone) output times ``t_out``.

    Returns ``(Y, status, t_reached, n_steps)`` where ``Y[i]`` is the state at
    ``t_out[i]``; rows past a failure are left as NaN.
    """
    n = y0.shape[0]
    n_out = t_out.shape[0]
    Y = np.full((n_out, n), np.nan)
    K = np.empty((N_STAGES + 1, n))
    y = y0.copy()
    comp = np.zeros(n)
    y_new = np.empty(n)
    y_stage = np.empty(n)
    dy = np.empty(n)
    f = np.empty(n)
    f_new = np.empty(n)
    t = t0
    if n_out == 0:
        return Y, OK, t, 0
    t_end = t_out[n_out - 1]
    direction = 1.0 if t_end >= t0 else -1.0

    rhs(t, y, params, f)

    # initial step (Hairer, Norsett & Wanner II.4)
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + abs(y[i]) * rtol
        d0 += (y[i] / sc) ** 2
        d1 += (f[i] / sc) ** 2
    d0 = np.sqrt(d0 / n)
    d1 = np.sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6 * max(abs(t_end - t0), 1e-300)
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, abs(t_end - t0))
    for i in range(n):
        y_stage[i] = y[i] + direction * h0 * f[i]
    rhs(t + direction * h0, y_stage, params, f_new)
    d2 = 0.0
    for i in range(n):
        sc = atol + abs(y[i]) * rtol
        d2 += ((f_new[i] - f[i]) / sc) ** 2
    d2 = np.sqrt(d2 / n) / max(h0, 1e-300)
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6 * abs(t_end - t0), h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    h_abs = min(100.0 * h0, h1, abs(t_end - t0), max_step)

    k_out = 0
    while k_out < n_out and direction * (t_out[k_out] - t) <= 0.0:
        for i in range(n):
            Y[k_out, i] = y[i]
        k_out += 1

    n_steps = 0
    while k_out < n_out:
        if n_steps >= max_steps:
            return Y, MAX_STEPS, t, n_steps
        t_target = t_out[k_out]
        min_step = 10.0 * abs(np.nextafter(t, direction * np.inf) - t)
        h_try = min(h_abs, max_step)
        rejected = False
        while True:
            if h_try < min_step:
                return Y, STEP_UNDERFLOW, t, n_steps
            clipped = False
            if h_try >= abs(t_target - t):
                h = t_target - t
                clipped = True
            else:
                h = direction * h_try

            for i in range(n):
                K[0, i] = f[i]
            for s in range(1, N_STAGES):
                for i in range(n):
                    acc = 0.0
                    for r in range(s):
                        acc += _A[s, r] * K[r, i]
                    y_stage[i] = y[i] + h * acc
                rhs(t + _C[s] * h, y_stage, params, K[s])
            for i in range(n):
                acc = 0.0
                for r in range(N_STAGES):
                    acc += _B[r] * K[r, i]
                dy[i] = h * acc
                y_new[i] = y[i] + dy[i]
            t_new = t_target if clipped else t + h
            rhs(t_new, y_new, params, f_new)
            for i in range(n):
                K[N_STAGES, i] = f_new[i]

            err = _err_norm(K, h, y, y_new, rtol, atol)
            if err < 1.0:
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = min(MAX_FACTOR, SAFETY * err ** ERR_EXP)
                if rejected:
                    factor = min(1.0, factor)
                # a clipped step says nothing about the natural step length
                if not clipped:
                    h_abs = abs(h) * factor
                break
            h_try *= max(MIN_FACTOR, SAFETY * err ** ERR_EXP)
            h_abs = h_try
            rejected = True

        # compensated update y += dy
        for i in range(n):
            d = dy[i] - comp[i]
            s = y[i] + d
            comp[i] = (s - y[i]) - d
            y[i] = s
        t = t_new
        n_steps += 1

        if post(t, y, params):
            for i in range(n):
                comp[i] = 0.0
            rhs(t, y, params, f)
        else:
            for i in range(n):
                f[i] = f_new[i]

        while k_out < n_out and direction * (t_out[k_out] - t) <= 0.0:
            for i in range(n):
                Y[k_out, i] = y[i]
            k_out += 1

    return Y, OK, t, n_steps


@njit(cache=True, nogil=True)
def no_post(t, y, params):
    return False
