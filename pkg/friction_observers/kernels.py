"""
Compiled kernels of the closed loop.

A default run evaluates the plant, the observer and the control law six million times, so the
formulas live here as numba-compiled functions on plain floats and flat arrays. The public
functions of `plant`, `controller`, `observers` and `integrate` call the same kernels, which
keeps every formula in one place and makes the Python API and the simulator agree bit for bit.

`run_loop` integrates a whole scenario in one call. It never raises: failures come back as a
status code with a diagnostic, and the scenario runner turns them into exceptions.
"""

import math

import numpy as np
from numba import njit

from friction_observers.utils import is_positive_definite, logcosh, symmetrize

IANDI_KIND = 0
SLIDING_MODE_KIND = 1

OK = 0
NON_FINITE = 1
OUT_OF_BOUND = 2
COVARIANCE = 3

# Layout of the parameter vector handed to run_loop. Slots from P_K1 on depend on the observer.
P_THETA1 = 0
P_THETA2 = 1
P_VARTHETA = 2
P_ALPHA1 = 3
P_ALPHA2 = 4
P_AMPLITUDE = 5
P_ADDITIVE = 6
P_IDEAL = 7
P_SIGN_EPS = 8
P_K1 = 9
P_FROZEN = 10
P_FROZEN1 = 11
P_FROZEN2 = 12
P_C1 = 9
P_C2 = 10
P_BAR1 = 11
P_BAR2 = 12
P_TRUE_REGRESSOR = 13
P_TRUE_INNOVATION = 14
P_ADAPTED = 15
N_PARAMS = 16

# Signals produced by one evaluation of the closed loop.
A_Y = 0
A_X2_HAT = 1
A_THETA1 = 2
A_THETA2 = 3
A_U = 4
A_R = 5
A_RDOT = 6
A_RDDOT = 7
N_AUX = 8

# Metric accumulators returned by run_loop.
S_SQUARES = 0
S_COUNT = 1
S_MAX_OBSERVER = 2
S_MAX_TRACKING = 3
S_TOTAL_VARIATION = 4
S_LAST_VIOLATION = 5
S_LAST_T = 6
N_STATS = 7


#####################
# Scalar laws       #
#####################


@njit(cache=True)
def sign_value(z, eps):
    """sign(z) with sign(0) = 0 when eps is 0; clamp(z / eps, -1, 1) when eps > 0."""
    if eps > 0.0:
        return min(max(z / eps, -1.0), 1.0)
    if z > 0.0:
        return 1.0
    if z < 0.0:
        return -1.0
    return 0.0


@njit(cache=True)
def friction(x2, theta1, theta2, vartheta):
    return theta1 * x2 + theta2 * math.tanh(vartheta * x2)


@njit(cache=True)
def noisy_position(x1, w, amplitude, additive):
    if additive:
        return x1 + amplitude * w
    return x1 * (1.0 + amplitude * w)


@njit(cache=True)
def reference_at(t, starts, bases, slopes):
    """
    (r, rdot, rddot) of a piecewise reference given as segment start times, start levels and
    slopes. Right-continuous at breakpoints.
    """
    i = np.searchsorted(starts, t, side="right") - 1
    slope = slopes[i]
    return bases[i] + slope * (t - starts[i]), slope, 0.0


@njit(cache=True)
def ideal_law(x1, x2, r, rdot, rddot, theta1, theta2, vartheta, alpha1, alpha2):
    return (
        friction(x2, theta1, theta2, vartheta)
        + rddot
        - alpha1 * (x1 - r)
        - alpha2 * (x2 - rdot)
    )


@njit(cache=True)
def ce_law(x1_meas, x2_hat, theta1_hat, theta2_hat, r, rdot, rddot, vartheta, alpha1, alpha2):
    return (
        theta1_hat * x2_hat
        + theta2_hat * math.tanh(vartheta * x2_hat)
        + rddot
        - alpha1 * (x1_meas - r)
        - alpha2 * (x2_hat - rdot)
    )


@njit(cache=True)
def eps_formula(
    x2, x2_hat, theta1_hat, theta2_hat, theta1, theta2, vartheta_plant, vartheta, alpha2
):
    x2_tilde = x2_hat - x2
    tanh_hat = math.tanh(vartheta * x2_hat)
    tanh_true = math.tanh(vartheta_plant * x2)
    return (
        theta1 * x2_tilde
        + (theta1_hat - theta1) * (x2 + x2_tilde)
        + (theta2_hat - theta2) * tanh_hat
        + theta2 * (tanh_hat - tanh_true)
        + alpha2 * x2_tilde
    )


@njit(cache=True)
def eps_residual(x1, x2, u, r, rdot, rddot, theta1, theta2, vartheta, alpha1, alpha2):
    dx2 = -friction(x2, theta1, theta2, vartheta) + u
    return (dx2 - rddot) + alpha1 * (x1 - r) + alpha2 * (x2 - rdot)


#####################
# Observers         #
#####################


@njit(cache=True)
def ii_outputs(x2I, theta1I, theta2I, k1, x1, vartheta, frozen, frozen1, frozen2):
    x2_hat = x2I + k1 * x1
    if frozen:
        return x2_hat, frozen1, frozen2
    theta1_hat = theta1I - (vartheta / (2.0 * k1)) * x2_hat * x2_hat
    theta2_hat = theta2I - logcosh(vartheta * x2_hat) / k1
    return x2_hat, theta1_hat, theta2_hat


@njit(cache=True)
def ii_rates(x2I, theta1I, theta2I, k1, x1, u, vartheta, frozen, frozen1, frozen2):
    x2_hat, theta1_hat, theta2_hat = ii_outputs(
        x2I, theta1I, theta2I, k1, x1, vartheta, frozen, frozen1, frozen2
    )
    th = math.tanh(vartheta * x2_hat)
    dx2I = -(theta1_hat + k1) * x2_hat - theta2_hat * th + u
    if frozen:
        return dx2I, 0.0, 0.0
    # x2I' + k1*x2_hat is the internally computed rate, never a numerical derivative.
    drive = (vartheta / k1) * (dx2I + k1 * x2_hat)
    return dx2I, drive * x2_hat, drive * th


@njit(cache=True)
def sm_rates(
    x1_hat, x2_hat, d1, d2, g11, g12, g21, g22, x1_meas, x2_reg, u, vartheta,
    tb1, tb2, c1, c2, eps, adapted,
):
    """Super-twisting observer rates. The covariance must already be known to be SPD."""
    e = x1_meas - x1_hat
    s = sign_value(e, eps)
    phi1 = -x2_hat
    phi2 = -math.tanh(vartheta * x2_reg)

    dx1_hat = x2_hat + c2 * math.sqrt(abs(e)) * s
    if adapted:
        dx2_hat = u + phi1 * (d1 + tb1) + phi2 * (d2 + tb2) + c1 * s
    else:
        dx2_hat = u + phi1 * tb1 + phi2 * tb2 + c1 * s

    gp1 = g11 * phi1 + g12 * phi2
    gp2 = g21 * phi1 + g22 * phi2
    innovation = -(phi1 * d1 + phi2 * d2) + c1 * s
    pg1 = phi1 * g11 + phi2 * g21
    pg2 = phi1 * g12 + phi2 * g22
    return (
        dx1_hat,
        dx2_hat,
        gp1 * innovation,
        gp2 * innovation,
        -gp1 * pg1,
        -gp1 * pg2,
        -gp2 * pg1,
        -gp2 * pg2,
    )


#####################
# Closed loop       #
#####################


@njit(cache=True)
def _control(t, x1, x2, y, x2_hat, theta1_hat, theta2_hat, p, starts, bases, slopes, aux):
    r, rdot, rddot = reference_at(t, starts, bases, slopes)
    if p[P_IDEAL] != 0.0:
        u = ideal_law(
            x1, x2, r, rdot, rddot, p[P_THETA1], p[P_THETA2], p[P_VARTHETA],
            p[P_ALPHA1], p[P_ALPHA2],
        )
    else:
        u = ce_law(
            y, x2_hat, theta1_hat, theta2_hat, r, rdot, rddot, p[P_VARTHETA],
            p[P_ALPHA1], p[P_ALPHA2],
        )
    aux[A_Y] = y
    aux[A_X2_HAT] = x2_hat
    aux[A_THETA1] = theta1_hat
    aux[A_THETA2] = theta2_hat
    aux[A_U] = u
    aux[A_R] = r
    aux[A_RDOT] = rdot
    aux[A_RDDOT] = rddot
    return u


@njit(cache=True)
def _iandi_field(t, x, w, p, starts, bases, slopes, dx, aux):
    # x = (x1, x2, x2I, theta1I, theta2I)
    x1 = x[0]
    x2 = x[1]
    y = noisy_position(x1, w, p[P_AMPLITUDE], p[P_ADDITIVE] != 0.0)
    frozen = p[P_FROZEN] != 0.0
    x2_hat, th1, th2 = ii_outputs(
        x[2], x[3], x[4], p[P_K1], y, p[P_VARTHETA], frozen, p[P_FROZEN1], p[P_FROZEN2]
    )
    u = _control(t, x1, x2, y, x2_hat, th1, th2, p, starts, bases, slopes, aux)
    d_x2I, d_th1I, d_th2I = ii_rates(
        x[2], x[3], x[4], p[P_K1], y, u, p[P_VARTHETA], frozen, p[P_FROZEN1], p[P_FROZEN2]
    )
    dx[0] = x2
    dx[1] = -friction(x2, p[P_THETA1], p[P_THETA2], p[P_VARTHETA]) + u
    dx[2] = d_x2I
    dx[3] = d_th1I
    dx[4] = d_th2I
    return OK


@njit(cache=True)
def _sliding_mode_field(t, x, w, p, starts, bases, slopes, dx, aux):
    # x = (x1, x2, x1_hat, x2_hat, delta1, delta2, g11, g12, g21, g22)
    g11 = x[6]
    g12 = x[7]
    g21 = x[8]
    g22 = x[9]
    if not is_positive_definite(g11, g12, g21, g22):
        return COVARIANCE
    x1 = x[0]
    x2 = x[1]
    x2_hat = x[3]
    y = noisy_position(x1, w, p[P_AMPLITUDE], p[P_ADDITIVE] != 0.0)
    th1 = x[4] + p[P_BAR1]
    th2 = x[5] + p[P_BAR2]
    u = _control(t, x1, x2, y, x2_hat, th1, th2, p, starts, bases, slopes, aux)
    x1_meas = x1 if p[P_TRUE_INNOVATION] != 0.0 else y
    x2_reg = x2 if p[P_TRUE_REGRESSOR] != 0.0 else x2_hat
    r1, r2, r3, r4, r5, r6, r7, r8 = sm_rates(
        x[2], x2_hat, x[4], x[5], g11, g12, g21, g22, x1_meas, x2_reg, u, p[P_VARTHETA],
        p[P_BAR1], p[P_BAR2], p[P_C1], p[P_C2], p[P_SIGN_EPS], p[P_ADAPTED] != 0.0,
    )
    dx[0] = x2
    dx[1] = -friction(x2, p[P_THETA1], p[P_THETA2], p[P_VARTHETA]) + u
    dx[2] = r1
    dx[3] = r2
    dx[4] = r3
    dx[5] = r4
    dx[6] = r5
    dx[7] = r6
    dx[8] = r7
    dx[9] = r8
    return OK


@njit(cache=True)
def _field(kind, t, x, w, p, starts, bases, slopes, dx, aux):
    if kind == IANDI_KIND:
        return _iandi_field(t, x, w, p, starts, bases, slopes, dx, aux)
    return _sliding_mode_field(t, x, w, p, starts, bases, slopes, dx, aux)


@njit(cache=True)
def _write_row(kind, t, x, aux, p, data, internals, row):
    x1 = x[0]
    x2 = x[1]
    u = aux[A_U]
    r = aux[A_R]
    rdot = aux[A_RDOT]
    rddot = aux[A_RDDOT]
    x2_hat = aux[A_X2_HAT]
    th1 = aux[A_THETA1]
    th2 = aux[A_THETA2]
    data[row, 0] = t
    data[row, 1] = r
    data[row, 2] = x1
    data[row, 3] = x2
    data[row, 4] = aux[A_Y]
    col = 5
    if kind == SLIDING_MODE_KIND:
        data[row, 5] = x[2]
        col = 6
    data[row, col] = x2_hat
    data[row, col + 1] = th1
    data[row, col + 2] = th2
    data[row, col + 3] = u
    data[row, col + 4] = ideal_law(
        x1, x2, r, rdot, rddot, p[P_THETA1], p[P_THETA2], p[P_VARTHETA],
        p[P_ALPHA1], p[P_ALPHA2],
    )
    data[row, col + 5] = eps_formula(
        x2, x2_hat, th1, th2, p[P_THETA1], p[P_THETA2], p[P_VARTHETA], p[P_VARTHETA],
        p[P_ALPHA2],
    )
    data[row, col + 6] = eps_residual(
        x1, x2, u, r, rdot, rddot, p[P_THETA1], p[P_THETA2], p[P_VARTHETA],
        p[P_ALPHA1], p[P_ALPHA2],
    )
    # Observer internals are the trailing state components.
    n_internal = internals.shape[1]
    offset = x.size - n_internal
    for i in range(n_internal):
        internals[row, i] = x[offset + i]


@njit(cache=True)
def _check_state(x, bound, diag):
    # Any non-finite component wins over an earlier one that only left the bound.
    for i in range(x.size):
        if not math.isfinite(x[i]):
            diag[0] = i
            diag[1] = x[i]
            return NON_FINITE
    for i in range(x.size):
        if abs(x[i]) > bound:
            diag[0] = i
            diag[1] = x[i]
            return OUT_OF_BOUND
    return OK


@njit(cache=True)
def _keep_gamma(x, diag):
    for i in range(4):
        diag[i] = x[6 + i]


@njit(cache=True)
def run_loop(
    kind, x0, p, starts, bases, slopes, draws, steps_per_sample, n_steps, h, rk4,
    decimation, bound, window_start, window_end, tv_start, settle_tol, data, internals,
):
    """
    Integrate one closed loop over the whole grid.

    Every grid point is evaluated once; that evaluation is the first RK4 stage, feeds the
    metrics and, on logged steps, the row written to `data` and `internals`. The noise draw is
    held over a step, stages included.

    Returns:
        (status, fail_t, diag, rows, x, aux, stats): status is OK or a failure code, `diag`
        holds (index, value) of the offending component or the offending covariance, `x` and
        `aux` are the last grid state and its signals, `stats` the metric accumulators.
    """
    n = x0.size
    x = x0.copy()
    xs = np.empty(n)
    xn = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    aux = np.empty(N_AUX)
    scratch = np.empty(N_AUX)
    diag = np.full(4, np.nan)
    stats = np.zeros(N_STATS)
    stats[S_LAST_VIOLATION] = np.nan
    stats[S_LAST_T] = np.nan

    half = 0.5 * h
    sixth = h / 6.0
    u_prev = 0.0
    have_prev = False
    status = OK
    fail_t = 0.0
    row = 0

    for k in range(n_steps + 1):
        t = k * h
        w = draws[k // steps_per_sample]
        status = _field(kind, t, x, w, p, starts, bases, slopes, k1, aux)
        if status != OK:
            fail_t = t
            _keep_gamma(x, diag)
            break

        e1 = x[0] - aux[A_R]
        u = aux[A_U]
        if window_start <= t <= window_end:
            x2_tilde = aux[A_X2_HAT] - x[1]
            stats[S_SQUARES] += e1 * e1
            stats[S_COUNT] += 1.0
            stats[S_MAX_OBSERVER] = max(stats[S_MAX_OBSERVER], abs(x2_tilde))
            stats[S_MAX_TRACKING] = max(stats[S_MAX_TRACKING], abs(e1))
        if tv_start <= t <= window_end:
            if have_prev:
                stats[S_TOTAL_VARIATION] += abs(u - u_prev)
            u_prev = u
            have_prev = True
        if abs(e1) > settle_tol:
            stats[S_LAST_VIOLATION] = t
        stats[S_LAST_T] = t

        if k % decimation == 0:
            _write_row(kind, t, x, aux, p, data, internals, row)
            row += 1
        if k == n_steps:
            break

        if rk4:
            for i in range(n):
                xs[i] = x[i] + half * k1[i]
            status = _field(kind, t + half, xs, w, p, starts, bases, slopes, k2, scratch)
            if status != OK:
                fail_t = t + half
                _keep_gamma(xs, diag)
                break
            for i in range(n):
                xs[i] = x[i] + half * k2[i]
            status = _field(kind, t + half, xs, w, p, starts, bases, slopes, k3, scratch)
            if status != OK:
                fail_t = t + half
                _keep_gamma(xs, diag)
                break
            for i in range(n):
                xs[i] = x[i] + h * k3[i]
            status = _field(kind, t + h, xs, w, p, starts, bases, slopes, k4, scratch)
            if status != OK:
                fail_t = t + h
                _keep_gamma(xs, diag)
                break
            for i in range(n):
                xn[i] = x[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        else:
            for i in range(n):
                xn[i] = x[i] + h * k1[i]

        status = _check_state(xn, bound, diag)
        if status != OK:
            fail_t = t
            break
        if kind == SLIDING_MODE_KIND:
            xn[6], xn[7], xn[8], xn[9] = symmetrize(xn[6], xn[7], xn[8], xn[9])
        for i in range(n):
            x[i] = xn[i]

    return status, fail_t, diag, row, x, aux, stats
