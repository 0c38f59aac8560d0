"""Numba kernels for trajectory propagation and the classical comparator.

The quantum drift is applied through its diagonals: the static generator
(-i*h_static - gamma*n) occupies offsets -4..4 and the drive (-i*h_drive)
the offsets +-1, multiplied by cos(t) on the fly.  One evaluation costs
O(9*dim).  The stepper is an embedded Dormand-Prince 5(4) pair with the
usual error-per-step control; the first-same-as-last stage is reused,
which is valid across the renormalization done after every accepted step
because the drift is linear in the state.
"""

import numpy as np
from numba import njit

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
# b - b_hat (error estimate weights, including the FSAL stage)
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

# status codes returned by the trajectory kernel
OK = 0
FAIL_LEAKAGE = 1
FAIL_STEP_UNDERFLOW = 2
FAIL_DARK_JUMP = 3
FAIL_BISECTION = 4


@njit(cache=True)
def _drift(sb, dbm, dbp, c, x, out):
    """out = G(t) x with G = static bands + c * drive bands (c = cos t)."""
    n = x.shape[0]
    for j in range(4, n - 4):
        acc = sb[0, j] * x[j - 4]
        acc += sb[1, j] * x[j - 3]
        acc += sb[2, j] * x[j - 2]
        acc += (sb[3, j] + c * dbm[j]) * x[j - 1]
        acc += sb[4, j] * x[j]
        acc += (sb[5, j] + c * dbp[j]) * x[j + 1]
        acc += sb[6, j] * x[j + 2]
        acc += sb[7, j] * x[j + 3]
        acc += sb[8, j] * x[j + 4]
        out[j] = acc
    for jj in range(8):
        j = jj if jj < 4 else n - 8 + jj
        if j < 0 or j >= n:
            continue
        acc = 0.0 + 0.0j
        for i in range(9):
            k = j + i - 4
            if 0 <= k < n:
                coef = sb[i, j]
                if i == 3:
                    coef = coef + c * dbm[j]
                elif i == 5:
                    coef = coef + c * dbp[j]
                acc += coef * x[k]
        out[j] = acc


@njit(cache=True)
def _dp45_step(sb, dbm, dbp, t, h, y, k, ytmp, ynew, atol, rtol):
    """One Dormand-Prince step.  k[0] must hold f(t, y) on entry.

    On exit ynew holds the 5th-order solution and k[6] holds f(t+h, ynew)
    (the FSAL stage).  Returns the scaled RMS error estimate.
    """
    n = y.shape[0]
    for j in range(n):
        ytmp[j] = y[j] + h * _A21 * k[0, j]
    _drift(sb, dbm, dbp, np.cos(t + _C2 * h), ytmp, k[1])
    for j in range(n):
        ytmp[j] = y[j] + h * (_A31 * k[0, j] + _A32 * k[1, j])
    _drift(sb, dbm, dbp, np.cos(t + _C3 * h), ytmp, k[2])
    for j in range(n):
        ytmp[j] = y[j] + h * (_A41 * k[0, j] + _A42 * k[1, j] + _A43 * k[2, j])
    _drift(sb, dbm, dbp, np.cos(t + _C4 * h), ytmp, k[3])
    for j in range(n):
        ytmp[j] = y[j] + h * (_A51 * k[0, j] + _A52 * k[1, j] + _A53 * k[2, j]
                              + _A54 * k[3, j])
    _drift(sb, dbm, dbp, np.cos(t + _C5 * h), ytmp, k[4])
    for j in range(n):
        ytmp[j] = y[j] + h * (_A61 * k[0, j] + _A62 * k[1, j] + _A63 * k[2, j]
                              + _A64 * k[3, j] + _A65 * k[4, j])
    _drift(sb, dbm, dbp, np.cos(t + h), ytmp, k[5])
    for j in range(n):
        ynew[j] = y[j] + h * (_B1 * k[0, j] + _B3 * k[2, j] + _B4 * k[3, j]
                              + _B5 * k[4, j] + _B6 * k[5, j])
    _drift(sb, dbm, dbp, np.cos(t + h), ynew, k[6])
    errsum = 0.0
    for j in range(n):
        e = h * (_E1 * k[0, j] + _E3 * k[2, j] + _E4 * k[3, j]
                 + _E5 * k[4, j] + _E6 * k[5, j] + _E7 * k[6, j])
        ay = abs(y[j])
        an = abs(ynew[j])
        sc = atol + rtol * (ay if ay > an else an)
        r = abs(e) / sc
        errsum += r * r
    return np.sqrt(errsum / n)


@njit(cache=True)
def _dp45_probe(sb, dbm, dbp, t, h, y, k, ytmp, ynew):
    """5th-order solution only (no error estimate, no FSAL stage).

    Used for the jump-time bisection probes, whose intervals are always
    sub-intervals of an already accepted step.  k[0] must hold f(t, y).
    """
    n = y.shape[0]
    for j in range(n):
        ytmp[j] = y[j] + h * _A21 * k[0, j]
    _drift(sb, dbm, dbp, np.cos(t + _C2 * h), ytmp, k[1])
    for j in range(n):
        ytmp[j] = y[j] + h * (_A31 * k[0, j] + _A32 * k[1, j])
    _drift(sb, dbm, dbp, np.cos(t + _C3 * h), ytmp, k[2])
    for j in range(n):
        ytmp[j] = y[j] + h * (_A41 * k[0, j] + _A42 * k[1, j] + _A43 * k[2, j])
    _drift(sb, dbm, dbp, np.cos(t + _C4 * h), ytmp, k[3])
    for j in range(n):
        ytmp[j] = y[j] + h * (_A51 * k[0, j] + _A52 * k[1, j] + _A53 * k[2, j]
                              + _A54 * k[3, j])
    _drift(sb, dbm, dbp, np.cos(t + _C5 * h), ytmp, k[4])
    for j in range(n):
        ytmp[j] = y[j] + h * (_A61 * k[0, j] + _A62 * k[1, j] + _A63 * k[2, j]
                              + _A64 * k[3, j] + _A65 * k[4, j])
    _drift(sb, dbm, dbp, np.cos(t + h), ytmp, k[5])
    for j in range(n):
        ynew[j] = y[j] + h * (_B1 * k[0, j] + _B3 * k[2, j] + _B4 * k[3, j]
                              + _B5 * k[4, j] + _B6 * k[5, j])


@njit(cache=True)
def _norm2(y):
    s = 0.0
    for j in range(y.shape[0]):
        s += y[j].real * y[j].real + y[j].imag * y[j].imag
    return s


@njit(cache=True)
def _expect_qpn(y, sq):
    """(<q>, <p>, <n>, ||y||^2) for a (near-)normalized state.

    Uses <a> = sum_j conj(y_j) sqrt(j+1) y_{j+1}; q = sqrt(2) Re<a>,
    p = sqrt(2) Im<a>.
    """
    n = y.shape[0]
    sr = 0.0
    si = 0.0
    nb = 0.0
    nrm = 0.0
    for j in range(n - 1):
        cr = y[j].real
        ci = -y[j].imag
        xr = y[j + 1].real
        xi = y[j + 1].imag
        w = sq[j]
        sr += w * (cr * xr - ci * xi)
        si += w * (cr * xi + ci * xr)
        m = cr * cr + ci * ci
        nrm += m
        nb += j * m
    m = y[n - 1].real ** 2 + y[n - 1].imag ** 2
    nrm += m
    nb += (n - 1) * m
    rt2 = np.sqrt(2.0)
    return rt2 * sr, rt2 * si, nb, nrm


@njit(cache=True)
def _tail_pop(y, leak_start):
    s = 0.0
    for j in range(leak_start, y.shape[0]):
        s += y[j].real * y[j].real + y[j].imag * y[j].imag
    return s


@njit(cache=True)
def _apply_lowering(y, sq, out):
    """out = a y (un-normalized); returns ||out||^2."""
    n = y.shape[0]
    s = 0.0
    for j in range(n - 1):
        v = sq[j] * y[j + 1]
        out[j] = v
        s += v.real * v.real + v.imag * v.imag
    out[n - 1] = 0.0
    return s


@njit(cache=True)
def _evolve_jumps(sb, dbm, dbp, y0, sample_dt, n_samples,
                  rtol, atol, max_step, bisect_tol, leak_start, leak_bound,
                  rate_scale, rng, q_out, p_out, n_out, jumps_cap):
    """Propagate one quantum-jump trajectory over n_samples * sample_dt.

    Expectation values are written on the uniform grid k*sample_dt
    (k = 0 .. n_samples-1).  Jump times are located by bisection on the
    squared norm of the un-normalized state against a uniform threshold.

    Returns (status, t_fail, jump_times, n_jumps, leak_max, norm_dev_max,
    y_final).
    """
    dim = y0.shape[0]
    sq = np.empty(dim - 1)
    for j in range(dim - 1):
        sq[j] = np.sqrt(j + 1.0)
    y = y0.copy()
    nrm = np.sqrt(_norm2(y))
    for j in range(dim):
        y[j] /= nrm

    k = np.empty((7, dim), dtype=np.complex128)
    ytmp = np.empty(dim, dtype=np.complex128)
    ynew = np.empty(dim, dtype=np.complex128)
    ylo = np.empty(dim, dtype=np.complex128)
    yprobe = np.empty(dim, dtype=np.complex128)

    jumps = np.empty(jumps_cap)
    n_jumps = 0
    leak_max = 0.0
    norm_dev_max = 0.0
    status = OK
    t_fail = 0.0

    t = 0.0
    h = min(max_step, sample_dt / 8.0)
    min_h = 1e-13

    r = rng.random()
    while r <= 0.0:
        r = rng.random()
    log_thresh = np.log(r) / rate_scale
    log_surv = 0.0

    # sample at t = 0
    qv, pv, nv, nrm2 = _expect_qpn(y, sq)
    q_out[0] = qv
    p_out[0] = pv
    n_out[0] = nv
    dev = abs(nrm2 - 1.0)
    if dev > norm_dev_max:
        norm_dev_max = dev
    leak = _tail_pop(y, leak_start)
    if leak > leak_max:
        leak_max = leak

    have_k1 = False
    for ks in range(1, n_samples):
        t_next = ks * sample_dt
        while t < t_next - 1e-12:
            if not have_k1:
                _drift(sb, dbm, dbp, np.cos(t), y, k[0])
                have_k1 = True
            h_try = h
            if h_try > max_step:
                h_try = max_step
            hit_boundary = False
            if t + h_try >= t_next:
                h_try = t_next - t
                hit_boundary = True
            err = _dp45_step(sb, dbm, dbp, t, h_try, y, k, ytmp, ynew, atol, rtol)
            if err > 1.0:
                fac = 0.9 * err ** -0.2
                if fac < 0.1:
                    fac = 0.1
                h = h_try * fac
                if h < min_h:
                    status = FAIL_STEP_UNDERFLOW
                    t_fail = t
                    break
                continue
            n2 = _norm2(ynew)
            if log_surv + np.log(n2) <= log_thresh:
                # jump inside (t, t + h_try]: bisect on the squared norm
                t_lo = t
                t_hi = t + h_try
                for j in range(dim):
                    ylo[j] = y[j]
                log_lo = log_surv
                t_mid = t_hi
                converged = False
                k1_stale = False  # k[0] currently holds f(t, y) = f(t_lo, ylo)
                for _ in range(200):
                    t_mid = 0.5 * (t_lo + t_hi)
                    dt_probe = t_mid - t_lo
                    if dt_probe <= 0.0 or (t_hi - t_lo) < 1e-14 * (1.0 + abs(t)):
                        # interval exhausted at floating resolution
                        converged = True
                        _drift(sb, dbm, dbp, np.cos(t_lo), ylo, k[0])
                        _dp45_probe(sb, dbm, dbp, t_lo, t_hi - t_lo, ylo, k,
                                    ytmp, yprobe)
                        t_mid = t_hi
                        break
                    if k1_stale:
                        _drift(sb, dbm, dbp, np.cos(t_lo), ylo, k[0])
                        k1_stale = False
                    _dp45_probe(sb, dbm, dbp, t_lo, dt_probe, ylo, k, ytmp,
                                yprobe)
                    n2p = _norm2(yprobe)
                    log_mid = log_lo + np.log(n2p)
                    s_mid = np.exp(log_mid * rate_scale)
                    if abs(s_mid - r) <= bisect_tol:
                        converged = True
                        break
                    if log_mid > log_thresh:
                        # crossing is later: advance the left bracket
                        t_lo = t_mid
                        log_lo = log_mid
                        inv = 1.0 / np.sqrt(n2p)
                        for j in range(dim):
                            ylo[j] = yprobe[j] * inv
                        k1_stale = True
                    else:
                        t_hi = t_mid
                if not converged:
                    status = FAIL_BISECTION
                    t_fail = t_mid
                    break
                # pre-jump state (normalized), then apply the lowering operator
                n2p = _norm2(yprobe)
                inv = 1.0 / np.sqrt(n2p)
                for j in range(dim):
                    yprobe[j] *= inv
                an2 = _apply_lowering(yprobe, sq, ytmp)
                if an2 < 1e-14:
                    status = FAIL_DARK_JUMP
                    t_fail = t_mid
                    break
                inv = 1.0 / np.sqrt(an2)
                for j in range(dim):
                    y[j] = ytmp[j] * inv
                if n_jumps >= jumps.shape[0]:
                    grown = np.empty(jumps.shape[0] * 2)
                    grown[:jumps.shape[0]] = jumps
                    jumps = grown
                t = t_mid
                jumps[n_jumps] = t
                n_jumps += 1
                log_surv = 0.0
                r = rng.random()
                while r <= 0.0:
                    r = rng.random()
                log_thresh = np.log(r) / rate_scale
                have_k1 = False
                leak = _tail_pop(y, leak_start)
                if leak > leak_max:
                    leak_max = leak
                if leak > leak_bound:
                    status = FAIL_LEAKAGE
                    t_fail = t
                    break
                continue
            # accepted drift step
            log_surv += np.log(n2)
            inv = 1.0 / np.sqrt(n2)
            for j in range(dim):
                y[j] = ynew[j] * inv
                k[0, j] = k[6, j] * inv  # FSAL, rescaled with the state
            t = t_next if hit_boundary else t + h_try
            fac = 0.9 * err ** -0.2 if err > 0.0 else 5.0
            if fac > 5.0:
                fac = 5.0
            if fac < 0.2:
                fac = 0.2
            h = h_try * fac
            leak = _tail_pop(y, leak_start)
            if leak > leak_max:
                leak_max = leak
            if leak > leak_bound:
                status = FAIL_LEAKAGE
                t_fail = t
                break
        if status != OK:
            break
        qv, pv, nv, nrm2 = _expect_qpn(y, sq)
        q_out[ks] = qv
        p_out[ks] = pv
        n_out[ks] = nv
        dev = abs(nrm2 - 1.0)
        if dev > norm_dev_max:
            norm_dev_max = dev
    return status, t_fail, jumps, n_jumps, leak_max, norm_dev_max, y


# ---------------------------------------------------------------------------
# classical Duffing kernels (scaled variable u = beta*q)
# u'' + 2*gamma*u' + u^3 - u + g*cos(t) = 0, plus optional additive noise


@njit(cache=True, inline="always")
def _cl_acc(t, u, v, gamma, g):
    return u - u * u * u - 2.0 * gamma * v - g * np.cos(t)


@njit(cache=True)
def _rk4_duffing(u, v, t, h, n_steps, gamma, g):
    """Deterministic RK4 integration; returns (u, v, t)."""
    for _ in range(n_steps):
        k1v = v
        k1a = _cl_acc(t, u, v, gamma, g)
        u2 = u + 0.5 * h * k1v
        v2 = v + 0.5 * h * k1a
        k2v = v2
        k2a = _cl_acc(t + 0.5 * h, u2, v2, gamma, g)
        u3 = u + 0.5 * h * k2v
        v3 = v + 0.5 * h * k2a
        k3v = v3
        k3a = _cl_acc(t + 0.5 * h, u3, v3, gamma, g)
        u4 = u + h * k3v
        v4 = v + h * k3a
        k4v = v4
        k4a = _cl_acc(t + h, u4, v4, gamma, g)
        u += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        v += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        t += h
    return u, v, t


@njit(cache=True)
def _euler_maruyama(u0, v0, gamma, g, noise_amp, h, n_out, stride, rng,
                    u_out, v_out):
    """Euler-Maruyama at fixed step h, subsampled every `stride` steps.

    Writes n_out samples (the initial condition first).  Returns 0, or 1
    if the state became non-finite (divergence).
    """
    u = u0
    v = v0
    t = 0.0
    sqh = np.sqrt(h)
    u_out[0] = u
    v_out[0] = v
    for i in range(1, n_out):
        for _ in range(stride):
            du = v * h
            dv = (u - u * u * u - 2.0 * gamma * v - g * np.cos(t)) * h
            if noise_amp > 0.0:
                dv += noise_amp * sqh * rng.standard_normal()
            u += du
            v += dv
            t += h
        if not (np.isfinite(u) and np.isfinite(v)):
            return 1
        u_out[i] = u
        v_out[i] = v
    return 0


@njit(cache=True)
def _benettin(gamma, g, h, n_transient_periods, n_periods, u0, v0):
    """Largest Lyapunov exponent by tangent-space growth with per-period
    renormalization.  Returns (exponent, per-period log-growth array)."""
    steps_per = int(round(2.0 * np.pi / h))
    hh = 2.0 * np.pi / steps_per
    u = u0
    v = v0
    wu = 1.0
    wv = 0.0
    t = 0.0
    logs = np.empty(n_periods)
    for p in range(n_transient_periods + n_periods):
        for _ in range(steps_per):
            # RK4 on the coupled (state, tangent) system
            k1v = v
            k1a = _cl_acc(t, u, v, gamma, g)
            l1u = wv
            l1v = (1.0 - 3.0 * u * u) * wu - 2.0 * gamma * wv

            u2 = u + 0.5 * hh * k1v
            v2 = v + 0.5 * hh * k1a
            wu2 = wu + 0.5 * hh * l1u
            wv2 = wv + 0.5 * hh * l1v
            k2v = v2
            k2a = _cl_acc(t + 0.5 * hh, u2, v2, gamma, g)
            l2u = wv2
            l2v = (1.0 - 3.0 * u2 * u2) * wu2 - 2.0 * gamma * wv2

            u3 = u + 0.5 * hh * k2v
            v3 = v + 0.5 * hh * k2a
            wu3 = wu + 0.5 * hh * l2u
            wv3 = wv + 0.5 * hh * l2v
            k3v = v3
            k3a = _cl_acc(t + 0.5 * hh, u3, v3, gamma, g)
            l3u = wv3
            l3v = (1.0 - 3.0 * u3 * u3) * wu3 - 2.0 * gamma * wv3

            u4 = u + hh * k3v
            v4 = v + hh * k3a
            wu4 = wu + hh * l3u
            wv4 = wv + hh * l3v
            k4v = v4
            k4a = _cl_acc(t + hh, u4, v4, gamma, g)
            l4u = wv4
            l4v = (1.0 - 3.0 * u4 * u4) * wu4 - 2.0 * gamma * wv4

            u += hh / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            v += hh / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
            wu += hh / 6.0 * (l1u + 2.0 * l2u + 2.0 * l3u + l4u)
            wv += hh / 6.0 * (l1v + 2.0 * l2v + 2.0 * l3v + l4v)
            t += hh
        wn = np.sqrt(wu * wu + wv * wv)
        if p >= n_transient_periods:
            logs[p - n_transient_periods] = np.log(wn)
        wu /= wn
        wv /= wn
    lam = np.sum(logs) / (n_periods * 2.0 * np.pi)
    return lam, logs
