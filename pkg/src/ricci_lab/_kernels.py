"""Numba-accelerated inner loop for the warped flow integrator.

Mirrors _WarpedSystem.heun exactly (same stencils, regularizations, collar
projection and label transport); tests assert agreement with the numpy
path, which remains the reference and the fallback when numba is missing.
"""

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f
        return wrap if not (args and callable(args[0])) else args[0]

LAM_CONSTANT, LAM_TABLE, LAM_VNORM = 0, 1, 2
_COLLAR = np.array([1.0, 1.0, 1.0, 0.75, 0.5, 0.25])


@njit(cache=True)
def _rates(phi, omega, h, n, lam_mode, lam_value, lam_times, lam_values, t,
           dphi, domega, drift, k_rad, k_orb):
    m1 = phi.shape[0]
    inv12h = 1.0 / (12.0 * h)
    invh2 = 1.0 / (h * h)
    inv2h = 1.0 / (2.0 * h)

    # ghost values by odd reflection (phi) / even reflection (omega)
    def pget(j):
        if j < 0:
            return -phi[-j]
        if j >= m1:
            return -phi[2 * (m1 - 1) - j]
        return phi[j]

    def oget(j):
        if j < 0:
            return omega[-j]
        if j >= m1:
            return omega[2 * (m1 - 1) - j]
        return omega[j]

    rm2max = 0.0
    for j in range(m1):
        phi_x = (pget(j - 2) - 8.0 * pget(j - 1) + 8.0 * pget(j + 1)
                 - pget(j + 2)) * inv12h
        phi_xx = (pget(j - 1) - 2.0 * phi[j] + pget(j + 1)) * invh2
        om_x = (oget(j + 1) - oget(j - 1)) * inv2h
        om_xx = (oget(j - 1) - 2.0 * omega[j] + oget(j + 1)) * invh2
        w = omega[j]
        phi_s = phi_x / w
        phi_ss = (phi_xx - phi_x * om_x / w) / (w * w)
        dphi[j] = phi_ss            # staging: quotient terms added below
        domega[j] = om_xx / (w * w) - 2.0 * om_x * om_x / (w * w * w)
        drift[j] = om_x / (w * w * w)
        if 2 < j < m1 - 3:
            k_rad[j] = -phi_ss / phi[j]
            k_orb[j] = (1.0 - phi_s * phi_s) / (phi[j] * phi[j])

    kl = (k_rad[3] + k_rad[4] + k_rad[5] + k_rad[6] + k_rad[7]) / 5.0
    kr = (k_rad[m1 - 8] + k_rad[m1 - 7] + k_rad[m1 - 6] + k_rad[m1 - 5]
          + k_rad[m1 - 4]) / 5.0
    for j in range(3):
        k_rad[j] = kl
        k_orb[j] = kl
        k_rad[m1 - 1 - j] = kr
        k_orb[m1 - 1 - j] = kr

    lam = lam_value
    if lam_mode == LAM_TABLE:
        lam = np.interp(t, lam_times, lam_values)
    elif lam_mode == LAM_VNORM:
        num = 0.0
        den = 0.0
        for j in range(m1 - 1):
            sa = 2.0 * (n - 1) * k_rad[j] + (n - 1) * (n - 2) * k_orb[j]
            sb = 2.0 * (n - 1) * k_rad[j + 1] + (n - 1) * (n - 2) * k_orb[j + 1]
            wa = phi[j] ** (n - 1) * omega[j]
            wb = phi[j + 1] ** (n - 1) * omega[j + 1]
            num += 0.5 * (sa * wa + sb * wb)
            den += 0.5 * (wa + wb)
        lam = (2.0 / n) * num / den

    for j in range(m1):
        rm2 = (4.0 * (n - 1) * k_rad[j] * k_rad[j]
               + 2.0 * (n - 1) * (n - 2) * k_orb[j] * k_orb[j])
        if rm2 > rm2max:
            rm2max = rm2
        phi_x = (pget(j - 2) - 8.0 * pget(j - 1) + 8.0 * pget(j + 1)
                 - pget(j + 2)) * inv12h
        dphi[j] += (-(n - 2) * k_orb[j] * phi[j] + phi_x * drift[j]
                    + 0.5 * lam * phi[j])
        domega[j] += (-(n - 1) * k_rad[j] + 0.5 * lam) * omega[j]
    dphi[0] = 0.0
    dphi[m1 - 1] = 0.0
    return lam, np.sqrt(rm2max)


@njit(cache=True)
def _project_collar(phi, omega, h, collar):
    m1 = phi.shape[0]
    inv12h = 1.0 / (12.0 * h)

    def pget(j):
        if j < 0:
            return -phi[-j]
        if j >= m1:
            return -phi[2 * (m1 - 1) - j]
        return phi[j]

    w = collar.shape[0]
    for side in range(2):
        k_est = 0.0
        for i in range(w, w + 5):
            j = i if side == 0 else m1 - 1 - i
            phi_x = (pget(j - 2) - 8.0 * pget(j - 1) + 8.0 * pget(j + 1)
                     - pget(j + 2)) * inv12h
            phi_s = phi_x / omega[j]
            k_est += (1.0 - phi_s * phi_s) / (phi[j] * phi[j])
        k_est /= 5.0
        for i in range(w):
            j = i if side == 0 else m1 - 1 - i
            sgn = 1.0 if side == 0 else -1.0
            phi_x = (pget(j - 2) - 8.0 * pget(j - 1) + 8.0 * pget(j + 1)
                     - pget(j + 2)) * inv12h
            arg = 1.0 - k_est * phi[j] * phi[j]
            if arg < 0.25:
                arg = 0.25
            target = sgn * phi_x / np.sqrt(arg)
            omega[j] = (1.0 - collar[i]) * omega[j] + collar[i] * target


@njit(cache=True)
def advance(phi, omega, xi, h, n, lam_mode, lam_value, lam_times, lam_values,
            t0, t_target, c_stab, dt_max, rm_threshold, max_steps, dt_buf):
    """Heun-step the system from t0 toward t_target.

    Returns (t, lam_integral_increment, steps, status) with status 0 = hit
    t_target, 1 = blow-up threshold crossed, 2 = geometry degenerated.
    Arrays are updated in place; dt_buf collects the accepted step sizes.
    """
    m1 = phi.shape[0]
    d1 = np.empty(m1)
    w1 = np.empty(m1)
    g1 = np.empty(m1)
    d2 = np.empty(m1)
    w2 = np.empty(m1)
    g2 = np.empty(m1)
    ka = np.empty(m1)
    kb = np.empty(m1)
    ps = np.empty(m1)
    os_ = np.empty(m1)
    t = t0
    lam_int = 0.0
    steps = 0
    while t < t_target and steps < max_steps:
        lam1, rm = _rates(phi, omega, h, n, lam_mode, lam_value, lam_times,
                          lam_values, t, d1, w1, g1, ka, kb)
        if rm > rm_threshold:
            return t, lam_int, steps, 1
        omin = omega[0]
        for j in range(m1):
            if omega[j] < omin:
                omin = omega[j]
        h_eff = h * omin
        dt = c_stab * h_eff * h_eff / (1.0 + rm * h_eff * h_eff)
        if dt_max > 0.0 and dt > dt_max:
            dt = dt_max
        if dt > t_target - t:
            dt = t_target - t
        for j in range(m1):
            ps[j] = phi[j] + dt * d1[j]
            os_[j] = omega[j] + dt * w1[j]
        ps[0] = 0.0
        ps[m1 - 1] = 0.0
        bad = False
        for j in range(m1):
            if not (np.isfinite(ps[j]) and np.isfinite(os_[j])) or os_[j] <= 0.0:
                bad = True
                break
            if 0 < j < m1 - 1 and ps[j] <= 0.0:
                bad = True
                break
        if bad:
            return t, lam_int, steps, 2
        lam2, _ = _rates(ps, os_, h, n, lam_mode, lam_value, lam_times,
                         lam_values, t + dt, d2, w2, g2, ka, kb)
        for j in range(m1):
            phi[j] += 0.5 * dt * (d1[j] + d2[j])
            omega[j] += 0.5 * dt * (w1[j] + w2[j])
        phi[0] = 0.0
        phi[m1 - 1] = 0.0
        _project_collar(phi, omega, h, _COLLAR)
        for j in range(m1):
            if not (np.isfinite(phi[j]) and np.isfinite(omega[j])) or omega[j] <= 0.0:
                return t, lam_int, steps, 2
            if 0 < j < m1 - 1 and phi[j] <= 0.0:
                return t, lam_int, steps, 2
        # transport material labels along the gauge drift (upwinded)
        gmax = 0.0
        for j in range(m1):
            g = 0.5 * (g1[j] + g2[j])
            g1[j] = g
            ag = g if g >= 0 else -g
            if ag > gmax:
                gmax = ag
        if gmax * dt >= 1e-14 * h:
            prev = xi[0]
            for j in range(1, m1 - 1):
                if g1[j] >= 0.0:
                    slope = (xi[j] - prev) / h
                else:
                    slope = (xi[j + 1] - xi[j]) / h
                prev = xi[j]
                xi[j] = xi[j] + dt * g1[j] * slope
            for j in range(1, m1):
                if xi[j] < xi[j - 1]:
                    xi[j] = xi[j - 1]
        t += dt
        lam_int += dt * 0.5 * (lam1 + lam2)
        if steps < dt_buf.shape[0]:
            dt_buf[steps] = dt
        steps += 1
    return t, lam_int, steps, 0
