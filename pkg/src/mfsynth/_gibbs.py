"""Compiled two-block Gibbs sampler for the synthesis DLM.

The loops mirror :func:`mfsynth.synthesis.gibbs_fit` with ``engine="python"``
step for step, including the order in which random numbers are drawn, so
the two engines produce the same chain from the same generator state.
"""

import numba
import numpy as np

from ._linalg import psd_cholesky

Q_FLOOR = 1e-12

# status codes returned by the kernel
OK = 0
DEGENERATE_Q = 1
NON_FINITE = 2


@numba.njit(cache=True)
def _ffbs(y, x, m0, C0, n0, s0, delta, beta, rng, ms, Cs, ns, ss, theta_out, v_out):
    """Forward filter then backward sample one (theta, v) trajectory in place."""
    T, J = x.shape
    d = J + 1
    ms[0] = m0
    Cs[0] = C0
    ns[0] = n0
    ss[0] = s0
    F = np.empty(d)
    F[0] = 1.0
    R = np.empty((d, d))
    RF = np.empty(d)
    for t in range(T):
        for j in range(J):
            F[j + 1] = x[t, j]
        C = Cs[t]
        for a in range(d):
            for b in range(d):
                R[a, b] = 0.5 * (C[a, b] / delta + C[b, a] / delta)
        f = 0.0
        for a in range(d):
            f += F[a] * ms[t, a]
        q = ss[t]
        for a in range(d):
            acc = 0.0
            for b in range(d):
                acc += R[a, b] * F[b]
            RF[a] = acc
        qf = 0.0
        for a in range(d):
            qf += F[a] * RF[a]
        q = qf + ss[t]
        if not q > Q_FLOOR:
            return DEGENERATE_Q
        dof = beta * ns[t]
        e = y[t] - f
        n_new = dof + 1.0
        r = (dof + e * e / q) / n_new
        for a in range(d):
            ms[t + 1, a] = ms[t, a] + RF[a] / q * e
        for a in range(d):
            for b in range(d):
                Cs[t + 1, a, b] = r * (R[a, b] - q * (RF[a] / q) * (RF[b] / q))
        for a in range(d):
            for b in range(a + 1, d):
                avg = 0.5 * (Cs[t + 1, a, b] + Cs[t + 1, b, a])
                Cs[t + 1, a, b] = avg
                Cs[t + 1, b, a] = avg
        ns[t + 1] = n_new
        ss[t + 1] = r * ss[t]

    cov = np.empty((d, d))
    z = np.empty(d)
    inv_v = rng.standard_gamma(ns[T] / 2) / (ns[T] * ss[T] / 2)
    for a in range(d):
        for b in range(d):
            cov[a, b] = Cs[T, a, b] / (inv_v * ss[T])
    for a in range(d):
        z[a] = rng.standard_normal()
    L = psd_cholesky(cov)
    for a in range(d):
        acc = 0.0
        for b in range(a + 1):
            acc += L[a, b] * z[b]
        theta_out[T, a] = ms[T, a] + acc
    v_out[T - 1] = 1.0 / inv_v
    for t in range(T - 1, -1, -1):
        shape = (1.0 - beta) * ns[t] / 2
        gamma = 0.0
        if shape > 0:
            gamma = rng.standard_gamma(shape) / (ns[t] * ss[t] / 2)
        inv_v = beta * inv_v + gamma
        factor = (1.0 - delta) / (inv_v * ss[t])
        for a in range(d):
            for b in range(d):
                cov[a, b] = Cs[t, a, b] * factor
        for a in range(d):
            z[a] = rng.standard_normal()
        L = psd_cholesky(cov)
        for a in range(d):
            acc = 0.0
            for b in range(a + 1):
                acc += L[a, b] * z[b]
            theta_out[t, a] = ms[t, a] + delta * (theta_out[t + 1, a] - ms[t, a]) + acc
        if t > 0:
            v_out[t - 1] = 1.0 / inv_v
    return OK


@numba.njit(cache=True)
def _latent_step(theta, v, y, h, H, phi, rng, x_out):
    """Draw x_t | theta_t, v_t, y_t, phi_t for every t (Matheron update)."""
    T, J = h.shape
    x0 = np.empty(J)
    Ht = np.empty(J)
    for t in range(T):
        th = theta[t + 1]
        g = v[t]
        pred = th[0]
        for j in range(J):
            Ht[j] = H[t, j] / phi[t, j]
            x0[j] = h[t, j] + np.sqrt(Ht[j]) * rng.standard_normal()
            g += th[j + 1] * th[j + 1] * Ht[j]
            pred += th[j + 1] * x0[j]
        y0 = pred + np.sqrt(v[t]) * rng.standard_normal()
        resid = y[t] - y0
        for j in range(J):
            x_out[t, j] = x0[j] + Ht[j] * th[j + 1] / g * resid


@numba.njit(cache=True)
def _phi_step(x, h, H, nd, rng, phi_out):
    T, J = h.shape
    for t in range(T):
        for j in range(J):
            dev = 0.0
            if H[t, j] > 0:
                dev = (x[t, j] - h[t, j]) ** 2 / H[t, j]
            phi_out[t, j] = rng.standard_gamma((nd[t, j] + 1.0) / 2) / ((nd[t, j] + dev) / 2)


@numba.njit(cache=True)
def run_chain(y, h, H, nd, x, phi, m0, C0, n0, s0, delta, beta, burn_in, keep, thin, rng,
              theta_keep, v_keep, x_keep, phi_keep, mT_keep, CT_keep, sT_keep):
    """Run burn_in + keep * thin iterations; returns (status, failing iteration)."""
    T, J = h.shape
    d = J + 1
    ms = np.empty((T + 1, d))
    Cs = np.empty((T + 1, d, d))
    ns = np.empty(T + 1)
    ss = np.empty(T + 1)
    theta = np.empty((T + 1, d))
    v = np.empty(T)
    total = burn_in + keep * thin
    k = 0
    for it in range(total):
        status = _ffbs(y, x, m0, C0, n0, s0, delta, beta, rng, ms, Cs, ns, ss, theta, v)
        if status != OK:
            return status, it
        _latent_step(theta, v, y, h, H, phi, rng, x)
        _phi_step(x, h, H, nd, rng, phi)
        for t in range(T):
            if not (np.isfinite(v[t]) and v[t] > 0):
                return NON_FINITE, it
            for j in range(J):
                if not (np.isfinite(x[t, j]) and np.isfinite(phi[t, j])):
                    return NON_FINITE, it
        for t in range(T + 1):
            for a in range(d):
                if not np.isfinite(theta[t, a]):
                    return NON_FINITE, it
        if it >= burn_in and (it - burn_in) % thin == 0:
            theta_keep[k] = theta
            v_keep[k] = v
            x_keep[k] = x
            phi_keep[k] = phi
            mT_keep[k] = ms[T]
            CT_keep[k] = Cs[T]
            sT_keep[k] = ss[T]
            k += 1
    return OK, total
