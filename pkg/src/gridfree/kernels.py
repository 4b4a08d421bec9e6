"""Hot loops: dense-grid polynomial evaluation and the BPDN splitting iteration.

Each kernel has a vectorized NumPy form and a loop form. The loop form is
compiled by numba when available (see :mod:`gridfree._accel`); otherwise the
NumPy form is used. Both are importable so they can be cross-checked.
"""

from __future__ import annotations

import numpy as np

from ._accel import HAVE_NUMBA, njit

_CHUNK = 4096


# ---------------------------------------------------------------------------
# H(w) = sum_m c_m exp(-j m w)

def trig_poly_numpy(c: np.ndarray, omega: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=np.complex128)
    omega = np.asarray(omega, dtype=np.float64)
    m = np.arange(c.shape[0])
    out = np.empty(omega.shape[0], dtype=np.complex128)
    for s in range(0, omega.shape[0], _CHUNK):
        w = omega[s:s + _CHUNK]
        out[s:s + _CHUNK] = np.exp(-1j * np.outer(w, m)) @ c
    return out


def _trig_poly_loop(c, omega):
    n = omega.shape[0]
    M = c.shape[0]
    out = np.empty(n, dtype=np.complex128)
    for k in range(n):
        step = np.exp(-1j * omega[k])
        # Horner in the phasor keeps rounding error at O(M eps).
        acc = 0j
        for m in range(M - 1, -1, -1):
            acc = acc * step + c[m]
        out[k] = acc
    return out


# ---------------------------------------------------------------------------
# a(w)^H Psi a(w) with a_m = exp(j m w)

def quadform_numpy(psi: np.ndarray, omega: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    omega = np.asarray(omega, dtype=np.float64)
    m = np.arange(psi.shape[0])
    out = np.empty(omega.shape[0], dtype=np.float64)
    for s in range(0, omega.shape[0], _CHUNK):
        A = np.exp(1j * np.outer(m, omega[s:s + _CHUNK]))
        out[s:s + _CHUNK] = np.real(np.sum(np.conj(A) * (psi @ A), axis=0))
    return out


def _quadform_loop(psi, omega):
    # Diagonal sums s_l (l = p - q) turn the form into sum_l s_l exp(-j l w),
    # evaluated by Horner in O(M) per point.
    n = omega.shape[0]
    M = psi.shape[0]
    s = np.zeros(2 * M - 1, dtype=np.complex128)
    for p in range(M):
        for q in range(M):
            s[p - q + M - 1] += psi[p, q]
    out = np.empty(n, dtype=np.float64)
    for k in range(n):
        step = np.exp(-1j * omega[k])
        acc = 0j
        for i in range(2 * M - 2, -1, -1):
            acc = acc * step + s[i]
        out[k] = (acc * np.exp(1j * (M - 1) * omega[k])).real
    return out


# ---------------------------------------------------------------------------
# BPDN splitting steps. Written with array expressions so the same source
# runs under numba and as plain NumPy.

def _admm_steps(A, AH, G, y, eps, rho, x, z, v, u1, u2, n_steps):
    """Run ``n_steps`` iterations of the split

        min |z|_1 + I(|v - y| <= eps)  s.t.  x = z, A x = v

    ``G = (I + A A^H)^{-1}``. State arrays are updated in place. Returns the
    primal and dual residual norms of the last step.
    """
    kappa = 1.0 / rho
    r_p = 0.0
    r_d = 0.0
    for _ in range(n_steps):
        rhs = (z - u1) + AH @ (v - u2)
        x[:] = rhs - AH @ (G @ (A @ rhs))
        # soft threshold of complex entries
        w = x + u1
        mag = np.abs(w)
        scale = np.maximum(1.0 - kappa / np.maximum(mag, 1e-300), 0.0)
        z_new = w * scale
        Ax = A @ x
        q = Ax + u2 - y
        qn = np.sqrt(np.sum(q.real ** 2 + q.imag ** 2))
        if qn > eps:
            v_new = y + q * (eps / qn)
        else:
            v_new = Ax + u2
        d1 = z_new - z
        d2 = v_new - v
        z[:] = z_new
        v[:] = v_new
        e1 = x - z
        e2 = Ax - v
        u1 += e1
        u2 += e2
        r_p = np.sqrt(np.sum(np.abs(e1) ** 2) + np.sum(np.abs(e2) ** 2))
        back = d1 + AH @ d2
        r_d = rho * np.sqrt(np.sum(np.abs(back) ** 2))
    return r_p, r_d


if HAVE_NUMBA:
    trig_poly_loop = njit(_trig_poly_loop)
    quadform_loop = njit(_quadform_loop)
    admm_steps = njit(_admm_steps)
    trig_poly = trig_poly_loop
    quadform = quadform_loop
else:
    trig_poly_loop = _trig_poly_loop
    quadform_loop = _quadform_loop
    admm_steps = _admm_steps
    trig_poly = trig_poly_numpy
    quadform = quadform_numpy


def trig_poly_eval(c, omega) -> np.ndarray:
    """Evaluate ``sum_m c_m exp(-j m omega)`` at each ``omega``."""
    return trig_poly(np.ascontiguousarray(c, dtype=np.complex128),
                     np.ascontiguousarray(np.atleast_1d(omega), dtype=np.float64))


def quadform_eval(psi, omega) -> np.ndarray:
    """Evaluate ``a^H Psi a`` with ``a_m = exp(j m omega)`` at each ``omega``."""
    return quadform(np.ascontiguousarray(psi, dtype=np.complex128),
                    np.ascontiguousarray(np.atleast_1d(omega), dtype=np.float64))
