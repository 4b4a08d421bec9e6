"""Trigonometric-polynomial construction and unit-circle root extraction.

Polynomial coefficient arrays are stored in ascending powers: ``coeffs[k]``
multiplies ``w**k``. The unit-circle variable is ``w = exp(+j 2 pi (d/lambda) t)``,
for which ``|H(t)|^2 = sum_m r_m w**m`` with ``r_m = sum_l c_l conj(c_{l+m})``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (DegeneratePolynomialError, DomainError, InsufficientRootsError,
                     UnresolvableSignalError)

UNIT_TOL = 1e-2
ANGLE_TOL = 1e-3
DEGENERATE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class LaurentPoly:
    """Coefficients for powers ``-(M-1) .. (M-1)``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        if c.shape[0] % 2 != 1:
            raise DomainError("Laurent coefficient list must have odd length")
        object.__setattr__(self, "coeffs", c)

    @property
    def M(self) -> int:
        return (self.coeffs.shape[0] + 1) // 2

    def lag(self, m: int) -> complex:
        return complex(self.coeffs[m + self.M - 1])

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        powers = np.arange(-(self.M - 1), self.M)
        return np.sum(self.coeffs[:, None] * w.reshape(1, -1) ** powers[:, None], axis=0).reshape(w.shape)

    def on_circle(self, omega) -> np.ndarray:
        """Evaluate at ``w = exp(j omega)``; real part for Hermitian-symmetric coefficients."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        M = self.M
        # sum_m r_m e^{j m w} = e^{-j(M-1)w} sum_k r_{k-(M-1)} e^{j k w}
        from .kernels import trig_poly_eval
        vals = trig_poly_eval(self.coeffs, -omega)
        return vals * np.exp(-1j * (M - 1) * omega)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        c = self.coeffs
        return bool(np.max(np.abs(c - np.conj(c[::-1])), initial=0.0) <= tol * max(1.0, np.abs(c).max()))


@dataclass(frozen=True, eq=False)
class UnitRootSet:
    angles: np.ndarray
    residuals: np.ndarray
    t_values: np.ndarray
    roots: np.ndarray           # representative root per cluster
    all_roots: np.ndarray = None

    def __len__(self):
        return int(self.t_values.shape[0])


def autocorrelation(c) -> LaurentPoly:
    c = np.asarray(c, dtype=complex).reshape(-1)
    if c.shape[0] < 1:
        raise DomainError("vector must be nonempty")
    M = c.shape[0]
    r = np.zeros(2 * M - 1, dtype=complex)
    for m in range(M):
        r[M - 1 + m] = np.sum(c[:M - m] * np.conj(c[m:]))
        r[M - 1 - m] = np.conj(r[M - 1 + m])
    return LaurentPoly(r)


def build_p_plus(r: LaurentPoly) -> np.ndarray:
    """Ascending coefficients of ``w**(M-1) * (1 - R(w))``."""
    p = -r.coeffs.copy()
    p[r.M - 1] += 1.0
    return p


def poly_roots(coeffs) -> np.ndarray:
    """All roots of the polynomial with ascending ``coeffs``.

    Uses the eigenvalues of the companion matrix (LAPACK balances it before
    the QR iteration). Trailing zero coefficients (in descending order) give
    exact roots at zero; leading zeros are dropped.
    """
    a = np.asarray(coeffs, dtype=complex).reshape(-1)
    nz = np.flatnonzero(a != 0)
    if nz.size == 0:
        raise DegeneratePolynomialError("all coefficients are zero")
    lo, hi = nz[0], nz[-1]
    zeros = np.zeros(lo, dtype=complex)
    a = a[lo:hi + 1]
    deg = a.shape[0] - 1
    if deg == 0:
        return zeros
    monic = a[:-1] / a[-1]
    comp = np.zeros((deg, deg), dtype=complex)
    comp[1:, :-1] = np.eye(deg - 1)
    comp[:, -1] = -monic
    return np.concatenate([np.linalg.eigvals(comp), zeros])


def _cluster_angles(angles, tol):
    """Group angles on the circle whose neighbours differ by < tol.

    Returns a list of index arrays.
    """
    n = angles.shape[0]
    if n == 0:
        return []
    order = np.argsort(angles)
    a = angles[order]
    groups = [[order[0]]]
    for k in range(1, n):
        if a[k] - a[k - 1] < tol:
            groups[-1].append(order[k])
        else:
            groups.append([order[k]])
    # merge across the +-pi seam
    if len(groups) > 1 and (a[0] + 2 * np.pi) - a[-1] < tol:
        groups[0] = groups[-1] + groups[0]
        groups.pop()
    return [np.asarray(g) for g in groups]


def _circular_mean(angles, weights):
    z = np.sum(weights * np.exp(1j * angles))
    return float(np.angle(z))


def select_unit_circle(roots, tol: float = UNIT_TOL, spacing_over_lambda: float = 0.5,
                       angle_tol: float = ANGLE_TOL) -> UnitRootSet:
    """Keep roots near the unit circle and merge numerically split pairs.

    Each cluster's angle is the inverse-residual weighted circular mean of its
    members; its residual is the smallest member residual.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    roots = np.asarray(roots, dtype=complex).reshape(-1)
    res = np.abs(1.0 - np.abs(roots))
    keep = res < tol
    z, res_k = roots[keep], res[keep]
    ang = np.angle(z)
    groups = _cluster_angles(ang, angle_tol)
    angles, resid, reps = [], [], []
    for g in groups:
        w = 1.0 / np.maximum(res_k[g], 1e-15)
        a = _circular_mean(ang[g], w)
        angles.append(a)
        resid.append(float(res_k[g].min()))
        reps.append(np.exp(1j * a) * np.mean(np.abs(z[g])))
    angles = np.asarray(angles, dtype=float)
    resid = np.asarray(resid, dtype=float)
    t = angles / (2 * np.pi * spacing_over_lambda)
    vis = np.abs(t) <= 1.0
    order = np.argsort(t[vis])
    return UnitRootSet(angles[vis][order], resid[vis][order], t[vis][order],
                       np.asarray(reps, dtype=complex)[vis][order] if reps else np.zeros(0, complex),
                       roots)


def p_plus_from_dual(c) -> np.ndarray:
    return build_p_plus(autocorrelation(c))


def support_from_dual(d, tol: float = UNIT_TOL, angle_tol: float = ANGLE_TOL,
                      degenerate_tol: float = DEGENERATE_TOL, return_roots: bool = False):
    """Support t-values where the dual polynomial reaches unit modulus.

    Raises :class:`UnresolvableSignalError` when ``P+`` is (numerically)
    identically zero, i.e. ``|H| = 1`` everywhere.
    """
    c = np.asarray(d.c, dtype=complex)
    p = p_plus_from_dual(c)
    scale = max(1.0, float(np.sum(np.abs(c)) ** 2))
    if np.max(np.abs(p)) <= degenerate_tol * scale:
        raise UnresolvableSignalError("dual polynomial has unit modulus everywhere")
    try:
        roots = poly_roots(p)
    except DegeneratePolynomialError as exc:
        raise UnresolvableSignalError(str(exc)) from None
    sel = select_unit_circle(roots, tol, d.geometry.spacing_over_lambda, angle_tol)
    if return_roots:
        return sel.t_values, sel
    return sel.t_values


def null_spectrum_poly(psi, tol: float = 1e-10) -> LaurentPoly:
    """Diagonal sums ``psi_l = sum_{m-n=l} Psi[m, n]`` as a Laurent polynomial.

    With ``w = exp(j 2 pi (d/lambda) t)``, ``a(t)^H Psi a(t) = sum_l psi_l w**(-l)``.
    The returned object stores coefficient ``psi_l`` at power ``-l`` so that
    evaluating it at ``w`` gives the null spectrum directly.
    """
    P = np.asarray(psi, dtype=complex)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DomainError("psi must be square")
    if np.max(np.abs(P - P.conj().T), initial=0.0) > tol * max(1.0, np.abs(P).max()):
        raise DomainError("psi must be Hermitian")
    M = P.shape[0]
    out = np.zeros(2 * M - 1, dtype=complex)
    for l in range(-(M - 1), M):
        out[M - 1 - l] = np.trace(P, offset=-l)
    return LaurentPoly(out)


def support_from_null_spectrum(psi, K: int, spacing_over_lambda: float = 0.5,
                               angle_tol: float = ANGLE_TOL) -> np.ndarray:
    """Root form of a null spectrum: K roots closest to the unit circle.

    Roots of ``w**(M-1) N(w)`` come in conjugate-reciprocal pairs sharing an
    angle. Pairs (and numerically split double roots on the circle) are merged
    by angle; the K groups nearest the circle give the estimates.
    """
    if K < 1:
        raise DomainError("K must be >= 1")
    N = null_spectrum_poly(psi)
    roots = poly_roots(N.coeffs)
    roots = roots[np.abs(roots) > 0]
    ang = np.angle(roots)
    dist = np.abs(np.log(np.abs(roots)))
    groups = _cluster_angles(ang, angle_tol)
    cand = []
    for g in groups:
        w = 1.0 / np.maximum(dist[g], 1e-15)
        cand.append((float(dist[g].min()), _circular_mean(ang[g], w)))
    cand.sort()
    t = []
    for dist_k, a in cand:
        tk = a / (2 * np.pi * spacing_over_lambda)
        if abs(tk) <= 1.0:
            t.append(tk)
        if len(t) == K:
            break
    if len(t) < K:
        raise InsufficientRootsError(f"found {len(t)} root pairs, need {K}")
    return np.sort(np.asarray(t))
