"""Classical DOA estimators and amplitude recovery on a fixed support."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (ConditioningWarning, DegenerateSubspaceError, DomainError, LoadingWarning,
                     SingularityError)
from .kernels import quadform_eval
from .model import ArrayGeometry, Snapshot, sensing_matrix

DENOM_FLOOR = 1e-30
LOADING = 1e-10
COND_LIMIT = 1e10


@dataclass(frozen=True, eq=False)
class CrossSpectral:
    C: np.ndarray
    L: int
    geometry: ArrayGeometry | None = None

    @property
    def M(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True, eq=False)
class SubspaceSplit:
    Us: np.ndarray
    Ls: np.ndarray
    Un: np.ndarray
    Ln: np.ndarray
    gap_ratio: float
    geometry: ArrayGeometry | None = None

    @property
    def degenerate(self) -> bool:
        """True when the signal and noise eigenvalues are not separated."""
        return self.gap_ratio < 1.0 + 1e-8


def _require_ula(geom: ArrayGeometry | None):
    if geom is not None and not geom.is_uniform:
        raise DomainError("spectral methods require a uniform array")


def _omega(geom: ArrayGeometry | None, grid) -> np.ndarray:
    d = 0.5 if geom is None else geom.spacing_over_lambda
    return 2 * np.pi * d * np.asarray(grid, dtype=float)


def cbf(y: Snapshot, grid: Sequence[float]) -> np.ndarray:
    """Conventional beamformer output ``A^H y``."""
    A = sensing_matrix(y.geometry, grid)
    return A.conj().T @ y.y


def bartlett_spectrum(C: CrossSpectral, grid: Sequence[float]) -> np.ndarray:
    """Snapshot-averaged conventional power ``a^H C a``."""
    _require_ula(C.geometry)
    return quadform_eval(C.C, _omega(C.geometry, grid))


def min_l2(y: Snapshot, grid: Sequence[float]) -> np.ndarray:
    """Minimum-norm solution ``A^H (A A^H)^{-1} y``."""
    A = sensing_matrix(y.geometry, grid)
    G = A @ A.conj().T
    if np.linalg.cond(G) > 1e13:
        raise SingularityError("A A^H is singular; A lacks full row rank")
    return A.conj().T @ np.linalg.solve(G, y.y)


def csm(snapshots: Sequence[Snapshot]) -> CrossSpectral:
    if len(snapshots) == 0:
        raise DomainError("at least one snapshot is required")
    M = snapshots[0].y.shape[0]
    if any(s.y.shape[0] != M for s in snapshots):
        raise DomainError("snapshot lengths differ")
    Y = np.stack([s.y for s in snapshots], axis=1)
    C = (Y @ Y.conj().T) / Y.shape[1]
    C = 0.5 * (C + C.conj().T)
    return CrossSpectral(C, Y.shape[1], snapshots[0].geometry)


def eig_split(C: CrossSpectral, K: int) -> SubspaceSplit:
    M = C.M
    if not 1 <= K < M:
        raise DomainError("need 1 <= K < M")
    lam, U = np.linalg.eigh(C.C)
    lam, U = lam[::-1], U[:, ::-1]
    lo = max(abs(lam[K]), np.finfo(float).tiny)
    gap = float(lam[K - 1] / lo) if lam[K] > 0 else np.inf
    return SubspaceSplit(U[:, :K], lam[:K], U[:, K:], lam[K:], gap, C.geometry)


def mvdr_inverse(C: CrossSpectral):
    """Inverse used by MVDR; returns ``(Cinv, loaded)``.

    Loading ``1e-10 * trace(C) / M`` is added when C is numerically singular.
    """
    M = C.M
    lam = np.linalg.eigvalsh(C.C)
    loaded = False
    A = C.C
    if C.L < M or lam[0] <= 1e-12 * max(lam[-1], 0.0):
        delta = LOADING * float(np.real(np.trace(C.C))) / M
        A = C.C + delta * np.eye(M)
        loaded = True
        lam = np.linalg.eigvalsh(A)
    if lam[0] <= 0 or lam[0] <= 1e-15 * lam[-1]:
        raise SingularityError("cross-spectral matrix is singular")
    inv = np.linalg.inv(A)
    return 0.5 * (inv + inv.conj().T), loaded


def mvdr_spectrum(C: CrossSpectral, grid: Sequence[float]) -> np.ndarray:
    _require_ula(C.geometry)
    Ci, loaded = mvdr_inverse(C)
    if loaded:
        warnings.warn("diagonal loading applied to singular cross-spectral matrix", LoadingWarning,
                      stacklevel=2)
    den = quadform_eval(Ci, _omega(C.geometry, grid))
    return 1.0 / np.maximum(den, DENOM_FLOOR)


def music_spectrum(split: SubspaceSplit, grid: Sequence[float]) -> np.ndarray:
    _require_ula(split.geometry)
    Pn = split.Un @ split.Un.conj().T
    den = quadform_eval(Pn, _omega(split.geometry, grid))
    return 1.0 / np.maximum(den, DENOM_FLOOR)


def minnorm_vector(split: SubspaceSplit, use_signal_form: bool = False) -> np.ndarray:
    """Minimum-norm noise-subspace vector with unit first element.

    Noise form: ``Un d^H / |d|^2`` with ``d`` the first row of ``Un``.
    Signal form: ``(e_0 - Us b^H) / (1 - |b|^2)`` with ``b`` the first row of
    ``Us``; the two agree because ``Us b^H + Un d^H = e_0``.
    """
    if use_signal_form:
        b = split.Us[0, :]
        den = 1.0 - float(np.real(np.vdot(b, b)))
        if abs(den) < 1e-12:
            raise DegenerateSubspaceError("first row of Us has unit norm")
        e0 = np.zeros(split.Us.shape[0], dtype=complex)
        e0[0] = 1.0
        return (e0 - split.Us @ b.conj()) / den
    d = split.Un[0, :]
    nd = float(np.real(np.vdot(d, d)))
    if nd < 1e-12:
        raise DegenerateSubspaceError("first row of Un vanishes")
    return split.Un @ d.conj() / nd


def minnorm_spectrum(v: np.ndarray, grid: Sequence[float],
                     geometry: ArrayGeometry | None = None) -> np.ndarray:
    _require_ula(geometry)
    v = np.asarray(v, dtype=complex)
    den = quadform_eval(np.outer(v, v.conj()), _omega(geometry, grid))
    return 1.0 / np.maximum(den, DENOM_FLOOR)


def amplitudes_from_support(y: Snapshot, support: Sequence[float]) -> np.ndarray:
    """Least-squares amplitudes ``A_T^+ y`` on the given support."""
    support = np.asarray(support, dtype=float).reshape(-1)
    if support.size == 0:
        return np.zeros(0, dtype=complex)
    if support.size > y.geometry.M:
        raise DomainError("support larger than the number of sensors")
    A = sensing_matrix(y.geometry, support)
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= s[0] * 1e-14:
        raise SingularityError("support steering vectors are linearly dependent")
    cond = s[0] / s[-1]
    if cond > COND_LIMIT:
        warnings.warn(f"support matrix condition number {cond:.3g}", ConditioningWarning, stacklevel=2)
    x, *_ = np.linalg.lstsq(A, y.y, rcond=None)
    return x


def find_peaks(spectrum: np.ndarray, K: int) -> np.ndarray:
    """Indices of the K largest local maxima (ties broken by position)."""
    s = np.asarray(spectrum, dtype=float)
    n = s.shape[0]
    if n == 0:
        return np.zeros(0, dtype=int)
    left = np.concatenate([[-np.inf], s[:-1]])
    right = np.concatenate([s[1:], [-np.inf]])
    idx = np.flatnonzero((s >= left) & (s > right))
    idx = idx[np.argsort(-s[idx], kind="stable")]
    return np.sort(idx[:K])
