"""Array geometry, plane-wave synthesis, noise and resolvability bounds.

The angular variable is ``t = sin(theta)`` throughout. Degrees only appear in
the conversion helpers :func:`deg2t` and :func:`t2deg`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateSignalError, DomainError

_T_SLACK = 1e-12


@dataclass(frozen=True)
class ArrayGeometry:
    """Masked uniform line array.

    Slot ``m`` of the underlying ULA sits at ``m * d``. Only slots whose
    ``active`` flag is set carry a sensor.
    """

    spacing_over_lambda: float
    slots: int
    active: tuple = field(default=None)

    def __post_init__(self):
        if not self.spacing_over_lambda > 0:
            raise DomainError("spacing_over_lambda must be positive")
        if self.active is None:
            object.__setattr__(self, "active", (True,) * int(self.slots))
        act = tuple(bool(a) for a in self.active)
        if len(act) != self.slots:
            raise DomainError("active mask length must equal slots")
        object.__setattr__(self, "active", act)
        object.__setattr__(self, "slots", int(self.slots))
        if sum(act) < 2:
            raise DomainError("at least two active sensors are required")

    @classmethod
    def ula(cls, M: int, spacing_over_lambda: float = 0.5) -> "ArrayGeometry":
        return cls(spacing_over_lambda, M)

    @classmethod
    def masked(cls, slots: int, indices: Iterable[int], spacing_over_lambda: float = 0.5):
        idx = set(int(i) for i in indices)
        if any(i < 0 or i >= slots for i in idx):
            raise DomainError("sensor index outside the slot range")
        return cls(spacing_over_lambda, slots, tuple(i in idx for i in range(slots)))

    @property
    def M(self) -> int:
        return sum(self.active)

    @property
    def is_uniform(self) -> bool:
        return all(self.active)

    @property
    def indices(self) -> np.ndarray:
        """Slot indices of the active sensors, ascending."""
        return np.flatnonzero(np.asarray(self.active))

    @property
    def inactive(self) -> np.ndarray:
        return np.flatnonzero(~np.asarray(self.active))


def random_mask(slots: int, count: int, seed: int, keep_ends: bool = True) -> tuple:
    """Reproducible random subset of ``count`` slots.

    With ``keep_ends`` the first and last slot are always kept, so the
    aperture matches the full array.
    """
    if not 2 <= count <= slots:
        raise DomainError("count must satisfy 2 <= count <= slots")
    rng = np.random.default_rng(seed)
    if keep_ends:
        inner = rng.choice(np.arange(1, slots - 1), size=count - 2, replace=False)
        chosen = set(inner.tolist()) | {0, slots - 1}
    else:
        chosen = set(rng.choice(slots, size=count, replace=False).tolist())
    return tuple(i in chosen for i in range(slots))


@dataclass(frozen=True)
class SourceScene:
    """Ground-truth sources as ``(t, complex amplitude)`` pairs."""

    t: tuple = ()
    amplitudes: tuple = ()

    def __post_init__(self):
        t = tuple(float(v) for v in self.t)
        x = tuple(complex(v) for v in self.amplitudes)
        if len(t) != len(x):
            raise DomainError("t and amplitudes must have equal length")
        for v in t:
            _check_t(v)
        if len(set(t)) != len(t):
            raise DomainError("source directions must be distinct")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "amplitudes", x)

    @classmethod
    def from_degrees(cls, theta_deg: Sequence[float], magnitudes: Sequence[complex],
                     phases_deg: Sequence[float] | None = None) -> "SourceScene":
        mags = np.asarray(magnitudes, dtype=complex)
        if phases_deg is not None:
            mags = mags * np.exp(1j * np.deg2rad(np.asarray(phases_deg, dtype=float)))
        return cls(tuple(deg2t(th) for th in theta_deg), tuple(mags))

    @property
    def K(self) -> int:
        return len(self.t)

    def __add__(self, other: "SourceScene") -> "SourceScene":
        return SourceScene(self.t + other.t, self.amplitudes + other.amplitudes)


@dataclass(frozen=True, eq=False)
class Snapshot:
    """One narrowband measurement vector over the active sensors."""

    y: np.ndarray
    geometry: ArrayGeometry
    snr_db: float | None = None
    noise_norm: float | None = None
    label: str = ""

    def __post_init__(self):
        y = np.array(self.y, dtype=complex).reshape(-1)
        if y.shape[0] != self.geometry.M:
            raise DomainError(f"snapshot length {y.shape[0]} != M={self.geometry.M}")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    def full(self) -> np.ndarray:
        """Data scattered onto all ULA slots, zeros at inactive slots."""
        out = np.zeros(self.geometry.slots, dtype=complex)
        out[self.geometry.indices] = self.y
        return out

    def scaled(self, alpha: complex) -> "Snapshot":
        return Snapshot(alpha * self.y, self.geometry, self.snr_db, self.noise_norm, self.label)


def deg2t(theta_deg: float) -> float:
    return math.sin(math.radians(theta_deg))


def t2deg(t: float) -> float:
    return math.degrees(math.asin(max(-1.0, min(1.0, t))))


def _check_t(t: float) -> None:
    if not (-1.0 - _T_SLACK <= t <= 1.0 + _T_SLACK) or math.isnan(t):
        raise DomainError(f"t={t!r} outside [-1, 1]")


def steering_vector(geom: ArrayGeometry, t: float) -> np.ndarray:
    _check_t(t)
    m = geom.indices
    return np.exp(2j * np.pi * geom.spacing_over_lambda * m * t)


def sensing_matrix(geom: ArrayGeometry, grid: Sequence[float]) -> np.ndarray:
    g = np.asarray(grid, dtype=float).reshape(-1)
    if g.size == 0:
        raise DomainError("grid must be nonempty")
    if np.any(np.abs(g) > 1 + _T_SLACK) or np.any(np.isnan(g)):
        raise DomainError("grid values must lie in [-1, 1]")
    m = geom.indices[:, None]
    return np.exp(2j * np.pi * geom.spacing_over_lambda * m * g[None, :])


def synthesize(geom: ArrayGeometry, scene: SourceScene) -> Snapshot:
    if scene.K == 0:
        return Snapshot(np.zeros(geom.M, dtype=complex), geom)
    A = sensing_matrix(geom, scene.t)
    return Snapshot(A @ np.asarray(scene.amplitudes, dtype=complex), geom)


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Two independent standard normals per entry (real part drawn first)."""
    z = rng.standard_normal(tuple(np.atleast_1d(shape)) + (2,))
    return z[..., 0] + 1j * z[..., 1]


def add_noise(s: Snapshot, snr_db: float, seed: int) -> Snapshot:
    """Add complex Gaussian noise scaled to hit ``snr_db`` exactly.

    ``snr_db = inf`` returns the snapshot unchanged. The generator is NumPy's
    PCG64 seeded with ``seed``.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return s
    if not math.isfinite(snr_db):
        raise DomainError("snr_db must be finite or +inf")
    ynorm = float(np.linalg.norm(s.y))
    if ynorm == 0.0:
        raise DegenerateSignalError("cannot set an SNR on a zero signal")
    rng = np.random.default_rng(seed)
    n = complex_gaussian(rng, s.y.shape[0])
    target = ynorm * 10.0 ** (-snr_db / 20.0)
    n *= target / np.linalg.norm(n)
    return Snapshot(s.y + n, s.geometry, snr_db, target, s.label)


def k_max(M: int) -> int:
    if M < 2:
        raise DomainError("M must be at least 2")
    return (M - 1) // 2


def min_separation(geom: ArrayGeometry) -> float:
    return 1.0 / (geom.slots * geom.spacing_over_lambda)


def wraparound_distance(t1: float, t2: float) -> float:
    d = abs(t1 - t2)
    return min(d, 2.0 - d)


def min_pairwise_separation(ts: Sequence[float]) -> float:
    ts = list(ts)
    best = math.inf
    for i in range(len(ts)):
        for j in range(i + 1, len(ts)):
            best = min(best, wraparound_distance(ts[i], ts[j]))
    return best


def synthesize_snapshots(geom: ArrayGeometry, scene: SourceScene, L: int,
                         snr_db: float | None, seed: int,
                         random_phase: bool = True) -> list[Snapshot]:
    """Stationary multi-snapshot scene.

    Each snapshot redraws the source phases uniformly (when ``random_phase``)
    and adds iid complex Gaussian noise of per-sensor variance
    ``sum|x_i|^2 * 10^(-snr_db/10)``.
    """
    if L < 1:
        raise DomainError("L must be at least 1")
    rng = np.random.default_rng(seed)
    x = np.asarray(scene.amplitudes, dtype=complex)
    A = sensing_matrix(geom, scene.t) if scene.K else np.zeros((geom.M, 0), complex)
    power = float(np.sum(np.abs(x) ** 2))
    sigma = 0.0
    if snr_db is not None and math.isfinite(snr_db):
        if power == 0.0:
            raise DegenerateSignalError("cannot set an SNR on a zero signal")
        sigma = math.sqrt(power * 10.0 ** (-snr_db / 10.0))
    out = []
    for _ in range(L):
        xl = x * np.exp(2j * np.pi * rng.random(x.shape)) if random_phase else x
        n = complex_gaussian(rng, geom.M) * (sigma / math.sqrt(2.0))
        out.append(Snapshot(A @ xl + n, geom, snr_db, float(np.linalg.norm(n))))
    return out
