"""Grid-based sparse reconstruction (basis pursuit and BPDN).

``bpdn_solve`` minimizes ``|x|_1 = sum |x_i|`` subject to
``|y - A x|_2 <= eps`` with an ADMM splitting. Every few hundred iterations
the iterate is projected onto the constraint set along the least-norm
direction and compared with a dual lower bound

    D(w) = Re<w, y> - eps |w|_2,    |A^H w|_inf <= 1,

built from the splitting multipliers. The solve stops once the certified gap
is below ``tol * (1 + |x|_1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasibleError
from .kernels import admm_steps

# Absolute feasibility slack on unit-norm data (matters only for eps = 0).
FEAS_SLACK = 1e-10

DEFAULTS = {"tol": 1e-6, "max_iter": 100_000, "check_every": 200}


@dataclass(frozen=True, eq=False)
class BpdnProblem:
    A: np.ndarray
    y: np.ndarray
    epsilon: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=complex))
        y = np.asarray(self.y, dtype=complex).reshape(-1)
        if A.shape[0] != y.shape[0]:
            raise DomainError("A and y dimensions disagree")
        if not self.epsilon >= 0:
            raise DomainError("epsilon must be non-negative")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "epsilon", float(self.epsilon))


@dataclass(eq=False)
class BpdnResult:
    x: np.ndarray
    objective: float
    dual_bound: float
    gap: float
    residual_norm: float
    iterations: int
    converged: bool
    status: str


def _dual_bound(A, y, eps, w):
    s = np.max(np.abs(A.conj().T @ w), initial=0.0)
    if s > 1.0:
        w = w / s
    return float(np.real(np.vdot(w, y)) - eps * np.linalg.norm(w))


def _repair(x, A, pinv, y, eps):
    """Move ``x`` onto the constraint set along the least-norm direction."""
    r = y - A @ x
    rn = float(np.linalg.norm(r))
    if rn <= eps:
        return x
    return x + (1.0 - eps / rn) * (pinv @ r)


def bpdn_solve(p: BpdnProblem, opts: dict | None = None) -> BpdnResult:
    o = dict(DEFAULTS)
    if opts:
        o.update(opts)
    tol, max_iter, every = float(o["tol"]), int(o["max_iter"]), int(o["check_every"])
    A, y, eps = p.A, p.y, p.epsilon
    M, N = A.shape

    ynorm = float(np.linalg.norm(y))
    if ynorm <= eps:
        x0 = np.zeros(N, dtype=complex)
        return BpdnResult(x0, 0.0, 0.0, 0.0, ynorm, 0, True, "optimal")

    pinv = np.linalg.pinv(A, rcond=1e-10)
    if eps == 0.0:
        r = y - A @ (pinv @ y)
        if np.linalg.norm(r) > 1e-9 * ynorm:
            raise InfeasibleError("y is not in the range of A")

    # Work on unit-norm data so one penalty scale fits all problems.
    scale = ynorm
    ys = y / scale
    es = eps / scale
    AH = np.ascontiguousarray(A.conj().T)
    Ac = np.ascontiguousarray(A)
    G = np.ascontiguousarray(np.linalg.inv(np.eye(M) + A @ AH))
    pinv_s = pinv

    x = np.ascontiguousarray(pinv @ ys)
    z = x.copy()
    v = np.ascontiguousarray(Ac @ x)
    u1 = np.zeros(N, dtype=complex)
    u2 = np.zeros(M, dtype=complex)
    colmax = float(np.max(np.linalg.norm(A, axis=0)))
    rho = max(1.0, colmax)

    best = None
    it = 0
    while it < max_iter:
        n = min(every, max_iter - it)
        rp, rd = admm_steps(Ac, AH, G, ys, es, rho, x, z, v, u1, u2, n)
        it += n
        # certificate
        xf = _repair(z.copy(), Ac, pinv_s, ys, es)
        feasible = np.linalg.norm(ys - Ac @ xf) <= es * (1.0 + tol) + FEAS_SLACK
        primal = float(np.sum(np.abs(xf)))
        w = -rho * u2
        dual = max(_dual_bound(Ac, ys, es, w), _dual_bound(Ac, ys, es, -w))
        gap = primal - dual if feasible else np.inf
        if best is None or gap < best[2] or (not np.isfinite(best[2]) and not feasible):
            best = (xf, primal, gap, dual)
        if gap <= tol * (1.0 + primal):
            break
        # residual balancing; the scaled multipliers follow rho
        if rp > 10 * rd:
            rho *= 2.0
            u1 /= 2.0
            u2 /= 2.0
        elif rd > 10 * rp:
            rho /= 2.0
            u1 *= 2.0
            u2 *= 2.0

    xf, primal, gap, dual = best
    converged = gap <= tol * (1.0 + primal)
    x_out = xf * scale
    res = float(np.linalg.norm(y - A @ x_out))
    return BpdnResult(x_out, primal * scale, dual * scale, gap * scale, res, it, converged,
                      "optimal" if converged else "max_iter")
