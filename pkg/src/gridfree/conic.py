"""Dense primal-dual interior-point solver for small semidefinite programs.

Standard form handled internally::

    minimize    sum_b <C_b, X_b> + c_f . f
    subject to  sum_b <A_ib, X_b> + F_i . f = b_i,   X_b PSD,  f free

Each symmetric coefficient matrix is stored sparsely as upper-triangle
entries ``(row <= col, value)`` meaning ``A[row, col] = A[col, row] = value``.
The search direction is HKM with Mehrotra predictor-corrector steps.

Complex Hermitian blocks are handled by :class:`HermitianEmbedding`, which
maps an ``n x n`` Hermitian block onto a real ``2n x 2n`` symmetric one.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .errors import DomainError, ParseError

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITER = "max_iter"
STATUS_INFEASIBLE = "infeasible"

DEFAULTS = {"gap_tol": 1e-8, "feas_tol": 1e-8, "max_iter": 200}


# ---------------------------------------------------------------------------
# Problem container

@dataclass(frozen=True, eq=False)
class ConicProblem:
    """Linear objective and equalities over PSD blocks and free scalars.

    ``eq_*`` arrays form one COO list across all blocks: equality index,
    block index, row, col (row <= col) and value. ``free_*`` arrays hold the
    free-variable coefficients of the equalities.
    """

    psd_blocks: tuple
    free_vars: int
    obj_blocks: tuple            # dense symmetric matrices, one per block
    obj_free: np.ndarray
    eq_con: np.ndarray
    eq_blk: np.ndarray
    eq_row: np.ndarray
    eq_col: np.ndarray
    eq_val: np.ndarray
    free_con: np.ndarray
    free_var: np.ndarray
    free_val: np.ndarray
    rhs: np.ndarray
    maximize: bool = False

    def __post_init__(self):
        if any(int(n) < 1 for n in self.psd_blocks):
            raise DomainError("PSD block dimensions must be >= 1")
        for k, n in enumerate(self.psd_blocks):
            C = self.obj_blocks[k]
            if C.shape != (n, n):
                raise DomainError("objective block shape mismatch")
        m = self.rhs.shape[0]
        if self.eq_con.size and (self.eq_con.max() >= m or self.eq_con.min() < 0):
            raise DomainError("equality index out of range")
        if self.eq_blk.size:
            dims = np.asarray(self.psd_blocks)[self.eq_blk]
            if np.any(self.eq_row > self.eq_col) or np.any(self.eq_col >= dims):
                raise DomainError("coefficient entries must be upper-triangular and in range")
        if self.free_var.size and self.free_var.max() >= self.free_vars:
            raise DomainError("free variable index out of range")
        if self.obj_free.shape != (self.free_vars,):
            raise DomainError("free objective length mismatch")

    @property
    def num_equalities(self) -> int:
        return int(self.rhs.shape[0])

    def add_equalities(self, rows: "list[LinearForm]", rhs) -> "ConicProblem":
        """Return a new problem with extra equalities appended."""
        b = ProblemBuilder.from_problem(self)
        for form, r in zip(rows, rhs):
            b.add_equality(form, r)
        return b.build()

    def evaluate(self, X: list, f: np.ndarray | None = None):
        """Objective value and equality residual vector at ``(X, f)``."""
        f = np.zeros(self.free_vars) if f is None else np.asarray(f, float)
        obj = sum(float(np.sum(C * Xb)) for C, Xb in zip(self.obj_blocks, X))
        obj += float(self.obj_free @ f)
        AX = _apply_A(self, X, f)
        return obj, self.rhs - AX


class LinearForm:
    """Accumulates a linear functional over blocks and free scalars."""

    def __init__(self):
        self.entries = {}   # (blk, row, col) -> value, row <= col
        self.free = {}

    def add_entry(self, blk: int, i: int, j: int, value: float) -> "LinearForm":
        """Add ``value * Z[i, j]`` where ``Z`` is the (symmetric) block variable."""
        if value == 0.0:
            return self
        if i == j:
            key, v = (blk, i, i), value
        else:
            key, v = (blk, min(i, j), max(i, j)), 0.5 * value
        self.entries[key] = self.entries.get(key, 0.0) + v
        return self

    def add_free(self, k: int, value: float) -> "LinearForm":
        self.free[k] = self.free.get(k, 0.0) + value
        return self

    def __iadd__(self, other: "LinearForm"):
        for key, v in other.entries.items():
            self.entries[key] = self.entries.get(key, 0.0) + v
        for k, v in other.free.items():
            self.free[k] = self.free.get(k, 0.0) + v
        return self


class ProblemBuilder:
    """Incremental construction of a :class:`ConicProblem`."""

    def __init__(self, psd_blocks=(), free_vars: int = 0, maximize: bool = False):
        self.psd_blocks = [int(n) for n in psd_blocks]
        self.free_vars = int(free_vars)
        self.maximize = maximize
        self.objective = LinearForm()
        self._eq = []     # list of (con, blk, row, col, val) arrays
        self._fr = []
        self._rhs = []

    @classmethod
    def from_problem(cls, p: ConicProblem) -> "ProblemBuilder":
        b = cls(p.psd_blocks, p.free_vars, p.maximize)
        for k, C in enumerate(p.obj_blocks):
            r, c = np.nonzero(np.triu(C))
            for i, j in zip(r, c):
                b.objective.entries[(k, int(i), int(j))] = float(C[i, j])
        for k, v in enumerate(p.obj_free):
            if v:
                b.objective.free[k] = float(v)
        b._eq.append((p.eq_con, p.eq_blk, p.eq_row, p.eq_col, p.eq_val))
        b._fr.append((p.free_con, p.free_var, p.free_val))
        b._rhs.extend(p.rhs.tolist())
        return b

    def add_block(self, n: int) -> int:
        self.psd_blocks.append(int(n))
        return len(self.psd_blocks) - 1

    def add_free_vars(self, count: int) -> int:
        start = self.free_vars
        self.free_vars += int(count)
        return start

    def add_equality(self, form: LinearForm, rhs: float) -> int:
        k = len(self._rhs)
        if form.entries:
            keys = np.array(list(form.entries.keys()), dtype=np.int64).reshape(-1, 3)
            vals = np.array(list(form.entries.values()), dtype=float)
            self._eq.append((np.full(len(vals), k), keys[:, 0], keys[:, 1], keys[:, 2], vals))
        if form.free:
            idx = np.array(list(form.free.keys()), dtype=np.int64)
            vals = np.array(list(form.free.values()), dtype=float)
            self._fr.append((np.full(len(vals), k), idx, vals))
        self._rhs.append(float(rhs))
        return k

    def build(self) -> ConicProblem:
        obj_blocks = [np.zeros((n, n)) for n in self.psd_blocks]
        for (blk, i, j), v in self.objective.entries.items():
            obj_blocks[blk][i, j] += v
            if i != j:
                obj_blocks[blk][j, i] += v
        obj_free = np.zeros(self.free_vars)
        for k, v in self.objective.free.items():
            obj_free[k] += v
        cat = lambda parts, i, dt: (np.concatenate([p[i] for p in parts]).astype(dt)
                                    if parts else np.zeros(0, dt))
        eq = [cat(self._eq, i, np.int64) for i in range(4)] + [cat(self._eq, 4, float)]
        fr = [cat(self._fr, i, np.int64) for i in range(2)] + [cat(self._fr, 2, float)]
        eq = _coalesce(*eq)
        return ConicProblem(tuple(self.psd_blocks), self.free_vars, tuple(obj_blocks), obj_free,
                            *eq, *fr, np.asarray(self._rhs, dtype=float), self.maximize)


def _coalesce(con, blk, row, col, val):
    if con.size == 0:
        return con, blk, row, col, val
    key = np.stack([con, blk, row, col], axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    summed = np.bincount(inv.reshape(-1), weights=val, minlength=len(uniq))
    keep = summed != 0.0
    u = uniq[keep]
    return u[:, 0], u[:, 1], u[:, 2], u[:, 3], summed[keep]


# ---------------------------------------------------------------------------
# Hermitian embedding

class HermitianEmbedding:
    """Map between an ``n x n`` Hermitian ``H = A + jB`` and the real
    symmetric ``Z = [[A, -B], [B, A]]`` of size ``2n``.

    The solver works on an unstructured symmetric ``Z``; the Hermitian value
    is read back as ``H = (Z11 + Z22)/2 + j (Z21 - Z12)/2``. Linear functionals
    are defined through that averaged read-out, so PSD of ``Z`` implies PSD of
    the extracted ``H`` and vice versa for structured ``Z``.
    """

    def __init__(self, n: int, block: int = 0):
        if n < 1:
            raise DomainError("n must be >= 1")
        self.n = int(n)
        self.block = block

    @property
    def real_dim(self) -> int:
        return 2 * self.n

    def embed(self, H: np.ndarray) -> np.ndarray:
        A, B = H.real, H.imag
        return np.block([[A, -B], [B, A]])

    def extract(self, Z: np.ndarray) -> np.ndarray:
        n = self.n
        A = 0.5 * (Z[:n, :n] + Z[n:, n:])
        B = 0.5 * (Z[n:, :n] - Z[:n, n:])
        return A + 1j * B

    def index_map(self, p: int, q: int):
        """Real positions carrying ``Re H[p,q]`` (two, weight +1/2 each) and
        ``Im H[p,q]`` (``Z[n+p,q]`` weight +1/2, ``Z[p,n+q]`` weight -1/2)."""
        n = self.n
        return ((p, q), (n + p, n + q)), ((n + p, q), (p, n + q))

    def add_term(self, form: LinearForm, p: int, q: int, coef: complex) -> LinearForm:
        """Add ``Re(coef * H[p, q])`` to ``form``."""
        (r1, r2), (i1, i2) = self.index_map(p, q)
        a, b = coef.real, coef.imag
        if a:
            form.add_entry(self.block, *r1, 0.5 * a)
            form.add_entry(self.block, *r2, 0.5 * a)
        if b:
            form.add_entry(self.block, *i1, -0.5 * b)
            form.add_entry(self.block, *i2, 0.5 * b)
        return form

    def complex_equality(self, terms, rhs: complex = 0.0):
        """Split ``sum coef * H[p,q] = rhs`` into real and imaginary forms."""
        re, im = LinearForm(), LinearForm()
        for p, q, coef in terms:
            coef = complex(coef)
            self.add_term(re, p, q, coef)
            self.add_term(im, p, q, -1j * coef)
        rhs = complex(rhs)
        return (re, rhs.real), (im, rhs.imag)


def realify_hermitian(n: int, block: int = 0) -> HermitianEmbedding:
    return HermitianEmbedding(n, block)


@dataclass(frozen=True)
class SocBlock:
    """Arrow-matrix encoding of ``|c|_2 <= tau`` for ``c`` in C^n.

    The Hermitian block ``[[tau I_n, c], [c^H, tau]]`` is PSD iff
    ``|c|_2 <= tau`` (Schur complement).
    """

    n: int

    @property
    def size(self) -> int:
        return self.n + 1

    def matrix(self, c, tau: float) -> np.ndarray:
        c = np.asarray(c, dtype=complex).reshape(-1)
        if c.shape[0] != self.n:
            raise DomainError("vector length mismatch")
        W = np.zeros((self.n + 1, self.n + 1), dtype=complex)
        W[np.arange(self.n), np.arange(self.n)] = tau
        W[:self.n, self.n] = c
        W[self.n, :self.n] = np.conj(c)
        W[self.n, self.n] = tau
        return W

    def min_tau(self, c) -> float:
        return float(np.linalg.norm(np.asarray(c, dtype=complex)))

    def structure_equalities(self, emb: HermitianEmbedding):
        """Real equalities forcing an embedded Hermitian block into arrow form:
        equal diagonal, zero off-diagonal inside the leading ``n x n`` part."""
        n = self.n
        out = []
        for i in range(n):
            f = LinearForm()
            emb.add_term(f, i, i, 1.0)
            emb.add_term(f, n, n, -1.0)
            out.append((f, 0.0))
            for j in range(i + 1, n):
                out.extend(emb.complex_equality([(i, j, 1.0)], 0.0))
        return out


def soc_as_psd(n: int) -> SocBlock:
    if n < 1:
        raise DomainError("n must be >= 1")
    return SocBlock(int(n))


# ---------------------------------------------------------------------------
# Solution

@dataclass(eq=False)
class ConicSolution:
    variables: list               # one dense symmetric matrix per PSD block
    free: np.ndarray
    objective_value: float        # in the caller's sense (max or min)
    primal_objective: float       # internal minimization form
    dual_objective: float
    duality_gap: float            # relative gap
    iterations: int
    status: str
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    slacks: list = field(default_factory=list)
    primal_infeasibility: float = 0.0
    dual_infeasibility: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OPTIMAL


# ---------------------------------------------------------------------------
# Operators

class _BlockOps:
    """Per-block expanded coefficient lists (both orientations of each
    off-diagonal entry) grouped by equality."""

    def __init__(self, p: ConicProblem, k: int):
        sel = p.eq_blk == k
        con, r, c, v = p.eq_con[sel], p.eq_row[sel], p.eq_col[sel], p.eq_val[sel]
        off = r != c
        self.con = np.concatenate([con, con[off]])
        self.R = np.concatenate([r, c[off]])
        self.C = np.concatenate([c, r[off]])
        self.V = np.concatenate([v, v[off]])
        order = np.argsort(self.con, kind="stable")
        self.con, self.R, self.C, self.V = (a[order] for a in (self.con, self.R, self.C, self.V))
        self.ids, starts = np.unique(self.con, return_index=True)
        self.bounds = np.append(starts, len(self.con))
        self.n = p.psd_blocks[k]
        self.m = p.num_equalities
        self.norms = np.sqrt(np.bincount(self.con, weights=self.V ** 2, minlength=self.m))

    def apply(self, X):
        return np.bincount(self.con, weights=self.V * X[self.C, self.R], minlength=self.m)

    def adjoint(self, y):
        out = np.zeros((self.n, self.n))
        np.add.at(out, (self.R, self.C), y[self.con] * self.V)
        return out

    def schur(self, X, W):
        """Matrix with entries tr(A_i X A_j W) for this block."""
        Mb = np.zeros((self.m, self.m))
        for idx, j in enumerate(self.ids):
            s, e = self.bounds[idx], self.bounds[idx + 1]
            R, C, V = self.R[s:e], self.C[s:e], self.V[s:e]
            T = (X[:, R] * V) @ W[C, :]
            Mb[:, j] = self.apply(T)
        return Mb


def _apply_A(p: ConicProblem, X, f):
    out = np.zeros(p.num_equalities)
    for k in range(len(p.psd_blocks)):
        sel = p.eq_blk == k
        r, c, v = p.eq_row[sel], p.eq_col[sel], p.eq_val[sel]
        w = np.where(r == c, 1.0, 2.0)
        out += np.bincount(p.eq_con[sel], weights=w * v * X[k][r, c], minlength=p.num_equalities)
    if p.free_vars:
        out += np.bincount(p.free_con, weights=p.free_val * f[p.free_var], minlength=p.num_equalities)
    return out


def _sym(A):
    return 0.5 * (A + A.T)


def _max_step(X, dX):
    """Largest alpha with X + alpha dX PSD (X positive definite)."""
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    Li = sla.solve_triangular(L, np.eye(X.shape[0]), lower=True)
    lam = np.linalg.eigvalsh(_sym(Li @ dX @ Li.T))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _inv_pd(S):
    L = np.linalg.cholesky(S)
    Li = sla.solve_triangular(L, np.eye(S.shape[0]), lower=True)
    return Li.T @ Li


# ---------------------------------------------------------------------------
# Solver

def solve(p: ConicProblem, opts: dict | None = None) -> ConicSolution:
    """Solve ``p`` by a primal-dual interior-point method.

    Options: ``gap_tol`` (relative duality gap), ``feas_tol`` (relative
    equality and dual residuals), ``max_iter``.
    """
    o = dict(DEFAULTS)
    if opts:
        o.update(opts)
    gap_tol, feas_tol, max_iter = float(o["gap_tol"]), float(o["feas_tol"]), int(o["max_iter"])

    sign = -1.0 if p.maximize else 1.0
    C = [sign * Cb for Cb in p.obj_blocks]
    cf = sign * p.obj_free
    b = p.rhs
    m = p.num_equalities
    nb = len(p.psd_blocks)
    ops = [_BlockOps(p, k) for k in range(nb)]
    F = np.zeros((m, p.free_vars))
    np.add.at(F, (p.free_con, p.free_var), p.free_val)
    ntot = sum(p.psd_blocks)

    # Infeasible starting point scaled to the data.
    X, S = [], []
    for k, n in enumerate(p.psd_blocks):
        an = ops[k].norms
        an_max = float(an.max()) if an.size else 0.0
        xi = max(10.0, np.sqrt(n), n * float(np.max((1 + np.abs(b)) / (1 + an))) if m else 10.0)
        eta = max(10.0, np.sqrt(n), an_max, float(np.linalg.norm(C[k])))
        X.append(xi * np.eye(n))
        S.append(eta * np.eye(n))
    y = np.zeros(m)
    f = np.zeros(p.free_vars)

    bnorm = 1.0 + float(np.linalg.norm(b))
    cnorm = 1.0 + float(np.sqrt(sum(np.sum(Cb ** 2) for Cb in C) + cf @ cf))

    def residuals(X, S, y, f):
        rp = b - _apply_A(p, X, f)
        Rd = [C[k] - ops[k].adjoint(y) - S[k] for k in range(nb)]
        rf = cf - F.T @ y
        return rp, Rd, rf

    def objectives(X, y, f):
        pobj = sum(float(np.sum(C[k] * X[k])) for k in range(nb)) + float(cf @ f)
        return pobj, float(b @ y)

    best = None
    status = STATUS_MAX_ITER
    it = 0
    stall = 0
    for it in range(max_iter + 1):
        rp, Rd, rf = residuals(X, S, y, f)
        pobj, dobj = objectives(X, y, f)
        pinf = float(np.linalg.norm(rp)) / bnorm
        dinf = float(np.sqrt(sum(np.sum(R ** 2) for R in Rd) + rf @ rf)) / cnorm
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        xs = sum(float(np.sum(X[k] * S[k])) for k in range(nb))
        mu = xs / ntot
        merit = max(pinf, dinf, gap)
        if best is None or merit < best[0]:
            best = (merit, [x.copy() for x in X], [s.copy() for s in S], y.copy(), f.copy(), it)
        if pinf <= feas_tol and dinf <= feas_tol and gap <= gap_tol:
            status = STATUS_OPTIMAL
            break
        # Crude infeasibility certificates: unbounded dual or primal ray.
        ynorm = float(np.linalg.norm(y))
        xnorm = float(np.sqrt(sum(np.sum(x ** 2) for x in X)))
        if dobj > 1e10 * (1 + abs(pobj)) and ynorm > 1e10 and dinf < 1e-6:
            status = STATUS_INFEASIBLE
            break
        if -pobj > 1e10 * (1 + abs(dobj)) and xnorm > 1e10 and pinf < 1e-6:
            status = STATUS_INFEASIBLE
            break
        if it == max_iter:
            break

        W = []
        try:
            for k in range(nb):
                W.append(_inv_pd(S[k]))
        except np.linalg.LinAlgError:
            break
        Mmat = np.zeros((m, m))
        for k in range(nb):
            Mmat += ops[k].schur(X[k], W[k])
        Mmat = _sym(Mmat)
        solver = _kkt_factor(Mmat, F)

        def direction(G_rhs):
            # G_rhs: list of G_k (already symmetrized)
            h = rp - sum((ops[k].apply(G_rhs[k]) for k in range(nb)), np.zeros(m))
            dy, df = solver(h, rf)
            dS, dX = [], []
            for k in range(nb):
                Ad = ops[k].adjoint(dy)
                dS.append(Rd[k] - Ad)
                dX.append(_sym(G_rhs[k] + X[k] @ Ad @ W[k]))
            return dX, dS, dy, df

        # predictor
        G = [_sym(-X[k] - X[k] @ Rd[k] @ W[k]) for k in range(nb)]
        dXa, dSa, _, _ = direction(G)
        ap = min(1.0, min(_max_step(X[k], dXa[k]) for k in range(nb)))
        ad = min(1.0, min(_max_step(S[k], dSa[k]) for k in range(nb)))
        mu_aff = sum(float(np.sum((X[k] + ap * dXa[k]) * (S[k] + ad * dSa[k]))) for k in range(nb)) / ntot
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

        # corrector
        G = [_sym(sigma * mu * W[k] - X[k] - (X[k] @ Rd[k] + dXa[k] @ dSa[k]) @ W[k])
             for k in range(nb)]
        dX, dS, dy, df = direction(G)
        gamma = 0.9 + 0.09 * min(ap, ad)
        ap = min(1.0, gamma * min(_max_step(X[k], dX[k]) for k in range(nb)))
        ad = min(1.0, gamma * min(_max_step(S[k], dS[k]) for k in range(nb)))
        if ap < 1e-12 and ad < 1e-12:
            stall += 1
            if stall > 3:
                break
        else:
            stall = 0
        X = [X[k] + ap * dX[k] for k in range(nb)]
        f = f + ap * df
        S = [S[k] + ad * dS[k] for k in range(nb)]
        y = y + ad * dy

    if status != STATUS_OPTIMAL and best is not None and status != STATUS_INFEASIBLE:
        _, X, S, y, f, _ = best
    rp, Rd, rf = residuals(X, S, y, f)
    pobj, dobj = objectives(X, y, f)
    pinf = float(np.linalg.norm(rp)) / bnorm
    dinf = float(np.sqrt(sum(np.sum(R ** 2) for R in Rd) + rf @ rf)) / cnorm
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    return ConicSolution(
        variables=X, free=f, objective_value=sign * pobj, primal_objective=pobj,
        dual_objective=dobj, duality_gap=gap, iterations=it, status=status,
        multipliers=y, slacks=S, primal_infeasibility=pinf, dual_infeasibility=dinf)


def _kkt_factor(Mmat, F):
    """Factor the (possibly augmented) Newton system and return a solver."""
    m, nf = F.shape
    if nf == 0:
        reg = 0.0
        for _ in range(6):
            try:
                cf = sla.cho_factor(Mmat + reg * np.eye(m), check_finite=False)
                return lambda h, rf: (sla.cho_solve(cf, h, check_finite=False), np.zeros(0))
            except np.linalg.LinAlgError:
                reg = max(reg * 100, 1e-14 * max(1.0, float(np.abs(np.diag(Mmat)).max())))
        lu = sla.lu_factor(Mmat + reg * np.eye(m), check_finite=False)
        return lambda h, rf: (sla.lu_solve(lu, h, check_finite=False), np.zeros(0))
    K = np.block([[Mmat, F], [F.T, np.zeros((nf, nf))]])
    lu = sla.lu_factor(K, check_finite=False)

    def solve_kkt(h, rf):
        sol = sla.lu_solve(lu, np.concatenate([h, rf]), check_finite=False)
        return sol[:m], sol[m:]
    return solve_kkt


# ---------------------------------------------------------------------------
# Plain-text dump

_HEADER = "# gridfree conic problem v1"


def dump_problem(p: ConicProblem) -> str:
    """Serialize ``p``. Lines after the header:

    ``sense max|min``, ``blocks n1 n2 ...``, ``free k``, ``equalities m``,
    then ``obj B i j v`` and ``objf k v`` objective terms (upper triangle,
    matrix-entry values), ``rhs i v`` for each equality, ``a i B r c v`` for
    block coefficients and ``af i k v`` for free coefficients. Floats use
    ``repr`` so the dump round-trips exactly.
    """
    out = io.StringIO()
    w = out.write
    w(_HEADER + "\n")
    w(f"sense {'max' if p.maximize else 'min'}\n")
    w("blocks " + " ".join(str(n) for n in p.psd_blocks) + "\n")
    w(f"free {p.free_vars}\n")
    w(f"equalities {p.num_equalities}\n")
    for k, Cb in enumerate(p.obj_blocks):
        r, c = np.nonzero(np.triu(Cb))
        for i, j in zip(r, c):
            w(f"obj {k} {i} {j} {float(Cb[i, j])!r}\n")
    for k, v in enumerate(p.obj_free):
        if v:
            w(f"objf {k} {float(v)!r}\n")
    for i, v in enumerate(p.rhs):
        w(f"rhs {i} {float(v)!r}\n")
    for row in zip(p.eq_con, p.eq_blk, p.eq_row, p.eq_col, p.eq_val):
        w("a {} {} {} {} {!r}\n".format(*(int(x) for x in row[:4]), float(row[4])))
    for row in zip(p.free_con, p.free_var, p.free_val):
        w("af {} {} {!r}\n".format(int(row[0]), int(row[1]), float(row[2])))
    return out.getvalue()


def load_problem(text: str) -> ConicProblem:
    lines = text.splitlines()
    if not lines or lines[0].strip() != _HEADER:
        raise ParseError("missing header", "line 1")
    sense, blocks, nfree, m = None, None, None, None
    obj, objf, rhs, eqs, frs = [], [], {}, [], []
    for ln, raw in enumerate(lines[1:], start=2):
        parts = raw.split()
        if not parts:
            continue
        try:
            tag = parts[0]
            if tag == "sense":
                sense = parts[1] == "max"
            elif tag == "blocks":
                blocks = [int(v) for v in parts[1:]]
            elif tag == "free":
                nfree = int(parts[1])
            elif tag == "equalities":
                m = int(parts[1])
            elif tag == "obj":
                obj.append((int(parts[1]), int(parts[2]), int(parts[3]), float(parts[4])))
            elif tag == "objf":
                objf.append((int(parts[1]), float(parts[2])))
            elif tag == "rhs":
                rhs[int(parts[1])] = float(parts[2])
            elif tag == "a":
                eqs.append(tuple(int(v) for v in parts[1:5]) + (float(parts[5]),))
            elif tag == "af":
                frs.append((int(parts[1]), int(parts[2]), float(parts[3])))
            else:
                raise ParseError(f"unknown record {tag!r}", f"line {ln}")
        except ParseError:
            raise
        except (IndexError, ValueError) as exc:
            raise ParseError(str(exc), f"line {ln}") from None
    if sense is None or blocks is None or nfree is None or m is None:
        raise ParseError("incomplete header records")
    obj_blocks = [np.zeros((n, n)) for n in blocks]
    for k, i, j, v in obj:
        obj_blocks[k][i, j] = v
        obj_blocks[k][j, i] = v
    obj_free = np.zeros(nfree)
    for k, v in objf:
        obj_free[k] = v
    e = np.array(eqs, dtype=object).reshape(-1, 5)
    fr = np.array(frs, dtype=object).reshape(-1, 3)
    return ConicProblem(
        tuple(blocks), nfree, tuple(obj_blocks), obj_free,
        e[:, 0].astype(np.int64), e[:, 1].astype(np.int64), e[:, 2].astype(np.int64),
        e[:, 3].astype(np.int64), e[:, 4].astype(float),
        fr[:, 0].astype(np.int64), fr[:, 1].astype(np.int64), fr[:, 2].astype(float),
        np.array([rhs.get(i, 0.0) for i in range(m)]), sense)
