"""Dual semidefinite programs for atomic-norm DOA estimation and the
grid-free estimation pipeline.

The dual variable ``c`` lives on the ULA slots. The dual polynomial is
``H(t) = sum_m c_m exp(-j 2 pi (d/lambda) t m)`` and the programs are

* noiseless: maximize ``Re(c^H y)`` s.t. ``[[Q, c], [c^H, 1]]`` PSD and the
  diagonal sums of ``Q`` equal ``1, 0, 0, ...``;
* noisy: the same with objective ``Re(c^H y) - eps |c|_2``;
* masked arrays add ``c_m = 0`` at inactive slots.

All complex blocks are realified before solving.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .classical import amplitudes_from_support
from .conic import ConicProblem, HermitianEmbedding, LinearForm, ProblemBuilder
from .errors import DomainError, SolverFailure, UnresolvableSignalError
from .kernels import trig_poly_eval
from .model import ArrayGeometry, Snapshot, k_max
from .rooting import support_from_dual

NORM_EMBEDDINGS = ("trace", "arrow")


@dataclass(frozen=True, eq=False)
class DualVector:
    c: np.ndarray
    geometry: ArrayGeometry
    epsilon: float = 0.0

    def __post_init__(self):
        c = np.array(self.c, dtype=complex).reshape(-1)
        if c.shape[0] != self.geometry.slots:
            raise DomainError("dual vector length must equal the slot count")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    def evaluate(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return trig_poly_eval(self.c, 2 * np.pi * self.geometry.spacing_over_lambda * t)

    def max_modulus(self, n: int = 10_000) -> float:
        return float(np.max(np.abs(self.evaluate(np.linspace(-1.0, 1.0, n)))))


@dataclass(eq=False)
class DoaEstimate:
    support: np.ndarray
    amplitudes: np.ndarray
    dual: DualVector
    duality_gap_check: float
    root_residuals: np.ndarray
    resolvable: bool = True
    low_confidence: bool = False
    solver_status: str = conic.STATUS_OPTIMAL
    dual_objective: float = 0.0
    solver_iterations: int = 0
    solve_seconds: float = 0.0
    notes: list = field(default_factory=list)


def _dual_builder(y_full: np.ndarray) -> tuple:
    Mf = y_full.shape[0]
    emb = HermitianEmbedding(Mf + 1, 0)
    b = ProblemBuilder([emb.real_dim], maximize=True)
    # Re(c^H y) = sum_m Re(y_m * S[Mf, m]) since S[Mf, m] = conj(c_m)
    for m in range(Mf):
        if y_full[m] != 0:
            emb.add_term(b.objective, Mf, m, complex(y_full[m]))
    # corner fixed at one
    f = LinearForm()
    emb.add_term(f, Mf, Mf, 1.0)
    b.add_equality(f, 1.0)
    # diagonal sums of Q
    f = LinearForm()
    for i in range(Mf):
        emb.add_term(f, i, i, 1.0)
    b.add_equality(f, 1.0)
    for j in range(1, Mf):
        for form, rhs in emb.complex_equality([(i, i + j, 1.0) for i in range(Mf - j)], 0.0):
            b.add_equality(form, rhs)
    return b, emb


def _snapshot_full(y) -> np.ndarray:
    if isinstance(y, Snapshot):
        return y.full()
    return np.asarray(y, dtype=complex).reshape(-1)


def build_dual_sdp(y) -> ConicProblem:
    """Noiseless dual program over all ULA slots of ``y.geometry``."""
    yf = _snapshot_full(y)
    if not np.all(np.isfinite(yf)):
        raise DomainError("data must be finite")
    b, _ = _dual_builder(yf)
    return b.build()


def build_dual_sdp_noisy(y, epsilon: float, norm_embedding: str = "trace") -> ConicProblem:
    """Noisy dual program: objective ``Re(c^H y) - eps * |c|_2``.

    The norm is carried by a second Hermitian block ``W`` of size
    ``M_full + 1`` whose last column is tied to ``c``:

    * ``"arrow"``: ``W`` is forced into the arrow form ``[[tau I, c], [c^H, tau]]``
      and the objective charges ``eps * tau``;
    * ``"trace"``: ``W = [[V, c], [c^H, u]]`` is unstructured and the objective
      charges ``eps * trace(W) / 2``. Since ``|c|^2 <= u * trace(V)``, the
      minimum of ``trace(W)/2`` over PSD completions is ``|c|_2``.

    Both encode the same optimum; ``"trace"`` needs O(M) equalities instead of
    O(M^2) and is the default.
    """
    if epsilon < 0:
        raise DomainError("epsilon must be non-negative")
    if norm_embedding not in NORM_EMBEDDINGS:
        raise DomainError(f"norm_embedding must be one of {NORM_EMBEDDINGS}")
    yf = _snapshot_full(y)
    if not np.all(np.isfinite(yf)):
        raise DomainError("data must be finite")
    b, emb = _dual_builder(yf)
    Mf = yf.shape[0]
    wemb = HermitianEmbedding(Mf + 1, b.add_block(2 * (Mf + 1)))
    for m in range(Mf):
        re, im = LinearForm(), LinearForm()
        wemb.add_term(re, m, Mf, 1.0)
        emb.add_term(re, m, Mf, -1.0)
        wemb.add_term(im, m, Mf, -1j)
        emb.add_term(im, m, Mf, 1j)
        b.add_equality(re, 0.0)
        b.add_equality(im, 0.0)
    if norm_embedding == "arrow":
        soc = conic.soc_as_psd(Mf)
        for form, rhs in soc.structure_equalities(wemb):
            b.add_equality(form, rhs)
        if epsilon:
            wemb.add_term(b.objective, Mf, Mf, -float(epsilon))
    else:
        if epsilon:
            for i in range(Mf + 1):
                wemb.add_term(b.objective, i, i, -0.5 * float(epsilon))
    return b.build()


def apply_null_constraints(p: ConicProblem, geom: ArrayGeometry) -> ConicProblem:
    """Add ``c_m = 0`` (real and imaginary parts) for each inactive slot."""
    inactive = geom.inactive
    if inactive.size == 0:
        return p
    Mf = geom.slots
    if p.psd_blocks[0] != 2 * (Mf + 1):
        raise DomainError("problem was not built over the full slot set")
    emb = HermitianEmbedding(Mf + 1, 0)
    forms, rhs = [], []
    for m in inactive:
        for form, r in emb.complex_equality([(int(m), Mf, 1.0)], 0.0):
            forms.append(form)
            rhs.append(r)
    return p.add_equalities(forms, rhs)


def extract_dual(sol: conic.ConicSolution, geom: ArrayGeometry, epsilon: float = 0.0) -> DualVector:
    Mf = geom.slots
    S = HermitianEmbedding(Mf + 1, 0).extract(sol.variables[0])
    c = S[:Mf, Mf].copy()
    return DualVector(c, geom, float(epsilon))


def dual_poly_eval(d: DualVector, t):
    """``H(t) = sum_m c_m exp(-j 2 pi (d/lambda) t m)``; scalar in, scalar out."""
    if np.ndim(t) == 0:
        if not -1.0 <= float(t) <= 1.0:
            raise DomainError("t outside [-1, 1]")
        return complex(d.evaluate(t)[0])
    return d.evaluate(t)


_PIPELINE_DEFAULTS = {
    "unit_tol": 1e-2,
    "angle_tol": 1e-3,
    "norm_embedding": "trace",
    "solver": {"gap_tol": 1e-10, "feas_tol": 1e-10},
}


def grid_free_solve(y: Snapshot, epsilon: float, opts: dict | None = None) -> DoaEstimate:
    """Grid-free DOA estimate from a single snapshot.

    ``epsilon = 0`` is the noiseless path. Options: ``unit_tol``,
    ``angle_tol``, ``norm_embedding`` and ``solver`` (a dict forwarded to
    :func:`gridfree.conic.solve`).
    """
    o = dict(_PIPELINE_DEFAULTS)
    if opts:
        o.update(opts)
    if epsilon < 0:
        raise DomainError("epsilon must be non-negative")
    geom = y.geometry
    t0 = time.perf_counter()
    if float(np.linalg.norm(y.y)) <= epsilon or not np.any(y.y):
        # x = 0 is primal optimal; c = 0 attains the same dual value
        return DoaEstimate(support=np.zeros(0), amplitudes=np.zeros(0, dtype=complex),
                           dual=DualVector(np.zeros(geom.slots), geom, epsilon),
                           duality_gap_check=0.0, root_residuals=np.zeros(0),
                           notes=["data inside the noise ball; empty support"])
    if epsilon > 0:
        p = build_dual_sdp_noisy(y, epsilon, o["norm_embedding"])
    else:
        p = build_dual_sdp(y)
    p = apply_null_constraints(p, geom)
    sol = conic.solve(p, o["solver"])
    elapsed = time.perf_counter() - t0
    if sol.status == conic.STATUS_INFEASIBLE:
        raise SolverFailure("dual program reported infeasible")
    dual = extract_dual(sol, geom, epsilon)
    notes = []
    low = sol.status != conic.STATUS_OPTIMAL
    if low:
        notes.append(f"solver stopped with status {sol.status}")
    yv = y.full()
    dual_obj = float(np.real(np.vdot(dual.c, yv)) - epsilon * np.linalg.norm(dual.c))

    resolvable = True
    residuals = np.zeros(0)
    try:
        support, roots = support_from_dual(dual, o["unit_tol"], o["angle_tol"], return_roots=True)
        residuals = roots.residuals
    except UnresolvableSignalError:
        support = np.zeros(0)
        resolvable = False
        notes.append("non-informative dual polynomial")
    if support.shape[0] > k_max(geom.slots):
        resolvable = False
        notes.append(f"{support.shape[0]} unit-circle roots exceed K_max={k_max(geom.slots)}")

    amps = np.zeros(0, dtype=complex)
    if 0 < support.shape[0] <= geom.M:
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                amps = amplitudes_from_support(y, support)
            for w in caught:
                notes.append(str(w.message))
        except Exception as exc:  # rank-deficient support
            notes.append(f"amplitude recovery failed: {exc}")
            amps = np.zeros(0, dtype=complex)
            if resolvable:
                resolvable = False
    gap_check = abs(dual_obj - float(np.sum(np.abs(amps))))
    return DoaEstimate(support=np.asarray(support), amplitudes=amps, dual=dual,
                       duality_gap_check=gap_check, root_residuals=residuals,
                       resolvable=resolvable, low_confidence=low, solver_status=sol.status,
                       dual_objective=dual_obj, solver_iterations=sol.iterations,
                       solve_seconds=elapsed, notes=notes)
