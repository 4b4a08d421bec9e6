"""Estimator dispatch, scenario execution and report emission."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import classical as cl
from .atomic import grid_free_solve
from .discrete_cs import BpdnProblem, bpdn_solve
from .errors import DomainError, GridFreeError, SolverFailure
from .model import (Snapshot, add_noise, sensing_matrix, synthesize, synthesize_snapshots, t2deg)
from .rooting import support_from_null_spectrum
from .scenario import REQUIRED, Scenario
from .snapfile import atomic_write_text, ingest_snapshots
from . import svg

REPORT_SCHEMA = "gridfree.report/1"

# Display threshold for grid sparse solutions without a source count: bins
# below this fraction of the largest are treated as numerical zeros.
CS_ZERO_FRACTION = 1e-3


@dataclass(eq=False)
class EstimatorResult:
    method: str
    params: dict
    support_t: np.ndarray
    amplitudes: np.ndarray | None = None
    grid_t: np.ndarray | None = None
    spectrum: np.ndarray | None = None
    spectrum_kind: str = ""
    dual_c: np.ndarray | None = None
    dual_t: np.ndarray | None = None
    dual_abs: np.ndarray | None = None
    resolvable: bool = True
    low_confidence: bool = False
    diagnostics: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    seconds: float = 0.0


def degree_grid(step_deg: float) -> np.ndarray:
    """Angles ``-90 : step : 90`` in degrees (endpoints included when they fit)."""
    if not 0 < step_deg <= 90:
        raise DomainError("grid step must lie in (0, 90] degrees")
    n = int(round(180.0 / step_deg))
    if abs(n * step_deg - 180.0) < 1e-9 * 180.0:
        return np.linspace(-90.0, 90.0, n + 1)
    return np.arange(-90.0, 90.0 + 1e-9, step_deg)


def grid_t(step_deg: float) -> np.ndarray:
    return np.sin(np.deg2rad(degree_grid(step_deg)))


def _need(method, params, key):
    if params.get(key) is None:
        raise DomainError(f"method {method} requires {key}")
    return params[key]


def estimate(method: str, snapshots: list, params: dict, noise_norms=None,
             dual_samples: int = 2001) -> EstimatorResult:
    """Run one estimator.

    Single-snapshot methods (``l2``, ``cs-grid``, ``gridfree``) use snapshot
    ``params["snapshot"]`` (first by default). ``cbf`` averages
    ``|a^H y|^2`` over all snapshots. The cross-spectral methods build the
    CSM from all snapshots.
    """
    if method not in REQUIRED:
        raise DomainError(f"unknown method {method!r}")
    for key in REQUIRED[method]:
        _need(method, params, key)
    if not snapshots:
        raise DomainError("no snapshots")
    idx = int(params.get("snapshot", 0))
    if idx >= len(snapshots):
        raise DomainError(f"snapshot index {idx} out of range (L={len(snapshots)})")
    y = snapshots[idx]
    geom = y.geometry
    K = params.get("sources")
    eps = params.get("epsilon")
    if eps == "noise":
        if noise_norms is None or noise_norms[idx] is None:
            raise DomainError("epsilon 'noise' needs synthesized noise")
        eps = float(noise_norms[idx])

    t0 = time.perf_counter()
    res = EstimatorResult(method, dict(params), np.zeros(0))
    if eps is not None:
        res.diagnostics["epsilon"] = float(eps)
    gt = grid_t(params["grid_step_deg"]) if params.get("grid_step_deg") is not None else None

    if all(not np.any(s.y) for s in snapshots):
        res.notes.append("all-zero data")
        if gt is not None:
            res.grid_t, res.spectrum = gt, np.zeros(gt.shape[0])
        if method == "gridfree":
            res.dual_c = np.zeros(geom.slots, dtype=complex)
            res.dual_t = np.linspace(-1.0, 1.0, dual_samples)
            res.dual_abs = np.zeros(dual_samples)
        res.amplitudes = np.zeros(0, dtype=complex) if method in ("l2", "cs-grid", "gridfree") else None
        res.seconds = time.perf_counter() - t0
        return res

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        _dispatch(method, res, snapshots, y, geom, K, eps, gt, params, dual_samples)
    for w in caught:
        res.notes.append(str(w.message))
    order = np.argsort(res.support_t)
    res.support_t = np.asarray(res.support_t, dtype=float)[order]
    if res.amplitudes is not None and res.amplitudes.shape[0] == order.shape[0]:
        res.amplitudes = res.amplitudes[order]
    res.seconds = time.perf_counter() - t0
    return res


def _peaks(res, gt, spec, K):
    res.grid_t, res.spectrum = gt, spec
    if K is not None:
        res.support_t = gt[cl.find_peaks(spec, K)]


def _dispatch(method, res, snapshots, y, geom, K, eps, gt, params, dual_samples):
    if method == "cbf":
        # mean |a^H y|^2 equals a^H C a; computed directly so masked arrays work
        spec = np.mean([np.abs(cl.cbf(s, gt)) ** 2 for s in snapshots], axis=0)
        _peaks(res, gt, spec, K)
        res.spectrum_kind = "power"
    elif method == "l2":
        x = cl.min_l2(y, gt)
        res.grid_t, res.spectrum, res.spectrum_kind = gt, np.abs(x), "amplitude"
        if K is not None:
            sel = cl.find_peaks(np.abs(x), K)
            res.support_t, res.amplitudes = gt[sel], x[sel]
    elif method == "cs-grid":
        A = sensing_matrix(geom, gt)
        r = bpdn_solve(BpdnProblem(A, y.y, eps))
        a = np.abs(r.x)
        res.grid_t, res.spectrum, res.spectrum_kind = gt, a, "amplitude"
        if K is not None:
            sel = np.sort(np.argsort(-a, kind="stable")[:K])
        else:
            sel = np.flatnonzero(a > CS_ZERO_FRACTION * a.max()) if a.max() > 0 else np.zeros(0, int)
        res.support_t, res.amplitudes = gt[sel], r.x[sel]
        res.low_confidence = not r.converged
        res.diagnostics.update({"l1_objective": r.objective, "dual_bound": r.dual_bound,
                                "certified_gap": r.gap, "residual_norm": r.residual_norm,
                                "iterations": r.iterations, "status": r.status})
    elif method == "gridfree":
        est = grid_free_solve(y, float(eps))
        res.support_t, res.amplitudes = est.support, est.amplitudes
        res.resolvable, res.low_confidence = est.resolvable, est.low_confidence
        res.notes.extend(est.notes)
        res.dual_c = np.asarray(est.dual.c)
        res.dual_t = np.linspace(-1.0, 1.0, dual_samples)
        res.dual_abs = np.abs(est.dual.evaluate(res.dual_t))
        res.diagnostics.update({
            "duality_gap_check": est.duality_gap_check,
            "dual_objective": est.dual_objective,
            "solver_status": est.solver_status,
            "solver_iterations": est.solver_iterations,
            "root_residuals": est.root_residuals,
            "max_dual_modulus": float(np.max(res.dual_abs)),
        })
    elif method in ("mvdr", "root-mvdr"):
        C = cl.csm(snapshots)
        if method == "mvdr":
            _peaks(res, gt, cl.mvdr_spectrum(C, gt), K)
            res.spectrum_kind = "power"
        else:
            _require_ula(geom)
            Ci, loaded = cl.mvdr_inverse(C)
            if loaded:
                res.notes.append("diagonal loading applied to singular cross-spectral matrix")
            res.support_t = support_from_null_spectrum(Ci, K, geom.spacing_over_lambda)
    elif method in ("music", "root-music", "minnorm", "root-minnorm"):
        C = cl.csm(snapshots)
        split = cl.eig_split(C, K)
        res.diagnostics["eigen_gap_ratio"] = split.gap_ratio
        if split.degenerate:
            res.notes.append("signal and noise eigenvalues are not separated")
        if method.endswith("music"):
            psi = split.Un @ split.Un.conj().T
        else:
            v = cl.minnorm_vector(split, bool(params.get("signal_form", False)))
            psi = np.outer(v, v.conj())
        if method.startswith("root-"):
            _require_ula(geom)
            res.support_t = support_from_null_spectrum(psi, K, geom.spacing_over_lambda)
        else:
            spec = (cl.music_spectrum(split, gt) if method == "music"
                    else cl.minnorm_spectrum(v, gt, geom))
            _peaks(res, gt, spec, K)
            res.spectrum_kind = "power"


def _require_ula(geom):
    if not geom.is_uniform:
        raise DomainError("root methods require a uniform array")


# ---------------------------------------------------------------- data

def scenario_data(s: Scenario):
    """Snapshots and per-snapshot noise norms (None where noiseless)."""
    if s.data_file is not None:
        snaps = ingest_snapshots(s.data_file)
        if snaps[0].geometry.M != s.geometry.M:
            raise DomainError("snapshot file sensor count disagrees with the scenario geometry")
        snaps = [Snapshot(x.y, s.geometry, label=x.label) for x in snaps]
        return snaps, [None] * len(snaps)
    if s.snapshots == 1:
        clean = synthesize(s.geometry, s.scene)
        if s.snr_db is None:
            return [clean], [None]
        noisy = add_noise(clean, s.snr_db, s.seed)
        return [noisy], [noisy.noise_norm]
    snaps = synthesize_snapshots(s.geometry, s.scene, s.snapshots, s.snr_db, s.seed,
                                 random_phase=s.random_phase)
    return snaps, [x.noise_norm for x in snaps]


# ---------------------------------------------------------------- report

def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (complex, np.complexfloating)):
        return [_jsonable(float(np.real(v))), _jsonable(float(np.imag(v)))]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def _deg(ts) -> list:
    return [t2deg(float(t)) for t in ts]


def result_record(r: EstimatorResult, index: int) -> dict:
    rec = {
        "index": index,
        "method": r.method,
        "params": r.params,
        "support_t": r.support_t,
        "support_deg": _deg(r.support_t),
        "amplitudes": [] if r.amplitudes is None else list(r.amplitudes),
        "resolvable": r.resolvable,
        "low_confidence": r.low_confidence,
        "diagnostics": r.diagnostics,
        "notes": r.notes,
    }
    if r.spectrum is not None:
        rec["spectrum"] = {"kind": r.spectrum_kind, "points": int(r.spectrum.shape[0]),
                           "file": _artifact_name(index, r.method, "spectrum")}
    if r.dual_c is not None:
        rec["dual"] = {"c": list(r.dual_c), "samples": int(r.dual_t.shape[0]),
                       "file": _artifact_name(index, r.method, "dual")}
    return rec


def _artifact_name(index, method, what):
    return f"{index:02d}-{method}-{what}"


def check_expectation(exp, results) -> dict:
    """Compare the matching estimator's support to the expected one."""
    cands = [r for r in results if r.method == exp.method]
    rec = {"method": exp.method, "expected_deg": _deg(exp.t), "tolerance_deg": exp.tolerance_deg,
           "strongest": exp.strongest}
    if not cands:
        rec.update(passed=False, reason="estimator not run")
        return rec
    r = cands[0]
    est = np.asarray(r.support_t, dtype=float)
    if exp.strongest and r.amplitudes is not None and est.size > len(exp.t):
        keep = np.argsort(-np.abs(r.amplitudes), kind="stable")[:len(exp.t)]
        est = np.sort(est[keep])
    if est.size != len(exp.t):
        rec.update(passed=False, estimated_deg=_deg(est),
                   reason=f"estimated {est.size} sources, expected {len(exp.t)}")
        return rec
    err = float(np.max(np.abs(np.array(_deg(est)) - np.array(_deg(exp.t))), initial=0.0))
    rec.update(estimated_deg=_deg(est), max_error_deg=err, passed=bool(err <= exp.tolerance_deg))
    return rec


@dataclass(eq=False)
class ScenarioRun:
    scenario: Scenario
    snapshots: list
    noise_norms: list
    results: list
    report: dict
    timing: dict


def run_scenario(s: Scenario, out_dir: str | None = None, formats=None) -> ScenarioRun:
    """Synthesize (or ingest), run every estimator, check expectations.

    When ``out_dir`` is given, artifacts are written there: ``report.json``
    (deterministic), ``timing.json`` (wall-clock, not deterministic), and
    per-estimator CSV curves and SVG plots.
    """
    t_start = time.perf_counter()
    snaps, noise = scenario_data(s)
    results = []
    for spec in s.estimators:
        results.append(estimate(spec.method, snaps, spec.params, noise, s.dual_samples))
    checks = [check_expectation(e, results) for e in s.expect]
    g = s.geometry
    report = {
        "schema": REPORT_SCHEMA,
        "scenario": s.name,
        "geometry": {"slots": g.slots, "spacing_over_lambda": g.spacing_over_lambda,
                     "active": [int(i) for i in g.indices]},
        "truth": {"t": list(s.scene.t), "theta_deg": _deg(s.scene.t),
                  "amplitudes": list(s.scene.amplitudes)},
        "data": {"snapshots": len(snaps), "snr_db": s.snr_db, "seed": s.seed,
                 "source": "file" if s.data_file else "synthesized",
                 "noise_norms": noise},
        "estimates": [result_record(r, i) for i, r in enumerate(results)],
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
    report = _jsonable(report)
    timing = {"scenario": s.name, "total_seconds": time.perf_counter() - t_start,
              "estimators": [{"index": i, "method": r.method, "seconds": r.seconds}
                             for i, r in enumerate(results)]}
    run = ScenarioRun(s, snaps, noise, results, report, timing)
    if out_dir is not None:
        write_artifacts(run, out_dir, formats or s.formats)
    return run


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def estimates_csv(results) -> str:
    rows = []
    for i, r in enumerate(results):
        amps = r.amplitudes if r.amplitudes is not None else [None] * len(r.support_t)
        for t, a in zip(r.support_t, amps):
            rows.append([i, r.method, float(t), t2deg(float(t)),
                         "" if a is None else float(np.real(a)), "" if a is None else float(np.imag(a))])
    return _csv(["index", "method", "t", "theta_deg", "amp_re", "amp_im"], rows)


def spectrum_plot(r: EstimatorResult, title: str, truth=None) -> svg.Plot:
    deg = np.degrees(np.arcsin(np.clip(r.grid_t, -1, 1)))
    if r.spectrum_kind == "power":
        p = svg.Plot(title, "DOA (deg)", "power (dB re max)", xlim=(-90, 90), ylim=(-60, 3))
        p.line(deg, svg.db(r.spectrum), r.method)
        if len(r.support_t):
            p.markers(_deg(r.support_t), np.zeros(len(r.support_t)), f"{r.method} peaks")
    else:
        p = svg.Plot(title, "DOA (deg)", "|x|", xlim=(-90, 90))
        p.stems(deg, r.spectrum, r.method)
    if truth is not None and len(truth[0]):
        yv = np.zeros(len(truth[0])) if r.spectrum_kind == "power" else np.abs(truth[1])
        p.markers(_deg(truth[0]), yv, "true sources")
    return p


def dual_plot(r: EstimatorResult, title: str, truth=None) -> svg.Plot:
    p = svg.Plot(title, "DOA (deg)", "|H|", xlim=(-90, 90))
    p.line(np.degrees(np.arcsin(r.dual_t)), r.dual_abs, "|H(t)|")
    if len(r.support_t):
        p.markers(_deg(r.support_t), np.ones(len(r.support_t)), "estimates")
    if truth is not None and len(truth[0]):
        p.stems(_deg(truth[0]), np.abs(truth[1]), "true |x|")
    return p


def estimate_plot(r: EstimatorResult, title: str, truth=None) -> svg.Plot:
    p = svg.Plot(title, "DOA (deg)", "|x|", xlim=(-90, 90))
    amps = np.abs(r.amplitudes) if r.amplitudes is not None else np.ones(len(r.support_t))
    p.stems(_deg(r.support_t), amps, f"{r.method} estimates")
    if truth is not None and len(truth[0]):
        p.markers(_deg(truth[0]), np.abs(truth[1]), "true sources")
    return p


def write_artifacts(run: ScenarioRun, out_dir: str, formats) -> list:
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def put(name, text):
        path = os.path.join(out_dir, name)
        atomic_write_text(path, text)
        written.append(path)

    truth = (run.scenario.scene.t, run.scenario.scene.amplitudes)
    if "json" in formats:
        put("report.json", dumps_json(run.report))
        put("timing.json", dumps_json(_jsonable(run.timing)))
    if "csv" in formats:
        put("estimates.csv", estimates_csv(run.results))
    for i, r in enumerate(run.results):
        if r.spectrum is not None:
            name = _artifact_name(i, r.method, "spectrum")
            if "csv" in formats:
                deg = np.degrees(np.arcsin(np.clip(r.grid_t, -1, 1)))
                put(name + ".csv", _csv(["theta_deg", "t", "value"],
                                        zip(deg, r.grid_t, r.spectrum)))
            if "svg" in formats:
                put(name + ".svg", spectrum_plot(r, f"{run.scenario.name}: {r.method}", truth).render())
        if r.dual_c is not None:
            name = _artifact_name(i, r.method, "dual")
            if "csv" in formats:
                put(name + ".csv", _csv(["t", "theta_deg", "abs_H"],
                                        zip(r.dual_t, np.degrees(np.arcsin(r.dual_t)), r.dual_abs)))
            if "svg" in formats:
                put(name + ".svg", dual_plot(r, f"{run.scenario.name}: dual polynomial", truth).render())
        if r.spectrum is None and r.dual_c is None and "svg" in formats:
            put(_artifact_name(i, r.method, "estimates") + ".svg",
                estimate_plot(r, f"{run.scenario.name}: {r.method}", truth).render())
    return written


__all__ = ["EstimatorResult", "ScenarioRun", "estimate", "run_scenario", "scenario_data",
           "degree_grid", "grid_t", "check_expectation", "write_artifacts", "dumps_json",
           "REPORT_SCHEMA", "GridFreeError", "SolverFailure"]
