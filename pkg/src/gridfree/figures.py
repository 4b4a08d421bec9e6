"""Artifact bundles for the simulation figures (ids 1 to 6).

Every bundle holds a ``figure.json`` with the estimates and flags, CSV files
with the plotted curves and one SVG per panel. Scene parameters that the
figure captions leave open are fixed here, see ``FIG4_*`` and ``FIG1_*``.
"""

from __future__ import annotations

import os

import numpy as np

from .classical import find_peaks
from .harness import (EstimatorResult, _csv, _deg, _jsonable, dumps_json, estimate, degree_grid)
from .model import ArrayGeometry, SourceScene, add_noise, random_mask, synthesize
from .rooting import p_plus_from_dual, poly_roots, select_unit_circle
from .snapfile import atomic_write_text
from . import svg

FIGURE_SCHEMA = "gridfree.figure/1"
FIGURE_IDS = (1, 2, 3, 4, 5, 6)

FIG1_M = 8
FIG1_SNR_DB = 20.0

FIG3_THETA = (-7.2385, 15.962, 42.0671)
FIG3_AMPS = (1.0, 0.01, 0.6)

# Directions for the K_max demonstration. The caption gives amplitudes only;
# these angles are well separated (> 2/21 in t) except in FIG4_THETA_CLOSE.
FIG4_THETA = (-64.0, -45.0, -30.0, -18.0, -5.0, 8.0, 19.0, 33.0, 48.0, 60.0)
FIG4_EXTRA = 71.81
FIG4_THETA_CLOSE = (-64.0, -45.0, -42.0, -18.0, -16.0, 8.0, 10.0, 33.0, 48.0, 50.0)
FIG4_REAL = (0.8, 0.6, 0.9, 0.5, 1.0, 0.9, 0.1, 1.0, 0.4, 0.7)
FIG4_IMAG = (-1.6, 0.5, -1.3, -2.6, 0.4, -1.2, -1.2, -0.6, -0.5, 0.6)

FIG5_THETA = (-32.8881, 25.2773, 69.3903)
FIG5_AMPS = (0.67, 0.33, 1.0)
FIG5_MASK_SEED = 0

FIG6_THETA = (-19.6942, 28.3594, 73.9457)
FIG6_AMPS = (0.6, 0.3, 0.3)
FIG6_SNR_DB = 20.0


class _Bundle:
    def __init__(self, fig_id, out_dir):
        self.fig_id = fig_id
        self.out_dir = out_dir
        self.panels = []
        self.files = []
        os.makedirs(out_dir, exist_ok=True)

    def put(self, name, text):
        path = os.path.join(self.out_dir, name)
        atomic_write_text(path, text)
        self.files.append(name)

    def finish(self, extra=None) -> dict:
        doc = {"schema": FIGURE_SCHEMA, "figure": self.fig_id, "panels": self.panels,
               "files": sorted(self.files + ["figure.json"])}
        if extra:
            doc.update(extra)
        doc = _jsonable(doc)
        self.put("figure.json", dumps_json(doc))
        return doc


def _scene_record(scene: SourceScene) -> dict:
    return {"t": list(scene.t), "theta_deg": _deg(scene.t), "amplitudes": list(scene.amplitudes)}


def _est_record(r: EstimatorResult) -> dict:
    return {"method": r.method, "params": r.params, "support_t": r.support_t,
            "support_deg": _deg(r.support_t),
            "amplitudes": [] if r.amplitudes is None else list(r.amplitudes),
            "resolvable": r.resolvable, "low_confidence": r.low_confidence,
            "diagnostics": r.diagnostics, "notes": r.notes}


def _grid_free_panel(b: _Bundle, name: str, title: str, geom, scene, snr_db=None, seed=0,
                     cbf_step=0.1, samples=2001) -> dict:
    y = synthesize(geom, scene)
    eps = 0.0
    if snr_db is not None:
        y = add_noise(y, snr_db, seed)
        eps = y.noise_norm
    gf = estimate("gridfree", [y], {"epsilon": eps}, dual_samples=samples)
    cb = estimate("cbf", [y], {"grid_step_deg": cbf_step})
    deg = degree_grid(cbf_step)
    dual_deg = np.degrees(np.arcsin(gf.dual_t))
    b.put(f"{name}-dual.csv", _csv(["t", "theta_deg", "abs_H"], zip(gf.dual_t, dual_deg, gf.dual_abs)))
    b.put(f"{name}-cbf.csv", _csv(["theta_deg", "t", "power", "power_db"],
                                  zip(deg, cb.grid_t, cb.spectrum, svg.db(cb.spectrum))))
    p = svg.Plot(f"{title}: dual polynomial", "DOA (deg)", "|H|", xlim=(-90, 90))
    p.line(dual_deg, gf.dual_abs, "|H(t)|")
    p.markers(_deg(scene.t), np.ones(scene.K), "true sources")
    b.put(f"{name}-dual.svg", p.render())
    # |a^H y| / M is the CBF amplitude estimate of a lone source
    q = svg.Plot(f"{title}: reconstruction", "DOA (deg)", "|x|", xlim=(-90, 90))
    q.line(deg, np.sqrt(cb.spectrum) / geom.M, "CBF")
    amps = gf.amplitudes if len(gf.amplitudes) == len(gf.support_t) else np.ones(len(gf.support_t))
    q.stems(_deg(gf.support_t), np.abs(amps), "grid-free CS")
    q.markers(_deg(scene.t), np.abs(scene.amplitudes), "true sources")
    b.put(f"{name}-reconstruction.svg", q.render())
    panel = {"name": name, "title": title, "geometry": {"slots": geom.slots,
             "spacing_over_lambda": geom.spacing_over_lambda,
             "active": [int(i) for i in geom.indices]},
             "truth": _scene_record(scene), "snr_db": snr_db, "seed": seed if snr_db else None,
             "epsilon": eps, "gridfree": _est_record(gf),
             "dual_c": list(gf.dual_c),
             "cbf_peaks_deg": _deg(cb.grid_t[find_peaks(cb.spectrum, scene.K)]) if scene.K else []}
    b.panels.append(panel)
    return panel


def figure1(out_dir: str, seed: int = 0) -> dict:
    """Basis mismatch for grid CS: on-grid, off-grid on 5 deg, off-grid on 1 deg."""
    b = _Bundle(1, out_dir)
    geom = ArrayGeometry.ula(FIG1_M, 0.5)
    cases = [("a", "on grid, 5 deg grid", (0.0, 15.0), 5.0),
             ("b", "off grid, 5 deg grid", (0.0, 17.0), 5.0),
             ("c", "off grid, 1 deg grid", (0.0, 17.0), 1.0)]
    for tag, title, theta, step in cases:
        scene = SourceScene.from_degrees(theta, [1.0, 1.0])
        y = add_noise(synthesize(geom, scene), FIG1_SNR_DB, seed)
        cs = estimate("cs-grid", [y], {"grid_step_deg": step, "epsilon": y.noise_norm})
        cb = estimate("cbf", [y], {"grid_step_deg": 0.1})
        deg = degree_grid(step)
        a = cs.spectrum
        b.put(f"panel-{tag}-cs.csv", _csv(["theta_deg", "t", "abs_x"], zip(deg, cs.grid_t, a)))
        cdeg = degree_grid(0.1)
        b.put(f"panel-{tag}-cbf.csv", _csv(["theta_deg", "t", "power_db"],
                                           zip(cdeg, cb.grid_t, svg.db(cb.spectrum))))
        p = svg.Plot(f"({tag}) {title}", "DOA (deg)", "normalized amplitude", xlim=(-90, 90),
                     ylim=(0, 1.05))
        p.line(cdeg, np.sqrt(cb.spectrum / np.max(cb.spectrum)), "CBF")
        p.stems(deg, a / max(a.max(), 1e-300), "CS")
        p.markers(list(theta), [1.0, 1.0], "true sources")
        b.put(f"panel-{tag}.svg", p.render())
        amax = float(a.max())
        b.panels.append({
            "name": f"panel-{tag}", "title": title, "grid_step_deg": step,
            "truth": _scene_record(scene), "snr_db": FIG1_SNR_DB, "seed": seed,
            "epsilon": y.noise_norm,
            "bins_above_10pct_deg": [float(d) for d in deg[a > 0.1 * amax]],
            "bins_above_noise_floor_deg": [float(d) for d in deg[a > y.noise_norm / np.sqrt(geom.M)]],
            "cs": _est_record(cs),
        })
    return b.finish()


def figure2(out_dir: str) -> dict:
    """Roots of the support polynomial for the three-source noiseless scene."""
    b = _Bundle(2, out_dir)
    geom = ArrayGeometry.ula(21, 0.5)
    scene = SourceScene.from_degrees(FIG3_THETA, FIG3_AMPS)
    panel = _grid_free_panel(b, "scene", "three sources", geom, scene)
    c = np.asarray(panel["dual_c"], dtype=complex)
    roots = poly_roots(p_plus_from_dual(c))
    sel = select_unit_circle(roots, spacing_over_lambda=0.5)
    b.put("roots.csv", _csv(["re", "im", "abs", "angle_rad"],
                            zip(roots.real, roots.imag, np.abs(roots), np.angle(roots))))
    p = svg.Plot("roots of P+(z)", "Re z", "Im z", equal_aspect=True).unit_circle()
    p.markers(roots.real, roots.imag, "all roots")
    p.markers(sel.roots.real, sel.roots.imag, "accepted (|1-|z||<1e-2)")
    b.put("roots.svg", p.render())
    return b.finish({"roots": list(roots), "accepted_t": sel.t_values,
                     "accepted_residuals": sel.residuals})


def figure3(out_dir: str) -> dict:
    b = _Bundle(3, out_dir)
    _grid_free_panel(b, "scene", "three sources, M=21", ArrayGeometry.ula(21, 0.5),
                     SourceScene.from_degrees(FIG3_THETA, FIG3_AMPS))
    return b.finish()


def figure4_scenes() -> list:
    xr = np.asarray(FIG4_REAL, dtype=complex)
    xc = xr + 1j * np.asarray(FIG4_IMAG)
    return [
        ("real-10", "10 positive amplitudes", SourceScene.from_degrees(FIG4_THETA, xr)),
        ("real-11", "11 positive amplitudes",
         SourceScene.from_degrees(FIG4_THETA + (FIG4_EXTRA,), np.append(xr, 0.1))),
        ("complex-10", "10 complex, separated", SourceScene.from_degrees(FIG4_THETA, xc)),
        ("complex-10-close", "10 complex, separation violated",
         SourceScene.from_degrees(FIG4_THETA_CLOSE, xc)),
    ]


def figure4(out_dir: str) -> dict:
    b = _Bundle(4, out_dir)
    geom = ArrayGeometry.ula(21, 0.5)
    for name, title, scene in figure4_scenes():
        _grid_free_panel(b, name, title, geom, scene)
    return b.finish()


def figure5(out_dir: str) -> dict:
    b = _Bundle(5, out_dir)
    geom = ArrayGeometry(0.5, 21, random_mask(21, 13, FIG5_MASK_SEED))
    panel = _grid_free_panel(b, "scene", "13 of 21 sensors", geom,
                             SourceScene.from_degrees(FIG5_THETA, FIG5_AMPS))
    masked = np.abs(np.asarray(panel["dual_c"], dtype=complex))[geom.inactive]
    return b.finish({"mask_seed": FIG5_MASK_SEED,
                     "max_masked_dual_coefficient": float(np.max(masked, initial=0.0))})


def figure6(out_dir: str, seed: int = 0) -> dict:
    b = _Bundle(6, out_dir)
    _grid_free_panel(b, "scene", "SNR 20 dB", ArrayGeometry.ula(21, 0.5),
                     SourceScene.from_degrees(FIG6_THETA, FIG6_AMPS), snr_db=FIG6_SNR_DB, seed=seed)
    return b.finish()


def reproduce_figure(fig_id: int, out_dir: str, seed: int = 0) -> dict:
    if fig_id == 1:
        return figure1(out_dir, seed)
    if fig_id == 2:
        return figure2(out_dir)
    if fig_id == 3:
        return figure3(out_dir)
    if fig_id == 4:
        return figure4(out_dir)
    if fig_id == 5:
        return figure5(out_dir)
    if fig_id == 6:
        return figure6(out_dir, seed)
    raise ValueError(f"figure id must be one of {FIGURE_IDS}")
