"""Scenario files (YAML) and their validation.

A scenario pins down one reproducible run::

    schema: gridfree.scenario/1
    name: fig3
    geometry:
      slots: 21
      spacing_over_lambda: 0.5
      active: all                 # or a list of slot indices, or "random(13, 0)"
    sources:                      # may be empty
      - {theta_deg: -7.2385, amplitude: 1.0}
      - {t: 0.2, amplitude: [0.3, -0.1]}   # complex as [re, im]
      - {theta_deg: 40, amplitude: 0.5, phase_deg: 30}
    data:
      snapshots: 1
      snr_db: none                # or a number
      seed: 0
      random_phase: false         # multi-snapshot scenes only
      file: null                  # snapshot CSV; replaces synthesis
    estimators:
      - {method: gridfree, epsilon: 0}          # epsilon may be "noise"
      - {method: cbf, grid_step_deg: 0.1}
      - {method: music, sources: 2, grid_step_deg: 0.01}
    expect:
      - {method: gridfree, theta_deg: [-7.2385, 15.962, 42.0671], tolerance_deg: 1.0e-3}
      # strongest: true compares only the len(theta_deg) largest-amplitude estimates
    output:
      dual_samples: 2001
      formats: [json, csv, svg]

Errors are :class:`gridfree.errors.ParseError` carrying ``file:line`` and
the offending field path.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field

import yaml

from .errors import DomainError, ParseError
from .model import ArrayGeometry, SourceScene, deg2t, random_mask

SCHEMA = "gridfree.scenario/1"

METHODS = ("cbf", "l2", "cs-grid", "gridfree", "mvdr", "music", "minnorm",
           "root-mvdr", "root-music", "root-minnorm")
FORMATS = ("json", "csv", "svg")

# Parameters each method cannot run without; no defaults are substituted.
REQUIRED = {
    "cbf": ("grid_step_deg",),
    "l2": ("grid_step_deg",),
    "cs-grid": ("grid_step_deg", "epsilon"),
    "gridfree": ("epsilon",),
    "mvdr": ("grid_step_deg",),
    "music": ("grid_step_deg", "sources"),
    "minnorm": ("grid_step_deg", "sources"),
    "root-mvdr": ("sources",),
    "root-music": ("sources",),
    "root-minnorm": ("sources",),
}
OPTIONAL = {"sources", "snapshot", "grid_step_deg", "epsilon", "signal_form"}

_RANDOM = re.compile(r"^\s*random\(\s*(\d+)\s*,\s*(-?\d+)\s*\)\s*$")


@dataclass(frozen=True)
class EstimatorSpec:
    method: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Expectation:
    method: str
    t: tuple
    tolerance_deg: float
    strongest: bool = False


@dataclass(frozen=True)
class Scenario:
    name: str
    geometry: ArrayGeometry
    scene: SourceScene
    snapshots: int = 1
    snr_db: float | None = None
    seed: int = 0
    random_phase: bool = False
    data_file: str | None = None
    estimators: tuple = ()
    expect: tuple = ()
    dual_samples: int = 2001
    formats: tuple = FORMATS
    source_path: str | None = None


class _Marks:
    """Line numbers of every node, keyed by field path."""

    def __init__(self, node):
        self.lines = {}
        self._walk(node, ())

    def _walk(self, node, path):
        if node is None:
            return
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = k.value if isinstance(k, yaml.ScalarNode) else str(k)
                self.lines[path + (key,)] = k.start_mark.line + 1
                self._walk(v, path + (key,))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk(v, path + (i,))

    def line(self, path):
        path = tuple(path)
        while path and path not in self.lines:
            path = path[:-1]
        return self.lines.get(path, 1)


def _fmt_path(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


class _Reader:
    def __init__(self, source, marks):
        self.source = source
        self.marks = marks

    def fail(self, path, msg):
        raise ParseError(f"{_fmt_path(path)}: {msg}", f"{self.source}:{self.marks.line(path)}")

    def get(self, mapping, path, key, kind, required=False, default=None):
        if not isinstance(mapping, dict):
            self.fail(path, "expected a mapping")
        if key not in mapping or mapping[key] is None:
            if required:
                self.fail(path + (key,), "required field is missing")
            return default
        v = mapping[key]
        p = path + (key,)
        if kind == "int":
            if isinstance(v, bool) or not isinstance(v, int):
                self.fail(p, f"expected an integer, got {v!r}")
        elif kind == "float":
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                self.fail(p, f"expected a finite number, got {v!r}")
            v = float(v)
        elif kind == "bool":
            if not isinstance(v, bool):
                self.fail(p, f"expected true/false, got {v!r}")
        elif kind == "str":
            if not isinstance(v, str):
                self.fail(p, f"expected a string, got {v!r}")
        elif kind == "list":
            if not isinstance(v, list):
                self.fail(p, "expected a list")
        elif kind == "map":
            if not isinstance(v, dict):
                self.fail(p, "expected a mapping")
        return v

    def complex_value(self, v, path):
        if isinstance(v, bool):
            self.fail(path, "expected a number or [re, im]")
        if isinstance(v, (int, float)):
            return complex(float(v))
        if (isinstance(v, list) and len(v) == 2
                and all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in v)):
            return complex(float(v[0]), float(v[1]))
        self.fail(path, "expected a number or [re, im]")

    def unknown(self, mapping, path, allowed):
        for k in mapping:
            if k not in allowed:
                self.fail(path + (k,), f"unknown field (allowed: {', '.join(sorted(allowed))})")


def _geometry(r: _Reader, doc) -> ArrayGeometry:
    path = ("geometry",)
    g = r.get(doc, (), "geometry", "map", required=True)
    r.unknown(g, path, {"slots", "spacing_over_lambda", "active"})
    slots = r.get(g, path, "slots", "int", required=True)
    d = r.get(g, path, "spacing_over_lambda", "float", required=True)
    active = g.get("active", "all")
    try:
        if active == "all":
            return ArrayGeometry.ula(slots, d)
        if isinstance(active, str):
            m = _RANDOM.match(active)
            if not m:
                r.fail(path + ("active",), "expected 'all', an index list or 'random(k, seed)'")
            mask = random_mask(slots, int(m.group(1)), int(m.group(2)))
            return ArrayGeometry(d, slots, mask)
        if isinstance(active, list) and all(isinstance(i, int) and not isinstance(i, bool)
                                            for i in active):
            if len(set(active)) != len(active):
                r.fail(path + ("active",), "duplicate sensor index")
            return ArrayGeometry.masked(slots, active, d)
        r.fail(path + ("active",), "expected 'all', an index list or 'random(k, seed)'")
    except DomainError as exc:
        r.fail(path, str(exc))


def _scene(r: _Reader, doc) -> SourceScene:
    src = r.get(doc, (), "sources", "list", default=[])
    ts, amps = [], []
    for i, s in enumerate(src):
        p = ("sources", i)
        if not isinstance(s, dict):
            r.fail(p, "expected a mapping")
        r.unknown(s, p, {"theta_deg", "t", "amplitude", "phase_deg"})
        if ("theta_deg" in s) == ("t" in s):
            r.fail(p, "give exactly one of theta_deg or t")
        if "theta_deg" in s:
            th = r.get(s, p, "theta_deg", "float")
            if not -90.0 <= th <= 90.0:
                r.fail(p + ("theta_deg",), "must lie in [-90, 90]")
            t = deg2t(th)
        else:
            t = r.get(s, p, "t", "float")
            if not -1.0 <= t <= 1.0:
                r.fail(p + ("t",), "must lie in [-1, 1]")
        if "amplitude" not in s:
            r.fail(p + ("amplitude",), "required field is missing")
        a = r.complex_value(s["amplitude"], p + ("amplitude",))
        ph = r.get(s, p, "phase_deg", "float")
        if ph is not None:
            a = a * complex(math.cos(math.radians(ph)), math.sin(math.radians(ph)))
        ts.append(t)
        amps.append(a)
    try:
        return SourceScene(tuple(ts), tuple(amps))
    except DomainError as exc:
        r.fail(("sources",), str(exc))


def _estimators(r: _Reader, doc) -> tuple:
    lst = r.get(doc, (), "estimators", "list", default=[])
    out = []
    for i, e in enumerate(lst):
        p = ("estimators", i)
        if not isinstance(e, dict):
            r.fail(p, "expected a mapping")
        method = r.get(e, p, "method", "str", required=True)
        if method not in METHODS:
            r.fail(p + ("method",), f"unknown method {method!r} (choose from {', '.join(METHODS)})")
        r.unknown(e, p, OPTIONAL | {"method"})
        for key in REQUIRED[method]:
            if e.get(key) is None:
                r.fail(p + (key,), f"required for method {method}")
        params = {}
        if e.get("grid_step_deg") is not None:
            step = r.get(e, p, "grid_step_deg", "float")
            if not 0 < step <= 90:
                r.fail(p + ("grid_step_deg",), "must lie in (0, 90]")
            params["grid_step_deg"] = step
        if e.get("sources") is not None:
            k = r.get(e, p, "sources", "int")
            if k < 1:
                r.fail(p + ("sources",), "must be >= 1")
            params["sources"] = k
        if e.get("snapshot") is not None:
            k = r.get(e, p, "snapshot", "int")
            if k < 0:
                r.fail(p + ("snapshot",), "must be >= 0")
            params["snapshot"] = k
        if e.get("signal_form") is not None:
            params["signal_form"] = r.get(e, p, "signal_form", "bool")
        if e.get("epsilon") is not None:
            eps = e["epsilon"]
            if eps != "noise":
                eps = r.get(e, p, "epsilon", "float")
                if eps < 0:
                    r.fail(p + ("epsilon",), "must be >= 0 or 'noise'")
            params["epsilon"] = eps
        out.append(EstimatorSpec(method, params))
    return tuple(out)


def _expect(r: _Reader, doc) -> tuple:
    lst = r.get(doc, (), "expect", "list", default=[])
    out = []
    for i, e in enumerate(lst):
        p = ("expect", i)
        if not isinstance(e, dict):
            r.fail(p, "expected a mapping")
        r.unknown(e, p, {"method", "theta_deg", "t", "tolerance_deg", "strongest"})
        method = r.get(e, p, "method", "str", required=True)
        if method not in METHODS:
            r.fail(p + ("method",), f"unknown method {method!r}")
        if ("theta_deg" in e) == ("t" in e):
            r.fail(p, "give exactly one of theta_deg or t")
        key = "theta_deg" if "theta_deg" in e else "t"
        vals = r.get(e, p, key, "list")
        ts = []
        for j, v in enumerate(vals):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                r.fail(p + (key, j), "expected a number")
            ts.append(deg2t(v) if key == "theta_deg" else float(v))
        tol = r.get(e, p, "tolerance_deg", "float", required=True)
        if tol <= 0:
            r.fail(p + ("tolerance_deg",), "must be positive")
        strongest = r.get(e, p, "strongest", "bool", default=False)
        out.append(Expectation(method, tuple(sorted(ts)), tol, strongest))
    return tuple(out)


def parse_scenario(text: str, source: str = "<string>", base_dir: str | None = None) -> Scenario:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else 1
        raise ParseError(f"invalid YAML: {getattr(exc, 'problem', exc)}", f"{source}:{line}") from None
    r = _Reader(source, _Marks(node))
    if not isinstance(doc, dict):
        r.fail((), "scenario must be a mapping")
    r.unknown(doc, (), {"schema", "name", "geometry", "sources", "data", "estimators", "expect",
                        "output"})
    schema = r.get(doc, (), "schema", "str", required=True)
    if schema != SCHEMA:
        r.fail(("schema",), f"unsupported schema {schema!r} (expected {SCHEMA})")
    name = r.get(doc, (), "name", "str", required=True)
    geom = _geometry(r, doc)
    scene = _scene(r, doc)

    data = r.get(doc, (), "data", "map", default={})
    dp = ("data",)
    r.unknown(data, dp, {"snapshots", "snr_db", "seed", "random_phase", "file"})
    L = r.get(data, dp, "snapshots", "int", default=1)
    if L < 1:
        r.fail(dp + ("snapshots",), "must be >= 1")
    snr = data.get("snr_db", "none")
    if snr is None or snr == "none":
        snr = None
    else:
        snr = r.get(data, dp, "snr_db", "float")
    seed = r.get(data, dp, "seed", "int", default=0)
    random_phase = r.get(data, dp, "random_phase", "bool", default=False)
    dfile = r.get(data, dp, "file", "str")
    if dfile is not None and base_dir is not None and not os.path.isabs(dfile):
        dfile = os.path.join(base_dir, dfile)
    if snr is not None and scene.K == 0 and dfile is None:
        r.fail(dp + ("snr_db",), "an SNR needs at least one source")

    ests = _estimators(r, doc)
    for i, e in enumerate(ests):
        if e.params.get("epsilon") == "noise" and (snr is None or dfile is not None):
            r.fail(("estimators", i, "epsilon"), "'noise' needs synthesized noisy data")
    exps = _expect(r, doc)

    out = r.get(doc, (), "output", "map", default={})
    op = ("output",)
    r.unknown(out, op, {"dual_samples", "formats"})
    ns = r.get(out, op, "dual_samples", "int", default=2001)
    if ns < 2:
        r.fail(op + ("dual_samples",), "must be >= 2")
    fmts = r.get(out, op, "formats", "list", default=list(FORMATS))
    for j, f in enumerate(fmts):
        if f not in FORMATS:
            r.fail(op + ("formats", j), f"unknown format {f!r}")
    return Scenario(name=name, geometry=geom, scene=scene, snapshots=L, snr_db=snr, seed=seed,
                    random_phase=random_phase, data_file=dfile, estimators=ests, expect=exps,
                    dual_samples=ns, formats=tuple(fmts), source_path=source)


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        text = fh.read()
    return parse_scenario(text, os.path.basename(path), os.path.dirname(os.path.abspath(path)))


def shipped_scenarios() -> dict:
    """Name -> path for the scenario files bundled with the package."""
    d = os.path.join(os.path.dirname(__file__), "scenarios")
    return {f[:-5]: os.path.join(d, f) for f in sorted(os.listdir(d)) if f.endswith(".yaml")}
