"""Command-line entry point.

Exit codes: 0 success, 1 expected-support checks failed, 2 parse or
configuration error, 3 solver or estimation failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import DomainError, GridFreeError, ParseError
from .figures import FIGURE_IDS, reproduce_figure
from .harness import dumps_json, run_scenario
from .model import ArrayGeometry, SourceScene
from .scenario import FORMATS, METHODS, REQUIRED, EstimatorSpec, Scenario, load_scenario, \
    shipped_scenarios
from .snapfile import parse_snapshots

EXIT_OK, EXIT_CHECKS, EXIT_PARSE, EXIT_SOLVER = 0, 1, 2, 3

_FLAG = {"epsilon": "--epsilon", "sources": "--sources", "grid_step_deg": "--grid-step"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_PARSE)


def _formats(values):
    if not values:
        return None
    out = []
    for v in values:
        for f in v.split(","):
            f = f.strip()
            if f not in FORMATS:
                raise ParseError(f"unknown format {f!r} (choose from {', '.join(FORMATS)})", "--format")
            if f not in out:
                out.append(f)
    return tuple(out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gridfree", description="Grid-free and classical DOA estimation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out-dir", help="write artifacts to this directory")
        sp.add_argument("--format", action="append",
                        help="artifact formats, comma separated or repeated: json,csv,svg")

    s = sub.add_parser("simulate", help="run a scenario file (or a shipped scenario name)")
    s.add_argument("scenario")
    s.add_argument("--snr", type=float, help="override the scenario SNR in dB")
    s.add_argument("--seed", type=int, help="override the scenario noise seed")
    common(s)

    e = sub.add_parser("estimate", help="run one estimator on a snapshot file")
    e.add_argument("input")
    e.add_argument("--method", required=True, choices=METHODS)
    e.add_argument("--epsilon", type=float, help="noise bound for cs-grid and gridfree")
    e.add_argument("--sources", type=int, help="number of sources K")
    e.add_argument("--grid-step", type=float, help="DOA grid step in degrees")
    e.add_argument("--snapshot", type=int, default=0, help="snapshot row for single-snapshot methods")
    common(e)

    r = sub.add_parser("reproduce-figure", help="write the artifact bundle of a figure")
    r.add_argument("id", type=int, choices=FIGURE_IDS)
    r.add_argument("--seed", type=int, default=0, help="noise seed for figures 1 and 6")
    r.add_argument("--out-dir", required=True)

    i = sub.add_parser("ingest", help="validate and summarize a snapshot file")
    i.add_argument("file")
    return p


def _resolve_scenario(name: str) -> str:
    if os.path.exists(name):
        return name
    shipped = shipped_scenarios()
    if name in shipped:
        return shipped[name]
    raise ParseError(f"no such scenario file or shipped scenario "
                     f"(shipped: {', '.join(shipped)})", name)


def _summary(report) -> str:
    lines = [f"scenario {report['scenario']}"]
    for e in report["estimates"]:
        degs = ", ".join(f"{d:.4f}" for d in e["support_deg"])
        flag = "" if e["resolvable"] else "  [unresolvable]"
        lines.append(f"  {e['method']:<13} [{degs}]{flag}")
    for c in report["checks"]:
        lines.append(f"  check {c['method']}: {'PASS' if c['passed'] else 'FAIL'}"
                     + (f" (max error {c['max_error_deg']:.3g} deg)" if "max_error_deg" in c
                        else f" ({c.get('reason', '')})"))
    return "\n".join(lines)


def cmd_simulate(a) -> int:
    s = load_scenario(_resolve_scenario(a.scenario))
    changes = {}
    if a.snr is not None:
        changes["snr_db"] = a.snr
    if a.seed is not None:
        changes["seed"] = a.seed
    if changes:
        s = Scenario(**{**s.__dict__, **changes})
        if s.snr_db is not None and s.scene.K == 0:
            raise ParseError("an SNR needs at least one source", "--snr")
    run = run_scenario(s, a.out_dir, _formats(a.format))
    print(_summary(run.report))
    return EXIT_OK if run.report["passed"] else EXIT_CHECKS


def cmd_estimate(a) -> int:
    params = {"snapshot": a.snapshot}
    if a.epsilon is not None:
        if a.epsilon < 0:
            raise ParseError("must be >= 0", "--epsilon")
        params["epsilon"] = a.epsilon
    if a.sources is not None:
        if a.sources < 1:
            raise ParseError("must be >= 1", "--sources")
        params["sources"] = a.sources
    if a.grid_step is not None:
        if not 0 < a.grid_step <= 90:
            raise ParseError("must lie in (0, 90]", "--grid-step")
        params["grid_step_deg"] = a.grid_step
    for key in REQUIRED[a.method]:
        if key not in params:
            raise ParseError(f"required for method {a.method}", _FLAG[key])
    with open(a.input, newline="") as fh:
        snaps, _ = parse_snapshots(fh.read(), os.path.basename(a.input))
    geom: ArrayGeometry = snaps[0].geometry
    s = Scenario(name=f"estimate:{os.path.basename(a.input)}", geometry=geom,
                 scene=SourceScene(), snapshots=len(snaps), data_file=os.path.abspath(a.input),
                 estimators=(EstimatorSpec(a.method, params),))
    run = run_scenario(s, a.out_dir, _formats(a.format) or FORMATS)
    if a.out_dir is None:
        print(dumps_json(run.report), end="")
    else:
        print(_summary(run.report))
    return EXIT_OK


def cmd_reproduce(a) -> int:
    doc = reproduce_figure(a.id, a.out_dir, a.seed)
    print(f"figure {a.id}: {len(doc['files'])} files in {a.out_dir}")
    return EXIT_OK


def cmd_ingest(a) -> int:
    with open(a.file, newline="") as fh:
        snaps, label = parse_snapshots(fh.read(), os.path.basename(a.file))
    g = snaps[0].geometry
    norms = [float(np.linalg.norm(s.y)) for s in snaps]
    print(json.dumps({"file": os.path.basename(a.file), "M": g.M, "L": len(snaps),
                      "spacing_over_lambda": g.spacing_over_lambda, "frequency": label,
                      "snapshot_norm_min": min(norms), "snapshot_norm_max": max(norms)},
                     indent=2, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    handlers = {"simulate": cmd_simulate, "estimate": cmd_estimate,
                "reproduce-figure": cmd_reproduce, "ingest": cmd_ingest}
    try:
        return handlers[a.command](a)
    except (ParseError, DomainError) as exc:
        print(f"gridfree: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"gridfree: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except GridFreeError as exc:
        print(f"gridfree: solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
