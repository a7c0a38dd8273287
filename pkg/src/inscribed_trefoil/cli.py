"""
Command-line front end.

Every command writes one JSON result document (validated against the
schemas shipped in ``inscribed_trefoil/schemas``) and optionally CSV
polylines for plotting. Exit codes: 0 success, 1 input error, 2 when no
trefoil could be certified.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .curve import Ambient, CurveError, KnotCurve, curve_from_spec, preset
from .hexknot import classify_hexagon
from .solve import (
    ACCEPT,
    certify_trefoil,
    conjecture1_experiment,
    find_inscribed_prisms,
    find_quadrisecants,
    kappa,
    r3_model,
    s3_model,
    thickness,
)

log = logging.getLogger("inscribed_trefoil")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_UNRESOLVED = 2

CURVE_SAMPLES = 1024
COMMANDS = ("search", "invariant", "thickness", "certify", "quadrisecants", "classify-hex")
DEFAULT_GRID = {"search": 12, "invariant": 12, "certify": 12, "thickness": 64, "quadrisecants": 96}


class InputError(ValueError):
    pass


def load_schema(name):
    text = resources.files("inscribed_trefoil").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


@dataclass
class RunConfig:
    command: str
    source: str
    grid: int | None = None
    basepoints: list = field(default_factory=lambda: [0.0])
    tol: float = ACCEPT
    seed: int = 0
    out: str | None = None
    plot_dir: str | None = None
    timings: bool = False
    workers: int = 1
    points_file: str | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise InputError("--tol must be positive")
        if self.grid is not None and self.grid < 4:
            raise InputError("--grid must be at least 4")
        if self.command in ("search", "invariant", "certify") and self.grid is not None and self.grid < 6:
            raise InputError("the prism search needs --grid of at least 6")

    def echo(self):
        return {
            "source": self.source,
            "grid": self.grid,
            "basepoints": [float(b) for b in self.basepoints],
            "tol": float(self.tol),
            "seed": int(self.seed),
        }


def resolve_curve(cfg):
    if cfg.source.startswith("spec:"):
        path = Path(cfg.source[5:])
        try:
            spec = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read curve spec {path}: {exc}") from exc
        try:
            jsonschema.validate(spec, load_schema("curve_spec"))
        except jsonschema.ValidationError as exc:
            raise InputError(f"invalid curve spec: {exc.message}") from exc
        return curve_from_spec(spec)
    try:
        return preset(cfg.source)
    except CurveError as exc:
        raise InputError(str(exc)) from exc


# ---------------------------------------------------------------------------
# commands


def cmd_search(cfg, curve):
    runs = []
    model = s3_model(curve)
    for b in cfg.basepoints:
        sols = find_inscribed_prisms(model, b, cfg.grid, cfg.tol, workers=cfg.workers)
        runs.append({"basepoint": float(b), "solutions": [s.to_dict() for s in sols]})
    return {"runs": runs}, EXIT_OK


def cmd_invariant(cfg, curve):
    runs = []
    a2v = None
    for k, b in enumerate(cfg.basepoints):
        rep = kappa(curve, b, cfg.grid, workers=cfg.workers, with_a2=(k == 0))
        if k == 0:
            a2v = rep.a2
        rep.a2 = a2v
        d = rep.to_dict()
        d.pop("a2")
        runs.append({"basepoint": float(b), **d})
    return {"a2": a2v, "runs": runs}, EXIT_OK


def cmd_thickness(cfg, curve):
    model = s3_model(curve)
    return thickness(model, grid=cfg.grid).to_dict(), EXIT_OK


def cmd_certify(cfg, curve):
    model = s3_model(curve)
    rng = np.random.default_rng(cfg.seed)
    attempts = []
    for b in cfg.basepoints:
        for sol in find_inscribed_prisms(model, b, cfg.grid, cfg.tol, workers=cfg.workers):
            res = certify_trefoil(curve, sol, rng=rng)
            attempts.append({"basepoint": float(b), "t": [float(v) for v in sol.t], **res.to_dict()})
            if res:
                cert = res.to_dict()
                cert.pop("status")
                payload = {
                    "status": "Certified",
                    "basepoint": float(b),
                    "solution": sol.to_dict(),
                    "certificate": cert,
                    "attempts": attempts,
                }
                return payload, EXIT_OK
    return {"status": "Unresolved", "attempts": attempts}, EXIT_UNRESOLVED


def cmd_quadrisecants(cfg, curve):
    quads = find_quadrisecants(r3_model(curve), grid=cfg.grid)
    return {"quadrisecants": [q.to_dict() for q in quads]}, EXIT_OK


def read_points(path):
    path = Path(path)
    try:
        if path.suffix == ".json":
            pts = np.asarray(json.loads(path.read_text()), dtype=float)
        else:
            pts = np.loadtxt(path, delimiter="," if path.suffix == ".csv" else None, ndmin=2)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read points from {path}: {exc}") from exc
    if pts.shape != (6, 3) or not np.all(np.isfinite(pts)):
        raise InputError(f"expected six finite points of R^3, got shape {pts.shape}")
    return pts


def cmd_classify_hex(cfg, _curve=None):
    cls = classify_hexagon(read_points(cfg.points_file))
    return {
        "kind": cls.kind.value,
        "margin": float(cls.margin),
        "jones": {str(k): int(v) for k, v in sorted(cls.jones.items())},
    }, EXIT_OK


_HANDLERS = {
    "search": cmd_search,
    "invariant": cmd_invariant,
    "thickness": cmd_thickness,
    "certify": cmd_certify,
    "quadrisecants": cmd_quadrisecants,
    "classify-hex": cmd_classify_hex,
}


# ---------------------------------------------------------------------------
# documents


def _check_finite(obj, where="document"):
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ValueError(f"non-finite number in {where}")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{where}.{k}")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _check_finite(v, f"{where}[{i}]")


def run(cfg):
    """Execute one command; returns (document, exit code)."""
    t0 = time.perf_counter()
    curve = None if cfg.command == "classify-hex" else resolve_curve(cfg)
    if cfg.grid is None and cfg.command in DEFAULT_GRID:
        cfg.grid = DEFAULT_GRID[cfg.command]
    payload, code = _HANDLERS[cfg.command](cfg, curve)
    doc = {
        "tool": "inscribed-trefoil",
        "version": __version__,
        "schema": "result/v1",
        "command": cfg.command,
        "config": cfg.echo(),
        "curve": curve.to_spec() if isinstance(curve, KnotCurve) else None,
        "payload": payload,
    }
    if cfg.timings:
        doc["timings"] = {"total_s": time.perf_counter() - t0}
    _check_finite(doc)
    jsonschema.validate(doc, load_schema("result"))
    return doc, code


def dumps(doc):
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def export_plot_data(doc, out_dir):
    """Write CSV polylines in R^3 coordinates; returns the written paths.

    curve.csv holds 1024 samples of the curve (stereographic image for S^3
    curves), hexagon.csv the closed certified hexagon and line.csv two
    endpoint rows per quadrisecant.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if doc.get("curve") is None:
        return written
    curve = r3_model(curve_from_spec(doc["curve"]))
    _, x = curve.sample(CURVE_SAMPLES)
    p = out / "curve.csv"
    _write_csv(p, ["x", "y", "z"], x.tolist())
    written.append(p)
    payload = doc["payload"]
    cert = payload.get("certificate")
    if cert is not None:
        pts = np.asarray(cert["points"], dtype=float)
        p = out / "hexagon.csv"
        _write_csv(p, ["x", "y", "z"], np.vstack([pts, pts[:1]]).tolist())
        written.append(p)
    quads = payload.get("quadrisecants")
    if quads is not None:
        rows = []
        for k, q in enumerate(quads):
            c, d = np.asarray(q["point"]), np.asarray(q["direction"])
            ends = curve.eval(np.asarray(q["s"])) - c
            lo, hi = float(np.min(ends @ d)), float(np.max(ends @ d))
            pad = 0.1 * (hi - lo)
            for s in (lo - pad, hi + pad):
                rows.append([k, *(c + s * d).tolist()])
        p = out / "line.csv"
        _write_csv(p, ["id", "x", "y", "z"], rows)
        written.append(p)
    return written


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    ap = argparse.ArgumentParser(prog="inscribed-trefoil", description=__doc__.strip().splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name == "classify-hex":
            sp.add_argument("points", help="six points of R^3 (.json, .csv or whitespace text)")
        else:
            src = sp.add_mutually_exclusive_group(required=True)
            src.add_argument("--curve", help="preset curve name")
            src.add_argument("--spec", help="curve spec JSON file")
            sp.add_argument("--grid", type=int, default=None)
            sp.add_argument("--basepoint", type=float, nargs="+", default=[0.0])
            sp.add_argument("--tol", type=float, default=ACCEPT)
            sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="result JSON path (default: stdout)")
        sp.add_argument("--plot-dir", help="directory for CSV plot data")
        sp.add_argument("--timings", action="store_true", help="record wall-clock timings")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args):
    if args.command == "classify-hex":
        return RunConfig(
            command=args.command,
            source="points:" + args.points,
            seed=args.seed,
            out=args.out,
            plot_dir=args.plot_dir,
            timings=args.timings,
            points_file=args.points,
        )
    source = args.curve if args.curve else "spec:" + args.spec
    return RunConfig(
        command=args.command,
        source=source,
        grid=args.grid,
        basepoints=list(args.basepoint),
        tol=args.tol,
        seed=args.seed,
        out=args.out,
        plot_dir=args.plot_dir,
        timings=args.timings,
        workers=args.workers,
    )


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        doc, code = run(cfg)
    except (InputError, CurveError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = dumps(doc)
    if cfg.out:
        try:
            Path(cfg.out).write_text(text)
        except OSError as exc:
            print(f"error: cannot write {cfg.out}: {exc}", file=sys.stderr)
            return EXIT_INPUT
    else:
        sys.stdout.write(text)
    if cfg.plot_dir:
        try:
            export_plot_data(doc, cfg.plot_dir)
        except OSError as exc:
            print(f"error: cannot write plot data: {exc}", file=sys.stderr)
            return EXIT_INPUT
    return code


if __name__ == "__main__":
    sys.exit(main())
