"""Command-line experiment runner.

Subcommands: ``oscillate``, ``bound``, ``sweep``, ``trace``, ``riccati-check``.
Every output embeds the fully resolved configuration and its SHA-256 hash;
no wall-clock data is written, so identical configurations give
byte-identical output.

Exit codes: 0 success, 1 usage/IO/numerical error, 2 horizon-limited
evidence (oscillate) or a violated inequality (riccati-check), 3 violated
theorem hypothesis (bound).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

from . import __version__
from .core import HalfLinearError, HalfLinearParams, HypothesisError
from .criteria import (
    CONSISTENT,
    DEFAULT_T_MAX,
    HORIZON_LIMITED,
    UNINFORMATIVE,
    cross_validate,
    leighton_wintner_check,
    theorem1_predict,
)
from .ode import ATOL, RTOL, ZERO_TOL, integrate_halflinear, oscillation_evidence, scan_zeros, _pow_odd
from .profiles import load_profile, profile_from_dict
from .quadrature import ATOL as QUAD_ATOL
from .riccati import growth_bound_check, integrate_riccati
from .spectral import bound_witness_sweep, essential_bound, theta_upper_bound

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_LIMITED = 2
EXIT_HYPOTHESIS = 3

DEFAULTS = {
    "profile": "constant",
    "p": 2.0,
    "lambda": 1.0,
    "lambda_grid": None,
    "t_start": None,
    "horizon": 50.0,
    "t_max": DEFAULT_T_MAX,
    "rtol": RTOL,
    "atol": ATOL,
    "min_zeros": 2,
    "format": None,
    "out": None,
    "x0": 0.0,
    "xprime0": 1.0,
    "samples": None,
    "riccati": False,
    "y0": 1.0,
    "threshold_tol": 1e-3,
}

DEFAULT_FORMAT = {"oscillate": "json", "bound": "json", "sweep": "csv", "trace": "csv", "riccati-check": "json"}


class UsageError(HalfLinearError):
    pass


# --------------------------------------------------------------------------- #
# configuration


def parse_profile(text):
    """Profile from a file path, inline JSON, or ``kind[:key=value,...]`` shorthand.

    Shorthand examples: ``constant``, ``power:A=1,c=3``,
    ``model_manifold:n=2,kappa=-1,t0=0``.
    """
    if isinstance(text, dict):
        return profile_from_dict(text)
    text = str(text).strip()
    if text.startswith("{"):
        return profile_from_dict(json.loads(text))
    path = Path(text)
    if path.suffix.lower() in (".json", ".csv"):
        if not path.exists():
            raise UsageError(f"profile file not found: {text}")
        return load_profile(path)
    kind, _, rest = text.partition(":")
    params, t0 = {}, None
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise UsageError(f"bad profile parameter {item!r}; expected key=value")
        if key.strip() == "t0":
            t0 = float(val)
        else:
            params[key.strip()] = float(val)
    return profile_from_dict({"kind": kind.strip(), "params": params, "t0": t0})


def _grid(value):
    if value is None:
        return None
    if isinstance(value, str):
        return [float(s) for s in value.split(",") if s.strip()]
    return [float(v) for v in value]


def resolve_config(command, args):
    cfg = dict(DEFAULTS)
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {args.config}")
        with open(path) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            cfg[key] = val
    cfg["lambda_grid"] = _grid(cfg["lambda_grid"])
    if cfg["format"] is None:
        cfg["format"] = DEFAULT_FORMAT[command]
    if cfg["format"] not in ("csv", "json"):
        raise UsageError("format must be csv or json")
    profile = parse_profile(cfg["profile"])
    if cfg["t_start"] is None:
        # start at t0 unless the area vanishes there (geodesic balls of radius 0)
        cfg["t_start"] = profile.t0 if math.isfinite(profile.log_v(profile.t0)) else profile.t0 + 1.0
    for key in ("p", "lambda", "t_start", "horizon", "t_max", "rtol", "atol", "y0", "x0", "xprime0", "threshold_tol"):
        cfg[key] = float(cfg[key])
    cfg["min_zeros"] = int(cfg["min_zeros"])
    cfg["t_max"] = min(cfg["t_max"], profile.t_end)
    cfg["command"] = command
    cfg["version"] = __version__
    cfg["tolerances"] = {"rtol": cfg["rtol"], "atol": cfg["atol"], "zero_tol": ZERO_TOL, "quadrature_atol": QUAD_ATOL}
    cfg["resolved_profile"] = profile.to_dict()
    return cfg, profile


def _config_header(cfg):
    blob = json.dumps(cfg, sort_keys=True)
    return {"config": json.loads(blob), "config_sha256": hashlib.sha256(blob.encode()).hexdigest()}


def _json_doc(cfg, payload):
    doc = _config_header(cfg)
    doc.update(payload)
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _csv_doc(cfg, header, rows):
    head = _config_header(cfg)
    buf = io.StringIO()
    buf.write(f"# config: {json.dumps(head['config'], sort_keys=True)}\n")
    buf.write(f"# config_sha256: {head['config_sha256']}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow(["" if v is None else (repr(float(v)) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def _emit(cfg, text):
    if cfg["out"]:
        with open(cfg["out"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------- #
# commands


def cmd_oscillate(cfg, profile):
    params = HalfLinearParams(cfg["p"], cfg["lambda"])
    report = oscillation_evidence(
        params, profile, cfg["t_start"], cfg["horizon"], cfg["min_zeros"], rtol=cfg["rtol"], atol=cfg["atol"]
    )
    predictions, notes = [], []
    try:
        predictions.append(theorem1_predict(profile, cfg["p"], cfg["lambda"], cfg["t_max"]))
    except HypothesisError as exc:
        notes.append(f"theorem1: {exc}")
    if cfg["lambda"] > 0:
        predictions.append(leighton_wintner_check(profile, cfg["p"], cfg["lambda"], cfg["t_max"]))
    verdicts = [cross_validate(pr, report) for pr in predictions]
    if CONSISTENT in verdicts:
        verdict = CONSISTENT
    elif HORIZON_LIMITED in verdicts:
        verdict = HORIZON_LIMITED
    else:
        verdict = UNINFORMATIVE
    if cfg["format"] == "json":
        text = _json_doc(
            cfg,
            {
                "report": report.to_dict(),
                "predictions": [pr.to_dict() for pr in predictions],
                "consistency": verdict,
                "notes": notes,
            },
        )
    else:
        rows = [[k, z] for k, z in enumerate(report.zeros, start=1)]
        text = _csv_doc(cfg, ["zero_index", "t"], rows)
    _emit(cfg, text)
    if report.error:
        print(f"integration stopped early: {report.error}", file=sys.stderr)
    return EXIT_LIMITED if verdict == HORIZON_LIMITED else EXIT_OK


def cmd_bound(cfg, profile):
    try:
        theta_b = theta_upper_bound(profile, cfg["p"], cfg["t_max"])
        ess = essential_bound(profile, cfg["p"], cfg["t_max"])
    except HypothesisError as exc:
        print(f"hypothesis violated ({exc.hypothesis}): {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    if cfg["format"] == "json":
        text = _json_doc(cfg, {"theta_bound": theta_b.to_dict(), "essential_bound": ess.to_dict()})
    else:
        rows = [[b.kind, b.value, b.provenance["beta"], b.provenance["theta_estimate"], cfg["p"]] for b in (theta_b, ess)]
        text = _csv_doc(cfg, ["kind", "value", "beta", "theta_estimate", "p"], rows)
    _emit(cfg, text)
    return EXIT_OK


def cmd_sweep(cfg, profile):
    grid = cfg["lambda_grid"]
    if not grid:
        raise UsageError("sweep needs a non-empty --lambda-grid")
    res = bound_witness_sweep(
        profile, cfg["p"], grid, cfg["t_start"], cfg["horizon"], cfg["threshold_tol"], cfg["rtol"], cfg["atol"]
    )
    if cfg["format"] == "json":
        text = _json_doc(cfg, {"sweep": res.to_dict()})
    else:
        rows = [[r.lam, r.t1, r.t2, r.quotient, r.verdict] for r in res.rows]
        text = _csv_doc(cfg, ["lambda", "t1", "t2", "quotient", "verdict"], rows)
        text += f"# threshold: {res.threshold!r}\n"
    _emit(cfg, text)
    if not any(r.verdict != "error" for r in res.rows):
        return EXIT_ERROR
    return EXIT_OK


def cmd_trace(cfg, profile):
    import numpy as np

    params = HalfLinearParams(cfg["p"], cfg["lambda"])
    tr = integrate_halflinear(
        params, profile, cfg["x0"], cfg["xprime0"], (cfg["t_start"], cfg["horizon"]), rtol=cfg["rtol"], atol=cfg["atol"]
    )
    if cfg["samples"]:
        ts = np.linspace(tr.t[0], tr.t[-1], int(cfg["samples"]))
        xs, ws = tr.resample(ts)
        locs = [tr.local_state_at(float(t)) for t in ts]
    else:
        ts, xs, ws = tr.t, tr.x, tr.w
        locs = list(zip(tr.xm, tr.wm, tr.log_sx, tr.log_sv))
    header = ["t", "x", "w"]
    rows = [[float(t), float(x), float(w)] for t, x, w in zip(ts, xs, ws)]
    if cfg["riccati"]:
        header.append("y")
        xmax = max(abs(float(l[0])) * math.exp(l[2]) for l in locs)
        pm1 = params.p - 1.0
        for row, (xm, wm, a, s) in zip(rows, locs):
            xt = xm * math.exp(a)
            row.append(-wm * math.exp(s) / _pow_odd(xm, pm1) if abs(xt) > 1e-12 * xmax else None)
    if cfg["format"] == "json":
        text = _json_doc(cfg, {"columns": header, "rows": rows, "zeros": scan_zeros(tr)[0]})
    else:
        text = _csv_doc(cfg, header, rows)
    _emit(cfg, text)
    return EXIT_OK


def cmd_riccati_check(cfg, profile):
    params = HalfLinearParams(cfg["p"], cfg["lambda"])
    rt = integrate_riccati(params, profile, cfg["y0"], (cfg["t_start"], cfg["horizon"]), rtol=cfg["rtol"], atol=cfg["atol"])
    rep = growth_bound_check(rt, params, cfg["t_start"])
    payload = {
        "growth_bound": rep.to_dict(),
        "blow_up": rt.blow_up.to_dict() if rt.blow_up else None,
        "n_samples": len(rt),
    }
    if cfg["format"] == "json":
        text = _json_doc(cfg, payload)
    else:
        text = _csv_doc(cfg, ["t", "y"], [[float(t), float(y)] for t, y in zip(rt.t, rt.y)])
    _emit(cfg, text)
    return EXIT_OK if rep.ok else EXIT_LIMITED


COMMANDS = {
    "oscillate": cmd_oscillate,
    "bound": cmd_bound,
    "sweep": cmd_sweep,
    "trace": cmd_trace,
    "riccati-check": cmd_riccati_check,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run configuration (flags override --config values)")
    g.add_argument("--config", help="JSON run configuration file")
    g.add_argument("--profile", help="profile: JSON/CSV file, inline JSON, or kind[:key=value,...]")
    g.add_argument("--p", type=float, help="exponent p > 1 (default 2)")
    g.add_argument("--lambda", dest="lambda", type=float, help="spectral parameter (default 1)")
    g.add_argument("--lambda-grid", dest="lambda_grid", help="comma-separated increasing lambda values")
    g.add_argument("--t-start", dest="t_start", type=float, help="start time (default t0, or t0+1 when v(t0)=0)")
    g.add_argument("--horizon", type=float, help="end time (default 50)")
    g.add_argument("--t-max", dest="t_max", type=float, help=f"growth-exponent window end (default {DEFAULT_T_MAX:g})")
    g.add_argument("--rtol", type=float, help=f"integrator relative tolerance (default {RTOL:g})")
    g.add_argument("--atol", type=float, help=f"integrator absolute tolerance (default {ATOL:g})")
    g.add_argument("--min-zeros", dest="min_zeros", type=int, help="zeros required for oscillation evidence (default 2)")
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--out", help="output path (default stdout)")

    parser = argparse.ArgumentParser(
        prog="halflinear",
        description=(
            "Half-linear oscillation and p-Laplacian eigenvalue bounds on radial profiles. "
            f"Default tolerances: integrator rtol {RTOL:g} / atol {ATOL:g}, zero location {ZERO_TOL:g}, "
            f"quadrature {QUAD_ATOL:g}."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("oscillate", parents=[common], help="zero evidence, criteria and their consistency")
    sub.add_parser("bound", parents=[common], help="growth-exponent eigenvalue bounds")
    sp = sub.add_parser("sweep", parents=[common], help="witness annuli over a lambda grid")
    sp.add_argument("--threshold-tol", dest="threshold_tol", type=float, help="threshold bisection tolerance (default 1e-3)")
    tp = sub.add_parser("trace", parents=[common], help="trajectory CSV t,x,w[,y]")
    tp.add_argument("--x0", type=float, help="x(t_start) (default 0)")
    tp.add_argument("--xprime0", type=float, help="x'(t_start) (default 1)")
    tp.add_argument("--samples", type=int, help="uniform resampling count (default: native steps)")
    tp.add_argument("--riccati", action="store_true", help="add y = -w/Phi(x) where x is bounded away from 0")
    rp = sub.add_parser("riccati-check", parents=[common], help="growth bound and Young-step checks")
    rp.add_argument("--y0", type=float, help="y(t_start) (default 1)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        cfg, profile = resolve_config(args.command, args)
        return COMMANDS[args.command](cfg, profile)
    except (HalfLinearError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
