"""Command-line interface: ``linflow {simulate,classify,sweep,lagrangian,validate}``.

Time series are CSV with a header row and 17 significant digits; summaries
and sweep records are JSON. Output depends only on the configuration, so
identical runs give byte-identical files.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import (
    CaseTag,
    InconclusiveError,
    classify_aligned,
    classify_general,
    verify_prediction,
)
from .closed_forms import AlignedParams, boundary_invariant, g_defect
from .dynamics import SolverConfig, Status, default_rel_tol, integrate_matrix, integrate_pair, integrate_params
from .matrix_core import StrainVorticityPair, TraceFreeMatrix
from .spectral import IllConditionedError

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

PARAM_HEADER = ("t", "lambda", "r", "k", "g", "frob_norm", "trace_sq")
MATRIX_HEADER = ("t",) + tuple(f"m{i}{j}" for i in range(1, 4) for j in range(1, 4)) + ("frob_norm",)
PAIR_HEADER = ("t", "s11", "s22", "s33", "s12", "s13", "s23", "w1", "w2", "w3")


class InputError(ValueError):
    pass


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path: Path, header, rows) -> int:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    n = 0
    for row in rows:
        w.writerow([fmt(v) for v in row])
        n += 1
    path.write_text(buf.getvalue())
    return n


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Parse a file written by :func:`write_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    return header, data


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


# ---------------------------------------------------------------------------
# parsing helpers


def floats(text: str, n: int | None = None, what: str = "value") -> list[float]:
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"cannot parse {what} {text!r}: {exc}") from None
    if n is not None and len(vals) != n:
        raise InputError(f"{what} needs {n} numbers, got {len(vals)}")
    if not all(math.isfinite(v) for v in vals):
        raise InputError(f"{what} must be finite")
    return vals


def parse_matrix(text: str) -> np.ndarray:
    m = re.fullmatch(r"\s*diag\((.*)\)\s*", text)
    if m:
        return np.diag(floats(m.group(1), 3, "diag entries"))
    return np.array(floats(text, 9, "matrix")).reshape(3, 3)


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise InputError(f"not a boolean: {text!r}")


def read_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment; dashes equal underscores."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def solver_config(args, t_end=None, **kw) -> SolverConfig:
    try:
        return SolverConfig(
            t_end=args.t_end if t_end is None else t_end,
            rel_tol=args.rel_tol,
            abs_tol=args.abs_tol,
            blowup_norm_threshold=args.threshold,
            **kw,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None


def initial_data(args):
    """('params', AlignedParams) | ('matrix', ndarray) | ('pair', StrainVorticityPair)."""
    given = [name for name in ("params", "matrix", "pair") if getattr(args, name, None)]
    if len(given) != 1:
        raise InputError("give exactly one of --params, --matrix, --pair")
    try:
        if args.params:
            lam, r, k = floats(args.params, 3, "--params")
            return "params", AlignedParams(lam, r, k)
        if args.matrix:
            return "matrix", TraceFreeMatrix(parse_matrix(args.matrix)).entries
        vals = floats(args.pair, 9, "--pair")
        return "pair", StrainVorticityPair(vals[:6], vals[6:])
    except InputError:
        raise
    except ValueError as exc:
        raise InputError(str(exc)) from None


# ---------------------------------------------------------------------------
# simulate


def _sample_times(args, t_end: float):
    if not args.samples:
        return None
    return tuple(np.linspace(0.0, t_end, args.samples + 1)[1:])


def cmd_simulate(args) -> int:
    form, data = initial_data(args)
    cfg = solver_config(args, sample_times=_sample_times(args, args.t_end))
    out = Path(args.out)
    drifts = {"m0": None, "trace": None, "boundary_c": None}
    if form == "params":
        on_sep = classify_aligned(data).case_tag is CaseTag.CASE3_BOUNDARY
        # separatrix data drifts off the separatrix in the full system
        traj = integrate_params(data, cfg, reduced=args.reduced or on_sep)
        lam, r, k = traj.states.T
        g = np.array([g_defect(a, b) for a, b in zip(r, k)])
        trace_sq = lam * lam * (2.0 + 2.0 * r + 2.0 * r * r - 2.0 * k * k)
        n = write_csv(out, PARAM_HEADER, zip(traj.times, lam, r, k, g, traj.norms, trace_sq))
        if data.r != -2.0:
            drifts["m0"] = float(np.max(np.abs(k / traj.aux["r_plus_2"] - data.m0)))
            if on_sep:
                c0 = boundary_invariant(data.lam, data.r)
                drifts["boundary_c"] = float(
                    max(abs(boundary_invariant(a, b) / c0 - 1.0) for a, b in zip(lam, r) if b > 0)
                )
        drifts["trace"] = 0.0
    else:
        if form == "matrix":
            traj = integrate_matrix(data, cfg)
            mats = traj.matrices()
            pairs = np.array([np.concatenate([p.strain_entries, p.vorticity]) for p in traj.pairs()])
        else:
            traj = integrate_pair(data, cfg)
            mats = traj.matrices()
            pairs = traj.states
        flat = mats.reshape(len(mats), 9)
        n = write_csv(out, MATRIX_HEADER, (np.concatenate([[t], row, [nm]]) for t, row, nm in zip(traj.times, flat, traj.norms)))
        pair_path = out.with_name(out.stem + "_pair" + out.suffix)
        write_csv(pair_path, PAIR_HEADER, (np.concatenate([[t], row]) for t, row in zip(traj.times, pairs)))
        tr = np.abs(np.trace(mats, axis1=1, axis2=2)) / np.maximum(1.0, traj.norms)
        drifts["trace"] = float(np.max(tr))
    term = traj.termination
    summary = {
        "input": {"form": form, "value": _input_repr(form, data)},
        "termination": term.status.value,
        "t_max_estimate": term.t_max_estimate,
        "t_max_interval": None if term.confidence_interval is None else list(term.confidence_interval),
        "invariant_drifts": drifts,
        "samples_written": n,
        "trace_projections": traj.projections,
        "message": term.message,
    }
    text = dump_json(_plain(summary))
    if args.summary:
        Path(args.summary).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_NUMERIC if term.status is Status.UNDERFLOW else EXIT_OK


def _input_repr(form, data):
    if form == "params":
        return [data.lam, data.r, data.k]
    if form == "matrix":
        return np.asarray(data).ravel().tolist()
    return list(data.strain_entries) + list(data.vorticity)


def _plain(obj):
    """Convert numpy scalars for JSON."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# classify


def _predict(form, data, tol):
    if form == "params":
        return classify_aligned(data)
    m = data if form == "matrix" else (data.strain - data.antisymmetric)
    return classify_general(m, tol)


def cmd_classify(args) -> int:
    form, data = initial_data(args)
    try:
        pred = _predict(form, data, args.spectral_tol)
    except IllConditionedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    report = {"prediction": pred.summary()}
    status = EXIT_OK
    if args.verify:
        cfg = solver_config(args)
        if form == "params":
            traj = integrate_params(data, cfg)
        elif form == "matrix":
            traj = integrate_matrix(data, cfg)
        else:
            traj = integrate_pair(data, cfg)
        try:
            report["verification"] = verify_prediction(pred, traj, args.tol).summary()
        except InconclusiveError as exc:
            report["verification"] = {"inconclusive": str(exc)}
            status = EXIT_NUMERIC
    if args.json:
        sys.stdout.write(dump_json(_plain(report)))
    else:
        print(f"case: {pred.case_tag.value}")
        print(f"finite blowup: {pred.finite_blowup}")
        print(f"lambda limit: {pred.lambda_limit.value}")
        if pred.limits is not None:
            print(f"limits (r, k): {fmt(pred.limits[0])}, {fmt(pred.limits[1])}")
        if pred.t_max_exact is not None:
            print(f"t_max: {fmt(pred.t_max_exact)}")
        if pred.refinement is not None:
            print(f"aligned refinement: {pred.refinement.case_tag.value}")
        if "verification" in report:
            ver = report["verification"]
            if "inconclusive" in ver:
                print(f"verification: inconclusive ({ver['inconclusive']})")
            else:
                print(f"verification: {'pass' if ver['passed'] else 'fail'} at t={fmt(ver['observed_at'])}")
                for c in ver["checks"]:
                    print(f"  {c['name']}: predicted {fmt(c['predicted'])}, observed {fmt(c['observed'])}, err {c['error']:.3e}")
    return status


# ---------------------------------------------------------------------------
# sweep


def _sweep_point(job):
    i, j, r, k, lam0, verify, tol, cfg_kw = job
    rec = {"i": i, "j": j, "r": r, "k": k}
    try:
        p0 = AlignedParams(lam0, r, k)
        pred = classify_aligned(p0)
        rec["case"] = pred.case_tag.value
        if verify:
            traj = integrate_params(p0, SolverConfig(**cfg_kw))
            rep = verify_prediction(pred, traj, tol)
            rec["passed"] = rep.passed
            rec["deltas"] = {c.name: c.error for c in rep.checks}
    except (ValueError, ArithmeticError, InconclusiveError) as exc:
        rec["error"] = f"{type(exc).__name__}: {exc}"
    return rec


def cmd_sweep(args) -> int:
    r_lo, r_hi = floats(args.r_range, 2, "--r-range")
    k_lo, k_hi = floats(args.k_range, 2, "--k-range")
    nr, nk = args.n_r, args.n_k
    if nr < 1 or nk < 1:
        raise InputError("grid resolution must be positive")
    if nr * nk > args.max_points:
        raise InputError(f"grid has {nr * nk} points, above --max-points {args.max_points}")
    if not args.lambda0 > 0:
        raise InputError("--lambda0 must be positive")
    solver_config(args)  # validate early
    cfg_kw = {"t_end": args.t_end, "rel_tol": args.rel_tol, "abs_tol": args.abs_tol, "blowup_norm_threshold": args.threshold}
    rs = np.linspace(r_lo, r_hi, nr) if nr > 1 else np.array([r_lo])
    ks = np.linspace(k_lo, k_hi, nk) if nk > 1 else np.array([k_lo])
    jobs = [(i, j, float(r), float(k), args.lambda0, args.verify, args.tol, cfg_kw) for i, r in enumerate(rs) for j, k in enumerate(ks)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(_sweep_point, jobs, chunksize=max(1, len(jobs) // (4 * args.jobs))))
    else:
        records = [_sweep_point(j) for j in jobs]
    Path(args.out).write_text(dump_json(_plain(records)))
    counts: dict[str, int] = {}
    for rec in records:
        key = rec.get("case", "error")
        counts[key] = counts.get(key, 0) + 1
    print(" ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    if args.verify:
        checked = [r for r in records if "passed" in r]
        ok = sum(r["passed"] for r in checked)
        print(f"verified {ok}/{len(checked)} at tol {args.tol:g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# lagrangian


def cmd_lagrangian(args) -> int:
    from .closed_forms import DomainError
    from .lagrangian import FlowMapSpec, circle_image_eigenplane, circle_image_yz, flow_map, seregin_sverak_probe

    lam0, r = floats(args.family, 2, "--family")
    try:
        spec = FlowMapSpec.from_params(lam0, r)
    except DomainError as exc:
        raise InputError(str(exc)) from None
    if not 0.0 < args.t_stop < 1.0:
        raise InputError("--t-stop is a fraction of t_max in (0, 1)")
    if args.frames < 1:
        raise InputError("--frames must be positive")
    ts = np.linspace(0.0, args.t_stop * spec.t_max, args.frames + 1)
    rows = []
    if args.scenario == "particles":
        pts = [floats(p, 3, "--y0") for p in args.y0.split(";")]
        header = ("frame", "t", "particle", "x", "y", "z", "det_jacobian")
        for f, t in enumerate(ts):
            det = spec.jacobian_det(t)
            for pi, y0 in enumerate(pts):
                rows.append((f, t, pi, *flow_map(spec, y0, t), det))
    elif args.scenario in ("circle-eigenplane", "circle-yz"):
        image = circle_image_eigenplane if args.scenario == "circle-eigenplane" else circle_image_yz
        thetas = np.linspace(0.0, 2.0 * math.pi, args.points, endpoint=False)
        header = ("frame", "t", "theta", "x", "y", "z", "det_jacobian")
        for f, t in enumerate(ts):
            det = spec.jacobian_det(t)
            for th in thetas:
                rows.append((f, t, th, *image(args.radius, spec, t, th), det))
    else:
        header = ("frame", "t", "p", "bernoulli", "det_jacobian")
        for f, t in enumerate(ts):
            p, b = seregin_sverak_probe(spec, t, args.radius)
            rows.append((f, t, p, b, spec.jacobian_det(t)))
    n = write_csv(Path(args.out), header, rows)
    print(f"wrote {n} rows to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate


def cmd_validate(args) -> int:
    from .acceptance import RUNNERS, run_all

    only = None
    if args.only:
        only = [int(v) for v in floats(args.only, what="--only")]
        bad = [v for v in only if v not in RUNNERS]
        if bad:
            raise InputError(f"unknown criteria {bad}")
    results = run_all(only)
    for res in results:
        print(res.line())
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_OK if not failed else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# parser


def _add_input(p):
    p.add_argument("--params", help="aligned data lambda,r,k")
    p.add_argument("--matrix", help="9 row-major entries, or diag(a,b,c)")
    p.add_argument("--pair", help="strain s11,s22,s33,s12,s13,s23 then vorticity w1,w2,w3")


def _add_solver(p, t_end=10.0):
    p.add_argument("--t-end", type=float, default=t_end, help="integration horizon")
    p.add_argument("--rel-tol", type=float, default=default_rel_tol(), help="relative tolerance (env LINFLOW_DEFAULT_TOL)")
    p.add_argument("--abs-tol", type=float, default=1e-12)
    p.add_argument("--threshold", type=float, default=1e9, help="norm at which blowup is declared")


BOOL_FLAGS = {"reduced", "verify", "json"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linflow", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"linflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = sub.choices

    def common(p):
        p.add_argument("--config", help="key = value file; command-line flags take precedence")
        p.add_argument("--dump-config", action="store_true", help="print resolved settings and exit")

    p = sub.add_parser("simulate", help="integrate one initial condition")
    _add_input(p)
    _add_solver(p)
    p.add_argument("--samples", type=int, default=0, help="uniform output samples (0: every accepted step)")
    p.add_argument("--reduced", action="store_true", help="aligned data: slave k to m0 (r+2); always on for separatrix data")
    p.add_argument("--out", default="trajectory.csv", help="time-series CSV")
    p.add_argument("--summary", help="summary JSON path (default stdout)")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("classify", help="predict the fate of initial data")
    _add_input(p)
    _add_solver(p, t_end=100.0)
    p.add_argument("--verify", action="store_true", help="integrate and compare with the prediction")
    p.add_argument("--tol", type=float, default=2e-2, help="verification tolerance")
    p.add_argument("--spectral-tol", type=float, default=1e-8)
    p.add_argument("--json", action="store_true")
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep", help="classify a grid of aligned data")
    p.add_argument("--r-range", default="-1,1.5")
    p.add_argument("--k-range", default="0,2.5")
    p.add_argument("--n-r", type=int, default=21)
    p.add_argument("--n-k", type=int, default=21)
    p.add_argument("--lambda0", type=float, default=1.0)
    p.add_argument("--max-points", type=int, default=100_000)
    p.add_argument("--verify", action="store_true")
    p.add_argument("--tol", type=float, default=2e-2)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="sweep.json")
    _add_solver(p, t_end=100.0)
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("lagrangian", help="particle and circle images under the family flow")
    p.add_argument("--family", required=True, help="lambda0,r with 0 < r <= 1")
    p.add_argument("--scenario", choices=("particles", "circle-eigenplane", "circle-yz", "pressure-probe"), default="particles")
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--t-stop", type=float, default=0.9, help="last frame as a fraction of t_max")
    p.add_argument("--y0", default="1,1,1", help="particle start points, ';' separated")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--points", type=int, default=64, help="points per circle")
    p.add_argument("--out", default="lagrangian.csv")
    common(p)
    p.set_defaults(func=cmd_lagrangian)

    p = sub.add_parser("validate", help="run the acceptance checks")
    p.add_argument("--only", help="comma-separated criterion numbers")
    common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def _resolve(parser, argv):
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        values = read_config(args.config)
        sub = parser.subcommands[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(values) - known)
        if unknown:
            raise InputError(f"unknown config keys: {', '.join(unknown)}")
        for key in BOOL_FLAGS & set(values):
            values[key] = parse_bool(values[key])
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _resolve(parser, argv)
        if args.dump_config:
            skip = {"func", "command", "dump_config", "config"}
            for key, val in sorted(vars(args).items()):
                if key not in skip:
                    print(f"{key} = {'' if val is None else val}")
            return EXIT_OK
        return args.func(args)
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ArithmeticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
