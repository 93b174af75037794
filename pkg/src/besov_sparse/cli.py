"""Command-line front end.

Every command writes its products into ``--out`` together with a run
manifest ``<command>.manifest.json``.  ``replay`` re-executes a manifest and
compares output hashes byte for byte.

Exit codes: 0 ok, 1 replay mismatch, 2 I/O or file format, 3 invalid
parameter, 4 missing calibration, 5 rejected time step.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import platform
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import (BesovSparseError, CalibrationError, DegenerateError, FormatError, InvalidInputError,
                     RejectedStep)
from .experiments import counterexample as cx
from .experiments import mixing, mollified
from .fields import Grid3, ScalarField, VectorField, component_superlevel, linf_norm, read_field, scalar_superlevel
from .lp import besov_11_fd, besov_inf_inf, build_lp_bank
from .nse import SimulationConfig, preset_velocity, simulate, write_monitor_csv
from .sparse import mixed, remark_3d_implies_1d, semi_mixed, sparseness_1d, sparseness_3d

EXIT_OK, EXIT_MISMATCH, EXIT_IO, EXIT_PARAM, EXIT_MISSING, EXIT_REJECTED = 0, 1, 2, 3, 4, 5


class MissingArtifact(BesovSparseError):
    """A file produced by another command is absent."""


# -- formatting -----------------------------------------------------------------

def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    return "%.17g" % v


def plain(obj):
    """Convert numpy scalars and tuples so ``json`` writes exact reprs."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dump_json(obj) -> str:
    return json.dumps(plain(obj), indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def parse_floats(text: str):
    try:
        return [float(Fraction(t.strip())) for t in text.split(",") if t.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidInputError(f"cannot parse number list {text!r}") from exc


def parse_ints(text: str):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise InvalidInputError(f"cannot parse integer list {text!r}") from exc


def parse_point(text: str):
    pts = parse_floats(text)
    if len(pts) != 3:
        raise InvalidInputError(f"point needs three coordinates, got {text!r}")
    return pts


def load_field(path):
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such field file: {p}")
    return read_field(p)


# -- commands -------------------------------------------------------------------
# each handler returns (outputs, extra manifest entries)

def cmd_norms(args, out: Path):
    f = load_field(args.input)
    bank = build_lp_bank(f.grid)
    s_list = parse_floats(args.s)
    eps_list = parse_floats(args.eps)
    rows = [("linf", "all", "", linf_norm(f), "")]
    for s in s_list:
        bn = besov_inf_inf(f, s, bank, subtract_mean=args.subtract_mean)
        rows.append(("besov_inf_inf", "all", s, bn.value, bn.j))
    comps = [f] if isinstance(f, ScalarField) else [f.component(i) for i in (1, 2, 3)]
    for eps in eps_list:
        for i, c in enumerate(comps, start=1):
            rows.append(("besov_11_fd", i if len(comps) == 3 else "all", eps, besov_11_fd(c, eps), ""))
    path = out / "norms.csv"
    write_csv(path, ("norm", "component", "param", "value", "block"), rows)
    return [path], {}


def _level_set(f, args):
    if isinstance(f, VectorField):
        return component_superlevel(f, args.component, args.sign, args.lam)
    if not 0.0 < args.lam < 1.0:
        raise InvalidInputError(f"level must lie in (0, 1), got {args.lam!r}")
    return scalar_superlevel(f, args.lam * linf_norm(f), args.sign)


def cmd_sparseness(args, out: Path):
    if args.delta is not None and not 0.0 < args.delta < 1.0:
        raise InvalidInputError(f"ratio must lie in (0, 1), got {args.delta!r}")
    f = load_field(args.input)
    S = _level_set(f, args)
    x0 = parse_point(args.center)
    mode = args.mode
    if mode == "1d":
        report = sparseness_1d(S, x0, args.scale, args.ndir, args.delta).to_dict()
    elif mode == "3d":
        report = sparseness_3d(S, x0, args.scale, args.delta).to_dict()
    elif mode == "semi":
        report = semi_mixed(S, args.scale, _need_delta(args)).to_dict()
    elif mode == "mixed":
        a, b = mixed(S, args.scale, _need_delta(args))
        report = {"set": a.to_dict(), "complement": b.to_dict(), "mixed": bool(a.passed and b.passed),
                  "ratio": max(a.ratio, b.ratio)}
    else:
        report = remark_3d_implies_1d(S, x0, args.scale, _need_delta(args), args.ndir).to_dict()
    report["level_set"] = {"component": S.component, "sign": S.sign, "threshold": S.threshold,
                           "volume_fraction": S.volume_fraction}
    path = out / "sparseness.json"
    path.write_text(dump_json(report))
    return [path], {}


def _need_delta(args):
    if args.delta is None:
        raise InvalidInputError(f"mode {args.mode!r} needs --delta")
    return args.delta


def cmd_calibrate(args, out: Path):
    grid = Grid3(args.n, args.L)
    eta = mixing.bump_margin(args.lam, args.delta)
    mixing.mixing_constant(args.lam, args.delta, args.eps)  # validates the ranges
    cal = mixing.calibrate_cstar(grid, eta, args.eps, args.trials, args.seed)
    path = out / "calibration.json"
    digest = cal.save(path)
    return [path], {"seed": args.seed, "calibration": {"path": str(path.resolve()), "sha256": digest}}


def _lemma_field(args):
    if args.input is not None:
        u = load_field(args.input)
        if not isinstance(u, VectorField):
            raise InvalidInputError("lemma needs a 3-component field")
        return u
    return preset_velocity(args.preset, Grid3(args.n, args.L), args.seed, args.amplitude)


def cmd_lemma(args, out: Path):
    cal_path = Path(args.calibration) if args.calibration else out / "calibration.json"
    if not cal_path.is_file():
        raise MissingArtifact(f"calibration file {cal_path} not found; run `besov-sparse experiment calibrate` first")
    args.calibration = str(cal_path.resolve())
    digest = sha256_file(cal_path)
    cal = mixing.Calibration.load(cal_path)
    eta = mixing.bump_margin(args.lam, args.delta)
    if abs(eta - cal.eta) > 1e-12:
        raise InvalidInputError(f"calibration used eta={cal.eta!r} but (lambda, delta) give eta={eta!r}")
    u = _lemma_field(args)
    if cal.grid != {"n": u.grid.n, "L": u.grid.L}:
        raise InvalidInputError(f"calibration grid {cal.grid} differs from field grid n={u.grid.n}, L={u.grid.L}")
    params = mixing.mixing_constant(args.lam, args.delta, cal.eps, cal.c_star)
    verdict = mixing.verify_mixing_lemma(u, params, args.scale).to_dict()
    verdict["calibration"] = {"path": str(cal_path.resolve()), "sha256": digest}
    verdict["advisory"] = "c_star is measured, not proven"
    path = out / "lemma.json"
    path.write_text(dump_json(verdict))
    return [path], {"seed": args.seed, "calibration": verdict["calibration"]}


def cmd_counterexample(args, out: Path):
    grid = Grid3(args.grid_n, args.grid_L)
    rows = cx.counterexample_report(parse_ints(args.n), grid, args.zoom_n)
    header = ("n", "r", "r_linf", "besov_lower_bound", "ratio", "besov_m1_direct", "l2_squared_grid",
              "l2_squared_radial", "b11_norm", "set_fraction", "complement_fraction", "mixed_ratio", "rod_voxels")
    table = [(r.n, r.r, r.r_linf, r.besov_lower_bound, r.ratio, r.besov_m1_direct, r.l2_squared_grid,
              r.l2_squared_radial, r.b11_norm, r.set_fraction, r.complement_fraction,
              max(r.set_fraction, r.complement_fraction), r.rod_voxels) for r in rows]
    path = out / "counterexample.csv"
    write_csv(path, header, table)
    bounds = [r.besov_lower_bound for r in rows]
    summary = {
        "bound_spread": max(bounds) / min(bounds),
        "ratio_growth": rows[-1].ratio / rows[0].ratio,
        "set_semi_mixed_ratio": max(r.set_fraction for r in rows),
        "mixed_ratio": max(max(r.set_fraction, r.complement_fraction) for r in rows),
    }
    spath = out / "counterexample_summary.json"
    spath.write_text(dump_json(summary))
    return [path, spath], {}


def cmd_mollified(args, out: Path):
    grid = Grid3(args.grid_n, args.grid_L) if args.method == "grid" else None
    rows = mollified.mollified_log_report(parse_floats(args.eps), args.method, grid, args.scale)
    path = out / "mollified_log.csv"
    write_csv(path, ("eps", "linf", "besov0", "ratio", "j_star", "method"),
              [(r.eps, r.linf, r.besov0, r.ratio, r.j_star, r.method) for r in rows])
    b0 = [r.besov0 for r in rows]
    summary = {
        "r2_linf_vs_log": mollified.linear_fit_r2([math.log(1.0 / r.eps) for r in rows], [r.linf for r in rows]),
        "besov0_spread": max(b0) / min(b0),
        "ratio_increasing": all(b.ratio > a.ratio for a, b in zip(rows, rows[1:])),
    }
    spath = out / "mollified_log_summary.json"
    spath.write_text(dump_json(summary))
    return [path, spath], {}


def cmd_simulate(args, out: Path):
    data = getattr(args, "config_data", None)
    if data is None:
        p = Path(args.config)
        if not p.is_file():
            raise FileNotFoundError(f"no such config file: {p}")
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"config is not valid JSON: {exc.msg}", exc.pos) from exc
        if data.get("input") is not None:
            data["input"] = str((p.parent / data["input"]).resolve())
        args.config_data = data
    cfg = SimulationConfig.from_dict(data)
    snapdir = None
    if cfg.snapshot_every:
        snapdir = out / "snapshots"
        snapdir.mkdir(exist_ok=True)
    traj = simulate(cfg, snapdir)
    path = out / "monitor.csv"
    with open(path, "w", newline="") as fh:
        write_monitor_csv(traj.records, fh)
    escapes = [{"index": e.index, "t": e.t, "linf": e.linf, "window": list(e.window), "records": e.records_in_window}
               for e in traj.escape_times()]
    epath = out / "escape_times.json"
    epath.write_text(dump_json({"escape_times": escapes, "max_divergence": traj.max_divergence,
                                "final_energy": traj.energies[-1], "config": cfg.to_dict()}))
    return [path, epath] + [Path(s) for s in traj.snapshots], {"seed": cfg.seed}


# -- manifest / replay -------------------------------------------------------------

HANDLERS = {
    "norms": cmd_norms,
    "sparseness": cmd_sparseness,
    "calibrate": cmd_calibrate,
    "lemma": cmd_lemma,
    "counterexample": cmd_counterexample,
    "mollified-log": cmd_mollified,
    "simulate": cmd_simulate,
}
_PATH_KEYS = ("input", "config", "calibration")


def versions():
    return {"artifact": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def run_command(name: str, args, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    outputs, extra = HANDLERS[name](args, out)
    wall = time.perf_counter() - t0
    config = {k: v for k, v in vars(args).items() if k not in ("func", "out", "command", "experiment")}
    manifest = {
        "command": name,
        "config": config,
        "versions": versions(),
        "seed": extra.get("seed"),
        "calibration": extra.get("calibration"),
        "outputs": [{"path": str(Path(p).relative_to(out)), "sha256": sha256_file(p)} for p in outputs],
        "wall_time_s": wall,
    }
    (out / f"{name}.manifest.json").write_text(dump_json(manifest))
    return manifest


def replay(manifest_path, out: Path | None):
    mp = Path(manifest_path)
    if not mp.is_file():
        raise FileNotFoundError(f"no such manifest: {mp}")
    try:
        man = json.loads(mp.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest is not valid JSON: {exc.msg}", exc.pos) from exc
    name = man.get("command")
    if name not in HANDLERS:
        raise FormatError(f"manifest names unknown command {name!r}", 0)
    cal = man.get("calibration")
    if name == "lemma" and cal:
        cp = Path(cal["path"])
        if not cp.is_file():
            raise MissingArtifact(f"calibration file {cp} referenced by the manifest is gone")
        if sha256_file(cp) != cal["sha256"]:
            raise MissingArtifact(f"calibration file {cp} changed since the recorded run")
    out = out if out is not None else mp.parent / "replay"
    args = argparse.Namespace(**man["config"])
    new = run_command(name, args, out)
    old = {o["path"]: o["sha256"] for o in man["outputs"]}
    fresh = {o["path"]: o["sha256"] for o in new["outputs"]}
    ok = old == fresh
    for p in sorted(set(old) | set(fresh)):
        state = "identical" if old.get(p) == fresh.get(p) else "DIFFERS"
        print(f"{p}: {state}")
    return ok


# -- argument parsing ------------------------------------------------------------------

def _abs(p):
    return None if p is None else str(Path(p).resolve())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="besov-sparse", description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=".", help="output directory (default: current directory)")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norms", help="sup, B^s_{inf,inf} and finite-difference B^eps_{1,1} norms of a field")
    p.add_argument("input")
    p.add_argument("--s", default="-1,-0.5,0", help="comma list of smoothness indices; use --s=-1,... form")
    p.add_argument("--eps", default="0.5,1", help="comma list for B^eps_{1,1}")
    p.add_argument("--subtract-mean", action="store_true")

    p = sub.add_parser("sparseness", help="sparseness and semi-mixedness of a super-level set")
    p.add_argument("input")
    p.add_argument("--component", type=int, default=1)
    p.add_argument("--sign", choices=("+", "-"), default="+")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--scale", type=float, required=True)
    p.add_argument("--delta", type=float)
    p.add_argument("--mode", choices=("1d", "3d", "semi", "mixed", "remark"), default="semi")
    p.add_argument("--center", default="0,0,0", help="x,y,z for the pointwise modes")
    p.add_argument("--ndir", type=int, default=64)

    p = sub.add_parser("experiment", help="mixing-lemma experiments")
    esub = p.add_subparsers(dest="experiment", required=True)
    e = esub.add_parser("calibrate", help="measure the duality constant c*")
    e.add_argument("--n", type=int, default=32)
    e.add_argument("--L", type=float, default=2.0 * math.pi)
    e.add_argument("--lambda", dest="lam", type=float, default=0.5)
    e.add_argument("--delta", type=float, default=0.75)
    e.add_argument("--eps", type=float, default=1.0)
    e.add_argument("--trials", type=int, default=40)
    e.add_argument("--seed", type=int, default=0)
    e = esub.add_parser("lemma", help="verdict of the mixing lemma on one velocity field")
    e.add_argument("--calibration", help="calibration JSON (default: OUT/calibration.json)")
    e.add_argument("--input", help="velocity field (BSF1, 3 components)")
    e.add_argument("--preset", default="random", choices=("zero", "shear", "taylor-green", "random"))
    e.add_argument("--n", type=int, default=32)
    e.add_argument("--L", type=float, default=2.0 * math.pi)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--amplitude", type=float, default=1.0)
    e.add_argument("--lambda", dest="lam", type=float, default=0.5)
    e.add_argument("--delta", type=float, default=0.75)
    e.add_argument("--scale", type=float, default=1.0)
    e = esub.add_parser("counterexample", help="dome with a lightning rod")
    e.add_argument("--n", default="8,16,32,64")
    e.add_argument("--grid-n", type=int, default=64)
    e.add_argument("--grid-L", type=float, default=8.0)
    e.add_argument("--zoom-n", type=int, default=64)
    e = esub.add_parser("mollified-log", help="mollified logarithm: sup versus B^0_{inf,inf}")
    e.add_argument("--eps", default="1/8,1/16,1/32,1/64")
    e.add_argument("--method", choices=("radial", "grid"), default="radial")
    e.add_argument("--grid-n", type=int, default=128)
    e.add_argument("--grid-L", type=float, default=5.0)
    e.add_argument("--scale", type=float, default=1.0)

    p = sub.add_parser("simulate", help="pseudo-spectral Navier-Stokes run with the regularity monitor")
    p.add_argument("config")

    p = sub.add_parser("replay", help="rerun a manifest and compare outputs byte for byte")
    p.add_argument("manifest")
    p.add_argument("--replay-out", help="directory for the rerun (default: <manifest dir>/replay)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        if args.command == "replay":
            ok = replay(args.manifest, Path(args.replay_out) if args.replay_out else None)
            return EXIT_OK if ok else EXIT_MISMATCH
        name = args.experiment if args.command == "experiment" else args.command
        for k in _PATH_KEYS:
            if getattr(args, k, None) is not None:
                setattr(args, k, _abs(getattr(args, k)))
        run_command(name, args, out)
        return EXIT_OK
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except RejectedStep as exc:
        print(f"error: {exc}; rerun with dt <= {exc.dt_max:.6g}", file=sys.stderr)
        return EXIT_REJECTED
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvalidInputError, DegenerateError, CalibrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
