"""Command line front end.

Exit codes: 0 success, 1 internal failure, 2 input or configuration error,
3 fixed-point solver did not converge.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, dataio, rmt, sim
from .errors import InputError, NonConvergence
from .estimators import SplitSpectrum, recursive_ridge_benchmark
from .features import ACTIVATIONS, make_rng
from .llg import llg_herfindahl

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_NONCONV = 0, 1, 2, 3
DEFAULT_SPLIT = "1990-01"
MIN_SIDE = 24


# ---------------------------------------------------------------------------
# manifest and writers
# ---------------------------------------------------------------------------

def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_digest(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seeds: list
    version: str = __version__
    started: str = ""
    wall_clock_seconds: float = 0.0
    outputs: list = field(default_factory=list)

    @property
    def digest(self) -> str:
        return config_digest({"command": self.command, "config": self.config,
                              "seeds": self.seeds, "version": self.version})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["config_digest"] = self.digest
        return d


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    v = float(v)
    if np.isnan(v):
        return ""
    return format(v, ".17g")


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if np.isnan(v) else v
    return v


class Writer:
    """Writes tables as CSV or JSON, each tagged with the run manifest."""

    def __init__(self, outdir: Path, fmt_: str, manifest: RunManifest):
        self.outdir = Path(outdir)
        self.fmt = fmt_
        self.manifest = manifest
        self.outdir.mkdir(parents=True, exist_ok=True)

    def table(self, stem: str, columns: Sequence[str], rows: Sequence[Sequence]) -> Path:
        path = self.outdir / f"{stem}.{self.fmt}"
        tag = {"manifest": "manifest.json", "digest": self.manifest.digest}
        if self.fmt == "csv":
            lines = [f"# manifest=manifest.json digest={tag['digest']}", ",".join(columns)]
            lines += [",".join(fmt(v) for v in r) for r in rows]
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        else:
            doc = {"manifest": tag, "columns": list(columns),
                   "rows": [[_json_value(v) for v in r] for r in rows]}
            path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        self.manifest.outputs.append(path.name)
        return path

    def finish(self, t0: float) -> Path:
        self.manifest.wall_clock_seconds = round(time.time() - t0, 3)
        path = self.outdir / "manifest.json"
        path.write_text(json.dumps(self.manifest.to_dict(), indent=1, sort_keys=True) + "\n",
                        encoding="utf-8")
        return path


def read_table(path) -> dict:
    """Load a table written by :class:`Writer` (either format) into columns."""
    path = Path(path)
    if path.suffix == ".json":
        doc = json.loads(path.read_text())
        cols = doc["columns"]
        return {c: [r[i] for r in doc["rows"]] for i, c in enumerate(cols)}
    lines = [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")]
    cols = lines[0].split(",")
    out = {c: [] for c in cols}
    for ln in lines[1:]:
        for c, v in zip(cols, ln.split(",")):
            out[c].append(v)
    return out


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------

def int_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def float_list(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def str_list(text: str) -> list:
    return [t.strip() for t in text.split(",") if t.strip()]


def resolve_grid(grid, max_features: int, points: int) -> list:
    if grid:
        g = sorted(set(int(v) for v in grid))
        if g[0] < 1 or g[-1] > max_features:
            raise InputError(f"grid must lie in [1, {max_features}]")
        return g
    return sim.geometric_grid(min(100, max_features), max_features, points)


def predictive_pairs(panel: dataio.ProcessedPanel, target: str, split_date: str,
                     signals: Sequence[str] | None = None):
    """Signals at t paired with the target at t+1, on jointly defined rows.

    A pair is in-sample when its target date precedes ``split_date``.
    Returns (X, y, split_index, target_dates).
    """
    if target not in panel.columns:
        raise dataio.MissingColumn(target)
    names = panel.column_names if signals is None else list(signals)
    for n in names:
        if n not in panel.columns:
            raise dataio.MissingColumn(n)
    ok_x = panel.joint_mask(names)
    ok_y = panel.columns[target].valid
    idx = np.flatnonzero(ok_x[:-1] & ok_y[1:])
    if idx.size == 0:
        raise InputError("no jointly defined signal/target pairs")
    X = np.column_stack([panel.columns[n].values[idx] for n in names])
    y = panel.columns[target].values[idx + 1]
    dates = [panel.dates[i + 1] for i in idx]
    try:
        cut = dataio.parse_date(split_date)
    except ValueError as e:
        raise InputError(str(e)) from None
    split = int(sum(d < cut for d in dates))
    if split < MIN_SIDE or len(dates) - split < MIN_SIDE:
        raise InputError(f"split {split_date} leaves {split} / {len(dates) - split} rows; "
                         f"need at least {MIN_SIDE} on each side")
    return X, y, split, dates


def voc_rows(curve: sim.VoCCurve) -> list:
    return [pt.row() for pt in curve.points]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_preprocess(args) -> int:
    t0 = time.time()
    schema = str_list(args.columns) if args.columns else None
    panel = dataio.load_predictor_csv(args.input, schema)
    out = dataio.preprocess_panel(panel, args.window, args.clip, args.min_window)
    cfg = {"input_sha256": file_digest(args.input), "columns": panel.column_names,
           "window": args.window, "clip": args.clip, "min_window": args.min_window}
    man = RunManifest("preprocess", cfg, [], started=_now())
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    mpath = output.with_name(output.name + ".manifest.json")
    dataio.write_processed_csv(out, output, f"manifest={mpath.name} digest={man.digest}")
    man.outputs.append(output.name)
    man.wall_clock_seconds = round(time.time() - t0, 3)
    mpath.write_text(json.dumps(man.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    flagged = {n: int(s.degenerate.sum()) for n, s in out.columns.items() if s.degenerate.any()}
    print(f"wrote {output} ({len(out)} rows, {len(out.column_names)} series)")
    if flagged:
        print("DegenerateWindow flags: " + ", ".join(f"{k}={v}" for k, v in flagged.items()))
    return EXIT_OK


def cmd_llg(args) -> int:
    t0 = time.time()
    panel = dataio.load_processed_csv(args.input)
    signals = str_list(args.signals) if args.signals else None
    X, y, split, dates = predictive_pairs(panel, args.target, args.split_date, signals)
    grid = resolve_grid(args.grid, args.max_features, args.grid_points)
    seeds = args.seeds if args.seeds else [args.seed]
    cfg = {"input_sha256": file_digest(args.input), "target": args.target,
           "signals": signals, "split_date": args.split_date, "z_ref": args.z_ref,
           "activation": args.activation, "grid": grid, "scale": args.scale}
    man = RunManifest("llg", cfg, seeds, started=_now())
    w = Writer(Path(args.out), args.format, man)
    res = sim.voc_experiment(X, y, split, grid, args.z_ref, args.activation, seeds,
                             scale=args.scale)
    for cv in res.curves:
        w.table(f"voc_{args.target}_seed{cv.seed}", sim.VOC_FIELDS, voc_rows(cv))
    if len(seeds) > 1:
        w.table(f"voc_{args.target}_mean", sim.VOC_FIELDS, voc_rows(res.mean))
    curve = res.curves[0] if len(seeds) == 1 else res.mean
    best = curve.best()
    cols = ("target", "lower_bound", "conf_lower", "r2_oos", "argmax_P1", "T", "T_oos")
    row = (args.target, best["lower_bound"], best["conf_lower"], best["r2_oos"],
           best["argmax_P1"], split, len(y) - split)
    w.table(f"summary_{args.target}", cols, [row])
    w.finish(t0)
    print(f"{args.target}: best lower bound {best['lower_bound']:.4f} at P1={best['argmax_P1']}, "
          f"best 95% bound {best['conf_lower']:.4f}, best R2_oos {best['r2_oos']:.4f}")
    return EXIT_OK


SIM_SCHEMA_VERSION = 1
SIM_KEYS = {
    "schema_version": int, "mode": str, "T": int, "T_oos": int, "d": int, "P_grid": list,
    "z_ref": (int, float), "activation": str, "seeds": list, "target_r2": (int, float, list, str),
    "garch": dict, "garch_mode": str, "x_seed": int, "reps": int, "scale": str, "input": str,
    "split_date": str,
}
SIM_MODES = ("semi_synthetic", "null", "garch", "coverage")


def load_sim_config(path) -> dict:
    """Read and validate an experiment config (JSON object)."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"config file {path} not found") from None
    except json.JSONDecodeError as e:
        raise InputError(f"config is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise InputError("config must be a JSON object")
    unknown = set(raw) - set(SIM_KEYS)
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    for k, typ in SIM_KEYS.items():
        if k in raw and (not isinstance(raw[k], typ) or isinstance(raw[k], bool)):
            raise InputError(f"config key {k!r} has wrong type")
    cfg = {"schema_version": SIM_SCHEMA_VERSION, "mode": "semi_synthetic", "T": 400, "T_oos": 400,
           "d": 14, "P_grid": None, "z_ref": 0.01, "activation": "tanh", "seeds": [0],
           "target_r2": 0.5, "garch": {}, "garch_mode": "raw", "x_seed": 12345, "reps": 200,
           "scale": "T", "input": None, "split_date": DEFAULT_SPLIT}
    cfg.update(raw)
    if cfg["schema_version"] != SIM_SCHEMA_VERSION:
        raise InputError(f"unsupported schema_version {cfg['schema_version']}")
    if cfg["mode"] not in SIM_MODES:
        raise InputError(f"mode must be one of {SIM_MODES}")
    if cfg["activation"] not in ACTIVATIONS:
        raise InputError(f"activation must be one of {ACTIVATIONS}")
    if min(cfg["T"], cfg["T_oos"], cfg["d"]) < 1:
        raise InputError("T, T_oos and d must be positive")
    if not all(isinstance(s, int) and s >= 0 for s in cfg["seeds"]) or not cfg["seeds"]:
        raise InputError("seeds must be a nonempty list of nonnegative integers")
    if cfg["P_grid"] is None:
        cfg["P_grid"] = sim.geometric_grid(100, 20000, 20)
    if not all(isinstance(p, int) for p in cfg["P_grid"]):
        raise InputError("P_grid must be a list of integers")
    r2 = cfg["target_r2"]
    if r2 == "preset":
        r2 = list(sim.R2_PRESETS)
    r2 = r2 if isinstance(r2, list) else [r2]
    if not all(isinstance(v, (int, float)) and 0 <= v < 1 for v in r2):
        raise InputError("target_r2 values must lie in [0, 1)")
    cfg["target_r2"] = [float(v) for v in r2]
    if set(cfg["garch"]) - {"omega", "alpha", "beta", "seed"}:
        raise InputError("garch accepts omega, alpha, beta, seed")
    return cfg


def _sim_signals(cfg):
    n = cfg["T"] + cfg["T_oos"]
    if cfg["input"]:
        panel = dataio.load_processed_csv(cfg["input"])
        _, X = panel.aligned()
        if X.shape[0] < 2 * MIN_SIDE:
            raise InputError("input panel too short")
        cut = dataio.parse_date(cfg["split_date"])
        dates, _ = panel.aligned()
        return X, int(sum(d < cut for d in dates))
    return make_rng(cfg["x_seed"]).standard_normal((n, cfg["d"])), cfg["T"]


def cmd_simulate(args) -> int:
    t0 = time.time()
    cfg = load_sim_config(args.config)
    if args.seeds:
        cfg["seeds"] = args.seeds
    man = RunManifest("simulate", cfg, cfg["seeds"], started=_now())
    w = Writer(Path(args.out), args.format, man)
    mode = cfg["mode"]

    if mode == "coverage":
        design = sim.CoverageDesign(T=cfg["T"], T_oos=cfg["T_oos"], P=cfg["P_grid"][-1], d=cfg["d"],
                                    r2_grid=tuple(cfg["target_r2"]), reps=cfg["reps"],
                                    z_ref=cfg["z_ref"], activation=cfg["activation"],
                                    base_seed=cfg["seeds"][0], scale=cfg["scale"])
        out = sim.coverage_study(design)
        cols = ("r2_star", "T", "T_oos", "P", "reps", "coverage_rate", "mean_lower_bound",
                "sd_lower_bound_scaled", "mean_sigma_r2_hat")
        w.table("coverage", cols, [[c[k] for k in cols] for c in out["cells"]])
        w.finish(t0)
        for c in out["cells"]:
            print(f"R2*={c['r2_star']:.2f}: coverage {c['coverage_rate']:.3f} over {c['reps']} reps")
        return EXIT_OK

    X, split = _sim_signals(cfg)
    grid = sorted(set(cfg["P_grid"]))
    targets = []
    if mode == "garch":
        gp = sim.GarchParams(**cfg["garch"])
        targets.append(("garch", sim.garch_target(X.shape[0], gp, cfg["garch_mode"])))
    else:
        r2s = [0.0] if mode == "null" else cfg["target_r2"]
        for r2 in r2s:
            spec = sim.SemiSyntheticSpec(activation=cfg["activation"], w_seed=cfg["x_seed"] + 1,
                                         eps_seed=cfg["x_seed"] + 2, target_r2=r2)
            out = sim.semi_synthetic(X, spec, r2_window=slice(split, None))
            targets.append((f"r2_{r2:g}", out["y"]))
            print(f"target R2*={r2:g}: realized out-of-sample R2* {out['r2_star_hat']:.4f}")
    for label, y in targets:
        res = sim.voc_experiment(X, y, split, grid, cfg["z_ref"], cfg["activation"],
                                 cfg["seeds"], scale=cfg["scale"])
        for cv in res.curves:
            w.table(f"voc_{label}_seed{cv.seed}", sim.VOC_FIELDS, voc_rows(cv))
        w.table(f"voc_{label}_mean", sim.VOC_FIELDS, voc_rows(res.mean))
        b = res.mean.best()
        print(f"{label}: max lower bound {b['lower_bound']:.4f} at P1={b['argmax_P1']}")
    w.finish(t0)
    return EXIT_OK


def read_spectrum(spec: str, P: int) -> np.ndarray:
    if spec == "identity":
        return np.ones(P)
    path = Path(spec)
    if not path.exists():
        raise InputError(f"spectrum file {spec} not found")
    try:
        vals = np.array([float(t) for t in path.read_text().replace(",", " ").split()])
    except ValueError:
        raise InputError(f"malformed spectrum file {spec}") from None
    if vals.size == 0 or not np.isfinite(vals).all() or (vals < 0).any():
        raise InputError(f"malformed spectrum file {spec}: need nonnegative finite numbers")
    return vals


def cmd_rmt_check(args) -> int:
    if not (args.c > 0 and args.z > 0):
        raise InputError("--c and --z must be positive")
    lam = read_spectrum(args.spectrum, args.P)
    P = lam.size
    sol = rmt.solve_fixed_point(lam, args.z, args.c)
    det = rmt.deterministic_equivalent_llg(lam, args.z, args.c, sol)
    rep = {"c": args.c, "z": args.z, "P": P, "m": sol.m, "m_prime": sol.m_prime, "xi": sol.xi,
           "z_star": sol.z_star, "llg_deterministic": det, "residual": sol.residual,
           "solver": sol.method}
    T = int(round(P / args.c))
    if 1 <= T <= args.max_T and not args.no_sample:
        rng = make_rng(args.seed)
        root = np.sqrt(lam)
        S = rng.standard_normal((T, P)) * root
        S_oos = rng.standard_normal((T, P)) * root
        m_emp, _ = rmt.empirical_stieltjes_from_signals(S, args.z)
        L_emp = SplitSpectrum(S, S_oos).llg(args.z)
        herf = llg_herfindahl(S, args.z / (P / T), P / T)
        rep.update({"T": T, "m_empirical": m_emp, "llg_ridge": L_emp, "llg_herfindahl": herf,
                    "gap_m": abs(m_emp - sol.m) / sol.m,
                    "gap_llg_ridge": abs(L_emp - det) / max(abs(det), 1e-300),
                    "gap_llg_herfindahl": abs(herf - det) / max(abs(det), 1e-300)})
    else:
        rep["sampled"] = f"skipped (T = P/c = {T} outside [1, {args.max_T}])"
    if args.format == "json":
        print(json.dumps({k: _json_value(v) for k, v in rep.items()}, indent=1))
    else:
        for k, v in rep.items():
            print(f"{k},{fmt(v) if not isinstance(v, str) else v}")
    return EXIT_OK


SUMMARY_COLUMNS = ("bound_tanh", "bound_relu", "best_r2_ridge", "best_r2_recursive")


def summary_correlation(rows: Sequence[Sequence[float]]) -> np.ndarray:
    """Pearson correlation among summary columns across targets.

    Entries are NaN where undefined (fewer than two targets or a constant column).
    """
    A = np.asarray(rows, dtype=float)
    k = A.shape[1] if A.ndim == 2 else len(SUMMARY_COLUMNS)
    C = np.full((k, k), np.nan)
    if A.ndim != 2 or A.shape[0] < 2:
        return C
    for i in range(k):
        for j in range(k):
            a, b = A[:, i], A[:, j]
            ok = np.isfinite(a) & np.isfinite(b)
            if ok.sum() < 2:
                continue
            a, b = a[ok] - a[ok].mean(), b[ok] - b[ok].mean()
            den = np.sqrt((a @ a) * (b @ b))
            if den > 0:
                C[i, j] = float(np.clip(a @ b / den, -1.0, 1.0))
    return C


def cmd_table(args) -> int:
    t0 = time.time()
    panel = dataio.load_processed_csv(args.input)
    targets = str_list(args.targets) if args.targets else panel.column_names
    models = str_list(args.models)
    if set(models) - {"ridge", "recursive"}:
        raise InputError("--models accepts ridge and recursive")
    grid = resolve_grid(args.grid, args.max_features, args.grid_points)
    cfg = {"input_sha256": file_digest(args.input), "targets": targets, "models": models,
           "z_ref_grid": args.z_ref_grid, "grid": grid, "split_date": args.split_date,
           "activations": list(ACTIVATIONS)}
    man = RunManifest("table", cfg, [args.seed], started=_now())
    w = Writer(Path(args.out), args.format, man)
    rows = []
    for tgt in targets:
        X, y, split, _ = predictive_pairs(panel, tgt, args.split_date)
        vals = {k: np.nan for k in SUMMARY_COLUMNS}
        if "ridge" in models:
            best_r2 = -np.inf
            for act in ACTIVATIONS:
                curves = sim.voc_curves_multi(X, y, split, grid, args.seed, args.z_ref_grid, act)
                vals[f"bound_{act}"] = max(float(np.max(cv.column("conf_lower")))
                                           for cv in curves.values())
                best_r2 = max(best_r2, max(float(np.max(cv.column("r2_oos")))
                                           for cv in curves.values()))
            vals["best_r2_ridge"] = best_r2
        if "recursive" in models:
            vals["best_r2_recursive"] = recursive_ridge_benchmark(
                X, y, split, args.z_ref_grid, names=panel.column_names)["r2_oos"]
        rows.append([vals[k] for k in SUMMARY_COLUMNS])
        print(tgt + ": " + ", ".join(f"{k}={fmt(vals[k]) or 'n/a'}" for k in SUMMARY_COLUMNS))
    w.table("table", ("target",) + SUMMARY_COLUMNS, [[t] + r for t, r in zip(targets, rows)])
    C = summary_correlation(rows)
    w.table("correlation", ("column",) + SUMMARY_COLUMNS,
            [[name] + list(C[i]) for i, name in enumerate(SUMMARY_COLUMNS)])
    if np.isnan(C).all():
        print("correlation undefined: need at least two targets with varying summaries")
    w.finish(t0)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="llglab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("preprocess", help="standardize, clip and AR(1)-filter a predictor CSV")
    s.add_argument("input")
    s.add_argument("output")
    s.add_argument("--window", type=int, default=36)
    s.add_argument("--clip", type=float, default=3.0)
    s.add_argument("--min-window", type=int, default=24)
    s.add_argument("--columns", help="comma-separated subset of columns to keep")
    s.set_defaults(func=cmd_preprocess)

    def add_common(s):
        s.add_argument("--split-date", default=DEFAULT_SPLIT)
        s.add_argument("--max-features", type=int, default=20000)
        s.add_argument("--grid", type=int_list, help="explicit comma-separated P1 grid")
        s.add_argument("--grid-points", type=int, default=20)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--format", choices=("csv", "json"), default="csv")
        s.add_argument("--out", default="llglab_out")

    s = sub.add_parser("llg", help="complexity curve and corrected R^2 bounds for one target")
    s.add_argument("input", help="processed panel CSV")
    s.add_argument("--target", required=True)
    s.add_argument("--signals", help="comma-separated signal columns (default: all)")
    s.add_argument("--z-ref", type=float, default=0.01)
    s.add_argument("--activation", choices=ACTIVATIONS, default="tanh")
    s.add_argument("--seeds", type=int_list)
    s.add_argument("--scale", choices=("T", "T_oos"), default="T")
    add_common(s)
    s.set_defaults(func=cmd_llg)

    s = sub.add_parser("simulate", help="run a semi-synthetic, GARCH or coverage experiment")
    s.add_argument("config", help="JSON experiment config")
    s.add_argument("--seeds", type=int_list)
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--out", default="llglab_sim")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("rmt-check", help="fixed-point oracle against a sampled design")
    s.add_argument("--c", type=float, required=True)
    s.add_argument("--z", type=float, required=True)
    s.add_argument("--spectrum", default="identity", help="'identity' or a file of eigenvalues")
    s.add_argument("--P", type=int, default=2000, help="dimension for the identity spectrum")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-T", type=int, default=20000)
    s.add_argument("--no-sample", action="store_true")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(func=cmd_rmt_check)

    s = sub.add_parser("table", help="per-target summary table and cross-target correlations")
    s.add_argument("input", help="processed panel CSV")
    s.add_argument("--targets")
    s.add_argument("--models", default="ridge,recursive")
    s.add_argument("--z-ref-grid", type=float_list, default=[0.01, 0.1, 1.0, 10.0])
    add_common(s)
    s.set_defaults(func=cmd_table)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_INPUT
    try:
        return args.func(args)
    except NonConvergence as e:
        print(f"error: NonConvergence: {e}", file=sys.stderr)
        return EXIT_NONCONV
    except (InputError, FileNotFoundError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # noqa: BLE001
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
