"""Semi-synthetic targets, GARCH noise and the complexity-curve / coverage harness."""
from __future__ import annotations

import os
from fractions import Fraction
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import dataio
from .clt import confidence_lower_bound, sigma_r2_hat
from .errors import InputError
from .estimators import SplitSpectrum
from .features import ACTIVATIONS, activate, generate_weights, make_rng
from .llg import corrected_r2_lower_bound, r2_oos

R2_PRESETS = (0.0, 0.25, 0.5, 0.75)
CAP_Z_REF_GRID = (0.01, 0.1, 1.0, 10.0)


def worker_count(n_tasks: int) -> int:
    """Threads to use: LLGLAB_THREADS if set, else the CPU count, capped by n_tasks."""
    env = os.environ.get("LLGLAB_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise InputError(f"LLGLAB_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise InputError("LLGLAB_THREADS must be >= 1")
    else:
        n = os.cpu_count() or 1
    return max(1, min(n, n_tasks))


def _pmap(fn, items):
    items = list(items)
    n = worker_count(len(items))
    if n == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def substream_seed(*keys: int) -> int:
    """Deterministic 64-bit seed for a (base, cell, replication, ...) tuple."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# semi-synthetic targets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SemiSyntheticSpec:
    gamma: float = 0.0
    activation: str = "tanh"
    w_seed: int = 0
    eps_seed: int = 1
    target_r2: float | None = None

    def __post_init__(self):
        if self.gamma < 0:
            raise InputError("gamma must be nonnegative")
        if self.activation not in ACTIVATIONS:
            raise InputError(f"unknown activation {self.activation!r}")
        if self.target_r2 is not None and not 0.0 <= self.target_r2 < 1.0:
            raise InputError("target_r2 must lie in [0, 1)")


def truth_weights(d: int, w_seed: int) -> np.ndarray:
    return make_rng(w_seed).standard_normal(d)


def calibrate_gamma(X, g: str, W, target_r2: float, sigma_eps2: float = 1.0) -> float:
    """gamma with gamma^2 mean(g(XW)^2) / (gamma^2 mean(g^2) + sigma_eps2) = target_r2."""
    if not 0.0 <= target_r2 < 1.0:
        raise InputError("target_r2 must lie in [0, 1)")
    if target_r2 == 0.0:
        return 0.0
    e = float(np.mean(activate(np.asarray(X, float) @ np.asarray(W, float), g) ** 2))
    if not e > 0:
        raise InputError("degenerate g-energy: g(X'W) is identically zero")
    return float(np.sqrt(target_r2 / (1.0 - target_r2) * sigma_eps2 / e))


def semi_synthetic(X, spec: SemiSyntheticSpec, r2_window: slice | None = None) -> dict:
    """Target y[t] = gamma g(X[t]'W) + eps[t], paired with signal row t.

    ``y[t]`` is the next-period outcome for the signals observed at t.
    ``r2_star_hat`` = sum f^2 / sum y^2 over ``r2_window`` (all rows by default).
    When ``spec.target_r2`` is set, gamma is calibrated on X and ``spec.gamma``
    is ignored.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or not np.isfinite(X).all():
        raise InputError("X must be a finite 2-d array")
    W = truth_weights(X.shape[1], spec.w_seed)
    gamma = spec.gamma
    if spec.target_r2 is not None:
        gamma = calibrate_gamma(X, spec.activation, W, spec.target_r2)
    f = gamma * activate(X @ W, spec.activation)
    eps = make_rng(spec.eps_seed).standard_normal(X.shape[0])
    y = f + eps
    win = slice(None) if r2_window is None else r2_window
    den = float(np.sum(y[win] ** 2))
    return {"y": y, "f": f, "eps": eps, "gamma": gamma,
            "r2_star_hat": float(np.sum(f[win] ** 2)) / den if den > 0 else 0.0}


# ---------------------------------------------------------------------------
# GARCH(1,1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GarchParams:
    omega: float = 0.5
    alpha: float = 0.05
    beta: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if not (self.omega > 0 and self.alpha > 0 and self.beta > 0):
            raise InputError("GARCH parameters must be positive")
        if self.alpha + self.beta >= 1:
            raise InputError("nonstationary GARCH: alpha + beta must be < 1")

    @property
    def unconditional_variance(self) -> float:
        # exact on the decimal parameter values, rounded once
        w, a, b = (Fraction(repr(float(v))) for v in (self.omega, self.alpha, self.beta))
        return float(w / (1 - a - b))


def garch11(T: int, params: GarchParams = GarchParams(), return_variance: bool = False):
    """Simulate y_t = sigma_t z_t started at the unconditional variance."""
    if T < 1:
        raise InputError("T must be >= 1")
    zs = make_rng(params.seed).standard_normal(T)
    y = np.empty(T)
    s2 = np.empty(T)
    s2[0] = params.unconditional_variance
    y[0] = np.sqrt(s2[0]) * zs[0]
    w, a, b = params.omega, params.alpha, params.beta
    for t in range(1, T):
        s2[t] = w + a * y[t - 1] ** 2 + b * s2[t - 1]
        y[t] = np.sqrt(s2[t]) * zs[t]
    return (y, s2) if return_variance else y


def garch_target(T: int, params: GarchParams = GarchParams(), mode: str = "raw",
                 window: int = 36, bound: float = 3.0) -> np.ndarray:
    """GARCH target, optionally passed through rolling standardization and clipping.

    In ``standardized`` mode the first ``window`` draws are burn-in, so
    ``T + window`` draws are simulated and the last T returned.
    """
    if mode == "raw":
        return garch11(T, params)
    if mode == "standardized":
        y = garch11(T + window, params)
        s = dataio.clip(dataio.rolling_standardize(y, window), bound)
        return s.values[window:]
    raise InputError(f"unknown GARCH mode {mode!r}")


# ---------------------------------------------------------------------------
# complexity curves
# ---------------------------------------------------------------------------

VOC_FIELDS = ("P1", "c", "r2_oos", "llg", "lower_bound", "sigma_r2_hat", "conf_lower", "seed")


@dataclass(frozen=True)
class VoCPoint:
    P1: int
    c: float
    r2_oos: float
    llg: float
    lower_bound: float
    sigma_r2_hat: float
    conf_lower: float
    seed: int

    @property
    def flagged(self) -> bool:
        """Below the usual plotting floor of R^2_oos = -1 (kept, not dropped)."""
        return self.r2_oos < -1.0

    def row(self) -> tuple:
        return tuple(getattr(self, k) for k in VOC_FIELDS)


@dataclass(frozen=True)
class VoCCurve:
    points: list
    T: int
    seed: int | None = None

    def __post_init__(self):
        p = [pt.P1 for pt in self.points]
        if any(b <= a for a, b in zip(p, p[1:])):
            raise InputError("P1 grid must be strictly increasing")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(pt, name) for pt in self.points], dtype=float)

    def best(self) -> dict:
        lb = self.column("lower_bound")
        i = int(np.argmax(lb))
        return {
            "lower_bound": float(lb[i]),
            "conf_lower": float(np.max(self.column("conf_lower"))),
            "r2_oos": float(np.max(self.column("r2_oos"))),
            "argmax_P1": int(self.points[i].P1),
        }


@dataclass
class VoCResult:
    curves: list
    mean: VoCCurve
    config: dict = field(default_factory=dict)


def geometric_grid(lo: int = 100, hi: int = 20000, n: int = 20) -> list:
    g = np.unique(np.round(np.geomspace(lo, hi, n)).astype(int))
    return [int(v) for v in g]


def _check_grid(P1_grid) -> list:
    g = [int(p) for p in P1_grid]
    if not g or g[0] < 1 or any(b <= a for a, b in zip(g, g[1:])):
        raise InputError("P1 grid must be strictly increasing positive integers")
    return g


def voc_curves_multi(X, y, split_index: int, P1_grid: Sequence[int], seed: int,
                     z_refs: Sequence[float] = (0.01,), activation: str = "tanh",
                     cap_z_refs: Sequence[float] = CAP_Z_REF_GRID, scale: str = "T",
                     level: float = 0.95, block: int = 2000) -> dict:
    """Seeded complexity curves for several z_ref values from one feature pass.

    Features are generated in column blocks and only their Gram matrices
    SS' and S_oos S' are kept, so memory stays at O(T_total^2). Returns
    ``{z_ref: VoCCurve}``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2:
        raise InputError("X must be 2-d")
    n, d = X.shape
    if y.shape[0] != n:
        raise InputError("X and y differ in length")
    if not 0 < split_index < n:
        raise InputError("split_index outside the sample")
    if scale not in ("T", "T_oos"):
        raise InputError("scale must be 'T' or 'T_oos'")
    z_refs = [float(v) for v in z_refs]
    if not z_refs or min(z_refs) <= 0:
        raise InputError("z_ref values must be positive")
    grid = _check_grid(P1_grid)
    T = split_index
    T_oos = n - T
    W = generate_weights(d, grid[-1], seed, activation).W

    G = np.zeros((n, n))
    trace_in = 0.0
    done = 0
    points = {zr: [] for zr in z_refs}
    ytr, yte = y[:T], y[T:]
    for P1 in grid:
        while done < P1:
            hi = min(P1, done + block)
            Sb = activate(X @ W[:, done:hi], activation)
            G += Sb @ Sb.T
            trace_in += float(np.sum(Sb[:T] * Sb[:T]))
            done = hi
        cache = SplitSpectrum.from_grams(G[:T, :T], G[T:, :T], P1)
        per = trace_in / P1  # tr(S'S)/P
        for zr in z_refs:
            z = zr * per
            zgrid = [z] + [c * per for c in cap_z_refs if c != zr]
            pred = cache.predict_oos(ytr, z)
            r2 = r2_oos(yte, pred)
            L = cache.llg(z)
            lb = corrected_r2_lower_bound(r2, L)
            _, sig = sigma_r2_hat(y=ytr, y_oos=yte, z_grid=zgrid, z=z, cache=cache)
            rep = confidence_lower_bound(lb, sig, T if scale == "T" else T_oos, level)
            points[zr].append(VoCPoint(P1=P1, c=P1 / T, r2_oos=r2, llg=L, lower_bound=lb,
                                       sigma_r2_hat=sig, conf_lower=rep.conf_lower,
                                       seed=int(seed)))
    return {zr: VoCCurve(points=pts, T=T, seed=int(seed)) for zr, pts in points.items()}


def voc_curve(X, y, split_index: int, P1_grid: Sequence[int], seed: int, z_ref: float = 0.01,
              activation: str = "tanh", cap_z_refs: Sequence[float] = CAP_Z_REF_GRID,
              scale: str = "T", level: float = 0.95, block: int = 2000) -> VoCCurve:
    """One seeded complexity curve at a single z_ref."""
    out = voc_curves_multi(X, y, split_index, P1_grid, seed, [z_ref], activation,
                           cap_z_refs, scale, level, block)
    return out[float(z_ref)]


def mean_curve(curves: Sequence[VoCCurve]) -> VoCCurve:
    """Pointwise average over seeds (fixed summation order); seed field is -1."""
    if not curves:
        raise InputError("no curves to average")
    base = curves[0]
    pts = []
    for i, p in enumerate(base.points):
        vals = {}
        for k in ("r2_oos", "llg", "lower_bound", "sigma_r2_hat", "conf_lower"):
            acc = 0.0
            for cv in curves:
                acc += getattr(cv.points[i], k)
            vals[k] = acc / len(curves)
        pts.append(VoCPoint(P1=p.P1, c=p.c, seed=-1, **vals))
    return VoCCurve(points=pts, T=base.T, seed=None)


def voc_experiment(X, y, split_index: int, P1_grid: Sequence[int], z_ref: float = 0.01,
                   activation: str = "tanh", seeds: Sequence[int] = (0,), **kw) -> VoCResult:
    """Complexity curves for every seed plus their pointwise mean."""
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise InputError("need at least one seed")
    curves = _pmap(lambda s: voc_curve(X, y, split_index, P1_grid, s, z_ref, activation, **kw),
                   seeds)
    cfg = {"split_index": int(split_index), "P1_grid": [int(p) for p in P1_grid],
           "z_ref": float(z_ref), "activation": activation, "seeds": seeds}
    return VoCResult(curves=curves, mean=mean_curve(curves), config=cfg)


# ---------------------------------------------------------------------------
# coverage
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverageDesign:
    T: int = 400
    T_oos: int = 400
    P: int = 800
    d: int = 14
    r2_grid: tuple = (0.0, 0.25, 0.5)
    reps: int = 200
    z_ref: float = 0.01
    activation: str = "tanh"
    base_seed: int = 0
    level: float = 0.95
    scale: str = "T"
    cap_z_refs: tuple = CAP_Z_REF_GRID

    def __post_init__(self):
        if self.reps < 1:
            raise InputError("coverage design needs at least one replication")
        if min(self.T, self.T_oos, self.P, self.d) < 1:
            raise InputError("T, T_oos, P, d must be positive")


def coverage_replication(design: CoverageDesign, cell: int, rep: int) -> dict:
    """One draw: Gaussian X, tanh truth, random-feature ridge, confidence bound."""
    r2_target = float(design.r2_grid[cell])
    n = design.T + design.T_oos
    rng = make_rng(substream_seed(design.base_seed, cell, rep, 0))
    X = rng.standard_normal((n, design.d))
    spec = SemiSyntheticSpec(activation="tanh", w_seed=substream_seed(design.base_seed, cell, rep, 1),
                             eps_seed=substream_seed(design.base_seed, cell, rep, 2),
                             target_r2=r2_target)
    sim = semi_synthetic(X, spec, r2_window=slice(design.T, None))
    cv = voc_curve(X, sim["y"], design.T, [design.P], substream_seed(design.base_seed, cell, rep, 3),
                   design.z_ref, design.activation, design.cap_z_refs, design.scale, design.level)
    p = cv.points[0]
    return {"cell": cell, "rep": rep, "r2_star_hat": sim["r2_star_hat"], "lower_bound": p.lower_bound,
            "sigma_r2_hat": p.sigma_r2_hat, "conf_lower": p.conf_lower, "llg": p.llg,
            "r2_oos": p.r2_oos, "covered": bool(p.conf_lower <= sim["r2_star_hat"])}


def coverage_study(design: CoverageDesign, min_reps: int = 50) -> dict:
    """Fraction of replications whose confidence bound sits below the realized R^2*."""
    if design.reps < min_reps:
        raise InputError(f"coverage study needs at least {min_reps} replications per cell")
    tasks = [(c, r) for c in range(len(design.r2_grid)) for r in range(design.reps)]
    draws = _pmap(lambda cr: coverage_replication(design, *cr), tasks)
    cells = []
    for c, r2 in enumerate(design.r2_grid):
        sub = [dr for dr in draws if dr["cell"] == c]
        lbs = np.array([dr["lower_bound"] for dr in sub])
        cells.append({
            "T": design.T, "T_oos": design.T_oos, "P": design.P, "r2_star": float(r2),
            "reps": len(sub), "coverage_rate": float(np.mean([dr["covered"] for dr in sub])),
            "mean_lower_bound": float(lbs.mean()),
            "sd_lower_bound_scaled": float(lbs.std(ddof=1) * np.sqrt(design.T)) if len(sub) > 1 else 0.0,
            "mean_sigma_r2_hat": float(np.mean([dr["sigma_r2_hat"] for dr in sub])),
        })
    return {"coverage_rate": [c["coverage_rate"] for c in cells], "cells": cells,
            "design": asdict(design), "draws": draws}
