"""Sampling variance of the corrected R^2 and its one-sided confidence bound.

The pivotal estimator only reads (S, S_oos, y, y_oos, z_grid). Its variance
is normalized by the out-of-sample length: Var(lower bound) ~ sigma^2 / T_oos.
"""
from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .errors import InputError
from .estimators import SplitSpectrum, _as_vector

CRITICAL_95 = 1.65


@dataclass(frozen=True)
class VarianceComponents:
    sigma_v2: float
    sigma_i2: float
    sigma_i_oos2: float
    sigma_mse2: float
    q_oos_norm2: float
    sigma_eps2_cap: float
    sigma_eps2_used: float = 0.0
    A2: float = 0.0
    A1: float = 0.0


@dataclass(frozen=True)
class ConfidenceReport:
    lower_bound_point: float
    sigma_r2_hat: float
    conf_lower: float
    level: float
    scale_T: int


def _cache(S, S_oos, cache):
    return SplitSpectrum(S, S_oos) if cache is None else cache


def _positive_z(z):
    if not z > 0:
        raise InputError("z must be positive")


def sigma_v2(S=None, S_oos=None, z: float = None, *, cache: SplitSpectrum | None = None) -> float:
    """(2/T) tr([(zI+Psi)^-1 Psi_oos (zI+Psi)^-1 Psi]^2)."""
    _positive_z(z)
    return _cache(S, S_oos, cache).sigma_v2(z)


def q_oos(S=None, S_oos=None, y=None, y_oos=None, z: float = None, *,
          cache: SplitSpectrum | None = None) -> dict:
    """q = S (zI+Psi)^-1 S_oos' (S_oos beta_hat - y_oos) / T_oos and ||q||^2/T."""
    _positive_z(z)
    q, n2 = _cache(S, S_oos, cache).q_oos(y, y_oos, z)
    return {"q": q, "norm2_scaled": n2}


def sigma_i2_pivotal(q_norm2_scaled: float, sigma_eps2: float, sigma_v2: float, llg: float,
                     T: int, T_oos: int) -> float:
    return 4.0 * max(0.0, q_norm2_scaled - sigma_eps2 * (0.5 * sigma_v2 + (T / T_oos) * llg))


def _quadratic_extremum(A2: float, A1: float, cap: float, mode: str):
    """Extremum of A2 s^2 + A1 s over s in [0, cap]; returns (value, s)."""
    cands = [0.0, cap]
    if A2 != 0:
        s = -A1 / (2.0 * A2)
        if 0.0 < s < cap:
            cands.append(s)
    vals = [A2 * s * s + A1 * s for s in cands]
    i = int(np.argmax(vals)) if mode == "max" else int(np.argmin(vals))
    return vals[i], cands[i]


def sigma_r2_hat(S=None, S_oos=None, y=None, y_oos=None, z_grid: Sequence[float] = None,
                 z: float | None = None, *, mode: str = "max",
                 cache: SplitSpectrum | None = None):
    """Pivotal standard deviation of the corrected R^2 lower bound.

    ``z`` is the working penalty (defaults to the first grid entry). The noise
    variance is unknown, so the variance expression A2 s^2 + A1 s is taken at
    its extremum over s in [0, cap] with cap = min_z MSE_oos(z)/(1+L(z)).
    ``mode="max"`` is the conservative choice, ``"min"`` the alternative.

    Returns ``(VarianceComponents, sigma)``.
    """
    if z_grid is None or len(z_grid) == 0:
        raise InputError("z_grid must be nonempty")
    if mode not in ("max", "min"):
        raise InputError("mode must be 'max' or 'min'")
    z = float(z_grid[0]) if z is None else float(z)
    _positive_z(z)
    sp = _cache(S, S_oos, cache)
    y = _as_vector(y, sp.T)
    y_oos = _as_vector(y_oos, sp.T_oos, "y_oos")
    T, T_oos = sp.T, sp.T_oos
    r = T_oos / T

    mse0 = float(np.mean(y_oos ** 2))
    if not mse0 > 0:
        raise InputError("zero target energy")
    pred = sp.predict_oos(y, z)
    mse_h = float(np.mean((y_oos - pred) ** 2))
    ysb = float(y_oos @ pred / T_oos)
    L = sp.llg(z)
    sv2 = sp.sigma_v2(z)
    _, qn = sp.q_oos(y, y_oos, z)

    caps = []
    for zz in z_grid:
        _positive_z(zz)
        p = sp.predict_oos(y, zz)
        caps.append(float(np.mean((y_oos - p) ** 2)) / (1.0 + sp.llg(zz)))
    cap = max(0.0, min(caps))

    A2 = mse0 ** 2 * (2.0 - r * sv2 - 4.0 * (1.0 + L)) - 2.0 * mse_h ** 2 + 4.0 * mse0 * mse_h
    A1 = (mse0 ** 2 * (4.0 * r * qn + 4.0 * mse_h) + 4.0 * mse_h ** 2 * mse0
          - 8.0 * mse0 * mse_h * (mse0 - ysb))
    val, s2 = _quadratic_extremum(A2, A1, cap, mode)
    var = max(0.0, val) / ((1.0 + L) ** 2 * mse0 ** 4)
    sigma = float(np.sqrt(var))

    bias = max(0.0, mse_h - (1.0 + L) * s2)
    si2 = sigma_i2_pivotal(qn, s2, sv2, L, T, T_oos)
    si_oos2 = 4.0 * (T / T_oos) * (bias + s2 * L)
    smse2 = max(0.0, (2.0 * (T / T_oos) * s2 ** 2 + s2 ** 2 * sv2 + s2 * si2 + s2 * si_oos2)
                / (1.0 + L) ** 2)
    comps = VarianceComponents(
        sigma_v2=sv2, sigma_i2=si2, sigma_i_oos2=si_oos2, sigma_mse2=smse2,
        q_oos_norm2=qn, sigma_eps2_cap=cap, sigma_eps2_used=s2, A2=A2, A1=A1,
    )
    return comps, sigma


def critical_value(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise InputError("level must lie in (0, 1)")
    if level == 0.95:
        return CRITICAL_95
    return NormalDist().inv_cdf(level)


def confidence_lower_bound(lower_bound_point: float, sigma_r2_hat: float, T: int,
                           level: float = 0.95) -> ConfidenceReport:
    """point - z_level * sigma / sqrt(T); the band is [conf_lower, 1]."""
    if T < 1:
        raise InputError("T must be >= 1")
    if sigma_r2_hat < 0:
        raise InputError("sigma_r2_hat must be nonnegative")
    zc = critical_value(level)
    conf = lower_bound_point - zc * sigma_r2_hat / np.sqrt(T)
    return ConfidenceReport(float(lower_bound_point), float(sigma_r2_hat), float(conf),
                            float(level), int(T))
