"""Learning-gap trace functionals, the MSE decomposition and the corrected R^2."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .estimators import EstimatorMatrix, SpectralCache, SplitSpectrum, _as_matrix, _as_vector


@dataclass(frozen=True)
class LlgReport:
    llg: float
    r2_oos: float
    lower_bound: float
    mse_oos: float
    z: float
    c: float
    method: str


@dataclass(frozen=True)
class MseDecomposition:
    noise: float
    bias: float
    variance: float
    interaction: float
    total: float


def _K(K) -> np.ndarray:
    if isinstance(K, EstimatorMatrix):
        return K.K
    K = np.asarray(K, dtype=float)
    if K.ndim != 2:
        raise InputError("K must be 2-d")
    return K


def llg_from_estimator(K) -> float:
    """(1/T_oos) * sum of squared entries of K."""
    K = _K(K)
    if not np.isfinite(K).all():
        raise InputError("K has non-finite entries")
    return float(np.sum(K * K) / K.shape[0])


def llg_ridge(S=None, S_oos=None, z: float = None, *, cache: SplitSpectrum | None = None) -> float:
    """(1/T) tr(Psi_oos Psi (zI + Psi)^{-2}) through the shared eigenbasis."""
    if z is None or not z > 0:
        raise InputError("z must be positive")
    if cache is None:
        cache = SplitSpectrum(S, S_oos)
    return cache.llg(z)


def llg_herfindahl(S, z: float, c: float) -> float:
    """Resolvent concentration ratio over the eigenvalues mu of SS'/T.

    mean(1/(zc+mu)^2) / mean(1/(zc+mu))^2 - 1
    """
    a = float(z) * float(c)
    if not a > 0:
        raise InputError("z * c must be positive")
    S = _as_matrix(S)
    T = S.shape[0]
    mu = np.clip(np.linalg.eigvalsh(S @ S.T / T), 0.0, None)
    r = 1.0 / (a + mu)
    return float(np.mean(r * r) / np.mean(r) ** 2 - 1.0)


def mse_decomposition(f_true, K, f_train, eps_train, eps_oos) -> MseDecomposition:
    """Split the out-of-sample MSE into noise, bias, variance and interaction.

    Needs the true conditional means and noises, so it is a simulation tool.
    """
    K = _K(K)
    T_oos, T = K.shape
    f = _as_vector(f_true, T_oos, "f_true")
    ft = _as_vector(f_train, T, "f_train")
    et = _as_vector(eps_train, T, "eps_train")
    eo = _as_vector(eps_oos, T_oos, "eps_oos")
    fs = K @ ft
    fe = K @ et
    bias = float(np.mean((f - fs) ** 2))
    var = float(np.mean(fe ** 2))
    inter = float(-2.0 * np.mean((f - fs) * (fe - eo) + eo * fe))
    noise = float(np.mean(eo ** 2))
    total = float(np.mean((f + eo - fs - fe) ** 2))
    return MseDecomposition(noise, bias, var, inter, total)


def r2_oos(y_oos, preds) -> float:
    """1 - sum((y - yhat)^2) / sum(y^2); uncentered."""
    y = np.asarray(y_oos, dtype=float).ravel()
    p = np.asarray(preds, dtype=float).ravel()
    if y.shape != p.shape:
        raise InputError("y_oos and preds differ in length")
    den = float(y @ y)
    if not den > 0:
        raise InputError("zero target energy")
    return float(1.0 - np.sum((y - p) ** 2) / den)


def corrected_r2_lower_bound(r2: float, llg: float) -> float:
    if llg < 0:
        raise InputError("llg must be nonnegative")
    if np.isinf(llg):
        return 1.0
    return (r2 + llg) / (1.0 + llg)


def hj_bound(r2: float, llg: float) -> float:
    """Lower bound on SDF variance implied by the corrected R^2."""
    if llg < 0:
        raise InputError("llg must be nonnegative")
    if r2 >= 1.0 - 1e-9:
        raise InputError("r2_oos must be below 1")
    return (r2 + llg) / (1.0 - r2)


def llg_report(S, S_oos, y, y_oos, z: float, cache: SplitSpectrum | None = None) -> LlgReport:
    """Ridge fit at ``z`` and its learning-gap summary."""
    cache = SplitSpectrum(S, S_oos) if cache is None else cache
    pred = cache.predict_oos(y, z)
    y_oos = _as_vector(y_oos, cache.T_oos, "y_oos")
    r2 = r2_oos(y_oos, pred)
    L = cache.llg(z)
    return LlgReport(
        llg=L, r2_oos=r2, lower_bound=corrected_r2_lower_bound(r2, L),
        mse_oos=float(np.mean((y_oos - pred) ** 2)), z=float(z),
        c=cache.P / cache.T, method=f"ridge(z={float(z)!r})",
    )


def excess_volatility_check(S, y, Psi_true, sigma_eps2: float, sigma_beta2: float) -> dict:
    """Price variance of the posterior-mean forecast against its learning-gap floor.

    The prior-implied penalty is c z with z = sigma_eps2 / sigma_beta2 and c = P/T.
    """
    S = _as_matrix(S)
    T, P = S.shape
    y = _as_vector(y, T)
    Psi = np.asarray(Psi_true, dtype=float)
    if Psi.shape != (P, P):
        raise InputError(f"Psi_true must be {P}x{P}")
    if not (sigma_eps2 > 0 and sigma_beta2 > 0):
        raise InputError("variances must be positive")
    a = (P / T) * sigma_eps2 / sigma_beta2
    cache = SpectralCache(S)
    beta = cache.beta(y, a)
    var_price = float(beta @ Psi @ beta)
    # tr(Psi Psi_hat (a+Psi_hat)^-2) over the nonzero eigenpairs of Psi_hat
    V, lam = cache.V, cache.lam
    g = lam / (a + lam) ** 2
    bound = sigma_eps2 * float(np.sum(np.einsum("ij,ij->j", V, Psi @ V) * g)) / T
    return {"var_price": var_price, "bound": bound, "penalty": a}
