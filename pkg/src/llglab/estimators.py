"""Ridge, kernel ridge, Gaussian posterior and the recursive-ridge benchmark.

Everything downstream is a spectral functional of the in-sample second moment
Psi = S'S/T, so the ridge path keeps one eigendecomposition (of the smaller of
S'S/T and SS'/T) and reuses it for every penalty.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DegenerateSignals, InputError, KernelError, SingularSystem
from .features import SignalMatrix

EIG_CLAMP = 1e-12


def _as_matrix(S, name="S") -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    if S.ndim != 2 or S.size == 0:
        raise InputError(f"{name} must be a nonempty 2-d array")
    return S


def _as_vector(y, n, name="y") -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != n:
        raise InputError(f"{name} has length {y.shape[0]}, expected {n}")
    return y


# ---------------------------------------------------------------------------
# spectral caches
# ---------------------------------------------------------------------------

class SpectralCache:
    """Thin eigen-structure of Psi = S'S/T.

    ``S = U diag(s) V'`` restricted to the r eigenvalues above the clamp;
    ``lam = s**2 / T`` are the retained eigenvalues of Psi.
    """

    def __init__(self, S):
        S = _as_matrix(S)
        T, P = S.shape
        self.T, self.P = T, P
        if P <= T:
            lam, V = np.linalg.eigh(S.T @ S / T)
        else:
            lam, U = np.linalg.eigh(S @ S.T / T)
        lam = lam[::-1]
        top = lam[0] if lam.size else 0.0
        if not top > 0:
            raise DegenerateSignals("signal matrix has no positive eigenvalue")
        keep = lam > EIG_CLAMP * top
        lam = lam[keep]
        s = np.sqrt(T * lam)
        if P <= T:
            V = V[:, ::-1][:, keep]
            U = (S @ V) / s
        else:
            U = U[:, ::-1][:, keep]
            V = (S.T @ U) / s
        self.lam = lam
        self.s = s
        self.U = U
        self.V = V

    @property
    def rank(self) -> int:
        return self.lam.shape[0]

    def _check_z(self, z):
        z = float(z)
        if z < 0 or not np.isfinite(z):
            raise InputError("ridge penalty must be a finite nonnegative number")
        if z == 0 and self.rank < self.P:
            raise SingularSystem("z = 0 with rank-deficient second-moment matrix")
        return z

    def shrink(self, z) -> np.ndarray:
        """diag(s / (T z + s^2)), the weights mapping U'y to V'beta."""
        z = self._check_z(z)
        return self.s / (self.T * z + self.s ** 2)

    def beta(self, y, z) -> np.ndarray:
        if self.V is None:
            raise InputError("cache was built from Gram matrices; coefficients unavailable")
        y = _as_vector(y, self.T)
        return self.V @ (self.shrink(z) * (self.U.T @ y))


class SplitSpectrum(SpectralCache):
    """Spectral cache plus the out-of-sample rows projected on its eigenbasis.

    ``B = S_oos V`` and ``H = B'B / T_oos`` (= V' Psi_oos V) are formed once.
    """

    def __init__(self, S, S_oos):
        super().__init__(S)
        S_oos = _as_matrix(S_oos, "S_oos")
        if S_oos.shape[1] != self.P:
            raise InputError(f"S_oos has {S_oos.shape[1]} columns, expected {self.P}")
        self.T_oos = S_oos.shape[0]
        self.B = S_oos @ self.V
        self.H = self.B.T @ self.B / self.T_oos

    @classmethod
    def from_grams(cls, G, C, P: int) -> "SplitSpectrum":
        """Build from G = S S' (T x T) and C = S_oos S' (T_oos x T) alone.

        Works for any P through the dual eigenproblem. Coefficients in feature
        space are unavailable (``V`` is None); every out-of-sample quantity is.
        """
        G = np.asarray(G, dtype=float)
        C = np.asarray(C, dtype=float)
        T = G.shape[0]
        self = cls.__new__(cls)
        self.T, self.P = T, int(P)
        lam, U = np.linalg.eigh(0.5 * (G + G.T) / T)
        lam, U = lam[::-1], U[:, ::-1]
        if not lam[0] > 0:
            raise DegenerateSignals("signal matrix has no positive eigenvalue")
        keep = lam > EIG_CLAMP * lam[0]
        self.lam = lam[keep]
        self.U = U[:, keep]
        self.s = np.sqrt(T * self.lam)
        self.V = None
        self.T_oos = C.shape[0]
        self.B = (C @ self.U) / self.s
        self.H = self.B.T @ self.B / self.T_oos
        return self

    @cached_property
    def _hdiag(self):
        return np.diag(self.H).copy()

    def predict_oos(self, y, z) -> np.ndarray:
        y = _as_vector(y, self.T)
        return self.B @ (self.shrink(z) * (self.U.T @ y))

    def K(self, z) -> np.ndarray:
        return (self.B * self.shrink(z)) @ self.U.T

    def m_matrix(self, z) -> np.ndarray:
        """diag(a) H diag(a) with a = sqrt(lam)/(z+lam)."""
        a = np.sqrt(self.lam) / (z + self.lam)
        return self.H * np.outer(a, a)

    def llg(self, z) -> float:
        z = self._check_z(z)
        return float(np.sum(self.lam * self._hdiag / (z + self.lam) ** 2) / self.T)

    def sigma_v2(self, z) -> float:
        z = self._check_z(z)
        M = self.m_matrix(z)
        return float(2.0 * np.sum(M * M) / self.T)

    def q_oos(self, y, y_oos, z):
        """Returns (q, ||q||^2 / T)."""
        y = _as_vector(y, self.T)
        y_oos = _as_vector(y_oos, self.T_oos, "y_oos")
        e = self.predict_oos(y, z) - y_oos
        vw = self.B.T @ e / self.T_oos  # V' w
        c = vw / (z + self.lam)
        q = self.U @ (self.s * c)
        return q, float(np.sum(self.lam * c * c))


# ---------------------------------------------------------------------------
# model types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RidgeModel:
    beta_hat: np.ndarray
    z: float
    spectral_cache: SpectralCache


@dataclass(frozen=True)
class EstimatorMatrix:
    K: np.ndarray
    provenance: str

    def __post_init__(self):
        if self.K.ndim != 2 or not np.isfinite(self.K).all():
            raise InputError("estimator matrix must be a finite 2-d array")

    @property
    def T(self) -> int:
        return self.K.shape[1]

    @property
    def T_oos(self) -> int:
        return self.K.shape[0]


@dataclass(frozen=True)
class PosteriorBelief:
    mean: np.ndarray
    covariance: np.ndarray


# ---------------------------------------------------------------------------
# ridge
# ---------------------------------------------------------------------------

def effective_z(S, z_ref: float) -> float:
    """Penalty scaled to the signals: z_ref * tr(S'S) / P."""
    S = _as_matrix(S)
    if not z_ref > 0:
        raise InputError("z_ref must be positive")
    z = z_ref * float(np.sum(S * S)) / S.shape[1]
    if z == 0:
        raise DegenerateSignals("all-zero signal matrix gives z = 0")
    return z


def ridge_fit(S, y, z: float, cache: SpectralCache | None = None) -> RidgeModel:
    S = _as_matrix(S)
    cache = SpectralCache(S) if cache is None else cache
    return RidgeModel(beta_hat=cache.beta(y, z), z=float(z), spectral_cache=cache)


def ridge_dual(S, y, z: float) -> np.ndarray:
    """beta = S'(z T I + S S')^{-1} y, solved in the T-dimensional dual."""
    S = _as_matrix(S)
    T = S.shape[0]
    y = _as_vector(y, T)
    G = S @ S.T
    G[np.diag_indices(T)] += z * T
    return S.T @ np.linalg.solve(G, y)


def predict(model: RidgeModel, S_new) -> np.ndarray:
    S_new = _as_matrix(S_new, "S_new")
    if S_new.shape[1] != model.beta_hat.shape[0]:
        raise InputError(f"S_new has {S_new.shape[1]} columns, expected {model.beta_hat.shape[0]}")
    return S_new @ model.beta_hat


def estimator_matrix(S, S_oos, z: float) -> EstimatorMatrix:
    if not z > 0:
        raise InputError("z must be positive")
    sp = SplitSpectrum(S, S_oos)
    return EstimatorMatrix(sp.K(z), f"ridge(z={float(z)!r})")


# ---------------------------------------------------------------------------
# kernel ridge
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Kernel:
    name: str
    gamma: float | None = None

    def __post_init__(self):
        if self.name not in ("linear", "gaussian"):
            raise InputError(f"unknown kernel {self.name!r}")


def _sqdist(A, B):
    d = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d, 0.0)


def median_bandwidth(S) -> float:
    """gamma = 1 / (2 * median pairwise squared distance)."""
    S = _as_matrix(S)
    d = _sqdist(S, S)[np.triu_indices(S.shape[0], 1)]
    med = float(np.median(d)) if d.size else 0.0
    if not med > 0:
        raise KernelError("median pairwise distance is zero; give gamma explicitly")
    return 1.0 / (2.0 * med)


def kernel_matrix(kernel: Kernel, A, B, T: int, gamma: float | None = None) -> np.ndarray:
    if kernel.name == "linear":
        return A @ B.T / T
    return np.exp(-gamma * _sqdist(A, B))


def kernel_estimator_matrix(kernel, S, S_oos, z: float) -> EstimatorMatrix:
    """K = k(S_oos, S) (z I + k(S, S))^{-1}.

    The linear kernel is k(a, b) = a'b / T, which reproduces ridge.
    """
    if isinstance(kernel, str):
        kernel = Kernel(kernel)
    if not z > 0:
        raise InputError("z must be positive")
    S = _as_matrix(S)
    S_oos = _as_matrix(S_oos, "S_oos")
    if S_oos.shape[1] != S.shape[1]:
        raise InputError("S and S_oos must share a column count")
    T = S.shape[0]
    gamma = None
    if kernel.name == "gaussian":
        gamma = kernel.gamma if kernel.gamma is not None else median_bandwidth(S)
    G = kernel_matrix(kernel, S, S, T, gamma)
    G = 0.5 * (G + G.T)
    mu, Q = np.linalg.eigh(G)
    if mu[0] < -1e-8 * max(1.0, abs(mu[-1])):
        raise KernelError(f"Gram matrix not PSD (min eigenvalue {mu[0]:.3g})")
    mu = np.maximum(mu, 0.0)
    C = kernel_matrix(kernel, S_oos, S, T, gamma)
    K = ((C @ Q) / (z + mu)) @ Q.T
    tag = kernel.name if gamma is None else f"gaussian(gamma={gamma!r})"
    return EstimatorMatrix(K, f"kernel({tag}, z={float(z)!r})")


# ---------------------------------------------------------------------------
# Gaussian posterior
# ---------------------------------------------------------------------------

def bayes_posterior(S, y, Sigma_beta, sigma_eps2: float, method: str = "dual") -> PosteriorBelief:
    """Posterior of beta under y = S beta + eps, beta ~ N(0, Sigma_beta).

    The dual path works with a singular prior; the primal path inverts
    Sigma_beta and is kept for cross-checks.
    """
    if not sigma_eps2 > 0:
        raise InputError("sigma_eps2 must be positive")
    S = _as_matrix(S)
    T, P = S.shape
    y = _as_vector(y, T)
    Sb = np.asarray(Sigma_beta, dtype=float)
    if Sb.shape != (P, P):
        raise InputError(f"Sigma_beta must be {P}x{P}")
    if method == "dual" and P <= T:
        # root form: R (s2 I + R S'S R)^-1 R with R = Sigma_beta^(1/2); stays
        # well conditioned as s2 -> 0 and never inverts Sigma_beta
        w, Q = np.linalg.eigh(0.5 * (Sb + Sb.T))
        R = (Q * np.sqrt(np.maximum(w, 0.0))) @ Q.T
        A = R @ (S.T @ S) @ R
        A[np.diag_indices(P)] += sigma_eps2
        A = 0.5 * (A + A.T)
        mean = R @ np.linalg.solve(A, R @ (S.T @ y))
        cov = sigma_eps2 * R @ np.linalg.solve(A, R)
    elif method == "dual":
        SbSt = Sb @ S.T                      # P x T
        A = S @ SbSt
        A[np.diag_indices(T)] += sigma_eps2
        A = 0.5 * (A + A.T)
        mean = SbSt @ np.linalg.solve(A, y)
        cov = Sb - SbSt @ np.linalg.solve(A, SbSt.T)
    elif method == "primal":
        prec = sigma_eps2 * np.linalg.inv(Sb) + S.T @ S
        prec = 0.5 * (prec + prec.T)
        mean = np.linalg.solve(prec, S.T @ y)
        cov = sigma_eps2 * np.linalg.inv(prec)
    else:
        raise InputError(f"unknown method {method!r}")
    cov = 0.5 * (cov + cov.T)
    w, Q = np.linalg.eigh(cov)
    if w.size and w[0] < 0:
        cov = (Q * np.maximum(w, 0.0)) @ Q.T
        cov = 0.5 * (cov + cov.T)
    return PosteriorBelief(mean=mean, covariance=cov)


# ---------------------------------------------------------------------------
# recursive ridge benchmark
# ---------------------------------------------------------------------------

TRANSFORMS = {
    "tanh": np.tanh,
    "ssqrt": lambda x: np.sign(x) * np.sqrt(np.abs(x)),
    "square": np.square,
}
DEFAULT_TRANSFORMS = ("tanh", "ssqrt")


def build_feature_pool(X, names: Sequence[str] | None = None,
                       transforms: Sequence[str] = DEFAULT_TRANSFORMS):
    """Base columns, their transforms, then pairwise sums (i<j) and products (i<=j).

    With m transformed columns the pool has m + m^2 columns.
    """
    X = _as_matrix(X, "X")
    d = X.shape[1]
    names = [f"x{i}" for i in range(d)] if names is None else list(names)
    cols = [X[:, i] for i in range(d)]
    labels = list(names)
    for t in transforms:
        if t not in TRANSFORMS:
            raise InputError(f"unknown transform {t!r}; choose from {sorted(TRANSFORMS)}")
        f = TRANSFORMS[t]
        cols += [f(X[:, i]) for i in range(d)]
        labels += [f"{t}({n})" for n in names]
    M = np.column_stack(cols)
    m = M.shape[1]
    iu, ju = np.triu_indices(m, 1)
    ip, jp = np.triu_indices(m, 0)
    pool = np.hstack([M, M[:, iu] + M[:, ju], M[:, ip] * M[:, jp]])
    labels += [f"{labels[i]}+{labels[j]}" for i, j in zip(iu, ju)]
    labels += [f"{labels[i]}*{labels[j]}" for i, j in zip(ip, jp)]
    return pool, labels


def marginal_correlations(F, y) -> np.ndarray:
    F = F - F.mean(axis=0)
    y = y - y.mean()
    num = F.T @ y
    den = np.sqrt((F * F).sum(0) * (y @ y))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = num / den
    return np.where(den > 0, r, 0.0)


def recursive_ridge_features(X, y, split_index: int, transforms: Sequence[str] = DEFAULT_TRANSFORMS,
                             top_k: int = 100, names: Sequence[str] | None = None,
                             row_dates=None) -> SignalMatrix:
    """Select the top_k pool features by |corr| with y on rows [0, split_index).

    Only the training rows of ``y`` are read.
    """
    X = _as_matrix(X, "X")
    if X.shape[1] < 2:
        raise InputError("need at least two base columns")
    pool, labels = build_feature_pool(X, names, transforms)
    if not 1 <= top_k <= pool.shape[1]:
        raise InputError(f"top_k={top_k} exceeds pool of {pool.shape[1]} features")
    y = np.asarray(y, dtype=float).ravel()
    tr = slice(0, split_index)
    r = marginal_correlations(pool[tr], y[tr])
    order = np.argsort(-np.abs(r), kind="stable")[:top_k]
    return SignalMatrix(pool[:, order], split_index, row_dates, [labels[i] for i in order])


def recursive_ridge_benchmark(X, y, split_index: int, z_ref_grid=(0.01, 0.1, 1.0, 10.0),
                              transforms: Sequence[str] = DEFAULT_TRANSFORMS, top_k: int = 100,
                              names: Sequence[str] | None = None) -> dict:
    """Best out-of-sample R^2 of ridge on the preselected pool over a z_ref grid.

    Selected columns are standardized with training-split moments.
    """
    from .llg import r2_oos  # local import keeps module load order simple

    y = np.asarray(y, dtype=float).ravel()
    Xa = np.asarray(X, dtype=float)
    m = Xa.shape[1] * (1 + len(transforms))
    top_k = min(top_k, m + m * m)
    sm = recursive_ridge_features(Xa, y, split_index, transforms, top_k, names)
    F = sm.values
    mu = F[:split_index].mean(0)
    sd = F[:split_index].std(0)
    sd[sd == 0] = 1.0
    F = (F - mu) / sd
    S, S_oos = F[:split_index], F[split_index:]
    cache = SplitSpectrum(S, S_oos)
    best = None
    for zr in z_ref_grid:
        z = effective_z(S, zr)
        r2 = r2_oos(y[split_index:], cache.predict_oos(y[:split_index], z))
        if best is None or r2 > best["r2_oos"]:
            best = {"r2_oos": r2, "z_ref": float(zr), "z": z}
    best["features"] = sm.column_names
    return best
