"""Fixed-point Stieltjes solver and deterministic equivalents for ridge on
high-dimensional designs.

With D = 1 - c + c z m the master equation reads
``m = mean_i 1 / (z + D * lam_i)`` over the population spectrum ``lam``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import InputError, NonConvergence

TOL = 1e-12


@dataclass(frozen=True)
class RmtSolution:
    z: float
    c: float
    m: float
    m_prime: float
    xi: float
    z_star: float
    residual: float  # |m - rhs(m)| / m
    method: str = "iteration"


def _spectrum(spectrum) -> np.ndarray:
    lam = np.atleast_1d(np.asarray(spectrum, dtype=float)).ravel()
    if lam.size == 0 or not np.isfinite(lam).all():
        raise InputError("spectrum must be a nonempty finite list")
    if (lam < 0).any():
        raise InputError("spectrum must be nonnegative")
    return lam


def stieltjes_population(spectrum, z: float) -> float:
    """mean(1 / (z + lam))."""
    if not z > 0:
        raise InputError("z must be positive")
    lam = _spectrum(spectrum)
    return float(np.mean(1.0 / (z + lam)))


def _rhs(m, lam, z, c):
    D = 1.0 - c + c * z * m
    return np.mean(1.0 / (z + D * lam)), D


def _residual(m, lam, z, c):
    return m - _rhs(m, lam, z, c)[0]


def _rel_residual(m, lam, z, c):
    # relative to m: m grows like 1/z, so an absolute floor is not attainable for small z
    return abs(_residual(m, lam, z, c)) / m


def solve_fixed_point(spectrum, z: float, c: float, omega: float = 0.5,
                      max_iter: int = 10_000) -> RmtSolution:
    """Positive root of the master equation, its z-derivative and the shrinkage map.

    Damped iteration from m_Psi(-z); if it stalls or leaves the admissible
    region (D > 0), bracket the root on (max(0, (c-1)/(cz)), 1/z] and use brentq.
    """
    if not (z > 0 and c > 0):
        raise InputError("z and c must be positive")
    lam = _spectrum(spectrum)
    z, c = float(z), float(c)
    lo = max(0.0, (c - 1.0) / (c * z))
    hi = 1.0 / z

    m = stieltjes_population(lam, z)
    method = "iteration"
    ok = False
    for _ in range(max_iter):
        rhs, D = _rhs(m, lam, z, c)
        if D <= 0 or not np.isfinite(rhs):
            break
        new = (1.0 - omega) * m + omega * rhs
        if abs(new - m) <= 1e-15 * max(1.0, abs(m)):
            m = new
            ok = _rel_residual(m, lam, z, c) <= TOL
            break
        m = new
    if ok and not lo < m <= hi:
        ok = False
    if not ok:
        method = "brentq"
        a = np.nextafter(lo, hi)
        fa, fb = _residual(a, lam, z, c), _residual(hi, lam, z, c)
        if fb == 0:
            m = hi
        elif fa >= 0 or fb < 0:
            raise NonConvergence(f"no sign change on bracket for z={z}, c={c}")
        else:
            m = brentq(_residual, a, hi, args=(lam, z, c), xtol=1e-300, rtol=4 * np.finfo(float).eps,
                       maxiter=500)
    res = _rel_residual(m, lam, z, c)
    if res > TOL:
        raise NonConvergence(f"fixed-point residual {res:.3g} above {TOL}")

    D = 1.0 - c + c * z * m
    g2 = np.mean(1.0 / (z + D * lam) ** 2)
    h2 = np.mean(lam / (z + D * lam) ** 2)
    dm_dz = -(g2 + c * m * h2) / (1.0 + c * z * h2)
    m_prime = -dm_dz
    xi = c * (1.0 - z * m) / D
    return RmtSolution(z=z, c=c, m=float(m), m_prime=float(m_prime), xi=float(xi),
                       z_star=float(z / D), residual=float(res), method=method)


def xi_prime(sol: RmtSolution) -> float:
    """d xi / dz = -c (m - z m') / D^2 with m' = -dm/dz."""
    D = 1.0 - sol.c + sol.c * sol.z * sol.m
    return -sol.c * (sol.m - sol.z * sol.m_prime) / D ** 2


def deterministic_equivalent_llg(spectrum, z: float, c: float,
                                 sol: RmtSolution | None = None) -> float:
    """xi + z xi', the large-sample limit of the ridge learning gap."""
    if sol is None:
        sol = solve_fixed_point(spectrum, z, c)
    return sol.xi + sol.z * xi_prime(sol)


def empirical_stieltjes(Psi_hat, z: float):
    """(mean 1/(z+lam), mean 1/(z+lam)^2) over the eigenvalues of Psi_hat."""
    if not z > 0:
        raise InputError("z must be positive")
    A = np.asarray(Psi_hat, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError("Psi_hat must be square")
    lam = np.linalg.eigvalsh(0.5 * (A + A.T))
    if lam.size and lam[0] < -1e-10 * max(1.0, abs(lam[-1])):
        raise InputError("Psi_hat is not positive semi-definite")
    lam = np.clip(lam, 0.0, None)
    r = 1.0 / (z + lam)
    return float(r.mean()), float((r * r).mean())


def empirical_stieltjes_from_signals(S, z: float):
    """Same as :func:`empirical_stieltjes` for Psi_hat = S'S/T, using the smaller Gram."""
    S = np.asarray(S, dtype=float)
    T, P = S.shape
    G = S.T @ S / T if P <= T else S @ S.T / T
    lam = np.clip(np.linalg.eigvalsh(G), 0.0, None)
    n0 = P - lam.size  # zero eigenvalues when P > T
    r = 1.0 / (z + lam)
    m = (r.sum() + n0 / z) / P
    m2 = ((r * r).sum() + n0 / z ** 2) / P
    return float(m), float(m2)
