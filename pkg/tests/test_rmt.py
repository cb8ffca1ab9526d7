import numpy as np
import pytest

from llglab.errors import InputError, NonConvergence
from llglab.estimators import SplitSpectrum
from llglab.features import make_rng
from llglab.rmt import (
    deterministic_equivalent_llg, empirical_stieltjes, empirical_stieltjes_from_signals,
    solve_fixed_point, stieltjes_population, xi_prime,
)


def test_population_stieltjes():
    assert stieltjes_population(np.ones(7), 0.4) == pytest.approx(1 / 1.4, rel=1e-15)
    assert stieltjes_population([0.0, 2.0], 1.0) == pytest.approx(2 / 3, rel=1e-15)
    z = 1e8
    assert stieltjes_population([0.5, 3.0], z) * z == pytest.approx(1.0, rel=1e-7)


def test_population_stieltjes_errors():
    with pytest.raises(InputError):
        stieltjes_population([1.0], 0.0)
    with pytest.raises(InputError):
        stieltjes_population([-1.0], 1.0)
    with pytest.raises(InputError):
        stieltjes_population([], 1.0)


def test_classical_limit():
    lam = make_rng(1).exponential(size=50)
    sol = solve_fixed_point(lam, 0.7, 1e-8)
    assert sol.m == pytest.approx(stieltjes_population(lam, 0.7), abs=1e-6)


SPECTRA = {
    "identity": np.ones(20),
    "two_point": np.r_[np.full(10, 0.2), np.full(10, 3.0)],
    "spread": np.linspace(0.01, 5.0, 40),
    "with_zeros": np.r_[np.zeros(5), np.ones(15)],
}


@pytest.mark.parametrize("name", sorted(SPECTRA))
@pytest.mark.parametrize("c", [0.3, 1.0, 2.0, 8.0])
def test_fixed_point_contract(name, c):
    lam = SPECTRA[name]
    ms = []
    for z in (0.01, 0.1, 1.0, 10.0):
        sol = solve_fixed_point(lam, z, c)
        D = 1 - c + c * z * sol.m
        rhs = np.mean(1 / (z + D * lam))
        assert abs(sol.m - rhs) <= 1e-12 * sol.m and sol.residual <= 1e-12
        assert sol.m > 0 and D > 0
        # master equation in the m_Psi form
        assert sol.m == pytest.approx(stieltjes_population(lam, z / D) / D, rel=1e-10)
        assert sol.z_star == pytest.approx(z * (1 + sol.xi), rel=1e-12)
        assert sol.z_star >= z and sol.xi >= 0
        ms.append(sol.m)
    assert all(a > b for a, b in zip(ms, ms[1:]))


def test_derivatives_by_finite_difference():
    lam = SPECTRA["spread"]
    c, z = 1.7, 0.5
    h = 1e-6 * z
    sol = solve_fixed_point(lam, z, c)
    up, dn = solve_fixed_point(lam, z + h, c), solve_fixed_point(lam, z - h, c)
    fd_m = -(up.m - dn.m) / (2 * h)
    fd_xi = (up.xi - dn.xi) / (2 * h)
    assert sol.m_prime == pytest.approx(fd_m, rel=1e-6)
    assert xi_prime(sol) == pytest.approx(fd_xi, rel=1e-6)
    assert sol.m_prime > 0


def test_brentq_fallback_used_when_iteration_capped():
    sol = solve_fixed_point(SPECTRA["spread"], 0.05, 4.0, max_iter=1)
    assert sol.method == "brentq" and sol.residual <= 1e-12
    ref = solve_fixed_point(SPECTRA["spread"], 0.05, 4.0)
    assert sol.m == pytest.approx(ref.m, rel=1e-12)


def test_nonconvergence_raised(monkeypatch):
    import llglab.rmt as rmt
    monkeypatch.setattr(rmt, "TOL", 0.0)
    monkeypatch.setattr(rmt, "brentq", lambda f, a, b, **kw: 0.5 * (a + b))
    with pytest.raises(NonConvergence):
        rmt.solve_fixed_point(SPECTRA["spread"], 0.3, 2.0, max_iter=1)


def test_fixed_point_bad_args():
    with pytest.raises(InputError):
        solve_fixed_point([1.0], 0.0, 1.0)
    with pytest.raises(InputError):
        solve_fixed_point([1.0], 1.0, -1.0)


def test_det_llg_vanishes():
    assert deterministic_equivalent_llg(np.ones(10), 1e8, 2.0) < 1e-12


def test_det_llg_matches_sample_small():
    T, c, z = 400, 1.0, 0.5
    P = int(c * T)
    g = make_rng(2)
    S, So = g.standard_normal((T, P)), g.standard_normal((T, P))
    det = deterministic_equivalent_llg(np.ones(P), z, c)
    assert SplitSpectrum(S, So).llg(z) == pytest.approx(det, rel=0.05)


def test_det_llg_error_shrinks_with_size():
    c, z = 2.0, 0.1
    det = deterministic_equivalent_llg(np.ones(4), z, c)
    err = {}
    for T in (200, 400):
        P = int(c * T)
        e = []
        for s in range(40):
            g = make_rng(s * 7 + T)
            S, So = g.standard_normal((T, P)), g.standard_normal((T, P))
            e.append(abs(SplitSpectrum(S, So).llg(z) / det - 1))
        err[T] = np.mean(e)
    assert 0.25 <= err[400] / err[200] <= 0.75


def test_empirical_stieltjes_cases():
    z = 0.8
    m, m2 = empirical_stieltjes(np.zeros((4, 4)), z)
    assert (m, m2) == (pytest.approx(1 / z), pytest.approx(1 / z ** 2))
    m, m2 = empirical_stieltjes(np.eye(3), z)
    assert (m, m2) == (pytest.approx(1 / (z + 1)), pytest.approx(1 / (z + 1) ** 2))
    with pytest.raises(InputError):
        empirical_stieltjes(-np.eye(2), z)
    with pytest.raises(InputError):
        empirical_stieltjes(np.ones((2, 3)), z)


def test_empirical_stieltjes_derivative():
    A = make_rng(3).standard_normal((30, 50))
    Psi = A.T @ A / 30
    h = 1e-6
    _, m2 = empirical_stieltjes(Psi, 1.0)
    fd = -(empirical_stieltjes(Psi, 1 + h)[0] - empirical_stieltjes(Psi, 1 - h)[0]) / (2 * h)
    assert m2 == pytest.approx(fd, rel=1e-6)


def test_empirical_from_signals_matches_full():
    for T, P in ((30, 50), (50, 30)):
        S = make_rng(T + P).standard_normal((T, P))
        a = empirical_stieltjes(S.T @ S / T, 0.3)
        b = empirical_stieltjes_from_signals(S, 0.3)
        assert b[0] == pytest.approx(a[0], rel=1e-10)
        assert b[1] == pytest.approx(a[1], rel=1e-10)
