import inspect

import numpy as np
import pytest

from llglab import clt
from llglab.clt import (
    _quadratic_extremum, confidence_lower_bound, critical_value, q_oos, sigma_i2_pivotal,
    sigma_r2_hat, sigma_v2,
)
from llglab.errors import InputError
from llglab.estimators import SplitSpectrum, effective_z
from llglab.features import make_rng
from llglab.sim import CoverageDesign, coverage_study

from conftest import gaussian_split


def dense_parts(S, So, z):
    T, P = S.shape
    Ph = S.T @ S / T
    Po = So.T @ So / So.shape[0]
    R = np.linalg.inv(z * np.eye(P) + Ph)
    return Ph, Po, R


# ---------------------------------------------------------------- sigma_V^2

def test_sigma_v2_scalar_golden():
    assert sigma_v2([[1.0], [1.0]], [[1.0]], 1.0) == pytest.approx(1 / 16, rel=1e-15)


def test_sigma_v2_zero_oos():
    S, _ = gaussian_split(10, 1, 5, 1)
    assert sigma_v2(S, np.zeros((4, 5)), 0.5) == 0.0


def test_sigma_v2_dense():
    S, So = gaussian_split(30, 20, 45, 2)
    z = 0.3
    Ph, Po, R = dense_parts(S, So, z)
    M = R @ Po @ R @ Ph
    assert sigma_v2(S, So, z) == pytest.approx(2 * np.trace(M @ M) / 30, rel=1e-9)


def test_sigma_v2_decays():
    S, So = gaussian_split(30, 30, 60, 3)
    cache = SplitSpectrum(S, So)
    vals = [sigma_v2(z=z, cache=cache) for z in (1.0, 10.0, 100.0, 1000.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-9


# ---------------------------------------------------------------- q_OOS

def test_q_oos_golden():
    out = q_oos([[1.0], [2.0]], [[1.0]], [1.0, 0.0], [1.0], 1.0)
    np.testing.assert_allclose(out["q"], [-12 / 49, -24 / 49], rtol=1e-14)
    assert out["norm2_scaled"] == pytest.approx(360 / 2401, rel=1e-14)


def test_q_oos_zero_targets():
    S, So = gaussian_split(10, 6, 8, 4)
    out = q_oos(S, So, np.zeros(10), np.zeros(6), 0.2)
    assert np.all(out["q"] == 0) and out["norm2_scaled"] == 0


def test_q_oos_dense():
    S, So = gaussian_split(25, 15, 40, 5)
    g = make_rng(50)
    y, yo = g.standard_normal(25), g.standard_normal(15)
    z = 0.7
    Ph, Po, R = dense_parts(S, So, z)
    b = R @ S.T @ y / 25
    q = S @ R @ So.T @ (So @ b - yo) / 15
    out = q_oos(S, So, y, yo, z)
    np.testing.assert_allclose(out["q"], q, rtol=1e-9, atol=1e-13)
    assert out["norm2_scaled"] == pytest.approx(q @ q / 25, rel=1e-9)


def test_q_oos_dimension_mismatch():
    S, So = gaussian_split(10, 6, 8, 4)
    with pytest.raises(InputError):
        q_oos(S, So, np.zeros(9), np.zeros(6), 0.2)


def test_q_oos_null_expectation():
    T, To, P = 200, 150, 300
    S, So = gaussian_split(T, To, P, 6)
    sp = SplitSpectrum(S, So)
    z = 0.4
    want = 0.5 * sp.sigma_v2(z) + (T / To) * sp.llg(z)
    vals = []
    for k in range(500):
        g = make_rng(600 + k)
        vals.append(sp.q_oos(g.standard_normal(T), g.standard_normal(To), z)[1])
    vals = np.array(vals)
    assert abs(vals.mean() - want) <= 3 * vals.std(ddof=1) / np.sqrt(vals.size)


# ---------------------------------------------------------------- sigma_I^2

def test_sigma_i2_clamp():
    assert sigma_i2_pivotal(1.5, 1.0, 1.0, 1.0, 10, 10) == 0.0
    assert sigma_i2_pivotal(0.1, 1.0, 1.0, 1.0, 10, 10) == 0.0
    assert sigma_i2_pivotal(2.0, 1.0, 1.0, 1.0, 10, 10) == pytest.approx(2.0)


def test_sigma_i2_matches_oracle():
    T = To = 300
    P = 600
    z = 0.5
    S, So = gaussian_split(T, To, P, 7)
    beta = make_rng(70).standard_normal(P) / np.sqrt(P)
    sp = SplitSpectrum(S, So)
    L, sv2 = sp.llg(z), sp.sigma_v2(z)
    Ph, Po, R = dense_parts(S, So, z)
    oracle = 4 * z * z * beta @ R @ Po @ R @ Ph @ R @ Po @ R @ beta
    est = []
    for k in range(500):
        g = make_rng(1000 + k)
        y = S @ beta + g.standard_normal(T)
        yo = So @ beta + g.standard_normal(To)
        est.append(sigma_i2_pivotal(sp.q_oos(y, yo, z)[1], 1.0, sv2, L, T, To))
    est = np.array(est)
    assert abs(est.mean() - oracle) <= 3 * est.std(ddof=1) / np.sqrt(est.size)


# ---------------------------------------------------------------- pivotal sigma

def test_quadratic_extremum():
    assert _quadratic_extremum(0.0, 0.0, 1.0, "max") == (0.0, 0.0)
    val, s = _quadratic_extremum(-1.0, 2.0, 5.0, "max")
    assert (val, s) == (1.0, 1.0)
    val, s = _quadratic_extremum(-1.0, 2.0, 5.0, "min")
    assert (val, s) == (-15.0, 5.0)
    assert _quadratic_extremum(3.0, 1.0, 0.0, "max") == (0.0, 0.0)


def _instance(seed, r2=0.0):
    T = To = 120
    P = 200
    S, So = gaussian_split(T, To, P, seed)
    g = make_rng(seed + 1)
    beta = np.sqrt(r2 / max(1e-12, 1 - r2)) * g.standard_normal(P) / np.sqrt(P)
    y = S @ beta + g.standard_normal(T)
    yo = So @ beta + g.standard_normal(To)
    return S, So, y, yo


def test_sigma_r2_hat_dense_oracle():
    S, So, y, yo = _instance(8, 0.3)
    T, To = S.shape[0], So.shape[0]
    zs = [effective_z(S, zr) for zr in (0.01, 0.1, 1.0, 10.0)]
    comps, sig = sigma_r2_hat(S, So, y, yo, zs)
    z = zs[0]
    Ph, Po, R = dense_parts(S, So, z)
    K = So @ R @ S.T / T
    pred = K @ y
    mse0 = np.mean(yo ** 2)
    mseh = np.mean((yo - pred) ** 2)
    ysb = yo @ pred / To
    L = np.sum(K * K) / To
    M = R @ Po @ R @ Ph
    sv2 = 2 * np.trace(M @ M) / T
    q = S @ R @ So.T @ (pred - yo) / To
    qn = q @ q / T
    r = To / T
    A2 = mse0 ** 2 * (2 - r * sv2 - 4 * (1 + L)) - 2 * mseh ** 2 + 4 * mse0 * mseh
    A1 = mse0 ** 2 * (4 * r * qn + 4 * mseh) + 4 * mseh ** 2 * mse0 - 8 * mse0 * mseh * (mse0 - ysb)
    cap = min(np.mean((yo - So @ np.linalg.solve(zz * np.eye(S.shape[1]) + Ph, S.T @ y / T)) ** 2)
              / (1 + np.sum((So @ np.linalg.solve(zz * np.eye(S.shape[1]) + Ph, S.T) / T) ** 2) / To)
              for zz in zs)
    grid = np.linspace(0, cap, 20001)
    best = np.max(A2 * grid ** 2 + A1 * grid)
    want = np.sqrt(max(0.0, best) / ((1 + L) ** 2 * mse0 ** 4))
    assert comps.A2 == pytest.approx(A2, rel=1e-9)
    assert comps.A1 == pytest.approx(A1, rel=1e-9)
    assert comps.sigma_eps2_cap == pytest.approx(cap, rel=1e-9)
    assert sig == pytest.approx(want, rel=1e-6)
    assert comps.sigma_v2 >= 0 and comps.sigma_mse2 >= 0


def test_sigma_r2_hat_min_mode_not_above_max():
    S, So, y, yo = _instance(9, 0.2)
    zs = [effective_z(S, 0.01), effective_z(S, 1.0)]
    _, hi = sigma_r2_hat(S, So, y, yo, zs, mode="max")
    _, lo = sigma_r2_hat(S, So, y, yo, zs, mode="min")
    assert 0 <= lo <= hi


def test_sigma_r2_hat_errors():
    S, So, y, yo = _instance(10)
    with pytest.raises(InputError):
        sigma_r2_hat(S, So, y, yo, [])
    with pytest.raises(InputError):
        sigma_r2_hat(S, So, y, np.zeros_like(yo), [1.0])
    with pytest.raises(InputError):
        sigma_r2_hat(S, So, y, yo, [1.0], mode="mid")


def test_sigma_r2_hat_is_pivotal_by_interface():
    params = list(inspect.signature(sigma_r2_hat).parameters)
    assert params[:5] == ["S", "S_oos", "y", "y_oos", "z_grid"]
    assert not {"beta", "f", "eps", "sigma_eps2", "Psi"} & set(params)


def test_lower_bound_point_scale_invariant_and_sigma_too():
    S, So, y, yo = _instance(11, 0.25)
    zs = [effective_z(S, 0.01), effective_z(S, 1.0)]
    _, a = sigma_r2_hat(S, So, y, yo, zs)
    _, b = sigma_r2_hat(S, So, 5 * y, 5 * yo, zs)
    assert a == pytest.approx(b, rel=1e-9)


@pytest.mark.slow
def test_sigma_r2_hat_calibrated_under_null():
    res = coverage_study(CoverageDesign(r2_grid=(0.0,), reps=200))
    cell = res["cells"][0]
    ratio = cell["mean_sigma_r2_hat"] / cell["sd_lower_bound_scaled"]
    assert 0.5 <= ratio <= 2.0


# ---------------------------------------------------------------- confidence bound

def test_confidence_golden():
    rep = confidence_lower_bound(0.30, 0.6, 400)
    assert rep.conf_lower == pytest.approx(0.2505, rel=1e-14)
    assert rep.level == 0.95 and rep.scale_T == 400


def test_confidence_zero_sigma_and_limit():
    assert confidence_lower_bound(0.3, 0.0, 50).conf_lower == 0.3
    assert confidence_lower_bound(0.3, 0.6, 10**12).conf_lower == pytest.approx(0.3, abs=1e-5)


def test_confidence_errors():
    with pytest.raises(InputError):
        confidence_lower_bound(0.3, 0.6, 100, level=1.0)
    with pytest.raises(InputError):
        confidence_lower_bound(0.3, -0.1, 100)
    with pytest.raises(InputError):
        confidence_lower_bound(0.3, 0.1, 0)


def test_critical_values():
    assert critical_value(0.95) == clt.CRITICAL_95 == 1.65
    assert critical_value(0.975) == pytest.approx(1.959963984540054, rel=1e-12)
