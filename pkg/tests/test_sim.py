import numpy as np
import pytest

from llglab import sim
from llglab.errors import InputError
from llglab.estimators import SplitSpectrum, effective_z
from llglab.features import generate_weights, make_rng, random_features
from llglab.llg import corrected_r2_lower_bound, r2_oos
from llglab.sim import (
    CoverageDesign, GarchParams, SemiSyntheticSpec, calibrate_gamma, coverage_study, garch11,
    garch_target, geometric_grid, mean_curve, semi_synthetic, substream_seed, voc_curve,
    voc_curves_multi, voc_experiment,
)


# ---------------------------------------------------------------- GARCH

def test_garch_initial_variance():
    y, s2 = garch11(5, return_variance=True)
    assert s2[0] == 10.0
    assert GarchParams().unconditional_variance == 10.0


def test_garch_recursion_and_fixed_point():
    p = GarchParams(seed=3)
    y, s2 = garch11(200, p, return_variance=True)
    np.testing.assert_allclose(s2[1:], p.omega + p.alpha * y[:-1] ** 2 + p.beta * s2[:-1], rtol=1e-15)
    assert p.omega + p.alpha * 10.0 + p.beta * 10.0 == 10.0
    assert np.all(s2 >= p.omega)


def test_garch_sample_variance():
    y = garch11(100_000, GarchParams(seed=11))
    assert 8.5 <= y.var() <= 11.5


def test_garch_nonstationary():
    with pytest.raises(InputError):
        GarchParams(alpha=0.5, beta=0.5)
    with pytest.raises(InputError):
        GarchParams(omega=0.0)


def test_garch_target_modes():
    raw = garch_target(300, GarchParams(seed=2))
    assert np.array_equal(raw, garch11(300, GarchParams(seed=2)))
    st = garch_target(300, GarchParams(seed=2), mode="standardized")
    assert st.shape == (300,) and np.all(np.abs(st) <= 3)
    with pytest.raises(InputError):
        garch_target(10, mode="log")


# ---------------------------------------------------------------- semi-synthetic

def test_calibrate_gamma_formula():
    assert calibrate_gamma(np.ones((4, 1)), "relu", np.ones(1), 0.0) == 0.0
    # relu(1) = 1, so mean g^2 = 1 and gamma = 1 at target 0.5
    assert calibrate_gamma(np.ones((4, 1)), "relu", np.ones(1), 0.5) == pytest.approx(1.0)
    with pytest.raises(InputError):
        calibrate_gamma(-np.ones((4, 1)), "relu", np.ones(1), 0.5)
    with pytest.raises(InputError):
        calibrate_gamma(np.ones((4, 1)), "relu", np.ones(1), 1.0)


def test_semi_synthetic_null():
    X = make_rng(1).standard_normal((10_000, 5))
    out = semi_synthetic(X, SemiSyntheticSpec(gamma=0.0))
    assert np.all(out["f"] == 0) and abs(out["r2_star_hat"]) <= 0.03
    assert np.array_equal(out["y"], out["eps"])


def test_semi_synthetic_structure():
    X = make_rng(2).standard_normal((50, 3))
    spec = SemiSyntheticSpec(gamma=1.5, activation="relu", w_seed=4, eps_seed=5)
    out = semi_synthetic(X, spec)
    W = make_rng(4).standard_normal(3)
    np.testing.assert_array_equal(out["f"], 1.5 * np.maximum(X @ W, 0))
    np.testing.assert_array_equal(out["y"], out["f"] + make_rng(5).standard_normal(50))


def test_semi_synthetic_calibrated_r2():
    hits = []
    for s in range(50):
        X = make_rng(100 + s).standard_normal((5000, 14))
        out = semi_synthetic(X, SemiSyntheticSpec(w_seed=200 + s, eps_seed=300 + s, target_r2=0.5))
        hits.append(out["r2_star_hat"])
    hits = np.array(hits)
    assert np.all(np.abs(hits - 0.5) <= 0.05)
    assert np.all((hits >= 0.45) & (hits <= 0.55))


def test_presets():
    assert sim.R2_PRESETS == (0.0, 0.25, 0.5, 0.75)
    for r2 in sim.R2_PRESETS:
        SemiSyntheticSpec(target_r2=r2)
    with pytest.raises(InputError):
        SemiSyntheticSpec(target_r2=1.0)
    with pytest.raises(InputError):
        SemiSyntheticSpec(gamma=-1.0)


# ---------------------------------------------------------------- complexity curves

def _design(seed, T=120, T_oos=80, d=5, r2=0.3):
    X = make_rng(seed).standard_normal((T + T_oos, d))
    y = semi_synthetic(X, SemiSyntheticSpec(w_seed=seed + 1, eps_seed=seed + 2, target_r2=r2))["y"]
    return X, y, T


def test_geometric_grid():
    g = geometric_grid()
    assert g[0] == 100 and g[-1] == 20000 and len(g) == 20
    assert all(b > a for a, b in zip(g, g[1:]))


def test_voc_structure():
    X, y, T = _design(1)
    cv = voc_curve(X, y, T, [100, 1000], seed=3)
    assert [p.P1 for p in cv.points] == [100, 1000]
    np.testing.assert_array_equal(cv.column("c"), [100 / T, 1000 / T])
    for p in cv.points:
        assert p.lower_bound == (p.r2_oos + p.llg) / (1 + p.llg)
        assert p.conf_lower <= p.lower_bound


def test_voc_matches_direct_computation():
    X, y, T = _design(2)
    cv = voc_curve(X, y, T, [30, 150, 400], seed=9, block=64)
    fmap = generate_weights(X.shape[1], 400, 9)
    S = random_features(X, fmap, T).values
    for p in cv.points:
        Sp = S[:, :p.P1]
        z = effective_z(Sp[:T], 0.01)
        sp = SplitSpectrum(Sp[:T], Sp[T:])
        r2 = r2_oos(y[T:], sp.predict_oos(y[:T], z))
        assert p.r2_oos == pytest.approx(r2, rel=1e-8, abs=1e-10)
        assert p.llg == pytest.approx(sp.llg(z), rel=1e-8)
        assert p.lower_bound == pytest.approx(corrected_r2_lower_bound(r2, sp.llg(z)), rel=1e-8, abs=1e-10)


def test_voc_block_size_irrelevant():
    X, y, T = _design(3)
    a = voc_curve(X, y, T, [50, 300], seed=1, block=7)
    b = voc_curve(X, y, T, [50, 300], seed=1, block=5000)
    np.testing.assert_allclose(a.column("lower_bound"), b.column("lower_bound"), rtol=1e-9, atol=1e-12)


def test_voc_scale_invariance():
    X, y, T = _design(4)
    a = voc_curve(X, y, T, [50, 300], seed=1)
    b = voc_curve(X, 2.0 * y, T, [50, 300], seed=1)
    c = voc_curve(X, 3.7 * y, T, [50, 300], seed=1)
    assert np.array_equal(a.column("lower_bound"), b.column("lower_bound"))
    np.testing.assert_allclose(a.column("lower_bound"), c.column("lower_bound"), rtol=1e-10, atol=1e-13)


def test_voc_multi_matches_single():
    X, y, T = _design(5)
    multi = voc_curves_multi(X, y, T, [40, 200], 2, z_refs=(0.01, 1.0))
    for zr in (0.01, 1.0):
        single = voc_curve(X, y, T, [40, 200], 2, z_ref=zr)
        assert [p.row() for p in multi[zr].points] == [p.row() for p in single.points]


def test_voc_flags_kept():
    X, y, T = _design(6, T=30, T_oos=40, r2=0.0)
    cv = voc_curve(X, y, T, [29, 30, 31], seed=0, z_ref=1e-8)
    assert len(cv.points) == 3
    assert any(p.flagged for p in cv.points)


def test_voc_bad_grid():
    X, y, T = _design(7)
    with pytest.raises(InputError):
        voc_curve(X, y, T, [100, 50], seed=0)
    with pytest.raises(InputError):
        voc_curve(X, y, T, [], seed=0)
    with pytest.raises(InputError):
        voc_curve(X, y, 0, [10], seed=0)


def test_voc_experiment_deterministic_and_thread_independent(monkeypatch):
    X, y, T = _design(8)
    monkeypatch.setenv("LLGLAB_THREADS", "1")
    a = voc_experiment(X, y, T, [20, 100], seeds=[1, 2, 3])
    monkeypatch.setenv("LLGLAB_THREADS", "3")
    b = voc_experiment(X, y, T, [20, 100], seeds=[1, 2, 3])
    assert len(a.curves) == 3
    for ca, cb in zip(a.curves, b.curves):
        assert [p.row() for p in ca.points] == [p.row() for p in cb.points]
    assert [p.row() for p in a.mean.points] == [p.row() for p in b.mean.points]
    assert a.mean.points[0].seed == -1
    want = np.mean([cv.column("lower_bound") for cv in a.curves], axis=0)
    np.testing.assert_allclose(a.mean.column("lower_bound"), want, rtol=1e-14)


def test_mean_curve_empty():
    with pytest.raises(InputError):
        mean_curve([])


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("LLGLAB_THREADS", "4")
    assert sim.worker_count(2) == 2 and sim.worker_count(10) == 4
    monkeypatch.setenv("LLGLAB_THREADS", "zero")
    with pytest.raises(InputError):
        sim.worker_count(3)


def test_substream_seeds_distinct():
    seeds = {substream_seed(0, c, r, k) for c in range(3) for r in range(20) for k in range(4)}
    assert len(seeds) == 240
    assert substream_seed(1, 2, 3) == substream_seed(1, 2, 3)


@pytest.mark.slow
def test_voc_null_mean_lower_bound():
    T = 400
    lbs = []
    for s in range(50):
        X = make_rng(100 + s).standard_normal((2 * T, 14))
        y = make_rng(200 + s).standard_normal(2 * T)
        lbs.append(voc_curve(X, y, T, [100, 400, 1600], s).column("lower_bound"))
    assert np.all(np.abs(np.mean(lbs, axis=0)) <= 0.05)


@pytest.mark.slow
def test_voc_semi_synthetic_full_grid():
    T = 400
    grid = geometric_grid()
    ok, best = 0, []
    for s in range(10):
        X = make_rng(300 + s).standard_normal((2 * T, 14))
        out = semi_synthetic(X, SemiSyntheticSpec(w_seed=400 + s, eps_seed=500 + s, target_r2=0.5),
                             slice(T, None))
        cv = voc_curve(X, out["y"], T, grid, s)
        ok += bool(np.all(cv.column("conf_lower") <= 0.5))
        best.append(cv.column("lower_bound").max())
    assert ok >= 9
    assert all(0.25 <= b <= 0.55 for b in best)


# ---------------------------------------------------------------- coverage

def test_coverage_needs_reps():
    with pytest.raises(InputError):
        CoverageDesign(reps=0)
    with pytest.raises(InputError):
        coverage_study(CoverageDesign(reps=10))


def test_coverage_small_run_shape():
    d = CoverageDesign(T=60, T_oos=60, P=120, d=4, r2_grid=(0.0, 0.5), reps=5)
    res = coverage_study(d, min_reps=5)
    assert len(res["cells"]) == 2 and len(res["draws"]) == 10
    for c in res["cells"]:
        assert 0.0 <= c["coverage_rate"] <= 1.0 and c["reps"] == 5
    again = coverage_study(d, min_reps=5)
    assert again["draws"] == res["draws"]
