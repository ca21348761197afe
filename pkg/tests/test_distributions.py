import numpy as np
import pytest
from scipy import stats

from cqgm.distributions import (GbmParams, PriceGrid, TargetEnsemble, bin_prices, discretize, gbm_ensemble,
                                gbm_marginal, lognormal, mc_asian_price, mixture_payoff_oracle, simulate_gbm)


def test_gbm_marginal_plug_in():
    m, s = gbm_marginal(GbmParams(), 1.0)
    assert m == pytest.approx(np.log(100) - 0.025, abs=1e-14)
    assert s == pytest.approx(0.5, abs=1e-14)


def test_gbm_marginal_drift_cancellation():
    p = GbmParams(mu=0.5 ** 2 / 2)
    for t in (0.1, 0.5, 2.0):
        assert gbm_marginal(p, t)[0] == pytest.approx(np.log(100), abs=1e-13)
    with pytest.raises(ValueError):
        gbm_marginal(p, 0.0)


def test_mc_mean_matches_lognormal_identity():
    p = GbmParams(timesteps=1)
    s = simulate_gbm(p, 10 ** 6, seed=1)[:, 0]
    se = s.std(ddof=1) / np.sqrt(s.size)
    assert abs(s.mean() - 100 * np.exp(0.1)) < 3 * se


def test_point_mass_is_one_hot():
    g = PriceGrid()
    for k in (0, 5, 31):
        v = discretize(g.price(k), g)
        assert v[k] == 1 and v.sum() == 1


def test_uniform_density_near_uniform():
    g = PriceGrid()
    v = discretize(stats.uniform(17, 283), g)
    assert np.allclose(v, 1 / 32, atol=1e-12)


def test_discretization_conserves_mass():
    rng = np.random.default_rng(2)
    for _ in range(50):
        g = PriceGrid(float(rng.uniform(1, 50)), float(rng.uniform(60, 500)), int(2 ** rng.integers(1, 7)))
        d = lognormal(float(rng.uniform(3, 5)), float(rng.uniform(0.1, 1.5)))
        v = discretize(d, g)
        assert abs(v.sum() - 1) < 1e-12 and np.all(v >= 0)


def test_degenerate_density_rejected():
    with pytest.raises(ValueError):
        discretize(stats.norm(1e6, 1), PriceGrid())


def test_reference_instance_oracle():
    ens = gbm_ensemble(GbmParams())
    assert ens.dists.shape == (4, 32)
    assert np.allclose(ens.times, (0.25, 0.5, 0.75, 1.0))
    assert mixture_payoff_oracle(ens, 110) == pytest.approx(13.854, abs=0.005)


def test_grid_conventions():
    mid = PriceGrid()
    assert mid.edges[0] == 17 and mid.edges[-1] == 300
    assert mid.threshold(110) == 11 and mid.price(11) >= 110 > mid.price(10)
    end = PriceGrid(convention="endpoint")
    assert end.price(0) == 17 and end.price(31) == 300
    assert mid.threshold(1000) is None


def test_oracle_trivial_cases():
    g = PriceGrid()
    below = TargetEnsemble(g, discretize(g.price(3), g))
    assert mixture_payoff_oracle(below, 110) == 0
    top = TargetEnsemble(g, discretize(g.price(31), g))
    assert mixture_payoff_oracle(top, 110) == pytest.approx(g.price(31) - 110)


def test_mc_trivial_strikes():
    p = GbmParams()
    assert mc_asian_price(p, 1e9, 1000, seed=0)["mixture_value"] == 0
    r = mc_asian_price(p, 0.0, 200_000, seed=3)
    expected = np.mean(100 * np.exp(0.1 * p.times))
    assert abs(r["mixture_value"] - expected) < 4 * r["mixture_stderr"]


def test_binned_mc_converges_to_oracle():
    p, g = GbmParams(), PriceGrid()
    ens = gbm_ensemble(p, g)
    oracle = mixture_payoff_oracle(ens, 110)
    r = mc_asian_price(p, 110, 400_000, seed=4, grid=g)
    assert abs(r["mixture_value"] - oracle) < 4 * r["mixture_stderr"]
    hist = gbm_ensemble(p, g, mode="mc", paths=400_000, seed=4)
    assert abs(mixture_payoff_oracle(hist, 110) - oracle) < 4 * r["mixture_stderr"]


def test_mixture_dominates_path_average():
    rng = np.random.default_rng(5)
    for _ in range(20):
        p = GbmParams(s0=float(rng.uniform(50, 150)), mu=float(rng.uniform(-0.1, 0.2)),
                      sigma=float(rng.uniform(0.1, 0.8)), timesteps=int(rng.integers(2, 6)))
        r = mc_asian_price(p, float(rng.uniform(60, 140)), 20_000, seed=int(rng.integers(1 << 30)))
        tol = 3 * np.hypot(r["mixture_stderr"], r["path_average_stderr"])
        assert r["mixture_value"] >= r["path_average_value"] - tol


def test_discounting_lowers_value():
    p = GbmParams()
    a = mc_asian_price(p, 110, 50_000, seed=6)
    b = mc_asian_price(p, 110, 50_000, seed=6, discount=True)
    assert b["mixture_value"] < a["mixture_value"]


def test_ensemble_serialization_round_trips():
    ens = gbm_ensemble(GbmParams())
    again = TargetEnsemble.from_json(ens.to_json())
    assert again.to_json() == ens.to_json()
    assert TargetEnsemble.from_csv(ens.to_csv(), ens.grid, ens.times).to_csv() == ens.to_csv()
    head = ens.to_csv().splitlines()[0]
    assert head == "bin,price,p_t0,p_t1,p_t2,p_t3"


def test_single_timestep_ensemble():
    ens = gbm_ensemble(GbmParams(timesteps=1))
    assert ens.T == 1 and ens.to_csv().splitlines()[0] == "bin,price,p_t0"


def test_invalid_ensemble_rejected():
    with pytest.raises(ValueError):
        TargetEnsemble(PriceGrid(), np.full(32, 0.5))
    with pytest.raises(ValueError):
        PriceGrid(bins=24)


def test_simulation_deterministic():
    a = simulate_gbm(GbmParams(), 1000, seed=7)
    assert np.array_equal(a, simulate_gbm(GbmParams(), 1000, seed=7))
    assert bin_prices(a[:, 0], PriceGrid()).sum() == pytest.approx(1)
