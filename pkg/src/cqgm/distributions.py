"""GBM targets on a qubit price grid and classical option-value oracles."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class GbmParams:
    s0: float = 100.0
    mu: float = 0.1
    sigma: float = 0.5
    timesteps: int = 4
    horizon: float = 1.0

    def __post_init__(self):
        if self.s0 <= 0 or self.sigma <= 0 or self.timesteps < 1 or self.horizon <= 0:
            raise ValueError("need s0 > 0, sigma > 0, timesteps >= 1, horizon > 0")

    @property
    def times(self) -> np.ndarray:
        """Observation times, evenly spaced and ending at the horizon."""
        return self.horizon * np.arange(1, self.timesteps + 1) / self.timesteps


@dataclass(frozen=True)
class PriceGrid:
    """``bins`` equal cells on ``[min_price, max_price]``.

    ``convention="midpoint"`` (default) prices each basis state at its cell
    centre.  ``"endpoint"`` uses ``min + i (max - min) / (bins - 1)`` with
    cells centred on those points and clipped to the range.
    """

    min_price: float = 17.0
    max_price: float = 300.0
    bins: int = 32
    convention: Literal["midpoint", "endpoint"] = "midpoint"

    def __post_init__(self):
        if not self.min_price < self.max_price:
            raise ValueError("min_price must be below max_price")
        if self.bins < 2 or self.bins & (self.bins - 1):
            raise ValueError("bins must be a power of two >= 2")
        if self.convention not in ("midpoint", "endpoint"):
            raise ValueError(f"unknown grid convention {self.convention!r}")

    @property
    def num_qubits(self) -> int:
        return self.bins.bit_length() - 1

    @property
    def edges(self) -> np.ndarray:
        if self.convention == "midpoint":
            return np.linspace(self.min_price, self.max_price, self.bins + 1)
        p = self.prices
        return np.concatenate([[self.min_price], (p[:-1] + p[1:]) / 2, [self.max_price]])

    @property
    def prices(self) -> np.ndarray:
        if self.convention == "endpoint":
            return np.linspace(self.min_price, self.max_price, self.bins)
        e = self.edges
        return (e[:-1] + e[1:]) / 2

    def price(self, i: int) -> float:
        return float(self.prices[i])

    def index_of(self, value: float) -> int:
        """Cell holding ``value`` (clipped to the grid)."""
        return int(np.clip(np.searchsorted(self.edges, value, side="right") - 1, 0, self.bins - 1))

    def threshold(self, strike: float) -> int | None:
        """Smallest basis index whose price is at least ``strike`` (None if none)."""
        hit = np.nonzero(self.prices >= strike)[0]
        return int(hit[0]) if hit.size else None

    def to_dict(self) -> dict:
        return {"min_price": self.min_price, "max_price": self.max_price, "bins": self.bins,
                "convention": self.convention}


@dataclass(frozen=True, eq=False)
class TargetEnsemble:
    grid: PriceGrid
    dists: np.ndarray
    times: tuple[float, ...] = field(default=())

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.dists, dtype=float))
        object.__setattr__(self, "dists", d)
        if d.shape[1] != self.grid.bins:
            raise ValueError("distribution length must equal grid bins")
        if np.any(d < 0) or np.any(np.abs(d.sum(axis=1) - 1) > 1e-12):
            raise ValueError("every distribution must be nonnegative and sum to 1")

    @property
    def T(self) -> int:
        return self.dists.shape[0]

    @property
    def mixture(self) -> np.ndarray:
        return self.dists.mean(axis=0)

    # serialization -----------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({"grid": self.grid.to_dict(), "times": list(self.times),
                           "dists": self.dists.tolist()}, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TargetEnsemble":
        doc = json.loads(text)
        return cls(PriceGrid(**doc["grid"]), np.array(doc["dists"]), tuple(doc.get("times", ())))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin", "price"] + [f"p_t{t}" for t in range(self.T)])
        for i, price in enumerate(self.grid.prices):
            w.writerow([i, repr(float(price))] + [repr(float(v)) for v in self.dists[:, i]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, grid: PriceGrid = PriceGrid(), times: tuple[float, ...] = ()) -> "TargetEnsemble":
        """Inverse of :meth:`to_csv`; the price column must match ``grid``."""
        rows = list(csv.reader(io.StringIO(text)))
        body = np.array([[float(v) for v in r] for r in rows[1:]])
        if body.shape[0] != grid.bins or not np.allclose(body[:, 1], grid.prices, rtol=0, atol=1e-9):
            raise ValueError("CSV price column does not match the grid")
        return cls(grid, body[:, 2:].T.copy(), times)


def gbm_marginal(params: GbmParams, t: float) -> tuple[float, float]:
    """``(mean, std)`` of ``log S(t)``."""
    if t <= 0:
        raise ValueError("t must be positive")
    return (float(np.log(params.s0) + (params.mu - 0.5 * params.sigma ** 2) * t),
            float(params.sigma * np.sqrt(t)))


def lognormal(log_mean: float, log_std: float):
    return stats.lognorm(s=log_std, scale=np.exp(log_mean))


def discretize(density, grid: PriceGrid) -> np.ndarray:
    """Probability mass of each grid cell, renormalized over the grid range.

    ``density`` is anything with a ``cdf`` method (a frozen scipy
    distribution), or a float for a point mass.
    """
    if isinstance(density, (int, float)):
        out = np.zeros(grid.bins)
        out[grid.index_of(density)] = 1.0
        return out
    mass = np.diff(density.cdf(grid.edges))
    total = mass.sum()
    if not np.isfinite(total) or total <= 0:
        raise ValueError("density puts no mass on the grid")
    mass = np.clip(mass, 0, None)
    return mass / mass.sum()


def gbm_ensemble(params: GbmParams, grid: PriceGrid = PriceGrid(),
                 mode: Literal["analytic", "mc"] = "analytic", paths: int = 100_000,
                 seed: int | None = 0) -> TargetEnsemble:
    """Discretized GBM marginals at each observation time."""
    times = params.times
    if mode == "analytic":
        dists = [discretize(lognormal(*gbm_marginal(params, t)), grid) for t in times]
    elif mode == "mc":
        prices = simulate_gbm(params, paths, seed)
        dists = [bin_prices(prices[:, k], grid) for k in range(len(times))]
    else:
        raise ValueError(f"unknown ensemble mode {mode!r}")
    return TargetEnsemble(grid, np.array(dists), tuple(float(t) for t in times))


def bin_prices(prices: np.ndarray, grid: PriceGrid) -> np.ndarray:
    """Histogram of prices on the grid cells; prices off the grid are dropped."""
    counts, _ = np.histogram(prices, bins=grid.edges)
    if counts.sum() == 0:
        raise ValueError("no prices fall on the grid")
    return counts / counts.sum()


def simulate_gbm(params: GbmParams, paths: int, seed: int | None = 0,
                 chunk: int = 250_000) -> np.ndarray:
    """Exact GBM samples at the observation times, shape ``(paths, T)``.

    Chunks draw from independent child streams so the result depends only on
    ``seed`` and ``chunk``.
    """
    times = params.times
    dt = np.diff(np.concatenate([[0.0], times]))
    drift = (params.mu - 0.5 * params.sigma ** 2) * dt
    out = np.empty((paths, len(times)))
    streams = np.random.SeedSequence(seed).spawn(max(1, -(-paths // chunk)))
    for k, ss in enumerate(streams):
        lo, hi = k * chunk, min(paths, (k + 1) * chunk)
        z = np.random.default_rng(ss).standard_normal((hi - lo, len(times)))
        out[lo:hi] = params.s0 * np.exp(np.cumsum(drift + params.sigma * np.sqrt(dt) * z, axis=1))
    return out


def mc_asian_price(params: GbmParams, strike: float, paths: int = 100_000, seed: int | None = 0,
                   discount: bool = False, grid: PriceGrid | None = None) -> dict:
    """Monte Carlo Asian values.

    ``path_average_value`` is the arithmetic-average Asian call, and
    ``mixture_value`` is the time-average of the per-step call values, which
    is what the superposed condition register computes.  With ``grid``, prices
    are snapped to cell prices and off-grid samples are discarded per step
    (matching :func:`discretize`).
    """
    if paths < 1:
        raise ValueError("paths must be >= 1")
    s = simulate_gbm(params, paths, seed)
    times = params.times
    df = np.exp(-params.mu * times) if discount else np.ones_like(times)
    if grid is None:
        avg_payoff = np.maximum(s.mean(axis=1) - strike, 0) * df[-1]
        step_payoff = np.maximum(s - strike, 0) * df
        mix = step_payoff.mean(axis=1)
        return {"path_average_value": float(avg_payoff.mean()),
                "path_average_stderr": float(avg_payoff.std(ddof=1) / np.sqrt(paths)) if paths > 1 else 0.0,
                "mixture_value": float(mix.mean()),
                "mixture_stderr": float(mix.std(ddof=1) / np.sqrt(paths)) if paths > 1 else 0.0,
                "paths": paths}
    on = (s >= grid.min_price) & (s <= grid.max_price)
    snapped = grid.prices[np.clip(np.searchsorted(grid.edges, s, side="right") - 1, 0, grid.bins - 1)]
    step = np.maximum(snapped - strike, 0) * df
    cols = [step[on[:, k], k] for k in range(len(times))]
    per_step = np.array([c.mean() for c in cols])
    # steps are correlated; the mean of per-step errors bounds the mixture error
    se = np.mean([c.std(ddof=1) / np.sqrt(c.size) if c.size > 1 else 0.0 for c in cols])
    keep = on.all(axis=1)
    avg = np.maximum(snapped[keep].mean(axis=1) - strike, 0) * df[-1]
    return {"path_average_value": float(avg.mean()),
            "path_average_stderr": float(avg.std(ddof=1) / np.sqrt(avg.size)) if avg.size > 1 else 0.0,
            "mixture_value": float(per_step.mean()), "mixture_stderr": float(se), "paths": paths}


def mixture_payoff_oracle(ensemble: TargetEnsemble, strike: float) -> float:
    """Exact ``(1/T) sum_t sum_i p_t(i) max(price(i) - K, 0)``."""
    payoff = np.maximum(ensemble.grid.prices - strike, 0.0)
    return float(ensemble.dists.mean(axis=0) @ payoff)
