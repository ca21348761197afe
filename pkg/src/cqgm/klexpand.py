"""Distribution of X1 = int_0^1 exp(sigma W_t) dt via MacLaurin terms and the KL series.

The Wiener process on [0, 1] is expanded as

    W(s) = sqrt(2)/pi * sum_k Z_k sin((k - 1/2) pi s) / (k - 1/2)

with i.i.d. standard normal ``Z_k``.  Integrating powers of this series
gives the MacLaurin terms used here:

    int W    = sqrt(2)/pi^2 * sum_k Z_k / (k - 1/2)^2
    int W^2  = 1/pi^2 * sum_k Z_k^2 / (k - 1/2)^2
    int W^3  = (sqrt(2)/pi)^3 * sum_{k1,k2,k3} Z Z Z / prod(k_i - 1/2) * Wt(k1, k2, k3)

where the cube of the series contributes the ``2^(3/2) / pi^3`` prefactor
and ``Wt`` is the triple sine integral of :func:`cubic_weight`.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, stats


@dataclass(frozen=True)
class KlConfig:
    sigma: float = 0.25
    maclaurin_order: int = 2
    kl_truncation: int = 50
    samples: int = 100_000
    support: tuple[float, float] = (0.0, 3.0)
    resolution: int = 4096
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.maclaurin_order <= 3:
            raise ValueError("maclaurin_order must be in [0, 3]")
        if self.kl_truncation < 1 or self.samples < 2 or self.resolution < 3:
            raise ValueError("need kl_truncation >= 1, samples >= 2, resolution >= 3")


@dataclass(frozen=True, eq=False)
class NumericPdf:
    """Density values on equally spaced abscissae."""

    x: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        d = np.asarray(self.density, dtype=float)
        if x.shape != d.shape or x.size < 2:
            raise ValueError("grid and density must match and hold at least two points")
        if d.min() < -1e-9 * max(d.max(), 1e-300):
            raise ValueError("density must be nonnegative")
        d = np.clip(d, 0.0, None)  # FFT round-off
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "density", d)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.x))

    def mean(self) -> float:
        return float(np.trapezoid(self.x * self.density, self.x) / self.integral())

    def cdf(self, at=None) -> np.ndarray:
        dens = self.density
        c = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2) * self.dx])
        c /= c[-1]
        return c if at is None else np.interp(at, self.x, c, left=0.0, right=1.0)

    def normalized(self) -> "NumericPdf":
        d = np.clip(self.density, 0.0, None)
        total = np.trapezoid(d, self.x)
        if total <= 0:
            raise ValueError("density has no mass")
        return NumericPdf(self.x, d / total)

    def on(self, x: np.ndarray) -> "NumericPdf":
        """Linear interpolation onto another grid, renormalized."""
        return NumericPdf(x, np.interp(x, self.x, self.density, left=0.0, right=0.0)).normalized()

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "density"])
        for a, b in zip(self.x, self.density):
            w.writerow([repr(float(a)), repr(float(b))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "NumericPdf":
        rows = list(csv.reader(io.StringIO(text)))[1:]
        arr = np.array(rows, dtype=float)
        return cls(arr[:, 0], arr[:, 1])


def point_mass(at: float, x: np.ndarray) -> NumericPdf:
    """Delta on the grid point nearest ``at`` (unit trapezoidal mass)."""
    x = np.asarray(x, dtype=float)
    k = int(np.argmin(np.abs(x - at)))
    if k == 0 or k == x.size - 1:
        raise ValueError("point mass must sit strictly inside the grid")
    d = np.zeros_like(x)
    d[k] = 1.0 / (x[1] - x[0])
    return NumericPdf(x, d)


def delta_kernel(at: float, dx: float) -> NumericPdf:
    """Three-point delta at ``at`` with spacing ``dx``."""
    return NumericPdf(at + dx * np.arange(-1, 2), np.array([0.0, 1.0 / dx, 0.0]))


def gaussian_pdf(mean: float, var: float, x: np.ndarray) -> NumericPdf:
    return NumericPdf(x, stats.norm.pdf(x, mean, np.sqrt(var)))


def convolve(f: NumericPdf, g: NumericPdf, rtol: float = 1e-6) -> NumericPdf:
    """Density of the sum of independent variables with densities ``f`` and ``g``."""
    if not np.isclose(f.dx, g.dx, rtol=rtol, atol=0):
        raise ValueError(f"grid spacings differ: {f.dx} vs {g.dx}")
    dens = signal.fftconvolve(f.density, g.density) * f.dx
    x = f.x[0] + g.x[0] + f.dx * np.arange(dens.size)
    return NumericPdf(x, dens).normalized()


def grid_for(lo: float, hi: float, dx: float) -> np.ndarray:
    """Grid with spacing ``dx`` covering ``[lo, hi]``, anchored at a multiple of ``dx``."""
    start = np.floor(lo / dx) * dx
    n = int(np.ceil((hi - start) / dx)) + 1
    return start + dx * np.arange(n)


def silverman_bandwidth(samples: np.ndarray) -> float:
    s = np.asarray(samples, dtype=float)
    iqr = np.subtract(*np.percentile(s, [75, 25]))
    spread = min(s.std(ddof=1), iqr / 1.34) if iqr > 0 else s.std(ddof=1)
    return float(0.9 * spread * s.size ** (-0.2))


def kde(samples: np.ndarray, x: np.ndarray, bandwidth: float | None = None) -> NumericPdf:
    """Gaussian KDE on an equally spaced grid (linear binning + FFT convolution)."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(samples, dtype=float)
    dx = x[1] - x[0]
    bw = silverman_bandwidth(s) if bandwidth is None else bandwidth
    if not bw > 0:
        raise ValueError("degenerate sample set; bandwidth is zero")
    pos = (s - x[0]) / dx
    inside = (pos >= 0) & (pos <= x.size - 1)
    pos = pos[inside]
    left = np.minimum(np.floor(pos).astype(np.int64), x.size - 2)
    frac = pos - left
    counts = np.bincount(left, 1 - frac, x.size) + np.bincount(left + 1, frac, x.size)
    half = int(np.ceil(5 * bw / dx))
    ker = stats.norm.pdf(np.arange(-half, half + 1) * dx, scale=bw)
    dens = signal.fftconvolve(counts, ker, mode="same") / s.size
    return NumericPdf(x, dens).normalized()


# ---------------------------------------------------------------- KL terms


def linear_term_distribution(horizon: float = 1.0) -> tuple[float, float]:
    """``int_0^T W dt ~ N(0, T^3 / 3)``; returns ``(mean, variance)``."""
    return 0.0, horizon ** 3 / 3.0


def _halves(K: int) -> np.ndarray:
    return np.arange(1, K + 1) - 0.5


def draw_z(K: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    return rng.standard_normal(K if size is None else (size, K))


def linear_term_from_z(z: np.ndarray) -> np.ndarray:
    hk = _halves(z.shape[-1])
    return np.sqrt(2.0) / np.pi ** 2 * (z / hk ** 2).sum(axis=-1)


def quadratic_term_from_z(z: np.ndarray) -> np.ndarray:
    hk = _halves(z.shape[-1])
    return (z ** 2 / hk ** 2).sum(axis=-1) / np.pi ** 2


def quadratic_term_sample(K: int, rng: np.random.Generator, size: int | None = None):
    if K < 1:
        raise ValueError("K must be >= 1")
    return quadratic_term_from_z(draw_z(K, rng, size))


def cubic_weight(k1, k2, k3):
    """``int_0^1 prod_i sin((k_i - 1/2) pi s) ds`` in closed form."""
    k1, k2, k3 = (np.asarray(k, dtype=float) for k in (k1, k2, k3))
    return (1 / (3 - 2 * (k1 + k2 + k3)) + 1 / (-1 + 2 * (k1 + k2 - k3))
            + 1 / (-1 + 2 * (k1 - k2 + k3)) + 1 / (-1 + 2 * (-k1 + k2 + k3))) / (2 * np.pi)


_CUBIC_CACHE: dict[int, np.ndarray] = {}


def cubic_tensor(K: int) -> np.ndarray:
    """``2^(3/2)/pi^3 * Wt(k1,k2,k3) / prod(k_i - 1/2)`` for ``k_i <= K``."""
    if K not in _CUBIC_CACHE:
        k = np.arange(1, K + 1)
        hk = k - 0.5
        w = cubic_weight(k[:, None, None], k[None, :, None], k[None, None, :])
        _CUBIC_CACHE[K] = (2 ** 1.5 / np.pi ** 3) * w / (hk[:, None, None] * hk[None, :, None] * hk[None, None, :])
    return _CUBIC_CACHE[K]


def cubic_term_from_z(z: np.ndarray, chunk: int = 2048) -> np.ndarray:
    z2 = np.atleast_2d(z)
    K = z2.shape[1]
    c = cubic_tensor(K).reshape(K, K * K)
    out = np.empty(z2.shape[0])
    for lo in range(0, z2.shape[0], chunk):
        zz = z2[lo:lo + chunk]
        y = (zz @ c).reshape(-1, K, K)
        out[lo:lo + chunk] = np.einsum("sjk,sj,sk->s", y, zz, zz)
    return out if z.ndim > 1 else float(out[0])


def cubic_term_sample(K: int, rng: np.random.Generator, size: int | None = None):
    if K < 1:
        raise ValueError("K must be >= 1")
    return cubic_term_from_z(draw_z(K, rng, size))


# ---------------------------------------------------------------- path oracle


def path_integrals(paths: int, steps: int, rng: np.random.Generator, sigma: float = 0.25,
                   chunk: int = 10_000) -> dict[str, np.ndarray]:
    """Trapezoidal ``int W^p dt`` (p = 1, 2, 3) and ``int exp(sigma W) dt`` from simulated paths."""
    dt = 1.0 / steps
    out = {k: np.empty(paths) for k in ("w1", "w2", "w3", "x1")}
    for lo in range(0, paths, chunk):
        m = min(chunk, paths - lo)
        w = np.zeros((m, steps + 1))
        np.cumsum(rng.standard_normal((m, steps)) * np.sqrt(dt), axis=1, out=w[:, 1:])
        for key, vals in (("w1", w), ("w2", w ** 2), ("w3", w ** 3), ("x1", np.exp(sigma * w))):
            out[key][lo:lo + m] = np.trapezoid(vals, dx=dt, axis=1)
    return out


def ks_distance(pdf: NumericPdf, samples: np.ndarray) -> float:
    """Kolmogorov-Smirnov statistic between a numeric pdf and an empirical sample."""
    s = np.sort(np.asarray(samples, dtype=float))
    n = s.size
    F = pdf.cdf(s)
    return float(max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n)))


def x1_mean(sigma: float) -> float:
    """``E[X1] = (exp(sigma^2/2) - 1) / (sigma^2/2)`` by Fubini."""
    h = sigma ** 2 / 2
    return float(np.expm1(h) / h)


# ---------------------------------------------------------------- X1 pipeline


@dataclass(frozen=True, eq=False)
class X1Approximation:
    shared: NumericPdf
    independent: NumericPdf
    samples: np.ndarray = field(repr=False)

    def divergence(self) -> float:
        """Sup-norm gap between the shared-randomness and independent-convolution CDFs."""
        return float(np.max(np.abs(self.shared.cdf() - self.independent.cdf(self.shared.x))))


def approximate_x1_pdf(cfg: KlConfig = KlConfig()) -> X1Approximation:
    """Truncated MacLaurin approximation of the X1 density.

    ``shared`` sums the terms built from the same KL coefficients per draw.
    ``independent`` convolves separately drawn term densities as if the terms
    were independent.
    """
    x = np.linspace(*cfg.support, cfg.resolution)
    if cfg.maclaurin_order == 0:
        delta = point_mass(1.0, x)
        return X1Approximation(delta, delta, np.ones(cfg.samples))
    rng = np.random.default_rng(cfg.seed)
    s = cfg.sigma
    z = draw_z(cfg.kl_truncation, rng, cfg.samples)
    terms = [s * linear_term_from_z(z)]
    if cfg.maclaurin_order >= 2:
        terms.append(s ** 2 / 2 * quadratic_term_from_z(z))
    if cfg.maclaurin_order >= 3:
        terms.append(s ** 3 / 6 * cubic_term_from_z(z))
    total = 1.0 + np.sum(terms, axis=0)
    shared = kde(total, x)

    dx = x[1] - x[0]
    _, var = linear_term_distribution()
    lin_sd = s * np.sqrt(var)
    acc = gaussian_pdf(1.0, s ** 2 * var, grid_for(1 - 8 * lin_sd, 1 + 8 * lin_sd, dx))
    z_ind = draw_z(cfg.kl_truncation, rng, cfg.samples)
    extra = []
    if cfg.maclaurin_order >= 2:
        extra.append(s ** 2 / 2 * quadratic_term_from_z(z_ind))
    if cfg.maclaurin_order >= 3:
        extra.append(s ** 3 / 6 * cubic_term_from_z(draw_z(cfg.kl_truncation, rng, cfg.samples)))
    for t in extra:
        pad = 6 * silverman_bandwidth(t)
        acc = convolve(acc, kde(t, grid_for(t.min() - pad, t.max() + pad, dx)))
    return X1Approximation(shared, acc.on(x), total)
