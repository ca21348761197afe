"""Asian-option pricing with the conditional loader, comparator, payoff rotations and MLAE.

Qubit layout of the pricing circuit (``n`` data, ``c`` condition qubits)::

    data       0 .. n-1
    cond       n .. n+c-1
    flag       n+c
    objective  n+c+1
    work       n+c+2 ..   (idle comparator work qubits, kept for the qubit count)

Amplitude encoding: states below the strike threshold get
``sin(pi/4 - c)`` on the objective qubit, states at or above it get
``sin(pi/4 + c (2 y - 1))`` with ``y = (price - K) / (price_max - K)``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .amplitude_estimation import AEEstimate, AEOperator, Schedule, estimate, schedule_make
from .circuits import (AnsatzConfig, ModelParams, build_comparator, build_payoff_rotations,
                       condition_ops, conditional_model_ops, exact_loader_ops)
from .distributions import TargetEnsemble, mixture_payoff_oracle
from .statevector import Circuit
from .trainer import model_distributions


@dataclass(frozen=True, eq=False)
class PricingJob:
    """``model=None`` selects exact loading of ``ensemble`` (no training)."""

    ensemble: TargetEnsemble
    strike: float = 110.0
    c: float = 0.05
    schedule: Schedule = field(default_factory=lambda: schedule_make("EIS", 6, 100))
    model: tuple[AnsatzConfig, ModelParams] | None = None
    exact_ae: bool = False
    work_qubits: int | None = None  # None -> n - 1, the size of a ripple comparator's work register
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.c <= np.pi / 4:
            raise ValueError("c must lie in (0, pi/4]")
        T = self.ensemble.T
        cq = self.cond_qubits
        if self.model is not None:
            cfg, params = self.model
            params.validate(cfg)
            if cfg.data_qubits != self.data_qubits:
                raise ValueError("model data register does not match the price grid")
        if T != 1 << cq:
            raise ValueError(f"{T} timesteps do not fill a {cq}-qubit condition register")

    @property
    def data_qubits(self) -> int:
        return self.ensemble.grid.num_qubits

    @property
    def cond_qubits(self) -> int:
        if self.model is not None:
            return self.model[0].cond_qubits
        return int(np.ceil(np.log2(self.ensemble.T))) if self.ensemble.T > 1 else 0

    @property
    def num_work(self) -> int:
        return self.data_qubits - 1 if self.work_qubits is None else self.work_qubits


@dataclass(frozen=True)
class PricingResult:
    a_hat: float
    value: float
    reference_value: float
    training_gap: float
    target_value: float
    value_interval: tuple[float, float]
    threshold: int | None
    estimate: AEEstimate | None = None

    def to_dict(self) -> dict:
        return {"a_hat": self.a_hat, "value": self.value, "reference_value": self.reference_value,
                "training_gap": self.training_gap, "target_value": self.target_value,
                "value_interval": list(self.value_interval), "threshold": self.threshold,
                "estimate": self.estimate.to_dict() if self.estimate else None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def qubit_accounting(job: PricingJob) -> dict[str, int]:
    n, c = job.data_qubits, job.cond_qubits
    acc = {"data": n, "cond": c, "flag": 1, "objective": 1, "work": job.num_work}
    acc["total"] = sum(acc.values())
    return acc


def normalized_payoff(job: PricingJob) -> tuple[np.ndarray, int | None]:
    """Per-basis-state ``y`` in [0, 1] and the comparator threshold (None if no state pays)."""
    prices = job.ensemble.grid.prices
    L = job.ensemble.grid.threshold(job.strike)
    y = np.zeros_like(prices)
    span = prices[-1] - job.strike
    if L is None or span <= 0:
        return y, None
    y[L:] = (prices[L:] - job.strike) / span
    return y, L


def loaded_distributions(job: PricingJob) -> np.ndarray:
    if job.model is None:
        return job.ensemble.dists
    cfg, params = job.model
    return model_distributions(cfg, params, job.ensemble.T)


def build_pricing_circuit(job: PricingJob) -> AEOperator:
    n, cq = job.data_qubits, job.cond_qubits
    data = tuple(range(n))
    cond = tuple(range(n, n + cq))
    flag, objective = n + cq, n + cq + 1
    total = n + cq + 2 + job.num_work
    ops = condition_ops(cond, "uniform")
    if job.model is None:
        ops += exact_loader_ops(job.ensemble.dists, data, cond)
    else:
        ops += conditional_model_ops(*job.model, data, cond)
    y, L = normalized_payoff(job)
    if L is not None:
        ops.append(build_comparator(L, data, flag))
    ops += build_payoff_rotations(y, job.c, data, flag, objective)
    regs = {"data": (0, n), "flag": (flag, 1), "objective": (objective, 1)}
    if cq:
        regs["cond"] = (n, cq)
    if job.num_work:
        regs["work"] = (n + cq + 2, job.num_work)
    return AEOperator(Circuit(total, ops, regs), objective)


def classical_amplitude(mixture: np.ndarray, y: np.ndarray, c: float, L: int | None) -> float:
    """Objective-|1> probability computed directly from the loaded mixture."""
    yy = np.where(np.arange(y.size) >= (L if L is not None else y.size), y, 0.0)
    return float(np.dot(mixture, np.sin(np.pi / 4 + c * (2 * yy - 1)) ** 2))


def invert_amplitude(a_hat: float, c: float, price_max: float, strike: float,
                     threshold: int | None = 0) -> float:
    """Linear inversion of the objective amplitude back to a currency value (bias O(c^2))."""
    if threshold is None or price_max <= strike:
        return 0.0
    lo = np.sin(np.pi / 4 - c) ** 2
    hi = np.sin(np.pi / 4 + c) ** 2
    ey = (a_hat - lo) / (hi - lo)
    return float(max(ey, 0.0) * (price_max - strike))


def price(job: PricingJob) -> PricingResult:
    op = build_pricing_circuit(job)
    est = estimate(op, job.schedule, seed=job.seed, exact=job.exact_ae)
    prices = job.ensemble.grid.prices
    _, L = normalized_payoff(job)
    value = invert_amplitude(est.a_hat, job.c, prices[-1], job.strike, L)
    lo, hi = est.confidence_interval()
    interval = (invert_amplitude(lo, job.c, prices[-1], job.strike, L),
                invert_amplitude(hi, job.c, prices[-1], job.strike, L))
    loaded = TargetEnsemble(job.ensemble.grid, _renorm(loaded_distributions(job)), job.ensemble.times)
    reference = mixture_payoff_oracle(loaded, job.strike)
    target = mixture_payoff_oracle(job.ensemble, job.strike)
    return PricingResult(est.a_hat, value, reference, target - reference, target, interval, L, est)


def _renorm(d: np.ndarray) -> np.ndarray:
    d = np.clip(d, 0, None)
    return d / d.sum(axis=1, keepdims=True)


def c_bias_profile(c_values, job: PricingJob) -> list[tuple[float, float, float]]:
    """``(c, inverted value from the exact amplitude, |inverted - oracle|)`` per ``c``."""
    dists = _renorm(loaded_distributions(job))
    mixture = dists.mean(axis=0)
    y, L = normalized_payoff(job)
    prices = job.ensemble.grid.prices
    oracle = float(mixture @ np.maximum(prices - job.strike, 0.0))
    rows = []
    for c in c_values:
        if not 0 < c <= np.pi / 4:
            raise ValueError("c values must lie in (0, pi/4]")
        a = classical_amplitude(mixture, y, c, L)
        v = invert_amplitude(a, c, prices[-1], job.strike, L)
        rows.append((float(c), v, abs(v - oracle)))
    return rows


def c_bias_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["c", "value", "error"])
    for row in rows:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()
