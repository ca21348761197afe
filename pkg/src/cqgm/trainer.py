"""Conditional model training: cosine-similarity loss minimized with SPSA."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .circuits import AnsatzConfig, ModelParams, condition_ops, conditional_model_ops
from .statevector import Circuit, QuantumState, probabilities, run, sample

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpsaGains:
    a: float = 0.2
    c0: float = 0.1
    A: float | None = None  # None -> 10% of max_iterations
    alpha_decay: float = 0.602
    gamma_decay: float = 0.101
    resamplings: int = 1  # perturbations averaged per gradient estimate
    blocking: bool = False  # reject steps that raise the loss by more than allowed_increase
    allowed_increase: float = 0.0
    max_step: float | None = None  # trust region: clip the update norm
    momentum: float = 0.0  # heavy-ball coefficient on the update
    averaging: int = 0  # also try the mean of the last `averaging` iterates

    def __post_init__(self):
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.averaging < 0:
            raise ValueError("averaging must be >= 0")
        if self.resamplings < 1:
            raise ValueError("resamplings must be >= 1")
        if self.a < 0 or self.c0 <= 0 or (self.A is not None and self.A < 0):
            raise ValueError("SPSA gains must be nonnegative (c0 positive)")


# Gains for the GBM ensemble (n=5, c=2, depth 4) within 2000 iterations.  The
# loss valley is badly conditioned; the trust region keeps early steps in the
# starting basin and momentum carries the iterate along the shallow directions.
TUNED_GAINS = SpsaGains(a=2.0, c0=0.1, A=200, resamplings=4, max_step=0.1, momentum=0.8, averaging=500)


@dataclass(frozen=True)
class TrainConfig:
    max_iterations: int = 2000
    precision: float = 1e-3
    spsa: SpsaGains = field(default_factory=SpsaGains)
    shots: int | None = None  # None -> exact marginals
    seed: int = 0
    init_scale: float = 0.1

    def __post_init__(self):
        if self.precision <= 0 or self.max_iterations < 1:
            raise ValueError("need precision > 0 and max_iterations >= 1")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be >= 1")


@dataclass(eq=False)
class TrainReport:
    final_params: ModelParams
    loss_history: list[float]
    per_condition_similarity: list[float]
    converged: bool
    iterations: int
    best_loss: float

    def to_dict(self, ansatz: AnsatzConfig | None = None, config: TrainConfig | None = None) -> dict:
        doc = {}
        if ansatz is not None or config is not None:
            doc["config"] = {"ansatz": ansatz.to_dict() if ansatz else None,
                             "train": asdict(config) if config else None}
        doc.update({"params": self.final_params.to_dict(), "loss_history": list(self.loss_history),
                    "similarities": list(self.per_condition_similarity),
                    "converged": self.converged, "iterations": self.iterations,
                    "best_loss": self.best_loss})
        return doc


def load_report(text: str) -> tuple[AnsatzConfig, ModelParams, dict]:
    doc = json.loads(text)
    cfg = AnsatzConfig(**doc["config"]["ansatz"])
    params = ModelParams(doc["params"]["alpha"], doc["params"]["theta"])
    params.validate(cfg)
    return cfg, params, doc


def cosine_similarity(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("vectors must have equal length")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("probability vectors must be nonnegative")
    norm = np.linalg.norm(p) * np.linalg.norm(q)
    if norm == 0:
        raise ValueError("cosine similarity of a zero vector is undefined")
    return float(np.dot(p, q) / norm)


def model_distributions(cfg: AnsatzConfig, params: ModelParams, T: int | None = None,
                        shots: int | None = None, rng: np.random.Generator | None = None,
                        sampler: Callable | None = None) -> np.ndarray:
    """Data-register distribution for each basis condition ``t < T``.

    With ``shots`` the rows are normalized measurement histograms.  ``sampler``
    replaces the whole per-condition simulation (used for noisy execution);
    it receives a circuit and returns a data-register distribution.
    """
    T = (1 << cfg.cond_qubits) if T is None else T
    data = range(cfg.data_qubits)
    cond = range(cfg.data_qubits, cfg.num_qubits)
    body = conditional_model_ops(cfg, params, data, cond)
    regs = {"data": (0, cfg.data_qubits)}
    out = np.empty((T, 1 << cfg.data_qubits))
    for t in range(T):
        circ = Circuit(cfg.num_qubits, condition_ops(cond, "basis", t) + body, regs)
        if sampler is not None:
            out[t] = sampler(circ)
            continue
        state = run(circ)
        if shots is None:
            out[t] = probabilities(state, "data")
        else:
            hist = sample(state, "data", shots, rng)
            row = np.zeros(out.shape[1])
            for k, v in hist.items():
                row[k] = v
            out[t] = row / shots
    return out


def similarities(model: np.ndarray, targets: np.ndarray) -> np.ndarray:
    out = []
    for m, t in zip(model, targets):
        try:
            out.append(cosine_similarity(m, t))
        except ValueError:
            out.append(0.0)
    return np.array(out)


def loss(params: ModelParams, targets: np.ndarray, cfg: AnsatzConfig, shots: int | None = None,
         rng: np.random.Generator | None = None, sampler: Callable | None = None) -> float:
    """``T - sum_t cos(model | t, target_t)``."""
    targets = np.atleast_2d(targets)
    T = targets.shape[0]
    if T > 1 << cfg.cond_qubits:
        raise ValueError(f"{T} targets need at least {int(np.ceil(np.log2(T)))} condition qubits")
    model = model_distributions(cfg, params, T, shots, rng, sampler)
    return float(T - similarities(model, targets).sum())


def spsa_step(x: np.ndarray, f: Callable[[np.ndarray], float], k: int, rng: np.random.Generator,
              gains: SpsaGains, A: float = 0.0) -> np.ndarray:
    """One simultaneous-perturbation update at iteration ``k`` (0-based)."""
    ak = gains.a / (k + 1 + A) ** gains.alpha_decay
    ck = gains.c0 / (k + 1) ** gains.gamma_decay
    grad = np.zeros_like(x)
    for _ in range(gains.resamplings):
        delta = rng.choice((-1.0, 1.0), size=x.shape)
        grad += (f(x + ck * delta) - f(x - ck * delta)) / (2 * ck) * delta
    step = ak * grad / gains.resamplings
    if gains.max_step is not None:
        norm = np.linalg.norm(step)
        if norm > gains.max_step:
            step *= gains.max_step / norm
    return x - step


def train(targets: np.ndarray, ansatz: AnsatzConfig, config: TrainConfig = TrainConfig(),
          init: ModelParams | None = None, sampler: Callable | None = None,
          callback: Callable[[int, float], None] | None = None) -> TrainReport:
    """Fit the conditional model to ``targets`` (one row per condition).

    The full sweep over conditions is one loss evaluation; convergence is
    checked once per sweep.  Returns the best parameters seen.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    rng = np.random.default_rng(config.seed)
    if init is None:
        s = config.init_scale
        init = ModelParams(rng.uniform(-s, s, ansatz.num_alpha), rng.uniform(-s, s, ansatz.num_theta))
    init.validate(ansatz)
    A = config.spsa.A if config.spsa.A is not None else 0.1 * config.max_iterations

    def f(vec: np.ndarray) -> float:
        return loss(ModelParams.from_vector(vec, ansatz), targets, ansatz, config.shots, rng, sampler)

    x = init.vector
    best_x, best = x.copy(), f(x)
    current = best
    history = [best]
    tail: list[np.ndarray] = []
    velocity = np.zeros_like(x)
    k = 0
    while best >= config.precision and k < config.max_iterations:
        proposal = spsa_step(x, f, k, rng, config.spsa, A)
        if config.spsa.momentum:
            velocity = config.spsa.momentum * velocity + (x - proposal)
            proposal = x - velocity
        k += 1
        eps = f(proposal)
        if config.spsa.blocking and eps > current + config.spsa.allowed_increase:
            eps = current
            velocity = np.zeros_like(x)
        else:
            x, current = proposal, eps
        if eps < best:
            best, best_x = eps, x.copy()
        history.append(eps)
        if config.spsa.averaging:
            tail.append(x.copy())
            del tail[:-config.spsa.averaging]
        if callback is not None:
            callback(k, eps)
        if k % 100 == 0:
            log.debug("iteration %d loss %.6f best %.6f", k, eps, best)
    if tail and best >= config.precision:
        mean_x = np.mean(tail, axis=0)
        eps = f(mean_x)
        if eps < best:
            best, best_x = eps, mean_x
    params = ModelParams.from_vector(best_x, ansatz)
    model = model_distributions(ansatz, params, targets.shape[0], sampler=sampler)
    return TrainReport(params, history, similarities(model, targets).tolist(),
                       bool(best < config.precision), k, float(best))
