"""Depolarizing noise by Monte Carlo Pauli trajectories.

After every gate, with probability ``p1`` (one-qubit gates) or ``p2``
(gates touching two or more qubits) a Pauli drawn uniformly from
``{I, X, Y, Z}`` is applied independently to each touched qubit.  With
probability 1 this fully depolarizes the touched qubits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .statevector import Circuit, apply_inplace, x, y, z

_PAULIS = {1: x, 2: y, 3: z}


@dataclass(frozen=True)
class NoiseModel:
    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        if not (0 <= self.p1 <= 1 and 0 <= self.p2 <= 1):
            raise ValueError("depolarizing probabilities must lie in [0, 1]")

    @property
    def is_noiseless(self) -> bool:
        return self.p1 == 0 and self.p2 == 0


def _run_trajectories(circuit: Circuit, noise: NoiseModel, trajectories: int,
                      rng: np.random.Generator) -> np.ndarray:
    n = circuit.num_qubits
    batch = np.zeros((trajectories, 1 << n), dtype=np.complex128)
    batch[:, 0] = 1.0
    for op in circuit.ops:
        apply_inplace(batch, op, n)
        p = noise.p1 if len(op.qubits) == 1 else noise.p2
        if p == 0:
            continue
        hit = np.nonzero(rng.random(trajectories) < p)[0]
        if hit.size == 0:
            continue
        for q in op.qubits:
            which = rng.integers(0, 4, hit.size)
            for code, gate in _PAULIS.items():
                rows = hit[which == code]
                if rows.size:
                    sub = batch[rows]
                    apply_inplace(sub, gate(q), n)
                    batch[rows] = sub
    return batch


def _register_probs(batch: np.ndarray, circuit: Circuit, register) -> np.ndarray:
    probs = np.abs(batch) ** 2
    if register is None:
        return probs
    start, size = circuit.registers[register] if isinstance(register, str) else register
    n = circuit.num_qubits
    return probs.reshape(-1, 1 << (n - start - size), 1 << size, 1 << start).sum(axis=(1, 3))


def noisy_probabilities(circuit: Circuit, noise: NoiseModel, trajectories: int = 1000,
                        seed: int | np.random.Generator | None = 0, register=None) -> np.ndarray:
    """Trajectory-averaged register distribution (no shot noise)."""
    rng = np.random.default_rng(seed)
    batch = _run_trajectories(circuit, noise, trajectories, rng)
    return _register_probs(batch, circuit, register).mean(axis=0)


def noisy_sample(circuit: Circuit, noise: NoiseModel, shots: int,
                 seed: int | np.random.Generator | None = 0, register=None,
                 trajectories: int | None = None) -> dict[int, int]:
    """Measurement histogram with shots spread evenly over the trajectories."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = np.random.default_rng(seed)
    B = min(shots, trajectories or 200)
    if noise.is_noiseless:
        B = 1
    probs = _register_probs(_run_trajectories(circuit, noise, B, rng), circuit, register)
    per = np.full(B, shots // B)
    per[: shots % B] += 1
    counts = np.zeros(probs.shape[1], dtype=np.int64)
    for k in range(B):
        row = probs[k] / probs[k].sum()
        counts += rng.multinomial(per[k], row)
    return {int(i): int(c) for i, c in enumerate(counts) if c}


def noisy_sampler(noise: NoiseModel, shots: int, rng: np.random.Generator,
                  trajectories: int | None = None, register: str = "data"):
    """Per-circuit sampler for :func:`cqgm.trainer.train` returning normalized histograms."""

    def run(circuit: Circuit) -> np.ndarray:
        hist = noisy_sample(circuit, noise, shots, rng, register, trajectories)
        size = 1 << circuit.registers[register][1]
        vec = np.zeros(size)
        for k, v in hist.items():
            vec[k] = v
        return vec / shots

    return run


def noisy_model_distributions(cfg, params, noise: NoiseModel, T: int | None = None,
                              trajectories: int = 2000, seed: int = 0) -> np.ndarray:
    """Trajectory-averaged data distribution per condition, free of shot noise."""
    from .trainer import model_distributions

    rng = np.random.default_rng(seed)
    return model_distributions(cfg, params, T, sampler=lambda c: noisy_probabilities(c, noise, trajectories, rng, "data"))
