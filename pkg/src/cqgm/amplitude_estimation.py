"""Grover iterate, maximum-likelihood amplitude estimation, and a QPE reference."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy import optimize, special, stats

from .statevector import (Circuit, QuantumState, adjoint, apply_inplace, basis_permutation,
                          controlled, diagonal_sign, h, phase, probabilities, ry, run, z)

GRID_POINTS = 10_000
THETA_TOL = 1e-9
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class AEOperator:
    """``A`` with ``A|0> = sqrt(1-a)|psi0>|0> + sqrt(a)|psi1>|1>`` on ``objective``."""

    a_circuit: Circuit
    objective: int

    def __post_init__(self):
        if not 0 <= self.objective < self.a_circuit.num_qubits:
            raise ValueError("objective qubit outside the circuit")

    @property
    def num_qubits(self) -> int:
        return self.a_circuit.num_qubits

    def prepared(self) -> QuantumState:
        return run(self.a_circuit)

    def amplitude(self) -> float:
        """Exact ``a`` by statevector simulation."""
        return float(probabilities(self.prepared(), (self.objective, 1))[1])


def bernoulli_operator(a: float) -> AEOperator:
    """Single-qubit operator ``RY(2 arcsin sqrt(a))`` with exactly amplitude ``a``."""
    theta = np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))
    return AEOperator(Circuit(1, (ry(2 * theta, 0),), {"objective": (0, 1)}), 0)


@dataclass(frozen=True)
class Schedule:
    entries: tuple[tuple[int, int], ...]
    kind: str = "custom"

    def __post_init__(self):
        entries = tuple((int(m), int(n)) for m, n in self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise ValueError("schedule needs at least one entry")
        ms = [m for m, _ in entries]
        if any(m < 0 for m in ms) or any(n < 1 for _, n in entries):
            raise ValueError("need m_k >= 0 and N_k >= 1")
        if self.kind != "custom" and any(b < a for a, b in zip(ms, ms[1:])):
            raise ValueError("Grover powers must be nondecreasing")

    @property
    def powers(self) -> np.ndarray:
        return np.array([m for m, _ in self.entries])

    @property
    def shots(self) -> np.ndarray:
        return np.array([n for _, n in self.entries])

    @property
    def oracle_calls(self) -> int:
        return int(np.sum(self.shots * (2 * self.powers + 1)))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "entries": [list(e) for e in self.entries]}


def schedule_make(kind: Literal["LIS", "EIS", "PowerLaw"], depth: int, shots: int = 100,
                  beta: float = 2.0) -> Schedule:
    """LIS ``m_k = k``; EIS ``0, 1, 2, 4, ...``; PowerLaw ``m_k = ceil(k**beta)``."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    k = np.arange(depth)
    if kind == "LIS":
        ms = k
    elif kind == "EIS":
        ms = np.where(k == 0, 0, 2 ** np.maximum(k - 1, 0))
    elif kind == "PowerLaw":
        ms = np.ceil(k.astype(float) ** beta).astype(int)
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    return Schedule(tuple((int(m), shots) for m in ms), kind)


@dataclass(frozen=True)
class AEEstimate:
    a_hat: float
    theta_hat: float
    log_likelihood: float
    oracle_calls: int
    degenerate: bool = False
    theta_std: float = float("nan")
    schedule: Schedule | None = None
    hits: tuple[float, ...] = field(default=())

    def confidence_interval(self, level: float = 0.95) -> tuple[float, float]:
        """Fisher-information interval on ``a``."""
        zq = stats.norm.ppf(0.5 + level / 2)
        half = zq * abs(np.sin(2 * self.theta_hat)) * self.theta_std
        return max(0.0, self.a_hat - half), min(1.0, self.a_hat + half)

    def to_dict(self) -> dict:
        return {"a_hat": self.a_hat, "theta_hat": self.theta_hat,
                "log_likelihood": self.log_likelihood, "oracle_calls": self.oracle_calls,
                "degenerate": self.degenerate, "theta_std": self.theta_std,
                "schedule": self.schedule.to_dict() if self.schedule else None,
                "hits": list(self.hits)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "AEEstimate":
        d = json.loads(text)
        sched = d.pop("schedule")
        if sched is not None:
            sched = Schedule(tuple(tuple(e) for e in sched["entries"]), sched["kind"])
        return cls(schedule=sched, hits=tuple(d.pop("hits")), **d)


# ---------------------------------------------------------------- operators


def grover_iterate(op: AEOperator) -> Circuit:
    """``Q = A S0 A^dagger S_psi`` (applied right to left)."""
    n = op.num_qubits
    s_psi = diagonal_sign([1, -1], (op.objective,), label="S_psi")
    s_zero = diagonal_sign(lambda i: -1 if i == 0 else 1, tuple(range(n)), label="S_0")
    a = op.a_circuit
    return Circuit(n, (s_psi,) + a.inverse().ops + (s_zero,) + a.ops, a.registers)


def good_probabilities(op: AEOperator, powers: Sequence[int]) -> np.ndarray:
    """Exact objective-|1> probability after ``Q^m A|0>`` for each ``m`` in ``powers``.

    Powers are visited in increasing order and the state is reused, so the
    total cost is ``max(powers)`` Grover iterates.
    """
    q_ops = grover_iterate(op).ops
    n = op.num_qubits
    state = op.prepared().amplitudes
    done = 0
    cache: dict[int, float] = {}
    for m in sorted(set(int(m) for m in powers)):
        for _ in range(m - done):
            for g in q_ops:
                apply_inplace(state, g, n)
        done = m
        probs = np.abs(state) ** 2
        cache[m] = float(probs[(np.arange(probs.size) >> op.objective) & 1 == 1].sum())
    return np.array([cache[int(m)] for m in powers])


def run_schedule(op: AEOperator, schedule: Schedule, seed: int | None = 0,
                 exact: bool = False) -> np.ndarray:
    """Hit counts ``h_k`` per schedule entry; exact mode returns ``N_k P_k`` unrounded."""
    p = np.clip(good_probabilities(op, schedule.powers), 0.0, 1.0)
    if exact:
        return schedule.shots * p
    return np.random.default_rng(seed).binomial(schedule.shots, p).astype(float)


# ---------------------------------------------------------------- likelihood


def log_likelihood(theta, hits, schedule: Schedule) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    hits = np.asarray(hits, dtype=float)
    m = schedule.powers[:, None]
    n = schedule.shots[:, None]
    p = np.sin((2 * m + 1) * theta[None, :]) ** 2
    h = hits[:, None]
    return (special.xlogy(h, p) + special.xlogy(n - h, 1.0 - p)).sum(axis=0)


def _score(theta: float, hits, schedule: Schedule) -> float:
    """Derivative of the log-likelihood in ``theta``."""
    w = 2 * schedule.powers + 1
    u = w * theta
    s, c = np.sin(u), np.cos(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = 2 * w * (np.where(hits > 0, hits * c / s, 0.0)
                         - np.where(schedule.shots - hits > 0, (schedule.shots - hits) * s / c, 0.0))
    return float(terms.sum())


def _golden_max(f, lo: float, hi: float, tol: float) -> float:
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(x2)
    return (lo + hi) / 2


def mle_estimate(hits, schedule: Schedule, grid_points: int = GRID_POINTS) -> AEEstimate:
    """Maximize the likelihood over ``theta`` in ``[0, pi/2]``: grid search, then golden section."""
    hits = np.asarray(hits, dtype=float)
    if hits.shape != (len(schedule.entries),):
        raise ValueError("one hit count per schedule entry")
    if np.any(hits < 0) or np.any(hits > schedule.shots):
        raise ValueError("hit counts must lie in [0, N_k]")
    grid = np.linspace(0.0, np.pi / 2, grid_points)
    ll = log_likelihood(grid, hits, schedule)
    k = int(np.nanargmax(ll))
    step = grid[1] - grid[0]
    lo, hi = max(0.0, grid[k] - step), min(np.pi / 2, grid[k] + step)
    theta = _golden_max(lambda t: float(log_likelihood(t, hits, schedule)[0]), lo, hi, THETA_TOL)
    # near the peak the likelihood is flat to machine precision; finish on the score equation
    g_lo, g_hi = _score(lo, hits, schedule), _score(hi, hits, schedule)
    if np.isfinite(g_lo) and np.isfinite(g_hi) and g_lo > 0 > g_hi:
        theta = optimize.brentq(_score, lo, hi, args=(hits, schedule), xtol=1e-15, rtol=4 * np.finfo(float).eps)
    # keep a boundary grid point if refinement cannot beat it
    cand = np.array([grid[k], theta])
    vals = log_likelihood(cand, hits, schedule)
    theta = float(cand[int(np.argmax(vals))])
    degenerate = bool(np.all(hits == 0) or np.all(hits == schedule.shots))
    fisher = 4.0 * np.sum(schedule.shots * (2 * schedule.powers + 1) ** 2)
    return AEEstimate(a_hat=float(np.sin(theta) ** 2), theta_hat=theta,
                      log_likelihood=float(vals.max()), oracle_calls=schedule.oracle_calls,
                      degenerate=degenerate, theta_std=float(1 / np.sqrt(fisher)),
                      schedule=schedule, hits=tuple(float(v) for v in hits))


def estimate(op: AEOperator, schedule: Schedule, seed: int | None = 0, exact: bool = False) -> AEEstimate:
    return mle_estimate(run_schedule(op, schedule, seed, exact), schedule)


# ---------------------------------------------------------------- QPE


def qft_ops(qubits: Sequence[int], inverse: bool = False) -> list:
    """QFT on a register (``qubits[0]`` least significant): ``|y> -> sum_k e^{2 pi i yk/N}|k>/sqrt(N)``."""
    qubits = tuple(qubits)
    n = len(qubits)
    ops = []
    for j in reversed(range(n)):
        ops.append(h(qubits[j]))
        for k in reversed(range(j)):
            ops.append(phase(np.pi / 2 ** (j - k), qubits[j], (qubits[k],)))
    rev = lambda i: int(format(i, f"0{n}b")[::-1], 2)  # noqa: E731
    ops.append(basis_permutation(rev, qubits, label="bitrev"))
    if inverse:
        ops = [adjoint(o) for o in reversed(ops)]
    return ops


def qpe_reference(op: AEOperator, precision_qubits: int) -> tuple[float, np.ndarray]:
    """Canonical phase-estimation AE; returns ``(a_hat, distribution over y)``."""
    m = precision_qubits
    if not 1 <= m <= 8:
        raise ValueError("precision_qubits must be in [1, 8]")
    n = op.num_qubits
    ctrl = tuple(range(n, n + m))
    q_ops = grover_iterate(op).ops
    ops = list(op.a_circuit.ops) + [h(c) for c in ctrl]
    for j, c in enumerate(ctrl):
        # Z on the control cancels the -1 global phase of this Q convention
        block = [controlled(g, c) for g in q_ops] + [z(c)]
        ops.extend(block * (1 << j))
    ops.extend(qft_ops(ctrl, inverse=True))
    circ = Circuit(n + m, ops, {"eval": (n, m)})
    dist = probabilities(run(circ), "eval")
    y = int(np.argmax(dist))
    return float(np.sin(np.pi * y / (1 << m)) ** 2), dist
