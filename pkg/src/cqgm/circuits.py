"""Circuit builders for the conditional generative model and the pricing block.

Register layout of :func:`build_conditional_model`: the data register is
qubits ``0..n-1`` and the condition register is ``n..n+c-1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .statevector import (Circuit, CircuitError, GateOp, basis_permutation, cry, cx, h, mcry,
                          ry, x)


@dataclass(frozen=True)
class AnsatzConfig:
    data_qubits: int
    cond_qubits: int = 0
    layers: int = 3
    entangler: Literal["linear", "circular"] = "linear"

    def __post_init__(self):
        if self.data_qubits < 1 or self.cond_qubits < 0 or self.layers < 1:
            raise ValueError("need data_qubits >= 1, cond_qubits >= 0, layers >= 1")
        if self.entangler not in ("linear", "circular"):
            raise ValueError(f"unknown entangler {self.entangler!r}")

    @property
    def num_theta(self) -> int:
        return self.data_qubits * (self.layers + 1)

    @property
    def num_alpha(self) -> int:
        return self.cond_qubits * self.data_qubits

    @property
    def num_qubits(self) -> int:
        return self.data_qubits + self.cond_qubits

    def to_dict(self) -> dict:
        return {"data_qubits": self.data_qubits, "cond_qubits": self.cond_qubits,
                "layers": self.layers, "entangler": self.entangler}


@dataclass(frozen=True, eq=False)
class ModelParams:
    """CMAP angles ``alpha`` (indexed ``j * n + i`` for condition qubit ``j``,
    data qubit ``i``) and ansatz angles ``theta`` (indexed ``l * n + i``)."""

    alpha: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float).ravel())
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float).ravel())

    def validate(self, cfg: AnsatzConfig) -> None:
        if self.alpha.size != cfg.num_alpha or self.theta.size != cfg.num_theta:
            raise ValueError(f"expected {cfg.num_alpha} alpha and {cfg.num_theta} theta angles, "
                             f"got {self.alpha.size} and {self.theta.size}")

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.theta])

    @classmethod
    def from_vector(cls, vec: np.ndarray, cfg: AnsatzConfig) -> "ModelParams":
        return cls(vec[:cfg.num_alpha], vec[cfg.num_alpha:cfg.num_alpha + cfg.num_theta])

    @classmethod
    def zeros(cls, cfg: AnsatzConfig) -> "ModelParams":
        return cls(np.zeros(cfg.num_alpha), np.zeros(cfg.num_theta))

    def to_dict(self) -> dict:
        return {"alpha": self.alpha.tolist(), "theta": self.theta.tolist()}


def conditional_model_ops(cfg: AnsatzConfig, params: ModelParams, data: Sequence[int],
                          cond: Sequence[int]) -> list[GateOp]:
    """H wall, CMAP controlled rotations, then the RY/CX ansatz layers."""
    params.validate(cfg)
    n = cfg.data_qubits
    ops = [h(q) for q in data]
    for j, cq in enumerate(cond):
        for i, dq in enumerate(data):
            ops.append(cry(params.alpha[j * n + i], cq, dq))
    theta = params.theta.reshape(cfg.layers + 1, n)
    for layer in range(cfg.layers + 1):
        ops.extend(ry(theta[layer, i], dq) for i, dq in enumerate(data))
        if layer == cfg.layers:
            break
        ops.extend(cx(data[i], data[i + 1]) for i in range(n - 1))
        if cfg.entangler == "circular" and n > 2:
            ops.append(cx(data[-1], data[0]))
    return ops


def _registers(cfg: AnsatzConfig) -> dict:
    regs = {"data": (0, cfg.data_qubits)}
    if cfg.cond_qubits:
        regs["cond"] = (cfg.data_qubits, cfg.cond_qubits)
    return regs


def build_conditional_model(cfg: AnsatzConfig, params: ModelParams) -> Circuit:
    data = range(cfg.data_qubits)
    cond = range(cfg.data_qubits, cfg.num_qubits)
    return Circuit(cfg.num_qubits, conditional_model_ops(cfg, params, data, cond), _registers(cfg))


def condition_ops(cond: Sequence[int], mode: Literal["basis", "uniform"], t: int = 0) -> list[GateOp]:
    if mode == "uniform":
        return [h(q) for q in cond]
    if mode != "basis":
        raise ValueError(f"unknown condition mode {mode!r}")
    if not 0 <= t < 1 << len(cond):
        raise CircuitError(f"condition {t} does not fit in {len(cond)} qubits")
    return [x(q) for k, q in enumerate(cond) if (t >> k) & 1]


def prepare_condition(circuit: Circuit, mode: Literal["basis", "uniform"] = "basis", t: int = 0,
                      register: str = "cond") -> Circuit:
    """Prepend the condition-register preparation: X gates spelling ``t`` or an H wall."""
    if register not in circuit.registers:
        if mode == "basis" and t == 0:
            return circuit
        raise CircuitError(f"circuit has no {register!r} register")
    return circuit.prepend(condition_ops(circuit.qubits_of(register), mode, t))


def build_comparator(threshold: int, data: Sequence[int], flag: int) -> GateOp:
    """``|i>|f> -> |i>|f XOR (i >= threshold)>`` as an exact basis permutation."""
    n = len(data)
    if not 0 <= threshold < 1 << n:
        raise CircuitError(f"comparator threshold {threshold} outside [0, {1 << n})")

    def flip(local: int) -> int:
        i = local & ((1 << n) - 1)
        return local ^ ((i >= threshold) << n)

    return basis_permutation(flip, tuple(data) + (flag,), label=f"cmp>={threshold}")


def payoff_angle(y, c: float):
    """RY angle that puts ``sin(pi/4 + c (2y - 1))`` on the objective's |1>."""
    return 2.0 * (np.pi / 4 + c * (2.0 * np.asarray(y) - 1.0))


def build_payoff_rotations(y: Sequence[float], c: float, data: Sequence[int], flag: int,
                           objective: int) -> list[GateOp]:
    """One multi-controlled RY per data basis state (flag = 1) plus the floor rotation (flag = 0)."""
    y = np.asarray(y, dtype=float)
    n = len(data)
    if y.shape != (1 << n,):
        raise ValueError(f"need {1 << n} payoff values")
    if not 0 < c <= np.pi / 4:
        raise ValueError("c must lie in (0, pi/4]")
    if np.any(y < 0) or np.any(y > 1):
        raise ValueError("normalized payoff values must lie in [0, 1]")
    controls = tuple(data) + (flag,)
    ops = [mcry(payoff_angle(0.0, c), objective, (flag,), (0,), label="floor")]
    for i, yi in enumerate(y):
        bits = tuple((i >> k) & 1 for k in range(n)) + (1,)
        ops.append(mcry(payoff_angle(yi, c), objective, controls, bits, label=f"y[{i}]"))
    return ops


def exact_loader_ops(dists: np.ndarray, data: Sequence[int], cond: Sequence[int]) -> list[GateOp]:
    """Amplitude-encode ``sqrt(dists[t])`` on the data register for each condition ``t``.

    Binary-tree construction with real amplitudes: the most significant data
    qubit is split first, each split controlled on the already-fixed higher
    bits and on the condition bits.
    """
    dists = np.atleast_2d(np.asarray(dists, dtype=float))
    n = len(data)
    if dists.shape[1] != 1 << n:
        raise ValueError("distribution length does not match the data register")
    if dists.shape[0] > 1 << len(cond):
        raise ValueError("more distributions than condition basis states")
    ops = []
    for t, p in enumerate(dists):
        p = np.clip(p, 0, None)
        p = p / p.sum()
        cbits = tuple((t >> k) & 1 for k in range(len(cond)))
        for level in range(n - 1, -1, -1):
            # prefix = value of data bits above `level`
            blocks = p.reshape(1 << (n - 1 - level), 2, 1 << level).sum(axis=2)
            for prefix, (p0, p1) in enumerate(blocks):
                tot = p0 + p1
                if tot <= 0 or p1 <= 0:
                    continue
                angle = 2.0 * np.arctan2(np.sqrt(p1), np.sqrt(p0))
                hi = tuple(data[level + 1:])
                hbits = tuple((prefix >> k) & 1 for k in range(n - 1 - level))
                ops.append(mcry(angle, data[level], hi + tuple(cond), hbits + cbits))
    return ops


# ---------------------------------------------------------------- scheduling / DD


def schedule_layers(circuit: Circuit) -> list[list[int]]:
    """Greedy as-soon-as-possible layering; returns op indices per layer."""
    last = [-1] * circuit.num_qubits
    layers: list[list[int]] = []
    for k, op in enumerate(circuit.ops):
        layer = max(last[q] for q in op.qubits) + 1
        if layer == len(layers):
            layers.append([])
        layers[layer].append(k)
        for q in op.qubits:
            last[q] = layer
    return layers


def idle_windows(circuit: Circuit, layers: list[list[int]] | None = None,
                 min_length: int = 2) -> list[tuple[int, int, int]]:
    """Idle stretches ``(qubit, first_layer, last_layer)`` of at least ``min_length`` layers.

    Counted between a qubit's gates and from its last gate to the end of the
    circuit; a qubit is not idle before its first gate.
    """
    if layers is None:
        layers = schedule_layers(circuit)
    busy: dict[int, list[int]] = {}
    for li, idxs in enumerate(layers):
        for k in idxs:
            for q in circuit.ops[k].qubits:
                busy.setdefault(q, []).append(li)
    windows = []
    end = len(layers)
    for q in sorted(busy):
        occ = busy[q] + [end]
        for a, b in zip(occ, occ[1:]):
            if b - a - 1 >= min_length:
                windows.append((q, a + 1, b - 1))
    return windows


def dd_pass(circuit: Circuit, layers: list[list[int]] | None = None) -> Circuit:
    """Insert one X pair on every idle window of two or more layers."""
    if layers is None:
        layers = schedule_layers(circuit)
    windows = idle_windows(circuit, layers)
    if not windows:
        return circuit
    at: dict[int, list[GateOp]] = {}
    for q, first, last in windows:
        at.setdefault(first, []).append(x(q, label="dd"))
        at.setdefault(last, []).append(x(q, label="dd"))
    ops = []
    for li, idxs in enumerate(layers):
        ops.extend(circuit.ops[k] for k in idxs)
        ops.extend(at.get(li, ()))
    return Circuit(circuit.num_qubits, ops, circuit.registers)


def draw(circuit: Circuit) -> str:
    """Rough text diagram, one row per qubit and one column per layer."""
    layers = schedule_layers(circuit)
    names = {}
    for name, (start, size) in circuit.registers.items():
        for k in range(size):
            names[start + k] = f"{name}{k}"
    width = max([len(v) for v in names.values()] + [3])
    rows = [[] for _ in range(circuit.num_qubits)]
    for idxs in layers:
        cells = ["-"] * circuit.num_qubits
        for k in idxs:
            op = circuit.ops[k]
            tag = op.kind if op.kind not in ("RY", "CRY", "MCRY") else f"{op.kind}({op.angle:.2f})"
            for q in op.targets:
                cells[q] = tag
            for q, v in zip(op.controls, op.control_values):
                cells[q] = "@" if v else "o"
        w = max(len(s) for s in cells)
        for q in range(circuit.num_qubits):
            rows[q].append(cells[q].center(w, "-"))
    return "\n".join(f"{names.get(q, f'q{q}'):>{width}}: -{'-'.join(r)}-" for q, r in enumerate(rows))
