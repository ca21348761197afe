"""Dense statevector simulation.

Conventions: qubit ``q`` is bit ``q`` of the basis index, so qubit 0 is the
least significant bit.  A register occupying qubits ``[start, start+size)``
reads its basis index as ``(i >> start) & (2**size - 1)``.  For multi-qubit
table gates (permutations, diagonal signs) ``targets[0]`` is the least
significant bit of the local index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import _kernels

MAX_QUBITS = 24

_SQRT1_2 = 1.0 / np.sqrt(2.0)
_FIXED = {
    "H": (_SQRT1_2, _SQRT1_2, _SQRT1_2, -_SQRT1_2),
    "X": (0.0, 1.0, 1.0, 0.0),
    "Y": (0.0, -1j, 1j, 0.0),
    "Z": (1.0, 0.0, 0.0, -1.0),
}
_ROTATIONS = ("RY", "CRY", "MCRY")
KINDS = ("H", "X", "Y", "Z", "RY", "CX", "CRY", "MCRY", "P", "PERM", "DIAG")


class CircuitError(ValueError):
    """Invalid gate, register or circuit construction."""


@dataclass(frozen=True, eq=False)
class GateOp:
    """One gate: a kind, target qubits and (optionally) controls.

    ``table`` holds the local permutation (``PERM``) or the ±1 signs
    (``DIAG``) over the ``2**len(targets)`` basis states of the targets.
    """

    kind: str
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    control_values: tuple[int, ...] = ()
    angle: float = 0.0
    table: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        if len(set(self.targets)) != len(self.targets) or not self.targets:
            raise CircuitError("targets must be distinct and non-empty")
        if len(set(self.controls)) != len(self.controls):
            raise CircuitError("controls must be distinct")
        if set(self.targets) & set(self.controls):
            raise CircuitError("target and control qubits overlap")
        if len(self.control_values) != len(self.controls):
            raise CircuitError("one control value per control qubit")
        if any(v not in (0, 1) for v in self.control_values):
            raise CircuitError("control values must be 0 or 1")
        if min(self.qubits) < 0:
            raise CircuitError("negative qubit index")
        if self.kind in ("PERM", "DIAG"):
            size = 1 << len(self.targets)
            if self.table is None or self.table.shape != (size,):
                raise CircuitError(f"{self.kind} table must have length {size}")
            if self.kind == "PERM" and not np.array_equal(np.sort(self.table), np.arange(size)):
                raise CircuitError("basis permutation is not a bijection")
            if self.kind == "DIAG" and not np.all(np.abs(self.table) == 1):
                raise CircuitError("diagonal sign entries must be +1 or -1")
        elif len(self.targets) != 1:
            raise CircuitError(f"{self.kind} acts on exactly one target")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets + self.controls

    def matrix(self) -> tuple[complex, complex, complex, complex]:
        if self.kind in _ROTATIONS:
            c, s = np.cos(self.angle / 2), np.sin(self.angle / 2)
            return (c, -s, s, c)
        if self.kind == "CX":
            return _FIXED["X"]
        if self.kind == "P":
            return (1.0, 0.0, 0.0, np.exp(1j * self.angle))
        return _FIXED[self.kind]

    def control_mask(self) -> tuple[int, int]:
        mask = val = 0
        for q, v in zip(self.controls, self.control_values):
            mask |= 1 << q
            val |= v << q
        return mask, val

    def lifted(self, num_qubits: int) -> np.ndarray:
        """Full-register permutation or diagonal for table gates (cached)."""
        cache = self.__dict__.setdefault("_lift", {})
        if num_qubits not in cache:
            idx = np.arange(1 << num_qubits, dtype=np.int64)
            local = np.zeros_like(idx)
            for k, q in enumerate(self.targets):
                local |= ((idx >> q) & 1) << k
            ok = np.ones(idx.shape, dtype=bool)
            for q, v in zip(self.controls, self.control_values):
                ok &= ((idx >> q) & 1) == v
            if self.kind == "PERM":
                new_local = self.table[local]
                out = idx.copy()
                for k, q in enumerate(self.targets):
                    out &= ~(1 << q)
                    out |= ((new_local >> k) & 1) << q
                out = np.where(ok, out, idx)
            else:
                out = np.where(ok, self.table[local], 1).astype(np.complex128)
            cache[num_qubits] = out
        return cache[num_qubits]

    def __repr__(self):
        parts = [self.kind]
        if self.kind in _ROTATIONS or self.kind == "P":
            parts.append(f"{self.angle:.4f}")
        parts.append(f"t={list(self.targets)}")
        if self.controls:
            parts.append(f"c={list(self.controls)}:{''.join(map(str, self.control_values))}")
        if self.label:
            parts.append(self.label)
        return f"GateOp({' '.join(parts)})"


# ------------------------------------------------------------------ factories


def h(q: int) -> GateOp:
    return GateOp("H", (q,))


def x(q: int, label: str = "") -> GateOp:
    return GateOp("X", (q,), label=label)


def y(q: int) -> GateOp:
    return GateOp("Y", (q,))


def z(q: int) -> GateOp:
    return GateOp("Z", (q,))


def ry(angle: float, q: int) -> GateOp:
    return GateOp("RY", (q,), angle=float(angle))


def cx(control: int, target: int) -> GateOp:
    return GateOp("CX", (target,), (control,), (1,))


def cry(angle: float, control: int, target: int) -> GateOp:
    return GateOp("CRY", (target,), (control,), (1,), angle=float(angle))


def mcry(angle: float, target: int, controls: Sequence[int], values: Sequence[int] | None = None,
         label: str = "") -> GateOp:
    controls = tuple(controls)
    values = tuple(values) if values is not None else (1,) * len(controls)
    return GateOp("MCRY", (target,), controls, values, angle=float(angle), label=label)


def basis_permutation(fn: Callable[[int], int] | Sequence[int], targets: Sequence[int],
                      label: str = "") -> GateOp:
    """Permutation of the targets' basis states given as a function or table."""
    size = 1 << len(targets)
    table = np.array([fn(i) for i in range(size)] if callable(fn) else fn, dtype=np.int64)
    return GateOp("PERM", tuple(targets), table=table, label=label)


def diagonal_sign(pred: Callable[[int], int] | Sequence[int], targets: Sequence[int],
                  label: str = "") -> GateOp:
    """Diagonal ±1 gate; ``pred(i)`` gives the sign of local basis state ``i``."""
    size = 1 << len(targets)
    table = np.array([pred(i) for i in range(size)] if callable(pred) else pred, dtype=np.int64)
    return GateOp("DIAG", tuple(targets), table=table, label=label)


def phase(angle: float, q: int, controls: Sequence[int] = ()) -> GateOp:
    """``diag(1, exp(i angle))`` on ``q``, optionally controlled."""
    return GateOp("P", (q,), tuple(controls), (1,) * len(controls), angle=float(angle))


def controlled(op: GateOp, control: int) -> GateOp:
    """``op`` with one extra control qubit (active on |1>)."""
    return GateOp(op.kind, op.targets, op.controls + (control,), op.control_values + (1,),
                  op.angle, op.table, op.label)


def adjoint(op: GateOp) -> GateOp:
    if op.kind in _ROTATIONS or op.kind == "P":
        return GateOp(op.kind, op.targets, op.controls, op.control_values, -op.angle, label=op.label)
    if op.kind == "PERM":
        return GateOp("PERM", op.targets, op.controls, op.control_values,
                      table=np.argsort(op.table), label=op.label)
    return op


# ------------------------------------------------------------------ containers


@dataclass(frozen=True, eq=False)
class Circuit:
    """Ordered gate list over ``num_qubits`` with named contiguous registers.

    ``registers`` maps a name to ``(start, size)``.
    """

    num_qubits: int
    ops: tuple[GateOp, ...] = ()
    registers: Mapping[str, tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.num_qubits <= MAX_QUBITS:
            raise CircuitError(f"num_qubits must be in [1, {MAX_QUBITS}]")
        object.__setattr__(self, "ops", tuple(self.ops))
        object.__setattr__(self, "registers", dict(self.registers))
        used: set[int] = set()
        for name, (start, size) in self.registers.items():
            span = set(range(start, start + size))
            if size < 0 or start < 0 or start + size > self.num_qubits:
                raise CircuitError(f"register {name!r} out of range")
            if span & used:
                raise CircuitError(f"register {name!r} overlaps another register")
            used |= span
        for op in self.ops:
            _check_op(op, self.num_qubits)

    def extend(self, ops: Iterable[GateOp]) -> "Circuit":
        return Circuit(self.num_qubits, self.ops + tuple(ops), self.registers)

    def prepend(self, ops: Iterable[GateOp]) -> "Circuit":
        return Circuit(self.num_qubits, tuple(ops) + self.ops, self.registers)

    def inverse(self) -> "Circuit":
        return Circuit(self.num_qubits, tuple(adjoint(op) for op in reversed(self.ops)), self.registers)

    def qubits_of(self, name: str) -> range:
        try:
            start, size = self.registers[name]
        except KeyError:
            raise CircuitError(f"unknown register {name!r}") from None
        return range(start, start + size)

    def __len__(self):
        return len(self.ops)


@dataclass(eq=False)
class QuantumState:
    num_qubits: int
    amplitudes: np.ndarray
    registers: Mapping[str, tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.num_qubits,):
            raise CircuitError("amplitude vector length must be 2**num_qubits")

    @classmethod
    def zero(cls, num_qubits: int, registers=None) -> "QuantumState":
        return cls.basis(num_qubits, 0, registers)

    @classmethod
    def basis(cls, num_qubits: int, index: int, registers=None) -> "QuantumState":
        if not 0 <= index < 1 << num_qubits:
            raise CircuitError("basis index out of range")
        amps = np.zeros(1 << num_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return cls(num_qubits, amps, dict(registers or {}))

    def copy(self) -> "QuantumState":
        return QuantumState(self.num_qubits, self.amplitudes.copy(), dict(self.registers))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


# ------------------------------------------------------------------ operations


def _check_op(op: GateOp, num_qubits: int) -> None:
    if max(op.qubits) >= num_qubits:
        raise CircuitError(f"{op!r} touches a qubit outside [0, {num_qubits})")


def apply_inplace(amps: np.ndarray, op: GateOp, num_qubits: int) -> np.ndarray:
    """Apply ``op`` to a raw amplitude array (1-D, or 2-D batch of rows)."""
    if op.kind == "PERM":
        return _kernels.apply_permutation(amps, op.lifted(num_qubits))
    if op.kind == "DIAG":
        return _kernels.apply_diagonal(amps, op.lifted(num_qubits))
    cmask, cval = op.control_mask()
    m00, m01, m10, m11 = op.matrix()
    return _kernels.apply_1q(amps, op.targets[0], m00, m01, m10, m11, cmask, cval)


def apply(state: QuantumState, op: GateOp) -> QuantumState:
    """Return a new state with ``op`` applied."""
    _check_op(op, state.num_qubits)
    out = state.copy()
    apply_inplace(out.amplitudes, op, state.num_qubits)
    return out


def run(circuit: Circuit, initial: QuantumState | None = None) -> QuantumState:
    if initial is None:
        initial = QuantumState.zero(circuit.num_qubits)
    if initial.num_qubits != circuit.num_qubits:
        raise CircuitError("state and circuit qubit counts differ")
    out = QuantumState(circuit.num_qubits, initial.amplitudes.copy(),
                       dict(circuit.registers) or dict(initial.registers))
    amps = out.amplitudes
    for op in circuit.ops:
        apply_inplace(amps, op, circuit.num_qubits)
    return out


def _register_span(state: QuantumState, register) -> tuple[int, int]:
    if register is None:
        return 0, state.num_qubits
    if isinstance(register, str):
        try:
            return tuple(state.registers[register])
        except KeyError:
            raise CircuitError(f"unknown register {register!r}") from None
    start, size = register
    if start < 0 or start + size > state.num_qubits:
        raise CircuitError("register out of range")
    return start, size


def probabilities(state: QuantumState, register: str | tuple[int, int] | None = None) -> np.ndarray:
    """Marginal distribution over a register (name, ``(start, size)`` or all)."""
    start, size = _register_span(state, register)
    probs = np.abs(state.amplitudes) ** 2
    if (start, size) == (0, state.num_qubits):
        return probs
    return _kernels.marginal(probs, start, size)


def sample(state: QuantumState, register: str | tuple[int, int] | None, shots: int,
           seed: int | np.random.Generator | None = None) -> dict[int, int]:
    """Multinomial measurement histogram ``{basis index: count}``."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = probabilities(state, register)
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, p / p.sum())
    return {int(i): int(c) for i, c in enumerate(counts) if c}


def histogram_to_vector(hist: Mapping[int, int], size: int) -> np.ndarray:
    vec = np.zeros(size)
    for k, v in hist.items():
        vec[k] = v
    return vec
