"""Dense statevector simulation for small registers.

Basis ordering is little-endian throughout: qubit ``q`` is bit ``q`` of the
amplitude index, so for three qubits ``|q2 q1 q0>`` lives at index
``4*q2 + 2*q1 + q0``.  Rotations follow ``RY(phi) = exp(-i phi Y / 2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence, Union

import numpy as np

MAX_QUBITS = 5
UNITARY_TOL = 1e-10
NORM_TOL = 1e-10

_SQRT_HALF = 1.0 / np.sqrt(2.0)
_H = np.array([[_SQRT_HALF, _SQRT_HALF], [_SQRT_HALF, -_SQRT_HALF]], dtype=complex)


class SimulatorError(ValueError):
    """Raised for malformed circuits, states or measurement requests."""


def ry_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(angle: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


# --------------------------------------------------------------------------
# index tables (cached per register layout)
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _block_indices(n: int, targets: tuple[int, ...], controls: tuple[int, ...]) -> np.ndarray:
    """Rows of full-register indices, one row per assignment of spectator bits.

    Within a row, column ``k`` holds the index whose target bits spell ``k``
    (``targets[0]`` is the least significant bit of ``k``).  Only rows with all
    control bits set are returned.
    """
    fixed = set(targets) | set(controls)
    others = [q for q in range(n) if q not in fixed]
    base = np.zeros(2 ** len(others), dtype=np.int64)
    for j, q in enumerate(others):
        base |= ((np.arange(base.size) >> j) & 1) << q
    for c in controls:
        base |= 1 << c
    offs = np.zeros(2 ** len(targets), dtype=np.int64)
    for j, q in enumerate(targets):
        offs |= ((np.arange(offs.size) >> j) & 1) << q
    return base[:, None] | offs[None, :]


@lru_cache(maxsize=None)
def _all_set(n: int, qubits: tuple[int, ...]) -> np.ndarray:
    idx = np.arange(2**n)
    mask = np.ones(2**n, dtype=bool)
    for q in qubits:
        mask &= ((idx >> q) & 1).astype(bool)
    return np.flatnonzero(mask)


@lru_cache(maxsize=None)
def _pauli_action(n: int, word: str, targets: tuple[int, ...], control: int | None):
    """Gather permutation and phases with ``(P psi)[j] = phase[j] * psi[perm[j]]``."""
    idx = np.arange(2**n)
    flip = 0
    for k, q in enumerate(targets):
        if word[len(word) - 1 - k] in "XY":
            flip |= 1 << q
    src = idx ^ flip
    phase = np.ones(2**n, dtype=complex)
    for k, q in enumerate(targets):
        letter = word[len(word) - 1 - k]
        bit = (src >> q) & 1
        if letter == "Z":
            phase *= np.where(bit, -1.0, 1.0)
        elif letter == "Y":
            # Y|0> = i|1>, Y|1> = -i|0>
            phase *= np.where(bit, -1j, 1j)
    if control is not None:
        on = ((idx >> control) & 1).astype(bool)
        src = np.where(on, src, idx)
        phase = np.where(on, phase, 1.0)
    src.setflags(write=False)
    phase.setflags(write=False)
    return src, phase


# --------------------------------------------------------------------------
# gates
# --------------------------------------------------------------------------

def _check_unitary(matrix: np.ndarray, n_targets: int) -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    dim = 2**n_targets
    if m.shape != (dim, dim):
        raise SimulatorError(f"matrix shape {m.shape} does not match {n_targets} target qubit(s)")
    if np.max(np.abs(m.conj().T @ m - np.eye(dim))) > UNITARY_TOL:
        raise SimulatorError("matrix is not unitary within 1e-10")
    m = m.copy()
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class H:
    target: int

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.target,)

    def act(self, vec: np.ndarray, n: int) -> None:
        _apply_block(vec, n, _H, (self.target,), ())


@dataclass(frozen=True)
class RY:
    angle: float
    target: int

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.target,)

    def act(self, vec: np.ndarray, n: int) -> None:
        _apply_block(vec, n, ry_matrix(self.angle), (self.target,), ())


@dataclass(frozen=True)
class RZ:
    angle: float
    target: int

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.target,)

    def act(self, vec: np.ndarray, n: int) -> None:
        ones = _all_set(n, (self.target,))
        vec *= np.exp(-0.5j * self.angle)
        vec[ones] *= np.exp(1j * self.angle)


@dataclass(frozen=True)
class CZ:
    control: int
    target: int

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.control, self.target)

    def act(self, vec: np.ndarray, n: int) -> None:
        vec[_all_set(n, (self.control, self.target))] *= -1.0


@dataclass(frozen=True)
class CCZ:
    control1: int
    control2: int
    target: int

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.control1, self.control2, self.target)

    def act(self, vec: np.ndarray, n: int) -> None:
        vec[_all_set(n, self.qubits)] *= -1.0


@dataclass(frozen=True)
class ControlledPauliWord:
    """Pauli word on ``targets`` applied when ``control`` is 1.

    The leftmost letter acts on the last (highest) entry of ``targets``;
    ``targets`` defaults to ``0..len(word)-1``.  ``control=None`` gives the
    plain, uncontrolled word.
    """

    control: int | None
    word: str
    targets: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.word or set(self.word) - set("IXYZ"):
            raise SimulatorError(f"invalid Pauli word {self.word!r}")
        if self.targets is None:
            object.__setattr__(self, "targets", tuple(range(len(self.word))))
        if len(self.targets) != len(self.word):
            raise SimulatorError("word length does not match the number of targets")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets if self.control is None else (self.control, *self.targets)

    def act(self, vec: np.ndarray, n: int) -> None:
        src, phase = _pauli_action(n, self.word, self.targets, self.control)
        vec[:] = phase * vec[src]


@dataclass(frozen=True, eq=False)
class DenseUnitary:
    targets: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "matrix", _check_unitary(self.matrix, len(self.targets)))

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets

    def act(self, vec: np.ndarray, n: int) -> None:
        _apply_block(vec, n, self.matrix, self.targets, ())

    def dagger(self) -> "DenseUnitary":
        return DenseUnitary(self.targets, self.matrix.conj().T)


@dataclass(frozen=True, eq=False)
class ControlledDenseUnitary:
    control: int
    targets: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "matrix", _check_unitary(self.matrix, len(self.targets)))

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.control, *self.targets)

    def act(self, vec: np.ndarray, n: int) -> None:
        _apply_block(vec, n, self.matrix, self.targets, (self.control,))


Gate = Union[H, RY, RZ, CZ, CCZ, ControlledPauliWord, DenseUnitary, ControlledDenseUnitary]


def _apply_block(vec: np.ndarray, n: int, matrix: np.ndarray, targets, controls) -> None:
    rows = _block_indices(n, tuple(targets), tuple(controls))
    vec[rows] = vec[rows] @ matrix.T


# --------------------------------------------------------------------------
# states and circuits
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Statevector:
    """Normalized amplitude vector; read-only after construction."""

    amplitudes: np.ndarray
    n_qubits: int = field(default=0)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        n = self.n_qubits or int(round(np.log2(max(amps.size, 1))))
        if n < 1 or amps.size != 2**n:
            raise SimulatorError(f"amplitude vector of length {amps.size} is not 2**n_qubits")
        if n > MAX_QUBITS:
            raise SimulatorError(f"at most {MAX_QUBITS} qubits are supported")
        if abs(np.vdot(amps, amps).real - 1.0) > NORM_TOL:
            raise SimulatorError("state is not normalized within 1e-10")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "n_qubits", n)

    @classmethod
    def zero(cls, n_qubits: int) -> "Statevector":
        return cls.basis(n_qubits, 0)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "Statevector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(amps, n_qubits)

    def tensor(self, other: "Statevector") -> "Statevector":
        """``other`` occupies the high qubits: result is ``other (x) self``."""
        return Statevector(np.kron(other.amplitudes, self.amplitudes), self.n_qubits + other.n_qubits)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple = ()

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise SimulatorError(f"n_qubits must be in 1..{MAX_QUBITS}")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            qs = g.qubits
            if len(set(qs)) != len(qs):
                raise SimulatorError(f"{type(g).__name__} uses a qubit twice: {qs}")
            if any(q < 0 or q >= self.n_qubits for q in qs):
                raise SimulatorError(f"{type(g).__name__} addresses qubits {qs} outside 0..{self.n_qubits - 1}")

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise SimulatorError("cannot concatenate circuits of different width")
        return Circuit(self.n_qubits, self.gates + other.gates)

    def __len__(self) -> int:
        return len(self.gates)


def apply(circuit: Circuit, state: Statevector) -> Statevector:
    """Run every gate of ``circuit`` on ``state`` and return the new state."""
    if state.n_qubits != circuit.n_qubits:
        raise SimulatorError(f"state has {state.n_qubits} qubits, circuit has {circuit.n_qubits}")
    vec = np.array(state.amplitudes)
    for g in circuit.gates:
        g.act(vec, circuit.n_qubits)
    return Statevector(vec, circuit.n_qubits)


def run(circuit: Circuit) -> Statevector:
    return apply(circuit, Statevector.zero(circuit.n_qubits))


# --------------------------------------------------------------------------
# measurement
# --------------------------------------------------------------------------

class Counts(NamedTuple):
    count0: int
    count1: int


def _check_qubit(state: Statevector, qubit: int) -> None:
    if not 0 <= qubit < state.n_qubits:
        raise SimulatorError(f"qubit {qubit} out of range for {state.n_qubits} qubits")


def probability_one(state: Statevector, qubit: int) -> float:
    _check_qubit(state, qubit)
    p = state.probabilities()[_all_set(state.n_qubits, (qubit,))].sum()
    return float(min(max(p, 0.0), 1.0))


def expectation_z(state: Statevector, qubit: int) -> float:
    """Exact ``p(0) - p(1)`` of ``qubit``."""
    return 1.0 - 2.0 * probability_one(state, qubit)


def sample(state: Statevector, qubit: int, shots: int, rng_seed) -> Counts:
    """Measure ``qubit`` ``shots`` times.

    ``rng_seed`` may be an integer seed or a ``numpy.random.Generator``; in
    the latter case draws advance that generator.
    """
    if shots < 1:
        raise SimulatorError("shots must be >= 1")
    p1 = probability_one(state, qubit)
    rng = np.random.default_rng(rng_seed)
    ones = int(rng.binomial(shots, p1))
    return Counts(shots - ones, ones)


# --------------------------------------------------------------------------
# state preparation
# --------------------------------------------------------------------------

def state_prep_unitary(b: Sequence[complex], n_qubits: int) -> DenseUnitary:
    """Unitary with ``U|0...0> = |b>``, built as a (phased) Householder reflection."""
    b = np.asarray(b, dtype=complex).reshape(-1)
    if b.size != 2**n_qubits:
        raise SimulatorError(f"vector of length {b.size} does not fit {n_qubits} qubits")
    if abs(np.linalg.norm(b) - 1.0) > NORM_TOL:
        raise SimulatorError("state-preparation vector must have unit norm within 1e-10")
    phase = b[0] / abs(b[0]) if abs(b[0]) > 1e-15 else 1.0
    rotated = b / phase  # first entry now real and non-negative
    v = -rotated
    v[0] += 1.0
    vv = np.vdot(v, v).real
    dim = b.size
    if vv < 1e-28:
        u = np.eye(dim, dtype=complex)
    else:
        u = np.eye(dim, dtype=complex) - 2.0 * np.outer(v, v.conj()) / vv
    return DenseUnitary(tuple(range(n_qubits)), phase * u)
