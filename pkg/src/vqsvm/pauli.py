"""Pauli-word algebra: word matrices, decomposition and reconstruction.

A word is a string over ``IXYZ``.  Its leftmost letter acts on the
highest-index qubit, so ``word_matrix("XYZ") == kron(X, Y, Z)`` in the
little-endian basis used by :mod:`vqsvm.simulator`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np

DEFAULT_PRUNE = 1e-10
HERMITIAN_TOL = 1e-9

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class PauliError(ValueError):
    pass


def validate_word(word: str, n_qubits: int | None = None) -> str:
    if not word or set(word) - set("IXYZ"):
        raise PauliError(f"invalid Pauli word {word!r}")
    if n_qubits is not None and len(word) != n_qubits:
        raise PauliError(f"word {word!r} does not have length {n_qubits}")
    return word


def all_words(n_qubits: int) -> list[str]:
    return ["".join(t) for t in itertools.product("IXYZ", repeat=n_qubits)]


def symmetric_words(n_qubits: int) -> list[str]:
    """Words whose matrices are real symmetric, i.e. with an even number of Y letters."""
    return [w for w in all_words(n_qubits) if w.count("Y") % 2 == 0]


@lru_cache(maxsize=None)
def _word_matrix_cached(word: str) -> np.ndarray:
    m = np.ones((1, 1), dtype=complex)
    for letter in word:
        m = np.kron(m, _SINGLE[letter])
    m.setflags(write=False)
    return m


def word_matrix(word: str) -> np.ndarray:
    """Dense ``2**n x 2**n`` matrix of a Pauli word (returned copy is writable)."""
    return _word_matrix_cached(validate_word(word)).copy()


@dataclass(frozen=True)
class PauliTerm:
    coefficient: complex
    word: str


@dataclass(frozen=True)
class PauliDecomposition:
    n_qubits: int
    terms: tuple[PauliTerm, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        seen = set()
        for t in self.terms:
            validate_word(t.word, self.n_qubits)
            if t.word in seen:
                raise PauliError(f"duplicate word {t.word!r}")
            seen.add(t.word)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[PauliTerm]:
        return iter(self.terms)

    @property
    def words(self) -> list[str]:
        return [t.word for t in self.terms]

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([t.coefficient for t in self.terms], dtype=complex)

    def real_coefficients(self, tol: float = 1e-10) -> np.ndarray:
        c = self.coefficients
        if c.size and np.max(np.abs(c.imag)) > tol:
            raise PauliError("decomposition has complex coefficients; operator is not Hermitian")
        return c.real.copy()

    def scaled(self, factor: float) -> "PauliDecomposition":
        return PauliDecomposition(self.n_qubits, [PauliTerm(factor * t.coefficient, t.word) for t in self.terms])

    def as_dict(self) -> dict[str, complex]:
        return {t.word: t.coefficient for t in self.terms}

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, complex]]) -> "PauliDecomposition":
        pairs = list(pairs)
        if not pairs:
            raise PauliError("from_pairs needs at least one term to infer the register size")
        return cls(len(pairs[0][0]), [PauliTerm(complex(c), w) for w, c in pairs])


def _n_qubits_of(dim: int) -> int:
    n = int(round(np.log2(dim))) if dim > 0 else -1
    if n < 1 or 2**n != dim:
        raise PauliError(f"matrix dimension {dim} is not a power of two")
    return n


def decompose(a: np.ndarray, prune: float = DEFAULT_PRUNE) -> PauliDecomposition:
    """Expand a Hermitian matrix as ``sum_l c_l P_l`` with ``c_l = Tr(P_l A) / 2**n``.

    Terms with ``|c_l| <= prune`` are dropped.  Hermitian input gives real
    coefficients, which are stored with the imaginary dust removed.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise PauliError(f"expected a square matrix, got shape {a.shape}")
    n = _n_qubits_of(a.shape[0])
    if n > 5:
        raise PauliError("decomposition is limited to 5 qubits")
    if np.max(np.abs(a - a.conj().T)) > HERMITIAN_TOL:
        raise PauliError("matrix is not Hermitian within 1e-9")
    if prune < 0:
        raise PauliError("prune threshold must be non-negative")
    dim = a.shape[0]
    terms = []
    for w in all_words(n):
        # Tr(P A) = sum_ij P_ij A_ji
        c = np.sum(_word_matrix_cached(w) * a.T) / dim
        if abs(c) > prune:
            terms.append(PauliTerm(complex(c.real, 0.0), w))
    return PauliDecomposition(n, terms)


def reconstruct(d: PauliDecomposition) -> np.ndarray:
    dim = 2**d.n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    for t in d.terms:
        out += t.coefficient * _word_matrix_cached(t.word)
    return out
