"""Variational linear solver: ansatz, Hadamard tests, global cost and solve loop.

Register layout for every circuit built here: system qubits ``0..n-1``, the
Hadamard-test ancilla at ``n`` and, for the ``aux`` wiring only, an
auxiliary qubit at ``n + 1`` that carries the AND of the ancilla and one
system qubit while a controlled-CZ is applied.

The global cost is ``C = 1 - |<b|psi>|^2 / <psi|psi>`` with
``|psi> = A V(alpha)|0>``.  With ``A = sum_l c_l P_l`` both pieces expand into
Hadamard-test quantities:

* ``<psi|psi> = sum_mn c_m c_n Re<0|V^+ P_m P_n V|0>``
* ``|<b|psi>|^2 = |sum_n c_n <0|U^+ P_n V|0>|^2``
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .kernel import LinearSystem
from .optimizer import OptimizationAborted, OptimizerConfig, minimize
from .pauli import PauliDecomposition, decompose
from .simulator import (
    CCZ,
    CZ,
    Circuit,
    ControlledDenseUnitary,
    ControlledPauliWord,
    DenseUnitary,
    H,
    RY,
    RZ,
    Statevector,
    apply,
    expectation_z,
    ry_matrix,
    sample,
    state_prep_unitary,
)

log = logging.getLogger(__name__)

PAIR_MODES = ("symmetric", "full", "literal")
WIRINGS = ("ccz", "aux", "dense")


class SolveError(RuntimeError):
    def __init__(self, message: str, trace: "SolveTrace | None" = None):
        super().__init__(message)
        self.trace = trace


# --------------------------------------------------------------------------
# ansatz
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AnsatzLayout:
    """RY layers on every qubit separated by CZ entangling blocks.

    The default is three rotation layers with CZ(0,1), CZ(1,2) after the first
    and CZ(0,2), CZ(1,2) after the second: nine parameters, real amplitudes.
    """

    n_qubits: int = 3
    entanglers: tuple[tuple[tuple[int, int], ...], ...] = (((0, 1), (1, 2)), ((0, 2), (1, 2)))

    @property
    def n_layers(self) -> int:
        return len(self.entanglers) + 1

    @property
    def n_params(self) -> int:
        return self.n_qubits * self.n_layers


DEFAULT_LAYOUT = AnsatzLayout()


@dataclass(frozen=True, eq=False)
class AnsatzParams:
    alpha: np.ndarray
    n_layers: int = DEFAULT_LAYOUT.n_layers

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float).reshape(-1)
        if not np.all(np.isfinite(a)):
            raise ValueError("ansatz parameters must be finite")
        if a.size % self.n_layers:
            raise ValueError(f"{a.size} parameters do not fit {self.n_layers} layers")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @classmethod
    def random(cls, seed: int, layout: AnsatzLayout = DEFAULT_LAYOUT) -> "AnsatzParams":
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(0.0, 2.0 * np.pi, layout.n_params), layout.n_layers)


def _as_alpha(alpha, layout: AnsatzLayout) -> np.ndarray:
    a = alpha.alpha if isinstance(alpha, AnsatzParams) else np.asarray(alpha, dtype=float).reshape(-1)
    if a.size != layout.n_params:
        raise ValueError(f"ansatz expects {layout.n_params} parameters, got {a.size}")
    return a


def ansatz_gates(alpha, layout: AnsatzLayout = DEFAULT_LAYOUT) -> list:
    a = _as_alpha(alpha, layout)
    n = layout.n_qubits
    gates = []
    for layer in range(layout.n_layers):
        gates += [RY(float(a[layer * n + q]), q) for q in range(n)]
        if layer < len(layout.entanglers):
            gates += [CZ(c, t) for c, t in layout.entanglers[layer]]
    return gates


def ansatz_circuit(alpha, layout: AnsatzLayout = DEFAULT_LAYOUT, n_total: int | None = None) -> Circuit:
    """``V(alpha)`` acting on qubits ``0..n-1`` of an ``n_total``-qubit register."""
    return Circuit(n_total or layout.n_qubits, ansatz_gates(alpha, layout))


def ansatz_state(alpha, layout: AnsatzLayout = DEFAULT_LAYOUT) -> np.ndarray:
    """Amplitudes of ``V(alpha)|0...0>``."""
    return apply(ansatz_circuit(alpha, layout), Statevector.zero(layout.n_qubits)).amplitudes.copy()


def ansatz_matrix(alpha, layout: AnsatzLayout = DEFAULT_LAYOUT) -> np.ndarray:
    n = layout.n_qubits
    circ = ansatz_circuit(alpha, layout)
    cols = [apply(circ, Statevector.basis(n, k)).amplitudes for k in range(2**n)]
    return np.stack(cols, axis=1)


def controlled_ansatz_gates(alpha, control: int, layout: AnsatzLayout = DEFAULT_LAYOUT,
                            wiring: str = "ccz", aux: int | None = None) -> list:
    """Gates realizing ``V(alpha)`` conditioned on ``control``.

    ``ccz``: each RY becomes a controlled 2x2 block, each CZ becomes a CCZ.
    ``aux``: as ``ccz`` but the CCZ is built from an AND computed onto the
    auxiliary qubit (H-CCZ-H on ``aux``), a CZ onto it, and uncomputation.
    ``dense``: a single controlled block holding the full ``V`` matrix.
    """
    if wiring not in WIRINGS:
        raise ValueError(f"unknown wiring {wiring!r}")
    n = layout.n_qubits
    if wiring == "dense":
        return [ControlledDenseUnitary(control, tuple(range(n)), ansatz_matrix(alpha, layout))]
    if wiring == "aux" and aux is None:
        raise ValueError("aux wiring needs an auxiliary qubit")
    gates = []
    for g in ansatz_gates(alpha, layout):
        if isinstance(g, RY):
            gates.append(ControlledDenseUnitary(control, (g.target,), ry_matrix(g.angle)))
        elif wiring == "ccz":
            gates.append(CCZ(control, g.control, g.target))
        else:
            toffoli = [H(aux), CCZ(control, g.control, aux), H(aux)]
            gates += toffoli + [CZ(aux, g.target)] + toffoli
    return gates


# --------------------------------------------------------------------------
# cost settings and Hadamard tests
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CostSettings:
    """How Hadamard-test quantities are estimated.

    ``pair_mode``: ``symmetric`` estimates each unordered word pair once,
    ``full`` runs all ``L**2`` ordered pairs, ``literal`` additionally
    re-estimates both b-overlap factors for every ``(m, n)`` pair.
    """

    shots: int = 10000
    analytic: bool = False
    rng_seed: int = 0
    prune: float = 1e-10
    pair_mode: str = "symmetric"
    wiring: str = "ccz"
    imaginary: bool = False
    psi_floor: float = 1e-9

    def __post_init__(self):
        if not self.analytic and self.shots < 1:
            raise ValueError("shots must be >= 1 unless analytic")
        if self.pair_mode not in PAIR_MODES:
            raise ValueError(f"pair_mode must be one of {PAIR_MODES}")
        if self.wiring not in WIRINGS:
            raise ValueError(f"wiring must be one of {WIRINGS}")


ANALYTIC = CostSettings(analytic=True)


def _measure(state: Statevector, qubit: int, settings: CostSettings, rng) -> float:
    if settings.analytic:
        return expectation_z(state, qubit)
    c0, c1 = sample(state, qubit, settings.shots, rng)
    return (c0 - c1) / settings.shots


def _hadamard_open(anc: int, imaginary: bool) -> list:
    # RZ(-pi/2) equals S^dagger up to a global phase
    return [H(anc), RZ(-np.pi / 2, anc)] if imaginary else [H(anc)]


def psi_circuit(alpha, word_m: str, word_n: str, layout: AnsatzLayout = DEFAULT_LAYOUT,
                imaginary: bool = False) -> Circuit:
    """Hadamard test for ``<0|V^+ P_m^+ P_n V|0>``; V acts unconditionally."""
    n = layout.n_qubits
    return Circuit(n + 1, ansatz_gates(alpha, layout) + _psi_suffix(word_m, word_n, n, imaginary))


def _psi_suffix(word_m, word_n, n, imaginary):
    sys_q = tuple(range(n))
    return _hadamard_open(n, imaginary) + [
        ControlledPauliWord(n, word_n, sys_q),
        ControlledPauliWord(n, word_m, sys_q),  # Pauli words are self-adjoint
        H(n),
    ]


def b_circuit(alpha, word_n: str, u_b: DenseUnitary, layout: AnsatzLayout = DEFAULT_LAYOUT,
              wiring: str = "ccz", imaginary: bool = False) -> Circuit:
    """Hadamard test for ``<0|U^+ P_n V|0>`` with controlled V, P_n and U^+."""
    n = layout.n_qubits
    width = n + 2 if wiring == "aux" else n + 1
    return Circuit(width, _b_prefix(alpha, layout, wiring, imaginary) + _b_suffix(word_n, u_b, n))


def _b_prefix(alpha, layout, wiring, imaginary):
    n = layout.n_qubits
    aux = n + 1 if wiring == "aux" else None
    return _hadamard_open(n, imaginary) + controlled_ansatz_gates(alpha, n, layout, wiring, aux)


def _b_suffix(word_n, u_b, n):
    sys_q = tuple(range(n))
    return [
        ControlledPauliWord(n, word_n, sys_q),
        ControlledDenseUnitary(n, sys_q, u_b.matrix.conj().T),
        H(n),
    ]


def _as_unitary(u_b, n: int) -> DenseUnitary:
    if isinstance(u_b, DenseUnitary):
        return u_b
    return DenseUnitary(tuple(range(n)), np.asarray(u_b))


def psi_term(alpha, word_m: str, word_n: str, settings: CostSettings = ANALYTIC,
             layout: AnsatzLayout = DEFAULT_LAYOUT, rng=None) -> float:
    """Estimate ``Re<0|V^+ P_m P_n V|0>`` (``Im`` with ``settings.imaginary``)."""
    circ = psi_circuit(alpha, word_m, word_n, layout, settings.imaginary)
    out = apply(circ, Statevector.zero(circ.n_qubits))
    return _measure(out, layout.n_qubits, settings, rng if rng is not None else settings.rng_seed)


def b_term(alpha, word_n: str, u_b, settings: CostSettings = ANALYTIC,
           layout: AnsatzLayout = DEFAULT_LAYOUT, rng=None) -> float:
    """Estimate ``Re<0|U^+ P_n V|0>`` (``Im`` with ``settings.imaginary``)."""
    u_b = _as_unitary(u_b, layout.n_qubits)
    circ = b_circuit(alpha, word_n, u_b, layout, settings.wiring, settings.imaginary)
    out = apply(circ, Statevector.zero(circ.n_qubits))
    return _measure(out, layout.n_qubits, settings, rng if rng is not None else settings.rng_seed)


# --------------------------------------------------------------------------
# cost
# --------------------------------------------------------------------------

@dataclass
class CostCounters:
    evaluations: int = 0
    circuits: int = 0
    psi_pairs: int = 0
    b_pairs: int = 0
    degenerate: int = 0


class CostFunction:
    """Global cost of one decomposed system, evaluated through Hadamard tests.

    Holds the random generator used for shot sampling, so repeated calls draw
    fresh shots while the sequence stays reproducible from ``rng_seed``.
    The state after the shared prefix of each Hadamard-test family (``V`` on
    the system register, or ``H`` plus controlled ``V``) is simulated once
    per evaluation and reused for every word pair.
    """

    def __init__(self, decomposition: PauliDecomposition, b, settings: CostSettings = ANALYTIC,
                 layout: AnsatzLayout = DEFAULT_LAYOUT, u_b: DenseUnitary | None = None):
        if len(decomposition) == 0:
            raise ValueError("decomposition is empty")
        if decomposition.n_qubits != layout.n_qubits:
            raise ValueError("decomposition and ansatz act on different registers")
        self.decomposition = decomposition
        self.words = decomposition.words
        self.coeffs = decomposition.real_coefficients()
        self.settings = settings
        self.layout = layout
        n = layout.n_qubits
        if u_b is None:
            b = np.asarray(b, dtype=float)
            u_b = state_prep_unitary(b / np.linalg.norm(b), n)
        self.u_b = u_b
        self.rng = np.random.default_rng(settings.rng_seed)
        self.counters = CostCounters()
        self.seconds = 0.0
        self._psi_suffix = {}
        self._b_suffix = {}

    @classmethod
    def for_system(cls, system: LinearSystem, settings: CostSettings = ANALYTIC,
                   layout: AnsatzLayout = DEFAULT_LAYOUT) -> "CostFunction":
        return cls(decompose(system.A, settings.prune), system.b, settings, layout)

    @property
    def n_terms(self) -> int:
        return len(self.words)

    # -- Hadamard-test families sharing a prefix ---------------------------

    def _psi_values(self, alpha, imaginary: bool) -> np.ndarray:
        n = self.layout.n_qubits
        prefix = apply(Circuit(n + 1, ansatz_gates(alpha, self.layout)), Statevector.zero(n + 1))
        L = self.n_terms
        vals = np.empty((L, L))
        mode = self.settings.pair_mode
        for i in range(L):
            for j in range(L):
                if mode == "symmetric" and j < i:
                    vals[i, j] = -vals[j, i] if imaginary else vals[j, i]
                    continue
                key = (i, j, imaginary)
                circ = self._psi_suffix.get(key)
                if circ is None:
                    circ = Circuit(n + 1, _psi_suffix(self.words[i], self.words[j], n, imaginary))
                    self._psi_suffix[key] = circ
                vals[i, j] = _measure(apply(circ, prefix), n, self.settings, self.rng)
                self.counters.circuits += 1
        self.counters.psi_pairs += L * L
        return vals

    def _b_prefix_state(self, alpha, imaginary: bool) -> Statevector:
        n = self.layout.n_qubits
        width = n + 2 if self.settings.wiring == "aux" else n + 1
        circ = Circuit(width, _b_prefix(alpha, self.layout, self.settings.wiring, imaginary))
        return apply(circ, Statevector.zero(width))

    def _b_value(self, prefix: Statevector, k: int) -> float:
        n = self.layout.n_qubits
        circ = self._b_suffix.get(k)
        if circ is None:
            circ = Circuit(prefix.n_qubits, _b_suffix(self.words[k], self.u_b, n))
            self._b_suffix[k] = circ
        self.counters.circuits += 1
        return _measure(apply(circ, prefix), n, self.settings, self.rng)

    def _b_values(self, alpha, imaginary: bool) -> np.ndarray:
        prefix = self._b_prefix_state(alpha, imaginary)
        return np.array([self._b_value(prefix, k) for k in range(self.n_terms)])

    def components(self, alpha) -> tuple[float, float]:
        """``(<psi|psi>, |<b|psi>|^2)`` estimates."""
        alpha = _as_alpha(alpha, self.layout)
        c = self.coeffs
        L = self.n_terms
        psi_norm = float(c @ self._psi_values(alpha, False) @ c)
        if self.settings.pair_mode == "literal":
            # every (m, n) pair re-estimates both overlap factors
            prefix = self._b_prefix_state(alpha, False)
            total = 0.0
            for m in range(L):
                for n_ in range(L):
                    total += c[m] * c[n_] * self._b_value(prefix, n_) * self._b_value(prefix, m)
            self.counters.b_pairs += L * L
            overlap = total
        else:
            beta = self._b_values(alpha, False)
            overlap = float(c @ beta) ** 2
            self.counters.b_pairs += L
        if self.settings.imaginary:
            overlap += float(c @ self._b_values(alpha, True)) ** 2
        return psi_norm, float(overlap)

    def __call__(self, alpha) -> float:
        start = time.perf_counter()
        psi_norm, overlap = self.components(alpha)
        self.counters.evaluations += 1
        self.seconds += time.perf_counter() - start
        if psi_norm <= self.settings.psi_floor:
            self.counters.degenerate += 1
            log.warning("<psi|psi> estimate %.3g below floor; cost set to 1", psi_norm)
            return 1.0
        return float(min(max(1.0 - overlap / psi_norm, 0.0), 1.0))


def cost(alpha, decomposition: PauliDecomposition, u_b, settings: CostSettings = ANALYTIC,
         layout: AnsatzLayout = DEFAULT_LAYOUT) -> float:
    """Global cost of ``V(alpha)`` for ``A = decomposition`` and ``|b> = U|0>``."""
    u_b = _as_unitary(u_b, layout.n_qubits)
    b = u_b.matrix[:, 0]
    return CostFunction(decomposition, b, settings, layout, u_b=u_b)(alpha)


# --------------------------------------------------------------------------
# optimization loop
# --------------------------------------------------------------------------

@dataclass
class SolveTrace:
    iterations: list[int]
    alphas: list[np.ndarray] = field(repr=False)
    costs: list[float]
    alpha_opt: np.ndarray
    cost_opt: float
    reason: str
    n_terms: int
    counters: CostCounters
    cost_seconds: float

    @property
    def final_cost(self) -> float:
        return self.cost_opt


def solve(system: LinearSystem, x0=None, config: OptimizerConfig = OptimizerConfig(),
          settings: CostSettings = ANALYTIC, layout: AnsatzLayout = DEFAULT_LAYOUT,
          seed: int = 0, cost_fn: CostFunction | None = None) -> SolveTrace:
    """Minimize the global cost of ``system`` over the ansatz parameters.

    ``x0`` defaults to parameters drawn uniformly from ``[0, 2 pi)`` with
    ``seed``.  Raises :class:`SolveError` (trace attached) if the cost turns
    non-finite.
    """
    f = cost_fn or CostFunction.for_system(system, settings, layout)
    alpha0 = AnsatzParams.random(seed, layout).alpha if x0 is None else _as_alpha(x0, layout)
    try:
        res = minimize(f, alpha0, config)
    except OptimizationAborted as exc:
        partial = _trace_from(exc.trace, None, np.nan, "aborted", f)
        raise SolveError(str(exc), partial) from exc
    return _trace_from(res.trace, res.x_best, res.f_best, res.reason, f)


def _trace_from(entries, x_best, f_best, reason, f: CostFunction) -> SolveTrace:
    return SolveTrace(
        iterations=[e.iteration for e in entries],
        alphas=[e.x for e in entries],
        costs=[e.value for e in entries],
        alpha_opt=x_best,
        cost_opt=f_best,
        reason=reason,
        n_terms=f.n_terms,
        counters=f.counters,
        cost_seconds=f.seconds,
    )
