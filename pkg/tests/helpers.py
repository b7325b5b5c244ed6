"""Random circuit generation paired with the Kronecker-product oracle."""
from __future__ import annotations

import numpy as np

import oracles as O
from vqsvm import simulator as sim


def random_gate(rng, n):
    """A random gate and its dense matrix built without the simulator."""
    kind = rng.integers(8)
    qs = [int(q) for q in rng.permutation(n)]
    t = float(rng.uniform(-2 * np.pi, 2 * np.pi))
    if kind == 0:
        return sim.H(qs[0]), O.on_qubits(n, {qs[0]: O.H})
    if kind == 1:
        return sim.RY(t, qs[0]), O.on_qubits(n, {qs[0]: O.ry(t)})
    if kind == 2:
        return sim.RZ(t, qs[0]), O.on_qubits(n, {qs[0]: O.rz(t)})
    if kind == 3:
        return sim.CZ(qs[0], qs[1]), O.controlled(n, [qs[0]], {qs[1]: O.Z})
    if kind == 4 and n >= 3:
        return sim.CCZ(qs[0], qs[1], qs[2]), O.controlled(n, [qs[0], qs[1]], {qs[2]: O.Z})
    if kind == 5 and n >= 3:
        targets = tuple(qs[1:3])
        w = "".join(rng.choice(list("IXYZ"), size=2))
        ops = {targets[1]: O.PAULI[w[0]], targets[0]: O.PAULI[w[1]]}
        return sim.ControlledPauliWord(qs[0], w, targets), O.controlled(n, [qs[0]], ops)
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    u, _ = np.linalg.qr(m)
    targets = tuple(qs[:2])
    if kind == 6 or n < 3:
        return sim.DenseUnitary(targets, u), O.embed(n, targets, u)
    return sim.ControlledDenseUnitary(qs[2], targets, u), O.embed(n, targets, u, control=qs[2])


def random_circuit(rng, n=3, depth=20):
    gates, full = [], np.eye(2**n, dtype=complex)
    for _ in range(depth):
        g, m = random_gate(rng, n)
        gates.append(g)
        full = m @ full
    return sim.Circuit(n, gates), full


def random_state(rng, n):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v / np.linalg.norm(v)
