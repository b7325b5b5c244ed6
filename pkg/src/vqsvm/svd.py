"""SVD recasting of ``A x = b`` into a diagonal problem.

With ``A = W diag(sigma) V^T`` the system becomes
``diag(sigma) x_new = W^T b`` where ``x_new = V^T x``; a solution of the
diagonal problem therefore maps back through ``x = V x_new``.  A diagonal
matrix only needs ``{I, Z}`` Pauli words, at most ``2**n`` of them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import KernelError, LinearSystem, condition_number


@dataclass(frozen=True, eq=False)
class SvdFactors:
    W: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def matrix(self) -> np.ndarray:
        return self.W @ np.diag(self.sigma) @ self.V.T


def factor(a: np.ndarray) -> SvdFactors:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if np.iscomplexobj(a):
        if np.max(np.abs(a.imag)) > 1e-12:
            raise ValueError("factor expects a real matrix")
        a = a.real
    w, s, vt = np.linalg.svd(a)
    return SvdFactors(W=w, sigma=s, V=vt.T)


@dataclass(frozen=True, eq=False)
class RecastSystem(LinearSystem):
    """``diag(sigma) x_new = b_new`` with ``b_new = W^T b`` renormalized."""

    factors: SvdFactors | None = None
    source: LinearSystem | None = None


def recast(system: LinearSystem) -> RecastSystem:
    f = factor(system.A)
    condition_number(np.diag(f.sigma))  # raises if singular
    b_new = f.W.T @ system.b
    return RecastSystem(A=np.diag(f.sigma), b=b_new / np.linalg.norm(b_new), factors=f, source=system)


def map_back(x_new: np.ndarray, factors: SvdFactors) -> np.ndarray:
    x_new = np.asarray(x_new)
    if abs(np.linalg.norm(x_new) - 1.0) > 1e-8:
        raise KernelError("map_back expects a unit vector")
    x = factors.V @ x_new
    return x / np.linalg.norm(x)
