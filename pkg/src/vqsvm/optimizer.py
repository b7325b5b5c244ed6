"""Derivative-free minimizers with per-evaluation tracing.

Two methods are available:

``cobyla``
    Unconstrained linear-approximation trust-region search in the style of
    Powell's COBYLA: a linear model is interpolated on a simplex of ``n + 1``
    points, the model is minimized on a ball of radius ``rho``, the simplex is
    repaired when it becomes too flat or too spread out, and ``rho`` is halved
    whenever a step fails on an acceptable simplex.

``nelder-mead``
    The classic reflect / expand / contract / shrink simplex search.

Every function evaluation is one iteration of the trace.  Runs stop when the
value drops to ``cost_epsilon``, after ``plateau_window`` bitwise-identical
values, at ``max_iterations`` evaluations, or when the method converges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

METHODS = ("cobyla", "nelder-mead")


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "cobyla"
    max_iterations: int = 300
    cost_epsilon: float = 0.01
    initial_step: float = 1.0
    final_step: float = 1e-4
    plateau_window: int = 30

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.cost_epsilon < 0:
            raise ValueError("cost_epsilon must be >= 0")
        if not 0 < self.final_step <= self.initial_step:
            raise ValueError("need 0 < final_step <= initial_step")
        if self.plateau_window < 2:
            raise ValueError("plateau_window must be >= 2")


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    x: np.ndarray = field(repr=False)
    value: float


@dataclass
class OptimizeResult:
    x_best: np.ndarray
    f_best: float
    trace: list[TraceEntry]
    reason: str

    @property
    def values(self) -> np.ndarray:
        return np.array([t.value for t in self.trace])

    @property
    def n_evaluations(self) -> int:
        return len(self.trace)


class OptimizationAborted(RuntimeError):
    """Objective returned NaN or infinity; ``trace`` holds the evaluations so far."""

    def __init__(self, message: str, trace: list[TraceEntry]):
        super().__init__(message)
        self.trace = trace


class _Stop(Exception):
    def __init__(self, reason: str):
        self.reason = reason


class _Tracked:
    def __init__(self, f, config: OptimizerConfig):
        self.f = f
        self.cfg = config
        self.trace: list[TraceEntry] = []
        self.best_x = None
        self.best_f = math.inf

    def __call__(self, x: np.ndarray) -> float:
        if len(self.trace) >= self.cfg.max_iterations:
            raise _Stop("max_iterations")
        x = np.array(x, dtype=float)
        value = float(self.f(x))
        self.trace.append(TraceEntry(len(self.trace), x, value))
        if not math.isfinite(value):
            raise OptimizationAborted(f"objective returned {value} at iteration {len(self.trace) - 1}", self.trace)
        if value < self.best_f:
            self.best_f, self.best_x = value, x
        if value <= self.cfg.cost_epsilon:
            raise _Stop("epsilon")
        w = self.cfg.plateau_window
        if len(self.trace) >= w and len({t.value for t in self.trace[-w:]}) == 1:
            raise _Stop("plateau")
        if len(self.trace) >= self.cfg.max_iterations:
            raise _Stop("max_iterations")
        return value


def minimize(f: Callable[[np.ndarray], float], x0, config: OptimizerConfig = OptimizerConfig()) -> OptimizeResult:
    """Minimize ``f`` from ``x0``; deterministic for deterministic ``f``."""
    x0 = np.array(x0, dtype=float).reshape(-1)
    tracked = _Tracked(f, config)
    core = _cobyla if config.method == "cobyla" else _nelder_mead
    try:
        core(tracked, x0, config.initial_step, config.final_step)
        reason = "converged"
    except _Stop as stop:
        reason = stop.reason
    return OptimizeResult(tracked.best_x, tracked.best_f, tracked.trace, reason)


# --------------------------------------------------------------------------
# COBYLA-style trust region
# --------------------------------------------------------------------------

_ACCEPT_SIGMA = 0.25
_ACCEPT_DIST = 2.1
_GOOD_RATIO = 0.1


def _fresh_simplex(f, centre, fc, rho):
    n = centre.size
    sim = np.tile(centre, (n + 1, 1))
    fv = np.empty(n + 1)
    fv[0] = fc
    for i in range(n):
        sim[i + 1, i] += rho
        fv[i + 1] = f(sim[i + 1])
    return sim, fv


def _cobyla(f, x0, rho_beg, rho_end):
    sim, fv = _fresh_simplex(f, x0, f(x0), rho_beg)
    rho = rho_beg
    repair = False
    while True:
        k = int(np.argmin(fv))
        if k:
            sim[[0, k]] = sim[[k, 0]]
            fv[[0, k]] = fv[[k, 0]]
        D = sim[1:] - sim[0]
        try:
            Dinv = np.linalg.inv(D)
        except np.linalg.LinAlgError:
            Dinv = None
        if Dinv is None or not np.all(np.isfinite(Dinv)) or np.linalg.cond(D) > 1e12:
            sim, fv = _fresh_simplex(f, sim[0].copy(), fv[0], rho)
            continue
        g = Dinv @ (fv[1:] - fv[0])
        dist = np.linalg.norm(D, axis=1)
        sigma = 1.0 / np.linalg.norm(Dinv, axis=0)
        acceptable = bool(np.all(sigma >= _ACCEPT_SIGMA * rho) and np.all(dist <= _ACCEPT_DIST * rho))

        if repair:
            repair = False
            far = dist > _ACCEPT_DIST * rho
            j = int(np.argmax(dist)) if far.any() else int(np.argmin(sigma))
            u = Dinv[:, j] / np.linalg.norm(Dinv[:, j])
            step = 0.5 * rho * (u if g @ u <= 0 else -u)
            sim[j + 1] = sim[0] + step
            fv[j + 1] = f(sim[j + 1])
            continue

        gnorm = np.linalg.norm(g)
        ratio = -math.inf
        if gnorm > 1e-300:
            d = -rho * g / gnorm
            x_new = sim[0] + d
            f_new = f(x_new)
            ratio = (fv[0] - f_new) / (rho * gnorm)
            lam = Dinv.T @ d
            bary = np.concatenate([[1.0 - lam.sum()], lam])
            if f_new < fv[0]:
                spread = np.linalg.norm(sim - x_new, axis=1)
                weight = np.abs(bary) * np.maximum(1.0, (spread / rho) ** 2)
                j = int(np.argmax(weight))
            else:
                spread = np.concatenate([[0.0], dist])
                weight = np.abs(bary) * np.maximum(1.0, (spread / rho) ** 2)
                weight[0] = -1.0
                j = int(np.argmax(weight))
                if weight[j] < _GOOD_RATIO:
                    j = -1
            if j >= 0:
                sim[j] = x_new
                fv[j] = f_new
        if ratio > _GOOD_RATIO:
            continue
        if not acceptable:
            repair = True
            continue
        if rho <= rho_end:
            return
        rho = 0.5 * rho
        if rho <= 3.0 * rho_end:
            rho = rho_end


# --------------------------------------------------------------------------
# Nelder-Mead
# --------------------------------------------------------------------------

def _nelder_mead(f, x0, step, tol):
    n = x0.size
    sim, fv = _fresh_simplex(f, x0, f(x0), step)
    while True:
        order = np.argsort(fv, kind="stable")
        sim, fv = sim[order], fv[order]
        if np.max(np.linalg.norm(sim[1:] - sim[0], axis=1)) <= tol and fv[-1] - fv[0] <= 1e-12:
            return
        centroid = sim[:-1].mean(axis=0)
        xr = centroid + (centroid - sim[-1])
        fr = f(xr)
        if fv[0] <= fr < fv[-2]:
            sim[-1], fv[-1] = xr, fr
            continue
        if fr < fv[0]:
            xe = centroid + 2.0 * (centroid - sim[-1])
            fe = f(xe)
            sim[-1], fv[-1] = (xe, fe) if fe < fr else (xr, fr)
            continue
        if fr < fv[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                sim[-1], fv[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (sim[-1] - centroid)
            fc = f(xc)
            if fc < fv[-1]:
                sim[-1], fv[-1] = xc, fc
                continue
        for i in range(1, n + 1):
            sim[i] = sim[0] + 0.5 * (sim[i] - sim[0])
            fv[i] = f(sim[i])
