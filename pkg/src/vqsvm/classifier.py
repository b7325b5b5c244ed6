"""Support-vector classifier built from an LS-SVM solution vector.

The solution of the kernel system is laid out as ``(d, theta_1..theta_N)``.
A variational solver only recovers its direction, so the scale of ``theta``
and the offset are re-estimated by least squares on the training equations
``y_i = s * (y_i e'_i + w'^T x_i) + d``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import Dataset, KernelError, NormalizationParams, apply_normalize, build_system
from .svd import SvdFactors, map_back
from .vqls import DEFAULT_LAYOUT, AnsatzLayout, ansatz_state

IMAG_TOL = 1e-8
CLASSES = (1, -1)
CLASS_NAMES = {1: "setosa", -1: "virginica"}


class ClassifierError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SVCModel:
    w: np.ndarray
    d: float
    theta: np.ndarray
    theta_norm: float
    norm_params: NormalizationParams | None
    gamma: float

    def to_dict(self) -> dict:
        return {
            "w": [float(v) for v in self.w],
            "d": float(self.d),
            "theta": [float(v) for v in self.theta],
            "theta_norm": float(self.theta_norm),
            "gamma": float(self.gamma),
            "normalization": None if self.norm_params is None else self.norm_params.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SVCModel":
        norm = data.get("normalization")
        return cls(
            w=np.asarray(data["w"], dtype=float),
            d=float(data["d"]),
            theta=np.asarray(data["theta"], dtype=float),
            theta_norm=float(data["theta_norm"]),
            norm_params=None if norm is None else NormalizationParams.from_dict(norm),
            gamma=float(data["gamma"]),
        )

    def decision(self, x_norm) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x_norm, dtype=float))
        if x.shape[1] != self.w.size:
            raise ClassifierError(f"expected {self.w.size} features, got {x.shape[1]}")
        return x @ self.w + self.d


def extract_solution(alpha_opt, factors: SvdFactors | None = None,
                     layout: AnsatzLayout = DEFAULT_LAYOUT) -> np.ndarray:
    """Real amplitudes of ``V(alpha_opt)|0>``, mapped back when the system was recast."""
    amps = ansatz_state(alpha_opt, layout)
    if np.max(np.abs(amps.imag)) > IMAG_TOL:
        raise ClassifierError("ansatz state has non-negligible imaginary amplitudes")
    x = amps.real / np.linalg.norm(amps.real)
    return map_back(x, factors) if factors is not None else x


def build_svc(x_hat, train: Dataset, gamma: float,
              norm_params: NormalizationParams | None = None) -> SVCModel:
    """Calibrate ``(w, d)`` from a solution direction on already-normalized ``train``."""
    x_hat = np.asarray(x_hat, dtype=float).reshape(-1)
    n = len(train)
    if n < 2:
        raise ClassifierError("need at least two training samples")
    if x_hat.size != n + 1:
        raise ClassifierError(f"solution has length {x_hat.size}, expected {n + 1}")
    theta = x_hat[1:]
    t_norm = np.linalg.norm(theta)
    if t_norm == 0:
        raise ClassifierError("solution has no multiplier component")
    theta_p = theta / t_norm
    X, y = train.X, train.y
    w_p = theta_p @ X
    e_p = theta_p * y / gamma
    regressor = y * e_p + X @ w_p
    if np.ptp(regressor) <= 1e-12 * max(1.0, np.max(np.abs(regressor))):
        raise ClassifierError("degenerate regression: all regressors are equal")
    design = np.column_stack([regressor, np.ones(n)])
    (s, d), *_ = np.linalg.lstsq(design, y, rcond=None)
    return SVCModel(w=s * w_p, d=float(d), theta=s * theta_p, theta_norm=float(s),
                    norm_params=norm_params, gamma=float(gamma))


def predict(model: SVCModel, x_raw) -> np.ndarray | int:
    """``+1`` where ``w^T x + d >= 0`` else ``-1``; a single sample returns an int."""
    x = np.asarray(x_raw, dtype=float)
    single = x.ndim == 1
    if model.norm_params is not None:
        x = apply_normalize(model.norm_params, x)
    labels = np.where(model.decision(x) >= 0, 1, -1)
    return int(labels[0]) if single else labels


@dataclass(frozen=True)
class ClassReport:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class Metrics:
    """Confusion counts with Setosa (``+1``) as the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    def report(self, label: int) -> ClassReport:
        if label == 1:
            hit, false_alarm, miss = self.tp, self.fp, self.fn
        elif label == -1:
            hit, false_alarm, miss = self.tn, self.fn, self.fp
        else:
            raise ClassifierError(f"unknown class {label}")
        precision = hit / (hit + false_alarm) if hit + false_alarm else 0.0
        recall = hit / (hit + miss) if hit + miss else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return ClassReport(precision, recall, f1, hit + miss)

    @classmethod
    def from_labels(cls, y_true, y_pred) -> "Metrics":
        t = np.asarray(y_true)
        p = np.asarray(y_pred)
        if t.shape != p.shape:
            raise ClassifierError("label arrays differ in shape")
        return cls(
            tp=int(np.sum((t == 1) & (p == 1))),
            fp=int(np.sum((t == -1) & (p == 1))),
            tn=int(np.sum((t == -1) & (p == -1))),
            fn=int(np.sum((t == 1) & (p == -1))),
        )

    def to_dict(self) -> dict:
        return {
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "accuracy": self.accuracy,
            "classes": {CLASS_NAMES[c]: vars(self.report(c)) for c in CLASSES},
        }


def evaluate(model: SVCModel, test: Dataset) -> Metrics:
    if len(test) == 0:
        raise ClassifierError("test set is empty")
    return Metrics.from_labels(test.y, predict(model, test.X))


def classical_lssvm(train: Dataset, gamma: float,
                    norm_params: NormalizationParams | None = None) -> SVCModel:
    """Direct dense solve of the kernel system on already-normalized ``train``."""
    system = build_system(train, gamma)
    try:
        sol = np.linalg.solve(system.A, system.b)
    except np.linalg.LinAlgError as exc:
        raise KernelError("kernel system is singular") from exc
    d, theta = float(sol[0]), sol[1:]
    return SVCModel(w=theta @ train.X, d=d, theta=theta, theta_norm=float(np.linalg.norm(theta)),
                    norm_params=norm_params, gamma=float(gamma))
