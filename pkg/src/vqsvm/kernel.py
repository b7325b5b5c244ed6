"""Data handling and LS-SVM kernel systems.

The LS-SVM optimality conditions for a linear kernel form the
``(N+1) x (N+1)`` system::

    [ 0   1^T              ] [d    ]   [0]
    [ 1   X X^T + I/gamma  ] [theta] = [y]

Everything here is classical preprocessing; the variational solver only sees
the resulting matrix and right-hand side.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .pauli import PauliDecomposition, decompose, symmetric_words, validate_word, word_matrix

LABELS = {"setosa": 1, "virginica": -1}
SPECIES_NAME = {1: "Setosa", -1: "Virginica"}
GAMMA_BRACKET = (1e-4, 1e6)
SINGULAR_RATIO = 1e-14


class DataError(ValueError):
    pass


class KernelError(ValueError):
    pass


# --------------------------------------------------------------------------
# datasets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Sample:
    features: tuple[float, ...]
    label: int
    species: str


@dataclass(frozen=True)
class Dataset:
    samples: tuple[Sample, ...]

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        dims = {len(s.features) for s in self.samples}
        if len(dims) > 1:
            raise DataError(f"inconsistent feature dimensions {sorted(dims)}")
        for s in self.samples:
            if s.label not in (1, -1):
                raise DataError(f"label must be +1 or -1, got {s.label}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def feature_dim(self) -> int:
        return len(self.samples[0].features) if self.samples else 0

    @property
    def X(self) -> np.ndarray:
        return np.array([s.features for s in self.samples], dtype=float).reshape(len(self), self.feature_dim)

    @property
    def y(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=float)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return Dataset([self.samples[i] for i in indices])

    def with_features(self, X: np.ndarray) -> "Dataset":
        X = np.asarray(X, dtype=float)
        return Dataset([Sample(tuple(map(float, row)), s.label, s.species) for row, s in zip(X, self.samples)])

    @classmethod
    def from_arrays(cls, X, y, species: Sequence[str] | None = None) -> "Dataset":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y).astype(int)
        if species is None:
            species = [SPECIES_NAME.get(int(v), str(v)) for v in y]
        return cls([Sample(tuple(map(float, r)), int(v), s) for r, v, s in zip(X, y, species)])


def _canonical_species(name: str) -> str:
    s = name.strip().strip('"').lower()
    if s.startswith("iris-"):
        s = s[5:]
    return s


def load_csv(path) -> Dataset:
    """Read 4 feature columns plus a species column; keep Setosa and Virginica.

    A header row is accepted on the first line only.  Setosa is labelled +1
    and Virginica -1; any other species is skipped.
    """
    samples = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 columns, got {len(row)}")
            try:
                feats = tuple(float(c) for c in row[:4])
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise DataError(f"{path}:{lineno}: non-numeric feature in {row[:4]}") from None
            if not all(math.isfinite(v) for v in feats):
                raise DataError(f"{path}:{lineno}: non-finite feature")
            species = _canonical_species(row[4])
            if species not in LABELS:
                continue
            label = LABELS[species]
            samples.append(Sample(feats, label, SPECIES_NAME[label]))
    if not samples:
        raise DataError(f"{path}: no Setosa or Virginica samples found")
    return Dataset(samples)


def bundled_iris_path() -> Path:
    return Path(str(resources.files("vqsvm").joinpath("data/iris.csv")))


def load_iris() -> Dataset:
    """The 100 Setosa/Virginica samples of the bundled Iris file, in file order."""
    return load_csv(bundled_iris_path())


# rows 1-7 of the reference training instance
TABLE1_FEATURES = (
    (5.1, 3.5, 1.4, 0.2),
    (4.9, 3.0, 1.4, 0.2),
    (4.7, 3.2, 1.3, 0.2),
    (5.0, 3.6, 1.4, 0.2),
    (6.7, 3.0, 5.2, 2.3),
    (6.3, 2.5, 5.0, 1.9),
    (5.9, 3.0, 5.1, 1.8),
)
TABLE1_LABELS = (1, 1, 1, 1, -1, -1, -1)


def table1_instance() -> Dataset:
    return Dataset.from_arrays(TABLE1_FEATURES, TABLE1_LABELS)


def sample_training_subset(data: Dataset, seed: int, size: int = 7, min_per_class: int = 2) -> list[int]:
    """Seeded draw without replacement containing at least ``min_per_class`` of each label."""
    y = data.y
    pos, neg = np.flatnonzero(y > 0), np.flatnonzero(y < 0)
    if min(len(pos), len(neg)) < min_per_class or size < 2 * min_per_class or size > len(data):
        raise DataError("cannot draw a mixed training subset of the requested size")
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        idx = np.sort(rng.choice(len(data), size=size, replace=False))
        n_pos = int(np.sum(y[idx] > 0))
        if min(n_pos, size - n_pos) < min_per_class:
            continue
        X = data.X[idx]
        if np.any(X.max(axis=0) == X.min(axis=0)):
            continue
        return [int(i) for i in idx]
    raise DataError("could not draw a non-degenerate training subset")


# --------------------------------------------------------------------------
# normalization
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NormalizationParams:
    """Per-feature ``(min, max)`` of the training subset."""

    minimum: tuple[float, ...]
    maximum: tuple[float, ...]

    def __post_init__(self):
        if any(hi <= lo for lo, hi in zip(self.minimum, self.maximum)):
            raise DataError("constant feature in training data (max == min)")

    def to_dict(self) -> dict:
        return {"min": list(self.minimum), "max": list(self.maximum)}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        return cls(tuple(d["min"]), tuple(d["max"]))


def fit_normalize(train: Dataset) -> NormalizationParams:
    if len(train) == 0:
        raise DataError("cannot fit normalization on an empty dataset")
    X = train.X
    return NormalizationParams(tuple(X.min(axis=0)), tuple(X.max(axis=0)))


def apply_normalize(params: NormalizationParams, x) -> np.ndarray:
    """Linear scaling with training min/max; test points may leave ``[0, 1]``."""
    lo = np.asarray(params.minimum)
    hi = np.asarray(params.maximum)
    return (np.asarray(x, dtype=float) - lo) / (hi - lo)


def normalize_dataset(params: NormalizationParams, data: Dataset) -> Dataset:
    return data.with_features(apply_normalize(params, data.X))


# --------------------------------------------------------------------------
# kernel systems
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LinearSystem:
    """``A x = b`` with real symmetric-or-diagonal ``A`` on ``n`` qubits."""

    A: np.ndarray
    b: np.ndarray

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.A.shape[0])))

    @property
    def b_unit(self) -> np.ndarray:
        return self.b / np.linalg.norm(self.b)

    @cached_property
    def kappa(self) -> float:
        return condition_number(self.A)

    def decomposition(self, prune: float = 1e-10) -> PauliDecomposition:
        return decompose(self.A, prune)

    def direct_solution(self) -> np.ndarray:
        """Normalized direct solve, used as a reference."""
        x = np.linalg.solve(self.A, self.b)
        return x / np.linalg.norm(x)


@dataclass(frozen=True, eq=False)
class KernelSystem(LinearSystem):
    gamma: float = 1.0
    train_indices: tuple[int, ...] | None = None


def condition_number(a: np.ndarray) -> float:
    """Ratio of extreme singular values; raises for numerically singular input."""
    s = np.linalg.svd(np.asarray(a), compute_uv=False)
    if s[-1] < SINGULAR_RATIO * s[0] or s[0] == 0:
        raise KernelError(f"matrix is singular (sigma_min / sigma_max = {s[-1] / s[0] if s[0] else 0:.3g})")
    return float(s[0] / s[-1])


def kernel_matrix(X: np.ndarray, gamma: float) -> np.ndarray:
    n = X.shape[0]
    a = np.zeros((n + 1, n + 1))
    a[0, 1:] = 1.0
    a[1:, 0] = 1.0
    a[1:, 1:] = X @ X.T + np.eye(n) / gamma
    return a


def build_system(train: Dataset, gamma: float, train_indices: Sequence[int] | None = None) -> KernelSystem:
    """LS-SVM system for already-normalized training data and a linear kernel."""
    n = len(train)
    if n < 1 or (n + 1) & n:
        raise KernelError(f"N + 1 = {n + 1} is not a power of two")
    if not gamma > 0:
        raise KernelError("gamma must be positive")
    system = KernelSystem(
        A=kernel_matrix(train.X, gamma),
        b=np.concatenate([[0.0], train.y]),
        gamma=float(gamma),
        train_indices=None if train_indices is None else tuple(train_indices),
    )
    system.kappa  # raises for a singular system
    return system


# --------------------------------------------------------------------------
# gamma tuning
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KappaProfile:
    """Location of the smallest attainable condition number over the gamma bracket.

    For a linear kernel the condition number is large for both very small
    gamma (regularizer dominates) and very large gamma (rank-deficient Gram
    block), so it decreases up to ``gamma_min`` and increases after it.
    """

    gamma_min: float
    kappa_min: float
    kappa_low_end: float
    kappa_high_end: float


def _kappa_at(X: np.ndarray, gamma: float) -> float:
    s = np.linalg.svd(kernel_matrix(X, gamma), compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else math.inf


def kappa_profile(train: Dataset, bracket=GAMMA_BRACKET) -> KappaProfile:
    X = train.X
    lo, hi = np.log10(bracket[0]), np.log10(bracket[1])
    grid = np.linspace(lo, hi, 201)
    vals = np.array([_kappa_at(X, 10**t) for t in grid])
    k = int(np.argmin(vals))
    res = minimize_scalar(
        lambda t: _kappa_at(X, 10**t),
        bounds=(grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return KappaProfile(float(10**res.x), float(res.fun), float(vals[0]), float(vals[-1]))


def tune_gamma(
    train: Dataset,
    kappa_target: float,
    tolerance: float = 0.01,
    branch: str = "high",
    bracket=GAMMA_BRACKET,
) -> float:
    """Find gamma with ``kappa(gamma)`` within ``tolerance`` (relative) of the target.

    ``branch="high"`` searches ``gamma >= gamma_min`` where the condition number
    grows with gamma; ``branch="low"`` searches ``gamma <= gamma_min`` where it
    shrinks with gamma.  Both are bisections on log-gamma; the monotonicity of
    the searched branch is checked on a grid before bisecting.
    """
    if tolerance <= 0:
        raise KernelError("tolerance must be positive")
    if branch not in ("high", "low"):
        raise KernelError(f"branch must be 'high' or 'low', got {branch!r}")
    X = train.X
    prof = kappa_profile(train, bracket)
    if branch == "high":
        a, b = math.log10(prof.gamma_min), math.log10(bracket[1])
        k_a, k_b = prof.kappa_min, prof.kappa_high_end
    else:
        a, b = math.log10(bracket[0]), math.log10(prof.gamma_min)
        k_a, k_b = prof.kappa_low_end, prof.kappa_min
    reachable = (min(k_a, k_b), max(k_a, k_b))
    if not reachable[0] * (1 - tolerance) <= kappa_target <= reachable[1] * (1 + tolerance):
        raise KernelError(
            f"kappa target {kappa_target:g} unreachable on the {branch} branch; "
            f"attainable range is [{reachable[0]:.4g}, {reachable[1]:.4g}]"
        )
    grid = np.linspace(a, b, 60)
    vals = np.array([_kappa_at(X, 10**t) for t in grid])
    steps = np.diff(vals) if branch == "high" else -np.diff(vals)
    if np.any(steps < -1e-9 * vals[1:]):
        raise KernelError(f"kappa(gamma) is not monotone on the {branch} branch; tuning aborted")
    if abs(kappa_target - prof.kappa_min) <= tolerance * kappa_target:
        return prof.gamma_min

    def f(t):
        return _kappa_at(X, 10**t) - kappa_target

    t = brentq(f, a, b, xtol=1e-12, rtol=1e-12)
    gamma = float(10**t)
    achieved = _kappa_at(X, gamma)
    if abs(achieved - kappa_target) > tolerance * kappa_target:
        raise KernelError(f"bisection ended at kappa {achieved:.6g}, outside tolerance of {kappa_target:g}")
    return gamma


def resolve_gamma(train: Dataset, kappa_target: float, branch: str = "high", tolerance: float = 0.01) -> tuple[float, bool]:
    """Like :func:`tune_gamma`, but targets below the attainable minimum snap to it.

    Returns ``(gamma, exact)`` where ``exact`` is False when the target was
    replaced by the best-conditioned system.
    """
    prof = kappa_profile(train)
    if kappa_target < prof.kappa_min * (1 - tolerance):
        return prof.gamma_min, False
    return tune_gamma(train, kappa_target, tolerance, branch), True


# --------------------------------------------------------------------------
# toy systems
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ToySystem(LinearSystem):
    words: tuple[str, ...] = ()
    coefficients: tuple[float, ...] = ()


def random_unit_vector(dim: int, seed: int) -> np.ndarray:
    v = np.random.default_rng(seed).normal(size=dim)
    return v / np.linalg.norm(v)


def random_symmetric_words(count: int, n_qubits: int = 3, seed: int = 0) -> list[str]:
    """``III..`` plus ``count - 1`` distinct real-symmetric words drawn with ``seed``."""
    pool = [w for w in symmetric_words(n_qubits) if set(w) != {"I"}]
    if not 1 <= count <= len(pool) + 1:
        raise KernelError(f"count must be in 1..{len(pool) + 1}")
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(pool), size=count - 1, replace=False)
    return ["I" * n_qubits] + [pool[i] for i in sorted(picked)]


def gen_toy_system(
    words: Sequence[str],
    kappa_target: float | None = None,
    coefficients: Sequence[float] | None = None,
    seed: int = 0,
    max_retries: int = 20,
) -> ToySystem:
    """Random Pauli-structured system.

    With ``coefficients`` the matrix is exactly ``sum c_l P_l``.  With
    ``kappa_target`` the coefficients are drawn uniformly from ``[-1, 1]``,
    the spectrum is shifted by a multiple of the identity and rescaled to
    spectral norm 1 so that the condition number equals the target.
    """
    words = [validate_word(w) for w in words]
    n = len(words[0])
    if any(len(w) != n for w in words):
        raise KernelError("all words must have the same length")
    if "I" * n not in words:
        raise KernelError("words must include the identity word")
    if any(w.count("Y") % 2 for w in words):
        raise KernelError("words must be real symmetric (even number of Y letters)")
    if len(set(words)) != len(words):
        raise KernelError("duplicate words")
    mats = [word_matrix(w).real for w in words]
    b = random_unit_vector(2**n, seed)
    if (coefficients is None) == (kappa_target is None):
        raise KernelError("give exactly one of kappa_target or coefficients")
    if coefficients is not None:
        if len(coefficients) != len(words):
            raise KernelError("one coefficient per word is required")
        a = sum(c * m for c, m in zip(coefficients, mats))
        return ToySystem(A=a, b=b, words=tuple(words), coefficients=tuple(float(c) for c in coefficients))
    if kappa_target < 1:
        raise KernelError("kappa_target must be >= 1")
    rng = np.random.default_rng(seed + 7919)
    ident = words.index("I" * n)
    for _ in range(max_retries):
        c = rng.uniform(-1.0, 1.0, size=len(words))
        a = sum(ci * m for ci, m in zip(c, mats))
        lam = np.linalg.eigvalsh(a)
        spread = lam[-1] - lam[0]
        if kappa_target == 1:
            if spread < 1e-12:
                break
            continue
        if spread < 1e-8 or np.any(np.abs(c) < 1e-6):
            continue
        shift = (lam[-1] - kappa_target * lam[0]) / (kappa_target - 1)
        scale = lam[-1] + shift
        c[ident] += shift
        c /= scale
        a = sum(ci * m for ci, m in zip(c, mats))
        if abs(condition_number(a) - kappa_target) <= 0.02 * kappa_target and np.all(np.abs(c) > 1e-10):
            break
    else:
        raise KernelError(f"could not realize kappa {kappa_target:g} with words {words}")
    return ToySystem(A=a, b=b, words=tuple(words), coefficients=tuple(float(v) for v in c))
