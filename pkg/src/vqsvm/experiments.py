"""Experiment harness: seeded run configurations, replayable records and sweeps.

A :class:`RunConfig` fully determines one solve.  :func:`run` turns it into a
:class:`RunRecord` holding the cost trace, term counts, timings and (for
Iris instances) the classifier metrics on the 100 Setosa/Virginica samples.
Sweeps are lists of configs executed by :func:`run_cells`, optionally in a
process pool; a failing cell is recorded and the sweep continues.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import statistics
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import classifier as clf
from .kernel import (
    Dataset,
    DataError,
    LinearSystem,
    apply_normalize,
    build_system,
    fit_normalize,
    gen_toy_system,
    load_iris,
    random_symmetric_words,
    resolve_gamma,
    sample_training_subset,
    table1_instance,
)
from .optimizer import OptimizerConfig
from .pauli import decompose, word_matrix
from .svd import recast
from .vqls import AnsatzParams, CostFunction, CostSettings, SolveError, solve

NORMALIZATIONS = ("linear", "none", "zscore")

# (instance, kappa target): four with kappa <= 10, three in (10, 100), three >= 100
STABILITY_INSTANCES = (
    ("table1", 9.0), ("iris-0", 6.0), ("iris-2", 8.0), ("iris-7", 10.0),
    ("iris-1", 20.0), ("iris-3", 50.0), ("iris-6", 80.0),
    ("iris-12", 144.0), ("iris-14", 300.0), ("iris-19", 721.0),
)


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one solve.

    ``instance`` is ``table1``, ``iris-<k>`` (seeded 7-sample draw from the
    bundled Iris data), ``toy`` (random symmetric words, see ``toy_terms``
    and ``toy_seed``) or ``toy-yyz`` (``2 III + YYZ``).  Either ``gamma`` or
    ``kappa`` selects the regularization of Iris instances; a ``kappa``
    below the attainable minimum snaps to the minimizing ``gamma``.
    """

    instance: str = "table1"
    kappa: float | None = None
    gamma: float | None = None
    branch: str = "high"
    svd: bool = False
    normalization: str = "linear"
    seed: int = 0
    shots: int = 10000
    analytic: bool = False
    method: str = "cobyla"
    max_iterations: int = 300
    epsilon: float = 0.01
    plateau_window: int = 30
    pair_mode: str = "symmetric"
    wiring: str = "ccz"
    prune: float = 1e-10
    toy_terms: int = 10
    toy_seed: int = 0

    def __post_init__(self):
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        if self.branch not in ("high", "low"):
            raise ValueError("branch must be 'high' or 'low'")
        self.cost_settings()
        self.optimizer_config()

    def cost_settings(self) -> CostSettings:
        return CostSettings(shots=self.shots, analytic=self.analytic, rng_seed=self.seed,
                            prune=self.prune, pair_mode=self.pair_mode, wiring=self.wiring)

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(method=self.method, max_iterations=self.max_iterations,
                               cost_epsilon=self.epsilon, plateau_window=self.plateau_window)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


# --------------------------------------------------------------------------
# instances
# --------------------------------------------------------------------------

class ZScore:
    def __init__(self, train: Dataset):
        self.mean = train.X.mean(axis=0)
        self.std = train.X.std(axis=0)
        if np.any(self.std == 0):
            raise DataError("constant feature in training data")

    def __call__(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std


@dataclass
class Instance:
    system: LinearSystem
    train: Dataset | None = None       # normalized
    test: Dataset | None = None        # normalized the same way
    norm_params: object = None
    gamma: float | None = None
    kappa_exact: bool = True
    words: list | None = None


def training_set(instance: str) -> Dataset:
    if instance == "table1":
        return table1_instance()
    if instance.startswith("iris-"):
        iris = load_iris()
        return iris.subset(sample_training_subset(iris, int(instance[5:])))
    raise ValueError(f"unknown data instance {instance!r}")


def _normalizer(method: str, train: Dataset):
    if method == "linear":
        params = fit_normalize(train)
        return params, lambda x: apply_normalize(params, x)
    if method == "zscore":
        return None, ZScore(train)
    return None, lambda x: np.asarray(x, dtype=float)


def build_instance(cfg: RunConfig) -> Instance:
    if cfg.instance == "toy-yyz":
        A = 2 * np.eye(8) + word_matrix("YYZ").real
        b = np.zeros(8)
        b[0] = 1.0
        return Instance(LinearSystem(A, b), words=["III", "YYZ"])
    if cfg.instance == "toy":
        words = random_symmetric_words(cfg.toy_terms, seed=cfg.toy_seed)
        toy = gen_toy_system(words, kappa_target=cfg.kappa, seed=cfg.toy_seed)
        return Instance(toy, words=list(words))
    raw = training_set(cfg.instance)
    params, transform = _normalizer(cfg.normalization, raw)
    train = raw.with_features(transform(raw.X))
    iris = load_iris()
    test = iris.with_features(transform(iris.X))
    exact = True
    if cfg.gamma is not None:
        gamma = cfg.gamma
    elif cfg.kappa is not None:
        gamma, exact = resolve_gamma(train, cfg.kappa, cfg.branch)
    else:
        gamma = 1.0
    return Instance(build_system(train, gamma), train, test, params, gamma, exact)


# --------------------------------------------------------------------------
# single runs
# --------------------------------------------------------------------------

@dataclass
class RunRecord:
    config: RunConfig
    kappa: float
    gamma: float | None
    kappa_exact: bool
    n_terms: int
    n_terms_plain: int
    psi_pairs_per_eval: int
    iterations: list[int]
    costs: list[float]
    reason: str
    final_cost: float
    exact_final_cost: float
    alpha_opt: list[float]
    cost_seconds: float
    wall_seconds: float
    degenerate_estimates: int = 0
    metrics: dict | None = None
    classical_metrics: dict | None = None
    model: dict | None = None
    error: str | None = None

    @property
    def accuracy(self) -> float | None:
        return None if self.metrics is None else self.metrics["accuracy"]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["config"] = self.config.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        d = dict(d)
        d["config"] = RunConfig.from_dict(d["config"])
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "RunRecord":
        return cls.from_dict(json.loads(Path(path).read_text()))


def run(cfg: RunConfig) -> RunRecord:
    start = time.perf_counter()
    inst = build_instance(cfg)
    plain = inst.system
    system = recast(plain) if cfg.svd else plain
    settings = cfg.cost_settings()
    cost_fn = CostFunction.for_system(system, settings)
    n_plain = len(decompose(plain.A, cfg.prune)) if cfg.svd else cost_fn.n_terms
    x0 = AnsatzParams.random(cfg.seed)
    error = None
    try:
        trace = solve(system, x0, cfg.optimizer_config(), settings, cost_fn=cost_fn)
    except SolveError as exc:
        trace, error = exc.trace, str(exc)
    alpha = trace.alpha_opt
    exact = float("nan")
    if alpha is not None:
        exact = CostFunction.for_system(system, CostSettings(analytic=True, prune=cfg.prune))(alpha)
    record = RunRecord(
        config=cfg,
        kappa=float(plain.kappa),
        gamma=inst.gamma,
        kappa_exact=inst.kappa_exact,
        n_terms=cost_fn.n_terms,
        n_terms_plain=n_plain,
        psi_pairs_per_eval=cost_fn.n_terms**2,
        iterations=list(trace.iterations),
        costs=[float(c) for c in trace.costs],
        reason=trace.reason,
        final_cost=float(trace.cost_opt),
        exact_final_cost=float(exact),
        alpha_opt=[] if alpha is None else [float(a) for a in alpha],
        cost_seconds=trace.cost_seconds,
        wall_seconds=0.0,
        degenerate_estimates=cost_fn.counters.degenerate,
        error=error,
    )
    if inst.train is not None and alpha is not None:
        x_hat = clf.extract_solution(alpha, system.factors if cfg.svd else None)
        model = clf.build_svc(x_hat, inst.train, inst.gamma, inst.norm_params)
        record.model = model.to_dict()
        record.metrics = _evaluate_normalized(model, inst.test).to_dict()
        baseline = clf.classical_lssvm(inst.train, inst.gamma)
        record.classical_metrics = _evaluate_normalized(baseline, inst.test).to_dict()
    record.wall_seconds = time.perf_counter() - start
    return record


def _evaluate_normalized(model: clf.SVCModel, test: Dataset) -> clf.Metrics:
    # test features are already transformed; bypass the stored min/max scaling
    bare = dataclasses.replace(model, norm_params=None)
    return clf.evaluate(bare, test)


def replay(record: RunRecord) -> tuple[RunRecord, bool]:
    """Re-run a record's config; the flag says whether the cost trace is identical."""
    again = run(record.config)
    return again, again.costs == record.costs and again.iterations == record.iterations


# --------------------------------------------------------------------------
# cells and sweeps
# --------------------------------------------------------------------------

@dataclass
class CellResult:
    config: RunConfig
    record: RunRecord | None = None
    error: str | None = None


def _run_cell(cfg: RunConfig) -> CellResult:
    try:
        return CellResult(cfg, run(cfg))
    except Exception as exc:  # a failing cell must not end the sweep
        return CellResult(cfg, error=f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}")


def run_cells(configs: Sequence[RunConfig], workers: int = 1) -> list[CellResult]:
    if workers <= 1:
        return [_run_cell(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, configs))


def time_cost_evaluation(system: LinearSystem, settings: CostSettings, seed: int = 0, repeats: int = 5) -> float:
    """Median wall time in seconds of one full cost evaluation at a seeded point."""
    f = CostFunction.for_system(system, settings)
    alpha = AnsatzParams.random(seed).alpha
    f(alpha)  # warm the circuit caches
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        f(alpha)
        times.append(time.perf_counter() - t)
    return statistics.median(times)


def _grid(base: RunConfig, **axes) -> list[RunConfig]:
    cells = [base]
    for key, values in axes.items():
        cells = [c.replace(**{key: v}) for c in cells for v in values]
    return cells


EXPERIMENTS = ("svd-compare", "kappa-sweep-toy", "kappa-sweep-iris", "pauli-count-sweep",
               "stability", "accuracy-report")


@dataclass
class ExperimentPlan:
    name: str
    base: RunConfig = field(default_factory=RunConfig)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    kappas: tuple[float, ...] = ()
    svd: tuple[bool, ...] = (False,)
    terms: tuple[int, ...] = ()
    instances: tuple[str, ...] = ()
    workers: int = 1


def experiment_cells(plan: ExperimentPlan) -> list[RunConfig]:
    base, seeds = plan.base, list(plan.seeds)
    name = plan.name
    if name == "svd-compare":
        kappas = plan.kappas or (144.0,)
        return _grid(base, kappa=kappas, svd=(False, True), seed=seeds)
    if name == "kappa-sweep-toy":
        kappas = plan.kappas or (1.5, 3.0, 10.0)
        return _grid(base.replace(instance="toy"), kappa=kappas, seed=seeds)
    if name == "kappa-sweep-iris":
        kappas = plan.kappas or (5.0, 10.0, 19.0, 144.0, 721.0)
        return _grid(base, kappa=kappas, svd=plan.svd, seed=seeds)
    if name == "pauli-count-sweep":
        kappa = plan.kappas[0] if plan.kappas else 3.0
        terms = plan.terms or (10, 15, 20, 36)
        return _grid(base.replace(instance="toy", kappa=kappa), toy_terms=terms, seed=seeds)
    if name == "stability":
        pairs = STABILITY_INSTANCES
        if plan.instances:
            kappas = plan.kappas or (None,) * len(plan.instances)
            pairs = tuple(zip(plan.instances, kappas))
        return [base.replace(instance=i, kappa=k, seed=s) for i, k in pairs for s in seeds]
    if name == "accuracy-report":
        instances = plan.instances or (base.instance,)
        kappas = plan.kappas or (base.kappa,)
        return _grid(base, instance=instances, kappa=kappas, svd=plan.svd, seed=seeds)
    raise ValueError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")


SWEEP_FIELDS = ("instance", "kappa_target", "kappa", "gamma", "svd", "seed", "n_terms", "toy_terms",
                "iterations", "reason", "final_cost", "exact_final_cost", "accuracy",
                "classical_accuracy", "cost_seconds", "error")


def sweep_row(cell: CellResult) -> dict:
    c, r = cell.config, cell.record
    row = {"instance": c.instance, "kappa_target": c.kappa, "svd": c.svd, "seed": c.seed,
           "toy_terms": c.toy_terms if c.instance == "toy" else "", "error": cell.error or ""}
    if r is not None:
        row.update(kappa=r.kappa, gamma="" if r.gamma is None else r.gamma, n_terms=r.n_terms,
                   iterations=len(r.costs), reason=r.reason, final_cost=r.final_cost,
                   exact_final_cost=r.exact_final_cost,
                   accuracy="" if r.metrics is None else r.metrics["accuracy"],
                   classical_accuracy="" if r.classical_metrics is None else r.classical_metrics["accuracy"],
                   cost_seconds=r.cost_seconds, error=r.error or cell.error or "")
    return row


def write_csv(path, rows: Iterable[dict], fields: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fields), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fields})


def write_trace(path, record: RunRecord) -> None:
    write_csv(path, ({"iteration": i, "cost": c} for i, c in zip(record.iterations, record.costs)),
              ("iteration", "cost"))


def median_by(cells: Sequence[CellResult], key: Callable[[RunConfig], object],
              value: Callable[[RunRecord], float] = lambda r: r.final_cost) -> dict:
    groups: dict = {}
    for cell in cells:
        if cell.record is not None:
            groups.setdefault(key(cell.config), []).append(value(cell.record))
    return {k: statistics.median(v) for k, v in groups.items()}


def summarize(name: str, cells: Sequence[CellResult]) -> str:
    lines = [f"experiment: {name}", f"cells: {len(cells)} ({sum(c.error is not None for c in cells)} failed)"]
    if name in ("kappa-sweep-toy", "kappa-sweep-iris", "svd-compare"):
        med = median_by(cells, lambda c: (c.kappa, c.svd))
        for (kappa, svd), v in sorted(med.items()):
            lines.append(f"kappa target {kappa:g} svd={'on' if svd else 'off'}: median final cost {v:.4f}")
    if name == "pauli-count-sweep":
        for terms, v in sorted(median_by(cells, lambda c: c.toy_terms).items()):
            lines.append(f"{terms} Pauli terms: median final cost {v:.4f}")
    if name in ("stability", "accuracy-report"):
        for inst, accs in stability_table(cells).items():
            row = " ".join(f"{a:.2f}" for a in accs["quantum"])
            lines.append(f"{inst} kappa={accs['kappa']:.1f}: vqls [{row}] classical {accs['classical']:.2f}")
    return "\n".join(lines) + "\n"


def stability_table(cells: Sequence[CellResult]) -> dict:
    table: dict = {}
    for cell in cells:
        r = cell.record
        if r is None or r.metrics is None:
            continue
        key = f"{cell.config.instance}@{cell.config.kappa}"
        entry = table.setdefault(key, {"kappa": r.kappa, "quantum": [], "classical": r.classical_metrics["accuracy"]})
        entry["quantum"].append(r.metrics["accuracy"])
    return table


def write_bundle(out_dir, name: str, cells: Sequence[CellResult]) -> Path:
    out = Path(out_dir)
    (out / "records").mkdir(parents=True, exist_ok=True)
    write_csv(out / "sweep.csv", (sweep_row(c) for c in cells), SWEEP_FIELDS)
    for k, cell in enumerate(cells):
        if cell.record is not None:
            cell.record.save(out / "records" / f"cell{k:03d}.json")
    if name in ("stability", "accuracy-report"):
        metrics = {f"cell{k:03d}": {"config": c.config.to_dict(), "vqls": c.record.metrics,
                                    "classical": c.record.classical_metrics}
                   for k, c in enumerate(cells) if c.record is not None and c.record.metrics}
        (out / "metrics.json").write_text(json.dumps(metrics, indent=2))
    (out / "summary.txt").write_text(summarize(name, cells))
    return out


# --------------------------------------------------------------------------
# normalization study
# --------------------------------------------------------------------------

def normalization_study(base: RunConfig, seeds: Sequence[int] = (0, 1, 2, 3, 4),
                        methods: Sequence[str] = NORMALIZATIONS) -> list[CellResult]:
    """Same instance and gamma, differing only in feature preprocessing."""
    if base.gamma is None:
        raise ValueError("the normalization study needs a fixed gamma")
    return run_cells([base.replace(normalization=m, seed=s) for m in methods for s in seeds])
