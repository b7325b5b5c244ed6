"""Command-line entry point: ``vqsvm <command> ...``.

Config files are INI-style.  Keys of the ``[run]`` section are
:class:`~vqsvm.experiments.RunConfig` fields; the ``[experiment]`` section
takes comma-separated ``seeds``, ``kappas``, ``svd``, ``terms``,
``instances`` and an integer ``workers``.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .kernel import DataError, KernelError
from .pauli import PauliError, decompose
from .svd import recast
from .vqls import SolveError

_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}


def _to_bool(text: str) -> bool:
    try:
        return _BOOL[text.strip().lower()]
    except KeyError:
        raise ValueError(f"not a boolean: {text!r}") from None


def _field_parser(name: str):
    kind = {f.name: f.type for f in dataclasses.fields(ex.RunConfig)}[name]
    if "bool" in kind:
        return _to_bool
    if "int" in kind:
        return int
    if "float" in kind:
        return lambda s: None if s.strip().lower() in ("", "none") else float(s)
    return str


def _split(text: str, cast):
    return tuple(cast(t.strip()) for t in text.split(",") if t.strip())


def load_config(path) -> tuple[ex.RunConfig, dict]:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise FileNotFoundError(f"cannot read config {path}")
    run_values = {}
    if parser.has_section("run"):
        for key, text in parser.items("run"):
            try:
                run_values[key] = _field_parser(key)(text)
            except KeyError:
                raise ValueError(f"unknown [run] key {key!r}") from None
    extra = {}
    if parser.has_section("experiment"):
        casts = {"seeds": int, "kappas": float, "svd": _to_bool, "terms": int, "instances": str}
        for key, text in parser.items("experiment"):
            if key == "workers":
                extra[key] = int(text)
            elif key in casts:
                extra[key] = _split(text, casts[key])
            else:
                raise ValueError(f"unknown [experiment] key {key!r}")
    return ex.RunConfig(**run_values), extra


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file with a [run] section")
    p.add_argument("--instance", help="table1, iris-<k>, toy or toy-yyz")
    p.add_argument("--kappa", type=float, help="target condition number")
    p.add_argument("--gamma", type=float, help="regularization (overrides --kappa)")
    p.add_argument("--branch", choices=("high", "low"))
    p.add_argument("--normalization", choices=ex.NORMALIZATIONS)
    p.add_argument("--svd", action="store_true", default=None, help="solve the SVD-recast system")
    p.add_argument("--shots", type=int)
    p.add_argument("--analytic", action="store_true", default=None, help="exact expectation values")
    p.add_argument("--seed", type=int)
    p.add_argument("--method", choices=("cobyla", "nelder-mead"))
    p.add_argument("--max-iter", dest="max_iterations", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--toy-terms", type=int)
    p.add_argument("--toy-seed", type=int)
    p.add_argument("--pair-mode", choices=("symmetric", "full", "literal"))
    p.add_argument("--wiring", choices=("ccz", "aux", "dense"))


_RUN_KEYS = ("instance", "kappa", "gamma", "branch", "normalization", "svd", "shots", "analytic", "seed",
             "method", "max_iterations", "epsilon", "toy_terms", "toy_seed", "pair_mode", "wiring")


def _run_config(args) -> tuple[ex.RunConfig, dict]:
    cfg, extra = load_config(args.config) if getattr(args, "config", None) else (ex.RunConfig(), {})
    overrides = {k: getattr(args, k) for k in _RUN_KEYS if getattr(args, k, None) is not None}
    return cfg.replace(**overrides), extra


def _matrix_from_file(path: str) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such matrix file: {path}")
    try:
        return np.load(p) if p.suffix == ".npy" else np.loadtxt(p, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise DataError(f"cannot parse matrix file {path}: {exc}") from exc


def cmd_decompose(args) -> int:
    if args.matrix:
        a = _matrix_from_file(args.matrix)
    elif args.instance == "identity":
        a = np.eye(8)
    else:
        cfg, _ = _run_config(args)
        a = ex.build_instance(cfg).system.A
    plain = decompose(a, args.prune)
    print(f"plain: {len(plain)} terms, {len(plain) ** 2} psi-pair loops")
    for t in plain:
        print(f"  {t.word}  {t.coefficient.real:+.10g}")
    if args.svd:
        rec = recast(ex.LinearSystem(np.asarray(a, dtype=float), np.ones(a.shape[0])))
        diag = decompose(rec.A, args.prune)
        print(f"svd: {len(diag)} terms, {len(diag) ** 2} psi-pair loops")
        for t in diag:
            print(f"  {t.word}  {t.coefficient.real:+.10g}")
    return 0


def _write_run(out: Path, record: ex.RunRecord) -> None:
    out.mkdir(parents=True, exist_ok=True)
    ex.write_trace(out / "trace.csv", record)
    record.save(out / "record.json")
    if record.metrics is not None:
        (out / "metrics.json").write_text(json.dumps(
            {"vqls": record.metrics, "classical": record.classical_metrics}, indent=2))


def _describe(record: ex.RunRecord) -> str:
    line = (f"kappa={record.kappa:.4g} terms={record.n_terms} iterations={len(record.costs)} "
            f"reason={record.reason} final_cost={record.final_cost:.6g} exact={record.exact_final_cost:.6g}")
    if record.metrics is not None:
        line += f" accuracy={record.metrics['accuracy']:.2f} classical={record.classical_metrics['accuracy']:.2f}"
    return line


def cmd_solve(args) -> int:
    cfg, _ = _run_config(args)
    record = ex.run(cfg)
    if args.out:
        _write_run(Path(args.out), record)
    else:
        print("iteration,cost")
        for i, c in zip(record.iterations, record.costs):
            print(f"{i},{c!r}")
    print(_describe(record), file=sys.stderr if not args.out else sys.stdout)
    if record.error:
        print(f"error: {record.error}", file=sys.stderr)
        return 1
    return 0


def cmd_experiment(args) -> int:
    cfg, extra = _run_config(args)
    plan = ex.ExperimentPlan(
        name=args.name, base=cfg,
        seeds=extra.get("seeds", (0, 1, 2, 3, 4)),
        kappas=extra.get("kappas", ()),
        svd=extra.get("svd", (False,)),
        terms=extra.get("terms", ()),
        instances=extra.get("instances", ()),
        workers=args.workers or extra.get("workers", 1),
    )
    cells = ex.run_cells(ex.experiment_cells(plan), plan.workers)
    out = ex.write_bundle(args.out, args.name, cells)
    if args.name == "svd-compare":
        _svd_speedup_report(out, cfg, plan)
    print((out / "summary.txt").read_text(), end="")
    failed = [c for c in cells if c.error]
    if failed:
        print(f"error: {failed[0].error.splitlines()[0]}", file=sys.stderr)
        return 1
    return 0


def _svd_speedup_report(out: Path, cfg: ex.RunConfig, plan: ex.ExperimentPlan) -> None:
    lines = []
    for kappa in plan.kappas or (144.0,):
        plain = ex.build_instance(cfg.replace(kappa=kappa)).system
        settings = cfg.cost_settings()
        t_plain = ex.time_cost_evaluation(plain, settings)
        t_svd = ex.time_cost_evaluation(recast(plain), settings)
        lines.append(f"kappa target {kappa:g}: one cost evaluation {t_plain * 1e3:.2f} ms plain, "
                     f"{t_svd * 1e3:.2f} ms recast, speedup {t_plain / t_svd:.1f}x")
    with open(out / "summary.txt", "a") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_normalization_study(args) -> int:
    cfg, extra = _run_config(args)
    if cfg.gamma is None:
        cfg = cfg.replace(gamma=1.0)
    cells = ex.normalization_study(cfg, extra.get("seeds", (0, 1, 2, 3, 4)), args.methods or ex.NORMALIZATIONS)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cell in cells:
        if cell.record is not None:
            sub = out / f"{cell.config.normalization}-seed{cell.config.seed}"
            _write_run(sub, cell.record)
    ex.write_csv(out / "sweep.csv", (dict(ex.sweep_row(c), normalization=c.config.normalization) for c in cells),
                 ("normalization",) + ex.SWEEP_FIELDS)
    med = ex.median_by(cells, lambda c: c.normalization)
    summary = "".join(f"{m}: median final cost {v:.4f}\n" for m, v in med.items())
    (out / "summary.txt").write_text(summary)
    print(summary, end="")
    failed = [c for c in cells if c.error]
    if failed:
        print(f"error: {failed[0].error.splitlines()[0]}", file=sys.stderr)
        return 1
    return 0


def cmd_replay(args) -> int:
    record = ex.RunRecord.load(args.record)
    again, same = ex.replay(record)
    print(_describe(again))
    print("trace identical" if same else "trace differs")
    return 0 if same else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vqsvm", description="Variational LS-SVM solver and experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="Pauli term counts of a system matrix")
    _add_run_flags(p)
    p.add_argument("--matrix", help="CSV or .npy file holding a square Hermitian matrix")
    p.add_argument("--prune", type=float, default=1e-10)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("solve", help="solve one system and write trace.csv / record.json")
    _add_run_flags(p)
    p.add_argument("--out", help="output directory (default: trace to stdout)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("experiment", help="run a sweep and write a CSV/JSON bundle")
    p.add_argument("name", choices=ex.EXPERIMENTS)
    _add_run_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("normalization-study", help="compare none / linear / z-score preprocessing")
    _add_run_flags(p)
    p.add_argument("--methods", nargs="+", choices=ex.NORMALIZATIONS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_normalization_study)

    p = sub.add_parser("replay", help="re-run a record.json and compare traces")
    p.add_argument("record")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, DataError, KernelError, PauliError, SolveError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
