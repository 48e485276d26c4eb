"""Command-line interface: dataset I/O, fitting, simulation, and experiments.

Datasets travel as CSV with header ``target,x1,...,xp``; the target field is
empty for observational rows or a semicolon-separated list of 1-based vertex
labels.  Exit codes: 0 success, 2 configuration or parameter error, 3 data
error, 4 capacity guard.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .equivalence import essential_graph, format_essential_graph
from .errors import CapacityError, DataError, ParameterError
from .experiments import ExperimentConfig, run_consistency_experiment, run_fit
from .model import (
    Dataset,
    InterventionSpec,
    InterventionTarget,
    TargetFamily,
    derive_seed,
    format_model,
    sample_dataset,
    sample_normalized_model,
    sample_random_dag,
)
from .search import SearchConfig

__all__ = ["ingest_csv", "emit_csv", "main"]

_FLOAT_FMT = "{:.17g}"


def ingest_csv(path: str | Path) -> Dataset:
    """Read a dataset CSV; malformed rows are rejected with their line number."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    lines = text.splitlines()
    if not lines:
        raise DataError(f"{path}: empty file")
    header = [c.strip() for c in lines[0].split(",")]
    p = len(header) - 1
    if p < 1 or header[0] != "target" or header[1:] != [f"x{i}" for i in range(1, p + 1)]:
        raise DataError(
            f"{path}: line 1: header must be 'target,x1,...,xp', got {lines[0]!r}"
        )
    targets: list[InterventionTarget] = []
    values: list[list[float]] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        cells = raw.split(",")
        if len(cells) != p + 1:
            raise DataError(f"{path}: line {lineno}: expected {p + 1} fields, got {len(cells)}")
        field = cells[0].strip()
        if field:
            try:
                labels = [int(part) for part in field.split(";")]
                target = InterventionTarget(tuple(labels))
                target.validate_for(p)
            except (ValueError, ParameterError) as exc:
                raise DataError(f"{path}: line {lineno}: bad target {field!r} ({exc})") from None
        else:
            target = InterventionTarget.empty()
        row = []
        for col, cell in enumerate(cells[1:], start=1):
            try:
                x = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: line {lineno}: column x{col}: not a number: {cell.strip()!r}"
                ) from None
            if not np.isfinite(x):
                raise DataError(f"{path}: line {lineno}: column x{col}: non-finite value")
            row.append(x)
        targets.append(target)
        values.append(row)
    return Dataset(p, tuple(targets), np.array(values, dtype=float).reshape(len(values), p))


def emit_csv(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset CSV that ingest_csv reads back bit-exactly."""
    lines = ["target," + ",".join(f"x{i}" for i in range(1, dataset.p + 1))]
    for target, row in dataset.rows():
        cells = [target.label()] + [_FLOAT_FMT.format(v) for v in row]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# experiment configuration files

_INT_KEYS = {"p", "k", "replicates_per_target", "replicates", "seed", "max_parents", "workers"}
_FLOAT_KEYS = {"expected_degree", "tau"}
_INT_LIST_KEYS = {"n_grid"}
_FLOAT_LIST_KEYS = {"mu_grid"}
_STR_KEYS = {"method"}
_CONFIG_KEYS = _INT_KEYS | _FLOAT_KEYS | _INT_LIST_KEYS | _FLOAT_LIST_KEYS | _STR_KEYS


def _parse_config_value(key: str, value: str):
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _INT_LIST_KEYS:
            return tuple(int(v.strip()) for v in value.split(",") if v.strip())
        if key in _FLOAT_LIST_KEYS:
            return tuple(float(v.strip()) for v in value.split(",") if v.strip())
        return value
    except ValueError as exc:
        raise ParameterError(f"bad value for {key}: {value!r} ({exc})") from None


def _read_config_file(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from None
    settings = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}: line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ParameterError(f"{path}: line {lineno}: unknown key {key!r}")
        settings[key] = _parse_config_value(key, value)
    return settings


# ---------------------------------------------------------------------------
# commands


def _cmd_fit(args) -> int:
    dataset = ingest_csv(args.data)
    config = SearchConfig(
        max_parents=args.max_parents,
        max_steps=args.max_steps,
        penalty_weight=args.penalty_weight,
    )
    fitted, graph, _ = run_fit(
        dataset, method=args.method, config=config, out_dir=args.out
    )
    print(f"n={dataset.n} p={dataset.p} method={args.method}")
    print(f"edges={fitted.dag.num_edges} bic={fitted.bic:.6f} loglik={fitted.log_likelihood:.6f}")
    sys.stdout.write(format_essential_graph(graph))
    return 0


def _cmd_simulate(args) -> int:
    if args.seed is None:
        raise ParameterError("--seed is mandatory")
    if args.k and args.n < args.k * args.replicates_per_target:
        raise ParameterError("n is smaller than the interventional row count")
    dag = sample_random_dag(args.p, args.expected_degree, derive_seed(args.seed, 1))
    model = sample_normalized_model(dag, derive_seed(args.seed, 2))
    singles = []
    if args.k:
        rng = np.random.Generator(np.random.Philox(derive_seed(args.seed, 3)))
        singles = [
            InterventionTarget.of(int(v) + 1)
            for v in sorted(rng.choice(args.p, size=args.k, replace=False))
        ]
    sequence = [InterventionTarget.empty()] * (args.n - args.k * args.replicates_per_target)
    for t in singles:
        sequence.extend([t] * args.replicates_per_target)
    spec = InterventionSpec.constant(singles, args.mu, args.tau**2)
    data = sample_dataset(model, sequence, spec, derive_seed(args.seed, 4))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_csv(data, out / "dataset.csv")
    (out / "model.txt").write_text(format_model(model), encoding="utf-8")
    family = TargetFamily(frozenset([InterventionTarget.empty(), *singles]))
    graph = essential_graph(dag, family)
    (out / "essential.txt").write_text(format_essential_graph(graph), encoding="utf-8")
    print(f"wrote {data.n} rows over {data.p} columns to {out / 'dataset.csv'}")
    return 0


def _cmd_experiment(args) -> int:
    settings = _read_config_file(args.config) if args.config else {}
    for key in sorted(_CONFIG_KEYS):
        override = getattr(args, key, None)
        if override is not None:
            settings[key] = override
    if "seed" not in settings:
        raise ParameterError("--seed is mandatory for experiments")
    config = ExperimentConfig(**settings)
    config.validate()
    rows = run_consistency_experiment(config, out_dir=args.out)
    by_cell: dict[tuple[int, float], list[int]] = {}
    for r in rows:
        by_cell.setdefault((r.n, r.mu), []).append(r.shd)
    for (n, mu), shds in sorted(by_cell.items()):
        shds.sort()
        median = shds[len(shds) // 2] if len(shds) % 2 else (
            (shds[len(shds) // 2 - 1] + shds[len(shds) // 2]) / 2
        )
        print(f"n={n} mu={mu:g} replicates={len(shds)} median_shd={median:g}")
    if args.out:
        print(f"wrote rows.csv, medians.csv, timings.csv to {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="interdag",
        description="Learn causal DAG structure from mixed observational and interventional Gaussian data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a structure to a dataset CSV")
    fit.add_argument("--data", required=True, help="dataset CSV path")
    fit.add_argument("--method", default="greedy", choices=["greedy", "dp"])
    fit.add_argument("--out", default=None, help="directory for fit artifacts")
    fit.add_argument("--max-parents", type=int, default=None)
    fit.add_argument("--max-steps", type=int, default=100_000)
    fit.add_argument("--penalty-weight", type=float, default=None)
    fit.set_defaults(func=_cmd_fit)

    sim = sub.add_parser("simulate", help="draw a random model and dataset")
    sim.add_argument("--p", type=int, default=10)
    sim.add_argument("--expected-degree", type=float, default=1.8)
    sim.add_argument("--n", type=int, default=1000)
    sim.add_argument("--k", type=int, default=0, help="number of single-vertex targets")
    sim.add_argument("--replicates-per-target", type=int, default=1)
    sim.add_argument("--mu", type=float, default=10.0)
    sim.add_argument("--tau", type=float, default=0.2)
    sim.add_argument("--seed", type=int, default=None, required=True)
    sim.add_argument("--out", required=True, help="output directory")
    sim.set_defaults(func=_cmd_simulate)

    exp = sub.add_parser("experiment", help="run a seeded replicate grid")
    exp.add_argument("--config", default=None, help="flat key = value settings file")
    exp.add_argument("--p", type=int, default=None)
    exp.add_argument("--expected-degree", dest="expected_degree", type=float, default=None)
    exp.add_argument("--n-grid", dest="n_grid", type=_parse_int_list, default=None)
    exp.add_argument("--k", type=int, default=None)
    exp.add_argument(
        "--replicates-per-target", dest="replicates_per_target", type=int, default=None
    )
    exp.add_argument("--mu-grid", dest="mu_grid", type=_parse_float_list, default=None)
    exp.add_argument("--tau", type=float, default=None)
    exp.add_argument("--replicates", type=int, default=None)
    exp.add_argument("--method", default=None, choices=["greedy", "dp"])
    exp.add_argument("--seed", type=int, default=None)
    exp.add_argument("--max-parents", dest="max_parents", type=int, default=None)
    exp.add_argument("--workers", type=int, default=None)
    exp.add_argument("--out", default=None, help="directory for result CSVs")
    exp.set_defaults(func=_cmd_experiment)
    return parser


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v.strip()) for v in text.split(",") if v.strip())


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v.strip()) for v in text.split(",") if v.strip())


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
