"""Command-line front end: validate inputs, run experiments, seed the demo.

Exit codes: 0 on success, 1 when validation fails, 2 when an experiment
fails at runtime.
"""

from __future__ import annotations

import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from . import experiments as xp
from .config import OUTPUT_DIR_ENV, ConfigError, RunConfig
from .demo import write_demo
from .hierarchy import (
    HierarchicalDataset,
    HierarchyError,
    ZeroSalesError,
    compute_price_weights,
)
from .loaders import LoadError, LoadOptions, load_long_csv, load_m5, load_manifest
from .measures import (
    BaseMeasure,
    ForecastSet,
    MeasureError,
    MeasureSpec,
    Weighting,
    abs_diff_scale,
)
from .ranking import RankingError, ReferenceRanking
from .reports import write_csv, write_json

log = logging.getLogger(__name__)


@dataclass
class Finding:
    severity: str  # "fatal" | "warning" | "info"
    message: str

    def __str__(self) -> str:
        return f"[{self.severity.upper()}] {self.message}"


@dataclass
class Inputs:
    dataset: HierarchicalDataset
    forecasts: dict[str, ForecastSet]
    reference: ReferenceRanking | None


def load_inputs(config: RunConfig) -> Inputs:
    options = LoadOptions(
        horizon=config.horizon, train_end=config.train_end, grouping=config.grouping
    )
    if config.dataset_format == "m5":
        dataset = load_m5(config.sales, config.prices, config.calendar, options)
    else:
        dataset = load_long_csv(config.long_path, options)
    forecasts = load_manifest(config.manifest, config.horizon)
    reference = (
        ReferenceRanking.from_file(config.reference) if config.reference else None
    )
    return Inputs(dataset=dataset, forecasts=forecasts, reference=reference)


def validate_run(config: RunConfig) -> tuple[list[Finding], Inputs | None]:
    """Check dataset shape, forecast coverage, scales and weights.

    Returns the findings plus the loaded inputs (None when loading itself
    failed).  The run is considered valid when no finding is fatal.
    """
    findings: list[Finding] = []

    try:
        specs = [MeasureSpec.parse(m) for m in config.measures]
    except MeasureError as exc:
        findings.append(Finding("fatal", f"measure spec: {exc}"))
        return findings, None

    try:
        inputs = load_inputs(config)
    except (LoadError, HierarchyError, RankingError) as exc:
        findings.append(Finding("fatal", str(exc)))
        return findings, None
    except OSError as exc:
        findings.append(Finding("fatal", f"cannot read input: {exc}"))
        return findings, None

    dataset = inputs.dataset
    sizes = dataset.level_sizes()
    findings.append(
        Finding(
            "info",
            f"dataset: {dataset.n_bottom} bottom series, {dataset.n_series} total "
            f"across {dataset.k} levels (per level: {sizes}), n={dataset.n}, "
            f"h={dataset.h}",
        )
    )

    # Forecast coverage: every method must forecast every bottom series.
    bottom = set(dataset.bottom_ids)
    for method_id, fs in inputs.forecasts.items():
        missing = bottom - set(fs.forecasts)
        if missing:
            example = sorted(missing)[0]
            findings.append(
                Finding(
                    "fatal",
                    f"method {method_id!r}: no forecast for {len(missing)} bottom "
                    f"series (e.g. {example!r})",
                )
            )
        extra = set(fs.forecasts) - bottom
        if extra:
            findings.append(
                Finding(
                    "warning",
                    f"method {method_id!r}: {len(extra)} forecast rows without a "
                    "matching bottom series (ignored)",
                )
            )
        if fs.h != dataset.h:
            findings.append(
                Finding(
                    "fatal",
                    f"method {method_id!r}: horizon {fs.h} != dataset horizon {dataset.h}",
                )
            )
    if len(inputs.forecasts) < 2:
        findings.append(Finding("fatal", "need at least 2 methods to rank"))

    if inputs.reference is not None:
        missing_ref = [
            m for m in inputs.reference.method_ids if m not in inputs.forecasts
        ]
        if missing_ref:
            findings.append(
                Finding(
                    "fatal",
                    f"reference methods without forecasts: {missing_ref[:5]}",
                )
            )
        if config.top_ks and max(config.top_ks) > len(inputs.reference):
            findings.append(
                Finding("fatal", "largest top-K exceeds the reference ranking length")
            )
    elif config.top_ks and max(config.top_ks) < len(inputs.forecasts):
        findings.append(
            Finding(
                "fatal",
                "top-K subsets below the method count need a reference ranking",
            )
        )

    # Zero-scale census: series these measures would exclude.
    bases = {spec.base for spec in specs}
    constant_history = 0
    zero_test = 0
    for level in dataset.levels:
        constant_history += int((abs_diff_scale(level.aggregate(dataset.train)) == 0).sum())
        zero_test += int((np.abs(level.aggregate(dataset.test)).sum(axis=1) == 0).sum())
    if constant_history and bases & {BaseMeasure.MASE, BaseMeasure.RMSSE}:
        findings.append(
            Finding(
                "warning",
                f"{constant_history} series have a constant history and will be "
                "excluded from MASE/RMSSE summaries",
            )
        )
    if zero_test and BaseMeasure.WAPE in bases:
        findings.append(
            Finding(
                "warning",
                f"{zero_test} series have an all-zero test window and will be "
                "excluded from WAPE summaries",
            )
        )

    # Price coverage.  Sweeps always price-weight, and the multiplier
    # experiment may request PRICE_ measures of its own.
    need_price = any(spec.weighting is Weighting.PRICE for spec in specs)
    if "sweep" in config.experiments:
        need_price = True
    if "magic" in config.experiments:
        try:
            magic_specs = [MeasureSpec.parse(m) for m in config.magic.measures]
        except MeasureError as exc:
            findings.append(Finding("fatal", f"magic measure spec: {exc}"))
            magic_specs = []
        need_price = need_price or any(
            spec.weighting is Weighting.PRICE for spec in magic_specs
        )
    if need_price:
        if dataset.revenue is None:
            findings.append(
                Finding("fatal", "PRICE_ measures requested but the dataset has no prices")
            )
        else:
            try:
                weights = compute_price_weights(dataset, window_len=config.price_window)
            except (ZeroSalesError, HierarchyError) as exc:
                findings.append(Finding("fatal", f"price weights: {exc}"))
            else:
                zero_weight = sum(1 for w in weights.weights.values() if w == 0.0)
                if zero_weight:
                    findings.append(
                        Finding(
                            "info",
                            f"{zero_weight} series carry zero dollar-sales weight",
                        )
                    )

    if "temporal" in config.experiments:
        cut = config.temporal_cut if config.temporal_cut is not None else dataset.h // 2
        if not 1 <= cut < dataset.h:
            findings.append(
                Finding("fatal", f"temporal cut {cut} outside 1..{dataset.h - 1}")
            )

    return findings, inputs


def run_experiments(
    config: RunConfig, inputs: Inputs, names: list[str] | None = None
) -> dict:
    """Run the selected experiments and bundle all results as plain data."""
    names = names or config.experiments
    dataset, forecasts, reference = inputs.dataset, inputs.forecasts, inputs.reference
    top_ks = config.top_ks or None
    single_k = max(config.top_ks) if config.top_ks else None
    results: dict[str, dict] = {}

    if "stability" in names:
        results["stability"] = xp.cross_sectional_stability(
            dataset,
            forecasts,
            config.measures,
            n_splits=config.n_splits,
            seed=config.seed,
            top_ks=top_ks,
            reference=reference,
            price_window=config.price_window,
        ).to_dict()
    if "per-level" in names:
        results["per_level"] = xp.per_level_stability(
            dataset,
            forecasts,
            config.measures,
            n_splits=config.n_splits,
            seed=config.seed,
            top_k=single_k,
            reference=reference,
            price_window=config.price_window,
        ).to_dict()
    if "total" in names:
        results["total"] = xp.total_aggregation_stability(
            dataset,
            forecasts,
            config.measures,
            n_splits=config.n_splits,
            seed=config.seed,
            top_k=single_k,
            reference=reference,
            price_window=config.price_window,
        ).to_dict()
    if "temporal" in names:
        cut = config.temporal_cut if config.temporal_cut is not None else dataset.h // 2
        results["temporal"] = xp.temporal_stability(
            dataset,
            forecasts,
            config.measures,
            cut=cut,
            top_k=single_k,
            reference=reference,
            price_window=config.price_window,
        ).to_dict()
    if "magic" in names:
        grid = xp.magic_grid(
            config.magic.grid_points, config.magic.grid_min, config.magic.grid_max
        )
        levels = config.magic.levels or [1, dataset.k]
        results["magic"] = {
            "experiment": "magic_number_similarity",
            "results": [
                xp.magic_number_similarity(
                    dataset,
                    forecasts,
                    measure,
                    level,
                    grid,
                    top_k=single_k,
                    reference=reference,
                    price_window=config.price_window,
                ).to_dict()
                for measure in config.magic.measures
                for level in levels
            ],
        }
    if "sweep" in names:
        results["sweep"] = xp.top_level_weight_sweep(
            dataset,
            forecasts,
            config.sweep.base,
            config.sweep.weights,
            n_splits=config.n_splits,
            seed=config.seed,
            top_ks=config.sweep.top_ks or top_ks,
            reference=reference,
            price_window=config.price_window,
        ).to_dict()
    if "matrix" in names:
        results["matrix"] = xp.measure_similarity_matrix(
            dataset,
            forecasts,
            config.matrix_measures or config.measures,
            price_window=config.price_window,
        ).to_dict()

    return {
        "config_hash": config.config_hash(),
        "master_seed": config.seed,
        "config": config.raw,
        "experiments": results,
    }


def _frame_from_dict(table: dict, index_name: str):
    import pandas as pd

    frame = pd.DataFrame.from_dict(table, orient="index")
    frame.index.name = index_name
    return frame


def write_outputs(config: RunConfig, bundle: dict, fmt: str, out_dir: Path) -> list[Path]:
    """Write the JSON bundle and per-table CSVs; returns the written paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    config_hash = bundle["config_hash"]
    written = []
    if fmt in ("json", "both"):
        written.append(write_json(out_dir / "report.json", bundle))
    if fmt not in ("csv", "both"):
        return written

    results = bundle["experiments"]
    if "stability" in results:
        table = {
            measure: {k: cell["mean"] for k, cell in by_k.items()}
            for measure, by_k in results["stability"]["measures"].items()
        }
        written.append(
            write_csv(out_dir / "stability.csv", _frame_from_dict(table, "measure"), config_hash)
        )
    if "per_level" in results:
        table = {
            level: {m: cell["mean"] for m, cell in by_m.items()}
            for level, by_m in results["per_level"]["levels"].items()
        }
        written.append(
            write_csv(
                out_dir / "per_level_stability.csv",
                _frame_from_dict(table, "level"),
                config_hash,
            )
        )
    if "total" in results:
        table = {
            measure: {k: cell["mean"] for k, cell in by_k.items()}
            for measure, by_k in results["total"]["measures"].items()
        }
        written.append(
            write_csv(
                out_dir / "total_aggregation.csv",
                _frame_from_dict(table, "measure"),
                config_hash,
            )
        )
    if "temporal" in results:
        overall = {m: {"correlation": v} for m, v in results["temporal"]["overall"].items()}
        written.append(
            write_csv(
                out_dir / "temporal_overall.csv",
                _frame_from_dict(overall, "measure"),
                config_hash,
            )
        )
        written.append(
            write_csv(
                out_dir / "temporal_per_level.csv",
                _frame_from_dict(results["temporal"]["per_level"], "level"),
                config_hash,
            )
        )
    if "magic" in results:
        rows = {
            f"{entry['measure']}@{entry['level']}": {
                "measure": entry["measure"],
                "level": entry["level"],
                "similarity": entry["similarity"],
            }
            for entry in results["magic"]["results"]
        }
        frame = _frame_from_dict(rows, "key")
        written.append(write_csv(out_dir / "magic_numbers.csv", frame, config_hash))
    if "sweep" in results:
        for key, curve in results["sweep"]["curves"].items():
            table = {
                i: {"top_weight": p["top_weight"], "stability": p["stability"]}
                for i, p in enumerate(curve["points"])
            }
            frame = _frame_from_dict(table, "index")
            written.append(
                write_csv(out_dir / f"weight_sweep_{key}.csv", frame, config_hash)
            )
    if "matrix" in results:
        written.append(
            write_csv(
                out_dir / "measure_matrix.csv",
                _frame_from_dict(results["matrix"]["matrix"], "measure"),
                config_hash,
            )
        )
    return written


def _headline(bundle: dict) -> str | None:
    results = bundle["experiments"]
    if "stability" in results:
        table = {
            measure: {k: cell["mean"] for k, cell in by_k.items()}
            for measure, by_k in results["stability"]["measures"].items()
        }
        return _frame_from_dict(table, "measure").to_string()
    if "temporal" in results:
        overall = {m: {"correlation": v} for m, v in results["temporal"]["overall"].items()}
        return _frame_from_dict(overall, "measure").to_string()
    for key in ("per_level", "total", "matrix"):
        if key in results:
            inner = results[key].get("levels") or results[key].get("measures") or results[
                key
            ].get("matrix")
            if inner:
                return _frame_from_dict(inner, key).to_string()
    return None


# ---------------------------------------------------------------------------
# click commands
# ---------------------------------------------------------------------------

@click.group()
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Benchmark hierarchical forecasts and measure ranking stability."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command("validate")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def cmd_validate(config_path: str) -> None:
    """Check dataset, forecasts and configuration; exit 0 when clean."""
    try:
        config = RunConfig.from_file(config_path)
    except ConfigError as exc:
        click.echo(f"[FATAL] {exc}")
        sys.exit(1)
    findings, _ = validate_run(config)
    for finding in findings:
        click.echo(str(finding))
    fatal = any(f.severity == "fatal" for f in findings)
    click.echo("validation: FAILED" if fatal else "validation: OK")
    sys.exit(1 if fatal else 0)


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option(
    "--experiment",
    "experiment_names",
    multiple=True,
    help="Experiment to run (repeatable); defaults to the config selection.",
)
@click.option("--seed", type=int, default=None, help="Override the master seed.")
@click.option("--splits", type=int, default=None, help="Override the split count.")
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["csv", "json", "both"]),
    default="both",
    show_default=True,
)
def cmd_run(
    config_path: str,
    experiment_names: tuple[str, ...],
    seed: int | None,
    splits: int | None,
    out_dir: str | None,
    fmt: str,
) -> None:
    """Validate, run the selected experiments and write reports."""
    try:
        config = RunConfig.from_file(config_path)
    except ConfigError as exc:
        click.echo(f"[FATAL] {exc}")
        sys.exit(1)
    if seed is not None:
        config.seed = seed
        config.raw["seed"] = seed
    if splits is not None:
        config.n_splits = splits
        config.raw["n_splits"] = splits
    names = list(experiment_names) or None
    if names:
        from .config import EXPERIMENT_NAMES

        if "all" in names:
            names = list(EXPERIMENT_NAMES)
        unknown = [n for n in names if n not in EXPERIMENT_NAMES]
        if unknown:
            click.echo(
                f"[FATAL] unknown experiment(s) {unknown}; "
                f"valid: {list(EXPERIMENT_NAMES)} or 'all'"
            )
            sys.exit(1)

    findings, inputs = validate_run(config)
    fatal = [f for f in findings if f.severity == "fatal"]
    for finding in findings:
        if finding.severity != "info":
            click.echo(str(finding))
    if fatal:
        click.echo("validation: FAILED")
        sys.exit(1)

    resolved_out = Path(
        out_dir
        or os.environ.get(OUTPUT_DIR_ENV)
        or config.output_dir
    )
    try:
        bundle = run_experiments(config, inputs, names)
    except (xp.ExperimentError, MeasureError, HierarchyError, RankingError) as exc:
        click.echo(f"[ERROR] experiment failed: {exc}")
        sys.exit(2)

    written = write_outputs(config, bundle, fmt, resolved_out)
    headline = _headline(bundle)
    if headline:
        click.echo(headline)
    for path in written:
        click.echo(f"wrote {path}")
    sys.exit(0)


@main.command("seed-demo")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the fixture seed.")
def cmd_seed_demo(out_dir: str, seed: int | None) -> None:
    """Write the synthetic demo dataset, forecasts and a ready config."""
    from .demo import DEMO_SEED

    try:
        paths = write_demo(out_dir, seed=DEMO_SEED if seed is None else seed)
    except OSError as exc:
        click.echo(f"[FATAL] cannot write demo: {exc}")
        sys.exit(1)
    for name, path in paths.items():
        click.echo(f"{name}: {path}")
    click.echo(f"next: hfbench run --config {paths['config']}")
    sys.exit(0)


if __name__ == "__main__":  # pragma: no cover
    main()
