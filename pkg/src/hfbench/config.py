"""Run configuration: YAML parsing, validation and hashing.

A run is described by one YAML file; all relative paths inside it
resolve against the file's own directory.  Every report records a hash
of the resolved configuration (excluding output location) so results can
be traced back to the exact setup that produced them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .hierarchy import M5_GROUPING

EXPERIMENT_NAMES = (
    "stability",
    "per-level",
    "total",
    "temporal",
    "magic",
    "sweep",
    "matrix",
)

#: Environment variable that overrides the configured output directory.
OUTPUT_DIR_ENV = "HFBENCH_OUTPUT_DIR"


class ConfigError(ValueError):
    """Raised when the configuration file is malformed."""


@dataclass
class MagicConfig:
    measures: list[str] = field(default_factory=lambda: ["MAE", "PRICE_RMSSE", "SMAPE"])
    levels: list[int] | None = None  # default: top and bottom
    grid_points: int = 500
    grid_min: float = 0.0
    grid_max: float = 2.0


@dataclass
class SweepConfig:
    base: str = "RMSSE"
    weights: list[float] = field(
        default_factory=lambda: [round(0.05 * i, 2) for i in range(21)]
    )
    top_ks: list[int] | None = None


@dataclass
class RunConfig:
    """Everything needed to validate a dataset and run the experiments."""

    config_dir: Path
    dataset_format: str
    horizon: int
    manifest: Path
    output_dir: Path
    sales: Path | None = None
    prices: Path | None = None
    calendar: Path | None = None
    long_path: Path | None = None
    train_end: int | None = None
    grouping: tuple[tuple[str, ...], ...] = M5_GROUPING
    reference: Path | None = None
    measures: list[str] = field(default_factory=list)
    top_ks: list[int] = field(default_factory=list)
    n_splits: int = 76
    seed: int = 0
    price_window: int = 28
    temporal_cut: int | None = None
    magic: MagicConfig = field(default_factory=MagicConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    matrix_measures: list[str] | None = None
    experiments: list[str] = field(default_factory=lambda: ["stability"])
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: configuration must be a mapping")
        return cls.from_dict(data, config_dir=path.parent)

    @classmethod
    def from_dict(cls, data: dict, config_dir: str | Path = ".") -> "RunConfig":
        config_dir = Path(config_dir)

        def as_path(value: object | None) -> Path | None:
            if value is None:
                return None
            p = Path(str(value))
            return p if p.is_absolute() else config_dir / p

        dataset = data.get("dataset")
        if not isinstance(dataset, dict):
            raise ConfigError("missing 'dataset' section")
        fmt = str(dataset.get("format", "m5"))
        if fmt not in ("m5", "long"):
            raise ConfigError(f"dataset format must be 'm5' or 'long', got {fmt!r}")
        horizon = dataset.get("horizon")
        if not isinstance(horizon, int) or horizon < 1:
            raise ConfigError("dataset.horizon must be a positive integer")

        grouping: tuple[tuple[str, ...], ...] = M5_GROUPING
        hierarchy = data.get("hierarchy")
        if hierarchy is not None:
            levels = hierarchy.get("levels") if isinstance(hierarchy, dict) else None
            if not isinstance(levels, list) or not levels:
                raise ConfigError("hierarchy.levels must be a non-empty list of key lists")
            grouping = tuple(tuple(str(name) for name in level) for level in levels)

        forecasts = data.get("forecasts")
        if not isinstance(forecasts, dict) or "manifest" not in forecasts:
            raise ConfigError("missing 'forecasts.manifest'")

        seed = data.get("seed", 0)
        if not isinstance(seed, int) or seed < 0 or seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

        top_ks = data.get("top_ks", [])
        if top_ks and (
            not isinstance(top_ks, list)
            or any(not isinstance(k, int) or k < 2 for k in top_ks)
        ):
            raise ConfigError("top_ks must be a list of integers >= 2")

        experiments = data.get("experiments", ["stability"])
        if isinstance(experiments, str):
            experiments = [experiments]
        if any(name == "all" for name in experiments):
            experiments = list(EXPERIMENT_NAMES)
        unknown = [name for name in experiments if name not in EXPERIMENT_NAMES]
        if unknown:
            raise ConfigError(
                f"unknown experiment(s) {unknown}; valid: {list(EXPERIMENT_NAMES)} or 'all'"
            )

        magic_data = data.get("magic", {}) or {}
        magic = MagicConfig(
            measures=[str(m) for m in magic_data.get("measures", ["MAE", "PRICE_RMSSE", "SMAPE"])],
            levels=magic_data.get("levels"),
            grid_points=int(magic_data.get("grid_points", 500)),
            grid_min=float(magic_data.get("grid_min", 0.0)),
            grid_max=float(magic_data.get("grid_max", 2.0)),
        )
        sweep_data = data.get("sweep", {}) or {}
        weights = sweep_data.get("weights", {"points": 21})
        if isinstance(weights, dict):
            points = int(weights.get("points", 21))
            if points < 2:
                raise ConfigError("sweep.weights.points must be >= 2")
            weights = [i / (points - 1) for i in range(points)]
        sweep = SweepConfig(
            base=str(sweep_data.get("base", "RMSSE")),
            weights=[float(w) for w in weights],
            top_ks=sweep_data.get("top_ks"),
        )

        matrix_data = data.get("matrix", {}) or {}
        matrix_measures = matrix_data.get("measures")

        output_dir = as_path(data.get("output_dir", "out"))

        config = cls(
            config_dir=config_dir,
            dataset_format=fmt,
            horizon=horizon,
            manifest=as_path(forecasts["manifest"]),
            output_dir=output_dir,
            sales=as_path(dataset.get("sales")),
            prices=as_path(dataset.get("prices")),
            calendar=as_path(dataset.get("calendar")),
            long_path=as_path(dataset.get("path")),
            train_end=dataset.get("train_end"),
            grouping=grouping,
            reference=as_path(data.get("reference")),
            measures=[str(m) for m in data.get("measures", [])],
            top_ks=sorted(top_ks),
            n_splits=int(data.get("n_splits", 76)),
            seed=seed,
            price_window=int(data.get("price_window", 28)),
            temporal_cut=data.get("temporal_cut"),
            magic=magic,
            sweep=sweep,
            matrix_measures=matrix_measures,
            experiments=list(experiments),
            raw=data,
        )
        if config.dataset_format == "m5" and config.sales is None:
            raise ConfigError("m5 datasets need dataset.sales")
        if config.dataset_format == "long" and config.long_path is None:
            raise ConfigError("long datasets need dataset.path")
        if config.n_splits < 1:
            raise ConfigError("n_splits must be >= 1")
        if not config.measures:
            raise ConfigError("at least one measure is required")
        return config

    def config_hash(self) -> str:
        """Stable hash of the resolved configuration, ignoring output location."""
        payload = {key: value for key, value in self.raw.items() if key != "output_dir"}
        canonical = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]
