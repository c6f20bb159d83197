"""Tests for run-configuration parsing and hashing."""

import pytest

from hfbench.config import ConfigError, RunConfig


MINIMAL = """
dataset:
  format: m5
  sales: sales.csv
  horizon: 14
forecasts:
  manifest: manifest.csv
measures: [MAE]
"""


def write_config(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text)
    return path


class TestRunConfig:
    def test_minimal_parses_with_defaults(self, tmp_path):
        config = RunConfig.from_file(write_config(tmp_path, MINIMAL))
        assert config.horizon == 14
        assert config.n_splits == 76
        assert config.experiments == ["stability"]
        assert config.sales == tmp_path / "sales.csv"
        assert config.grouping[0] == ()
        assert len(config.grouping) == 12

    def test_relative_paths_resolve_against_config_dir(self, tmp_path):
        nested = tmp_path / "nested"
        nested.mkdir()
        config = RunConfig.from_file(write_config(nested, MINIMAL))
        assert config.manifest == nested / "manifest.csv"

    def test_custom_hierarchy(self, tmp_path):
        text = MINIMAL + "hierarchy:\n  levels: [[], [store_id], [item_id, store_id]]\n"
        config = RunConfig.from_file(write_config(tmp_path, text))
        assert config.grouping == ((), ("store_id",), ("item_id", "store_id"))

    def test_all_expands(self, tmp_path):
        text = MINIMAL + "experiments: all\n"
        config = RunConfig.from_file(write_config(tmp_path, text))
        assert "sween" not in config.experiments
        assert set(config.experiments) == {
            "stability", "per-level", "total", "temporal", "magic", "sweep", "matrix"
        }

    def test_unknown_experiment_rejected(self, tmp_path):
        text = MINIMAL + "experiments: [nope]\n"
        with pytest.raises(ConfigError, match="nope"):
            RunConfig.from_file(write_config(tmp_path, text))

    def test_missing_measures_rejected(self, tmp_path):
        text = MINIMAL.replace("measures: [MAE]", "")
        with pytest.raises(ConfigError, match="measure"):
            RunConfig.from_file(write_config(tmp_path, text))

    def test_bad_seed_rejected(self, tmp_path):
        text = MINIMAL + "seed: -5\n"
        with pytest.raises(ConfigError, match="seed"):
            RunConfig.from_file(write_config(tmp_path, text))

    def test_sweep_points_expand(self, tmp_path):
        text = MINIMAL + "sweep:\n  weights: {points: 5}\n"
        config = RunConfig.from_file(write_config(tmp_path, text))
        assert config.sweep.weights == [0.0, 0.25, 0.5, 0.75, 1.0]

    def test_hash_stable_and_ignores_output_dir(self, tmp_path):
        c1 = RunConfig.from_file(write_config(tmp_path, MINIMAL))
        c2 = RunConfig.from_file(write_config(tmp_path, MINIMAL + "output_dir: elsewhere\n"))
        c3 = RunConfig.from_file(write_config(tmp_path, MINIMAL + "seed: 9\n"))
        assert c1.config_hash() == c2.config_hash()
        assert c1.config_hash() != c3.config_hash()

    def test_long_format_needs_path(self, tmp_path):
        text = MINIMAL.replace("format: m5", "format: long")
        with pytest.raises(ConfigError, match="dataset.path"):
            RunConfig.from_file(write_config(tmp_path, text))
