"""Tests for experiment config parsing, serialization, and hashing."""

import hashlib

import pytest

from tmaze_evo.config import (
    ExperimentConfig,
    load_config,
    parse_config,
    save_config,
)
from tmaze_evo.errors import ConfigError
from tmaze_evo.layouts import canonical_triple_t
from tmaze_evo.maze import layout_text, save_layout

DESK_TEXT = """\
layout = double-t
out = runs/desk
master_seed = 7
evolution.population_size = 20
evolution.generations = 30
evolution.trials_per_genotype = 2
evolution.max_steps = 2000
"""


class TestParsing:
    def test_empty_text_gives_defaults(self):
        assert parse_config("") == ExperimentConfig()

    def test_comments_and_blanks_are_skipped(self):
        cfg = parse_config("# a comment\n\n   \nmaster_seed = 3\n# more\n")
        assert cfg.master_seed == 3

    def test_partial_file_overrides_only_named_keys(self):
        cfg = parse_config(DESK_TEXT)
        assert cfg.layout == "double-t"
        assert cfg.evolution_population_size == 20
        assert cfg.evolution_max_steps == 2000
        assert cfg.evolution_mutation_rate == 0.06
        assert cfg.demo_trials == 20

    def test_unknown_key_names_the_line(self):
        with pytest.raises(ConfigError, match=r"cfg\.txt:3: unknown key"):
            parse_config("# x\nmaster_seed = 1\nevolution.popsize = 9\n",
                         source="cfg.txt")

    def test_bad_value_names_line_and_kind(self):
        with pytest.raises(ConfigError, match=r":1: bad int value 'many'"):
            parse_config("master_seed = many\n")
        with pytest.raises(ConfigError, match="bad bool"):
            parse_config("evolution.reevaluate_elites = True\n")
        with pytest.raises(ConfigError, match="bad float"):
            parse_config("evolution.mutation_rate = 6%\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate key.*line 1"):
            parse_config("master_seed = 1\nmaster_seed = 2\n")

    def test_line_without_assignment_rejected(self):
        with pytest.raises(ConfigError, match="expected 'key = value'"):
            parse_config("evolve fast\n")

    def test_stop_at_fitness_none_or_float(self):
        assert parse_config("").evolution_stop_at_fitness is None
        cfg = parse_config("evolution.stop_at_fitness = 2.0\n")
        assert cfg.evolution_stop_at_fitness == 2.0

    def test_fixed_constants_may_be_restated_not_changed(self):
        assert parse_config("rnn.hidden = 50\n").rnn_hidden == 50
        with pytest.raises(ConfigError, match=r":1: rnn\.hidden is fixed"):
            parse_config("rnn.hidden = 64\n")
        with pytest.raises(ConfigError, match="fixed at build time"):
            parse_config("robot.body_radius = 0.05\n")

    def test_unknown_layout_name_rejected(self):
        with pytest.raises(ConfigError, match="layout 'hexmaze'"):
            parse_config("layout = hexmaze\n")
        assert parse_config("layout = mazes/custom.txt\n").layout \
            == "mazes/custom.txt"

    def test_cross_field_evolution_errors_carry_source(self):
        text = "evolution.population_size = 4\nevolution.elite_fraction = 0.0\n"
        with pytest.raises(ConfigError, match="bad.txt:"):
            parse_config(text, source="bad.txt")

    def test_analysis_ranges_validated(self):
        with pytest.raises(ConfigError, match="battery_trials"):
            parse_config("analysis.battery_trials = 0\n")
        with pytest.raises(ConfigError, match="significance"):
            parse_config("analysis.significance = 0.0\n")
        with pytest.raises(ConfigError, match="edge_threshold"):
            parse_config("analysis.edge_threshold = 1.0\n")


class TestRoundTrip:
    def test_serialization_is_lossless(self):
        cfg = parse_config(DESK_TEXT)
        assert parse_config(cfg.text()) == cfg

    def test_save_load_round_trip(self, tmp_path):
        cfg = parse_config(DESK_TEXT)
        path = tmp_path / "cfg.txt"
        save_config(cfg, str(path))
        assert load_config(str(path)) == cfg
        save_config(load_config(str(path)), str(path))
        assert load_config(str(path)) == cfg

    def test_canonical_text_covers_every_key(self):
        text = ExperimentConfig().text()
        assert parse_config(text) == ExperimentConfig()
        for key in ("layout = ", "evolution.stop_at_fitness = none",
                    "analysis.build_trials = 15", "rnn.leak = 0.01"):
            assert key in text


class TestContentHash:
    def test_hash_ignores_order_and_comments(self):
        a = parse_config("master_seed = 9\nlayout = double-t\n")
        b = parse_config("# desk\nlayout = double-t\n\nmaster_seed = 9\n")
        assert a.content_hash() == b.content_hash()

    def test_hash_tracks_values(self):
        base = ExperimentConfig().content_hash()
        assert parse_config("master_seed = 1\n").content_hash() != base
        assert parse_config("").content_hash() == base

    def test_hash_ignores_output_directory(self):
        """Where artifacts land is not part of the experiment identity."""
        assert parse_config("out = elsewhere\n").content_hash() \
            == ExperimentConfig().content_hash()

    def test_hash_is_sha256_of_canonical_text_sans_out(self):
        cfg = parse_config(DESK_TEXT)
        lines = [line for line in cfg.text().splitlines()
                 if not line.startswith("out = ")]
        digest = hashlib.sha256("\n".join(lines).encode()).hexdigest()
        assert cfg.content_hash() == digest


class TestDerivedObjects:
    def test_evolution_config_mirrors_fields(self):
        cfg = parse_config(DESK_TEXT)
        ec = cfg.evolution_config()
        assert ec.population_size == 20
        assert ec.generations == 30
        assert ec.trials_per_genotype == 2
        assert ec.max_steps == 2000
        assert ec.master_seed == 7
        assert ec.mutation_rate == cfg.evolution_mutation_rate

    def test_builtin_layouts_by_name(self):
        assert parse_config("").build_layout().kind == "triple-t"
        cfg = parse_config("layout = double-t\n")
        assert cfg.build_layout().kind == "double-t"

    def test_layout_file_path(self, tmp_path):
        path = tmp_path / "arena.txt"
        save_layout(canonical_triple_t(), str(path))
        cfg = parse_config(f"layout = {path}\n")
        assert layout_text(cfg.build_layout()) \
            == layout_text(canonical_triple_t())
