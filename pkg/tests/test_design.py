"""
Tests for crossed designs: construction invariants, compaction, CSV
ingestion and pre-flight validation.
"""

from datetime import date

import numpy as np
import pytest

from crossfit.data import (
    CrossedDesign,
    DesignValidator,
    compact_design,
    group_counts,
    read_design_csv,
    validate_and_compact,
    write_design_csv,
)
from crossfit.errors import DesignError
from crossfit.simulation import SimConfig, simulate


# =============================================================================
# CrossedDesign invariants
# =============================================================================


class TestCrossedDesign:
    """Construction-time checks."""

    def test_valid_design_is_read_only(self):
        design = CrossedDesign([0, 0, 1], [0, 1, 0], [1, 0, 1], [[1.0], [1.0], [1.0]], 2, 2)
        assert design.n_obs == 3
        assert not design.row_of.flags.writeable
        assert not design.x.flags.writeable

    def test_one_dimensional_features_become_a_column(self):
        design = CrossedDesign([0, 1], [0, 0], [1, 0], [1.0, 1.0], 2, 1)
        assert design.x.shape == (2, 1)
        assert design.feature_names == ("x1",)

    def test_duplicate_pair_rejected(self):
        with pytest.raises(DesignError, match="Duplicate"):
            CrossedDesign([0, 0], [0, 0], [1, 0], [1.0, 1.0], 1, 1)

    def test_empty_level_rejected(self):
        with pytest.raises(DesignError, match="row level"):
            CrossedDesign([0, 2], [0, 0], [1, 0], [1.0, 1.0], 3, 1)

    def test_non_binary_response_rejected(self):
        with pytest.raises(DesignError, match="0 or 1"):
            CrossedDesign([0, 1], [0, 0], [1, 0.5], [1.0, 1.0], 2, 1)

    def test_empty_design_rejected(self):
        with pytest.raises(DesignError):
            CrossedDesign([], [], [], np.zeros((0, 1)), 0, 0)

    def test_intercept_detection(self, small_design):
        assert small_design.intercept_column == 0
        assert small_design.has_intercept


# =============================================================================
# validate_and_compact
# =============================================================================


class TestValidateAndCompact:
    """Relabelling of raw records."""

    def test_relabels_in_sorted_key_order(self):
        records = [("u7", "i2", 1, [0.5]), ("u7", "i1", 0, [1.0]), ("u9", "i1", 1, [2.0])]
        design, levels = validate_and_compact(records)
        assert design.n_rows == 2
        assert design.row_of.tolist() == [0, 0, 1]
        assert design.col_of.tolist() == [1, 0, 0]
        assert levels.row_levels == ("u7", "u9")
        assert levels.col_levels == ("i1", "i2")

    def test_duplicates_keep_last(self):
        records = [("u1", "i1", 1, [0.5]), ("u2", "i1", 0, [1.0]), ("u1", "i1", 0, [3.0])]
        design, _ = validate_and_compact(records)
        assert design.n_obs == 2
        kept = (design.row_of == 0) & (design.col_of == 0)
        assert design.y[kept].tolist() == [0.0]
        assert design.x[kept, 0].tolist() == [3.0]

    def test_empty_input_rejected(self):
        with pytest.raises(DesignError):
            validate_and_compact([])

    def test_ragged_features_rejected(self):
        with pytest.raises(DesignError, match="different lengths"):
            validate_and_compact([("u1", "i1", 1, [0.5]), ("u2", "i1", 0, [1.0, 2.0])])

    def test_non_binary_rejected(self):
        with pytest.raises(DesignError, match="Non-binary"):
            validate_and_compact([("u1", "i1", 2, [0.5])])

    def test_missing_key_rejected(self):
        with pytest.raises(DesignError, match="missing"):
            validate_and_compact([("u1", "i1", 1, [0.5]), (None, "i1", 0, [1.0])])

    def test_unsortable_keys_rejected(self):
        with pytest.raises(DesignError, match="sortable"):
            validate_and_compact([(1, "i1", 1, [0.5]), (date(2024, 1, 1), "i1", 0, [1.0])])

    def test_compact_design_is_identity_on_compact_input(self, small_design):
        again = compact_design(small_design)
        assert np.array_equal(again.row_of, small_design.row_of)
        assert np.array_equal(again.col_of, small_design.col_of)
        assert (again.n_rows, again.n_cols) == (small_design.n_rows, small_design.n_cols)


# =============================================================================
# group_counts
# =============================================================================


class TestGroupCounts:
    """Per-level observation counts."""

    def test_small_example(self):
        design = CrossedDesign([0, 0, 1], [0, 1, 0], [1, 0, 1], [1.0, 1.0, 1.0], 2, 2)
        counts = group_counts(design)
        assert counts.row_counts.tolist() == [2, 1]
        assert counts.col_counts.tolist() == [2, 1]

    def test_balanced_grid(self):
        design = CrossedDesign([0, 0, 1, 1], [0, 1, 0, 1], [1, 0, 0, 1], [1.0] * 4, 2, 2)
        counts = group_counts(design)
        assert counts.row_counts.tolist() == [2, 2]
        assert counts.col_counts.tolist() == [2, 2]

    def test_counts_sum_to_n(self, rng, design_factory):
        design = design_factory(rng, 12, 9, 60)
        counts = group_counts(design)
        assert counts.row_counts.sum() == design.n_obs
        assert counts.col_counts.sum() == design.n_obs
        assert counts.row_counts.min() >= 1 and counts.col_counts.min() >= 1

    def test_sampled_design_is_not_concentrated(self):
        design = simulate(SimConfig(s=1e4)).design
        counts = group_counts(design)
        assert counts.row_counts.max() / design.n_obs < 0.02
        assert counts.col_counts.max() / design.n_obs < 0.02


# =============================================================================
# CSV ingestion
# =============================================================================


class TestDesignCsv:
    """read_design_csv and write_design_csv."""

    def test_reads_fixture(self, tiny_csv):
        design, levels = read_design_csv(tiny_csv, intercept=True)
        assert design.n_obs == 12
        assert (design.n_rows, design.n_cols) == (4, 3)
        assert design.feature_names == ("intercept", "x1")
        assert levels.row_levels == ("u1", "u2", "u3", "u4")
        assert np.all(design.x[:, 0] == 1.0)

    def test_without_intercept(self, tiny_csv):
        design, _ = read_design_csv(tiny_csv)
        assert design.feature_names == ("x1",)
        assert not design.has_intercept

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_design_csv(tmp_path / "missing.csv")

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("user,item,y,x1\nu1,i1,1,0.5\n")
        with pytest.raises(DesignError, match="must start with columns"):
            read_design_csv(path)

    def test_non_binary_response(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("row,col,y,x1\nu1,i1,2,0.5\nu2,i1,0,0.1\n")
        with pytest.raises(DesignError, match="Non-binary"):
            read_design_csv(path)

    def test_round_trip_is_bit_identical(self, tmp_path):
        data = simulate(SimConfig(s=2000, beta_true=(-2.0, 0.5, -1.0), seed=3))
        first = tmp_path / "first.csv"
        second = tmp_path / "second.csv"
        write_design_csv(data.design, data.levels, first)

        design, levels = read_design_csv(first)
        assert np.array_equal(design.row_of, data.design.row_of)
        assert np.array_equal(design.col_of, data.design.col_of)
        assert np.array_equal(design.y, data.design.y)
        assert np.array_equal(design.x, data.design.x)
        assert levels.row_levels == data.levels.row_levels

        write_design_csv(design, levels, second)
        assert first.read_bytes() == second.read_bytes()


# =============================================================================
# DesignValidator
# =============================================================================


class TestDesignValidator:
    """Pre-flight validation reports."""

    def test_fixture_is_valid(self, tiny_csv):
        result = DesignValidator(tiny_csv, intercept=True).validate()
        assert result.is_valid(), result.format_report()
        assert any("R = 4 rows" in msg for msg in result.info)

    def test_missing_file_is_an_error(self, tmp_path):
        result = DesignValidator(tmp_path / "nope.csv").validate()
        assert not result.is_valid()

    def test_non_binary_response_is_an_error(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("row,col,y,x1\nu1,i1,3,0.5\nu2,i1,0,0.1\n")
        result = DesignValidator(path).validate()
        assert any("non-binary" in msg for msg in result.errors)

    def test_duplicates_are_a_warning(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("row,col,y,x1\nu1,i1,1,0.5\nu1,i1,0,0.1\nu2,i1,0,0.3\nu2,i2,1,0.7\n")
        result = DesignValidator(path).validate()
        assert result.is_valid()
        assert any("repeated" in msg for msg in result.warnings)

    def test_rank_deficient_features_are_an_error(self, tmp_path):
        path = tmp_path / "rank.csv"
        path.write_text(
            "row,col,y,x1,x2\n"
            "u1,i1,1,0.5,1.0\n"
            "u1,i2,0,1.5,3.0\n"
            "u2,i1,0,-1.0,-2.0\n"
            "u2,i2,1,2.0,4.0\n"
        )
        result = DesignValidator(path).validate()
        assert any("rank" in msg for msg in result.errors)

    def test_report_mentions_outcome(self, tiny_csv):
        report = DesignValidator(tiny_csv, intercept=True).validate().format_report()
        assert "VALIDATION PASSED" in report


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
