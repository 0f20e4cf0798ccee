"""
Tests for CSV readers and writers.
"""
import numpy as np
import pytest

from viraliency.core.exceptions import ParseError
from viraliency.schemas.data import EngagementRecord, PairLabel, PairRecord
from viraliency.schemas.evaluation import GradCheckEntry
from viraliency.services.csv_io import (
    format_float,
    load_eta_csv,
    load_metadata_csv,
    load_pairs_csv,
    sweep_header,
    write_eta_csv,
    write_gradcheck_csv,
    write_histogram_csv,
    write_matrix_csv,
    write_metadata_csv,
    write_pairs_csv,
)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestMetadata:

    def test_single_row(self, tmp_path):
        records = load_metadata_csv(write(tmp_path / "m.csv", "id,likes,resubmissions\nimg1,10,3\n"))
        assert records == [EngagementRecord(id="img1", likes=10.0, resubmissions=3.0)]

    def test_negative_likes_allowed(self, tmp_path):
        records = load_metadata_csv(write(tmp_path / "m.csv", "id,likes,resubmissions\nx,-4,1\n"))
        assert records[0].likes == -4.0

    def test_blank_lines_skipped(self, tmp_path):
        records = load_metadata_csv(write(tmp_path / "m.csv", "id,likes,resubmissions\na,1,1\n\nb,2,2\n"))
        assert [r.id for r in records] == ["a", "b"]

    def test_wrong_header(self, tmp_path):
        with pytest.raises(ParseError) as exc:
            load_metadata_csv(write(tmp_path / "m.csv", "id,likes\nimg1,10\n"))
        assert "row 1" in exc.value.message

    def test_non_numeric_reports_row(self, tmp_path):
        with pytest.raises(ParseError) as exc:
            load_metadata_csv(write(tmp_path / "m.csv", "id,likes,resubmissions\na,1,1\nb,many,2\n"))
        assert "row 3" in exc.value.message
        assert "likes" in exc.value.message

    def test_field_count_reports_row(self, tmp_path):
        with pytest.raises(ParseError) as exc:
            load_metadata_csv(write(tmp_path / "m.csv", "id,likes,resubmissions\na,1\n"))
        assert "row 2" in exc.value.message

    def test_negative_resubmissions_rejected(self, tmp_path):
        with pytest.raises(ParseError) as exc:
            load_metadata_csv(write(tmp_path / "m.csv", "id,likes,resubmissions\na,1,-1\n"))
        assert "resubmissions" in exc.value.message

    def test_nan_rejected(self, tmp_path):
        with pytest.raises(ParseError):
            load_metadata_csv(write(tmp_path / "m.csv", "id,likes,resubmissions\na,nan,1\n"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_metadata_csv(write(tmp_path / "m.csv", ""))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_metadata_csv(tmp_path / "absent.csv")

    def test_round_trip_exact(self, tmp_path):
        records = [EngagementRecord(id="a", likes=0.1, resubmissions=1.0 / 3.0)]
        assert load_metadata_csv(write_metadata_csv(tmp_path / "m.csv", records)) == records


class TestPairs:

    def test_round_trip(self, tmp_path):
        pairs = [
            PairRecord(id_a="a", id_b="b", label=PairLabel.A_MORE_VIRAL),
            PairRecord(id_a="c", id_b="a", label=PairLabel.B_MORE_VIRAL),
        ]
        assert load_pairs_csv(write_pairs_csv(tmp_path / "p.csv", pairs)) == pairs

    def test_bad_label(self, tmp_path):
        with pytest.raises(ParseError) as exc:
            load_pairs_csv(write(tmp_path / "p.csv", "id_a,id_b,label\na,b,maybe\n"))
        assert "row 2" in exc.value.message


class TestTraces:

    def test_eta_csv_rows(self, tmp_path):
        path = write_eta_csv(tmp_path / "eta.csv", [0, 100], [np.array([0.5, 0.5]), np.array([0.1, 0.9])])
        assert path.read_text(encoding="utf-8").splitlines()[0] == "iteration,eta_0,eta_1"
        rows = load_eta_csv(path)
        np.testing.assert_array_equal(rows[-1], [0.1, 0.9])

    def test_eta_csv_needs_rows(self, tmp_path):
        with pytest.raises(ParseError):
            load_eta_csv(write(tmp_path / "eta.csv", "iteration,eta_0\n"))

    def test_histogram_mass(self, tmp_path):
        path = write_histogram_csv(tmp_path / "h.csv", np.array([0.0, 0.5, 1.0]), np.array([1, 3]))
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines == ["bin_lo,bin_hi,count,mass", "0.0,0.5,1,0.25", "0.5,1.0,3,0.75"]

    def test_gradcheck_rows(self, tmp_path):
        entry = GradCheckEntry(group="conv0.weight", size=4, max_rel_error=1e-9, tolerance=1e-5,
                               oracle="finite_difference")
        lines = write_gradcheck_csv(tmp_path / "g.csv", [entry]).read_text(encoding="utf-8").splitlines()
        assert lines[1] == "conv0.weight,4,1e-09,1e-05,finite_difference,1"

    def test_matrix_has_no_header(self, tmp_path):
        path = write_matrix_csv(tmp_path / "m.csv", np.array([[1.0, 2.0], [3.0, 4.5]]))
        assert path.read_text(encoding="utf-8") == "1.0,2.0\n3.0,4.5\n"

    def test_sweep_header(self):
        assert sweep_header(2) == ["eta_init", "accuracy", "eta_mean", "bin_0", "bin_1"]


class TestFormatFloat:

    def test_round_trips(self):
        value = 0.1 + 0.2
        assert float(format_float(value)) == value

    def test_none_is_empty(self):
        assert format_float(None) == ""
