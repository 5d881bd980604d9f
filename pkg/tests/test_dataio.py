"""Dataset serialization, tables, and parse diagnostics."""

import json

import numpy as np
import pytest

from tvreg.dataio import (
    ingest,
    read_sheet,
    read_table,
    write_dataset,
    write_sheet,
    write_table,
    write_truth_table,
)
from tvreg.errors import InputError, ParseError, ValidationError
from tvreg.likelihoods import CoefficientSheet, Instance, TimedDataset
from tvreg.synthgen import GenSpec, generate


class TestDatasetRoundTrip:
    def test_synthetic_round_trip(self, tmp_path):
        data, _ = generate(GenSpec.default(seed=1, n_per_timestep=20))
        path = tmp_path / "d.jsonl"
        write_dataset(str(path), data)
        back = ingest(str(path))
        assert back.n_timesteps == data.n_timesteps
        assert back.n_features == data.n_features
        assert back.feature_names == data.feature_names
        assert len(back.instances) == len(data.instances)
        for a, b in zip(data.instances, back.instances):
            assert a.t == b.t and a.uid == b.uid
            assert a.features == b.features
            assert a.response == b.response

    def test_text_round_trip(self, tmp_path):
        insts = [
            Instance(1, {0: 1.0}, (0, 2, -1), 0),
            Instance(2, {1: -0.5}, (1,), 1),
        ]
        data = TimedDataset(insts, 2, 2, 3)
        path = tmp_path / "t.jsonl"
        write_dataset(str(path), data)
        back = ingest(str(path))
        assert back.vocab_size == 3
        assert back.instances[0].response == (0, 2, -1)
        assert back.is_text

    def test_byte_stable_writes(self, tmp_path):
        data, _ = generate(GenSpec.default(seed=2, n_per_timestep=10))
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_dataset(str(p1), data)
        write_dataset(str(p2), data)
        assert p1.read_bytes() == p2.read_bytes()


class TestIngestErrors:
    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            ingest(str(tmp_path / "nope.jsonl"))

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.jsonl"
        path.write_text("")
        with pytest.raises(InputError):
            ingest(str(path))

    def test_header_only(self, tmp_path):
        path = tmp_path / "h.jsonl"
        path.write_text(
            json.dumps({"format": "tvreg-dataset", "version": 1, "task": "gaussian",
                        "n_timesteps": 2, "n_features": 1, "vocab_size": 0}) + "\n"
        )
        with pytest.raises(InputError):
            ingest(str(path))

    def _with_records(self, tmp_path, *records):
        header = {"format": "tvreg-dataset", "version": 1, "task": "gaussian",
                  "n_timesteps": 3, "n_features": 2, "vocab_size": 0}
        path = tmp_path / "x.jsonl"
        path.write_text("\n".join([json.dumps(header)] + list(records)) + "\n")
        return str(path)

    def test_malformed_line_names_line_number(self, tmp_path):
        path = self._with_records(tmp_path, '{"t": 1, "x": {"0": 1.0}, "y": 2.0}', "{broken")
        with pytest.raises(ParseError, match="line 3"):
            ingest(path)

    def test_zero_timestep_names_line(self, tmp_path):
        path = self._with_records(tmp_path, '{"t": 0, "x": {"0": 1.0}, "y": 2.0}')
        with pytest.raises(ValidationError, match="line 2"):
            ingest(path)

    def test_feature_out_of_range(self, tmp_path):
        path = self._with_records(tmp_path, '{"t": 1, "x": {"9": 1.0}, "y": 2.0}')
        with pytest.raises(ValidationError, match="line 2"):
            ingest(path)

    def test_wrong_response_kind(self, tmp_path):
        path = self._with_records(tmp_path, '{"t": 1, "x": {"0": 1.0}, "y": [1, 2]}')
        with pytest.raises(ValidationError, match="line 2"):
            ingest(path)

    def test_not_a_dataset_header(self, tmp_path):
        path = tmp_path / "w.jsonl"
        path.write_text('{"something": "else"}\n')
        with pytest.raises(ParseError, match="line 1"):
            ingest(str(path))


class TestTables:
    def test_table_round_trip(self, tmp_path):
        path = tmp_path / "t.tsv"
        rows = [("a", 1, 0.1), ("b", 2, -3.5e-7)]
        write_table(str(path), ("name", "k", "v"), rows)
        cols, back = read_table(str(path))
        assert cols == ["name", "k", "v"]
        assert back[0] == ["a", "1", "0.1"]
        assert float(back[1][2]) == -3.5e-7

    def test_sheet_round_trip_2d(self, tmp_path):
        rng = np.random.default_rng(0)
        sheet = CoefficientSheet(rng.normal(size=(3, 4)))
        path = tmp_path / "s.tsv"
        write_sheet(str(path), sheet, ("u", "v", "w"))
        back, names = read_sheet(str(path))
        assert names == ("u", "v", "w")
        np.testing.assert_array_equal(back.values, sheet.values)

    def test_sheet_round_trip_3d(self, tmp_path):
        rng = np.random.default_rng(1)
        sheet = CoefficientSheet(rng.normal(size=(2, 3, 4)))
        path = tmp_path / "s3.tsv"
        write_sheet(str(path), sheet)
        back, names = read_sheet(str(path))
        np.testing.assert_array_equal(back.values, sheet.values)

    def test_truth_table(self, tmp_path):
        spec = GenSpec.default(seed=0)
        path = tmp_path / "truth.tsv"
        write_truth_table(str(path), spec)
        cols, rows = read_table(str(path))
        assert cols == ["feature", "active", "alpha", "lam"]
        assert len(rows) == 30
        assert sum(int(r[1]) for r in rows) == 20
