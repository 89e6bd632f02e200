"""On-disk formats: Matrix Market round-trips, metadata sidecars, and
line-numbered failure reporting."""

from __future__ import annotations

import json

import numpy as np
import pytest

from qubolab import (gen_random_dense, read_instance, read_vector,
                     write_instance, write_vector)
from qubolab.io import MM_HEADER, _sidecar_path

from conftest import tiny_instance


class TestInstanceRoundTrip:
    def test_values_round_trip_exactly(self, tmp_path):
        inst = gen_random_dense(6, 42)
        path = tmp_path / "inst.mtx"
        write_instance(path, inst)
        back = read_instance(path)
        assert back.k == inst.k
        assert np.array_equal(back.rows, inst.rows)
        assert np.array_equal(back.cols, inst.cols)
        assert np.array_equal(back.vals, inst.vals)
        assert back.meta["generator"] == "random_dense"
        assert back.meta["seed"] == 42

    def test_writes_are_byte_deterministic(self, tmp_path):
        inst = gen_random_dense(5, 7)
        p1, p2 = tmp_path / "a.mtx", tmp_path / "b.mtx"
        write_instance(p1, inst)
        write_instance(p2, inst)
        assert p1.read_bytes() == p2.read_bytes()

    def test_file_is_one_indexed_matrix_market(self, tmp_path):
        path = tmp_path / "tiny.mtx"
        write_instance(path, tiny_instance())
        lines = path.read_text().splitlines()
        assert lines[0] == MM_HEADER
        assert lines[1] == "2 2 1"
        assert lines[2] == "1 2 1.0"

    def test_sidecar_records_size_and_lineage(self, tmp_path):
        path = tmp_path / "inst.mtx"
        write_instance(path, gen_random_dense(3, 5))
        meta = json.loads((tmp_path / "inst.meta.json").read_text())
        assert meta["k"] == 3
        assert meta["generator"] == "random_dense"
        assert meta["seed"] == 5

    def test_missing_sidecar_is_tolerated(self, tmp_path):
        path = tmp_path / "inst.mtx"
        write_instance(path, tiny_instance())
        (tmp_path / "inst.meta.json").unlink()
        back = read_instance(path)
        assert back.k == 2
        assert back.meta == {}

    def test_comments_and_blank_lines_are_skipped(self, tmp_path):
        path = tmp_path / "c.mtx"
        path.write_text(
            f"{MM_HEADER}\n% a comment\n\n2 2 1\n% another\n1 2 3.5\n"
        )
        back = read_instance(path)
        assert back.vals.tolist() == [3.5]


class TestInstanceReadFailures:
    def test_bad_header_names_line_one(self, tmp_path):
        path = tmp_path / "bad.mtx"
        path.write_text("not a header\n")
        with pytest.raises(ValueError, match=r"bad\.mtx:1: bad header"):
            read_instance(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.mtx"
        path.write_text("")
        with pytest.raises(ValueError, match="empty file"):
            read_instance(path)

    def test_nonsquare_matrix(self, tmp_path):
        path = tmp_path / "rect.mtx"
        path.write_text(f"{MM_HEADER}\n2 3 0\n")
        with pytest.raises(ValueError, match="square"):
            read_instance(path)

    def test_entry_count_mismatch(self, tmp_path):
        path = tmp_path / "short.mtx"
        path.write_text(f"{MM_HEADER}\n2 2 2\n1 1 1.0\n")
        with pytest.raises(ValueError, match="promises 2 entries, found 1"):
            read_instance(path)

    def test_malformed_entry_names_its_line(self, tmp_path):
        path = tmp_path / "junk.mtx"
        path.write_text(f"{MM_HEADER}\n2 2 1\n1 x 1.0\n")
        with pytest.raises(ValueError, match=r"junk\.mtx:3"):
            read_instance(path)

    def test_out_of_range_index(self, tmp_path):
        path = tmp_path / "oob.mtx"
        path.write_text(f"{MM_HEADER}\n2 2 1\n3 1 1.0\n")
        with pytest.raises(ValueError, match=r"outside 1\.\.2"):
            read_instance(path)

    def test_sidecar_k_mismatch(self, tmp_path):
        path = tmp_path / "inst.mtx"
        write_instance(path, tiny_instance())
        sidecar = _sidecar_path(str(path))
        with open(sidecar, "w") as fh:
            json.dump({"k": 5}, fh)
        with pytest.raises(ValueError, match="k=5"):
            read_instance(path)

    def test_sidecar_invalid_json(self, tmp_path):
        path = tmp_path / "inst.mtx"
        write_instance(path, tiny_instance())
        with open(_sidecar_path(str(path)), "w") as fh:
            fh.write("{broken")
        with pytest.raises(ValueError, match="invalid JSON"):
            read_instance(path)


class TestVectors:
    def test_round_trip_is_exact(self, tmp_path):
        b = np.random.default_rng(3).normal(size=7)
        path = tmp_path / "b.txt"
        write_vector(path, b)
        assert np.array_equal(read_vector(path), b)

    def test_blank_lines_are_ignored(self, tmp_path):
        path = tmp_path / "b.txt"
        path.write_text("1.5\n\n-2.0\n")
        assert read_vector(path).tolist() == [1.5, -2.0]

    def test_malformed_number_names_its_line(self, tmp_path):
        path = tmp_path / "b.txt"
        path.write_text("1.0\nbogus\n")
        with pytest.raises(ValueError, match=r"b\.txt:2"):
            read_vector(path)
