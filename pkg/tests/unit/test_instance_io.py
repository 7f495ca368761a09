"""
Unit tests for the checksummed instance file format
"""
import json

import numpy as np
import pytest

from src.core.errors import ChecksumError, SchemaError
from src.core.instance_io import (
    SCHEMA,
    decode_matrix,
    encode_matrix,
    file_checksum,
    load,
    load_regular,
    save,
    save_regular,
)


class TestMatrixCodec:
    def test_small_matrix_is_dense(self):
        payload = encode_matrix(np.arange(6.0).reshape(2, 3))
        assert "format" not in payload
        assert payload["shape"] == [2, 3]

    def test_large_sparse_matrix_uses_coo(self):
        mat = np.zeros((80, 80))
        mat[3, 7] = 2.5
        mat[79, 0] = -1.0
        payload = encode_matrix(mat)
        assert payload["format"] == "coo"
        assert np.array_equal(decode_matrix(payload), mat)

    def test_rejects_wrong_byte_count(self):
        payload = encode_matrix(np.ones((2, 2)))
        payload["shape"] = [3, 3]
        with pytest.raises(SchemaError):
            decode_matrix(payload)

    def test_rejects_missing_fields(self):
        with pytest.raises(SchemaError):
            decode_matrix({"shape": [1, 1]})


class TestPairFiles:
    def test_save_then_load_keeps_operators(self, tmp_path, synthetic_pair):
        path = str(tmp_path / "pair.json")
        checksum = save(synthetic_pair, path)
        assert file_checksum(path) == checksum
        loaded = load(path)
        assert loaded.label == synthetic_pair.label
        assert loaded.meta == synthetic_pair.meta
        for a, b in zip(synthetic_pair.levels, loaded.levels):
            assert np.array_equal(a.A, b.A)
            assert np.array_equal(a.At, b.At)
            assert np.array_equal(a.D.gram, b.D.gram)

    def test_resave_is_byte_identical(self, tmp_path, cube1_pair):
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        save(cube1_pair, str(first))
        save(load(str(first)), str(second))
        assert first.read_bytes() == second.read_bytes()

    def test_tampered_file_fails_checksum(self, tmp_path, synthetic_pair):
        path = tmp_path / "pair.json"
        save(synthetic_pair, str(path))
        document = json.loads(path.read_text())
        document["label"] = "changed"
        path.write_text(json.dumps(document))
        with pytest.raises(ChecksumError):
            load(str(path))

    def test_wrong_schema(self, tmp_path):
        path = tmp_path / "pair.json"
        path.write_text(json.dumps({"schema": "hilbert-complex/v0"}))
        with pytest.raises(SchemaError):
            load(str(path))

    def test_missing_and_invalid_files(self, tmp_path):
        with pytest.raises(SchemaError):
            load(str(tmp_path / "absent.json"))
        broken = tmp_path / "broken.json"
        broken.write_text("[1, 2")
        with pytest.raises(SchemaError):
            load(str(broken))

    def test_document_schema_tag(self, tmp_path, synthetic_pair):
        path = tmp_path / "pair.json"
        save(synthetic_pair, str(path))
        assert json.loads(path.read_text())["schema"] == SCHEMA


class TestRegularFiles:
    def test_save_then_load(self, tmp_path):
        bases = {("primal", 0): (np.eye(3), np.eye(2)[:, :1]), ("dual", 1): (np.ones((2, 1)), np.zeros((4, 0)))}
        path = str(tmp_path / "regular.json")
        save_regular(bases, path, label="demo")
        loaded = load_regular(path)
        assert set(loaded) == set(bases)
        assert np.array_equal(loaded[("primal", 0)][0], np.eye(3))
        assert loaded[("dual", 1)][1].shape == (4, 0)
