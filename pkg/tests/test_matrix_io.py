import struct

import numpy as np
import pytest

from app.errors import MatrixFormatError
from app.utils.matrix_io import decode_matrix, encode_matrix, parse_matrix_bytes, read_matrix, write_matrix


def test_header_layout():
    data = encode_matrix(np.array([[1.0, 2.0, 3.0]]))
    assert data[:4] == b"MTXB"
    assert struct.unpack("<IQQ", data[4:24]) == (1, 1, 3)
    assert len(data) == 24 + 3 * 8
    assert struct.unpack("<3d", data[24:]) == (1.0, 2.0, 3.0)


def test_row_major_payload():
    data = encode_matrix(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert struct.unpack("<4d", data[24:]) == (1.0, 2.0, 3.0, 4.0)


def test_file_round_trip_is_bit_exact(tmp_path, rng):
    a = rng.standard_normal((5, 3))
    path = tmp_path / "a.mtxb"
    write_matrix(path, a)
    np.testing.assert_array_equal(read_matrix(path), a)
    first = path.read_bytes()
    write_matrix(path, read_matrix(path))
    assert path.read_bytes() == first


def test_text_fixture(tmp_path):
    path = tmp_path / "a.txt"
    path.write_text("2 2\n4 0\n0 9\n")
    np.testing.assert_array_equal(read_matrix(path), np.diag([4.0, 9.0]))


@pytest.mark.parametrize(
    "data",
    [
        b"MTX",
        b"NOPE" + bytes(20),
        struct.pack("<4sIQQ", b"MTXB", 2, 1, 1) + bytes(8),
        struct.pack("<4sIQQ", b"MTXB", 1, 2, 2) + bytes(8),
        struct.pack("<4sIQQ", b"MTXB", 1, 0, 3),
        struct.pack("<4sIQQ", b"MTXB", 1, 1, 1) + struct.pack("<d", float("nan")),
    ],
)
def test_invalid_binary(data):
    with pytest.raises(MatrixFormatError):
        decode_matrix(data)


@pytest.mark.parametrize("text", ["3", "2 2\n1 2 3", "1 1\nabc", "0 1\n", "1 1\ninf"])
def test_invalid_text(text):
    with pytest.raises(MatrixFormatError):
        parse_matrix_bytes(text.encode())


def test_non_finite_not_encoded():
    with pytest.raises(MatrixFormatError):
        encode_matrix(np.array([[np.inf]]))


def test_missing_file(tmp_path):
    with pytest.raises(MatrixFormatError):
        read_matrix(tmp_path / "absent.mtxb")
