import math

import numpy as np
import pytest

from topokit.grid import InvalidArgument
from topokit.io import (FormatError, read_csv, read_grid, read_mask, read_raw, write_csv,
                        write_mask, write_pgm, write_raw)


def test_raw_round_trip(tmp_path):
    for shape in ((5, 7), (3, 4, 6)):
        a = np.random.default_rng(0).random(shape).astype(np.float32)
        p = tmp_path / "g.raw"
        write_raw(p, a)
        b = read_raw(p)
        assert b.shape == shape and b.dtype == np.float64
        np.testing.assert_array_equal(b, a)


def test_raw_header_is_json_line(tmp_path):
    p = tmp_path / "g.raw"
    write_raw(p, np.zeros((2, 3)))
    head, body = p.read_bytes().split(b"\n", 1)
    assert head == b'{"dims": [2, 3], "order": "row-major"}'
    assert len(body) == 24


@pytest.mark.parametrize("content", [b"no newline", b"{bad json\n", b'{"dims": [2, 2]}\n\x00\x00',
                                     b'{"dims": [1], "order": "col-major"}\n\x00\x00\x00\x00',
                                     b'{"order": "row-major"}\n'])
def test_malformed_raw(tmp_path, content):
    p = tmp_path / "bad.raw"
    p.write_bytes(content)
    with pytest.raises(FormatError):
        read_raw(p)


def test_pgm_round_trip(tmp_path):
    m = np.random.default_rng(1).random((6, 9)) < 0.5
    p = tmp_path / "m.pgm"
    write_mask(p, m)
    assert p.read_bytes().startswith(b"P5\n9 6\n255\n")
    np.testing.assert_array_equal(read_mask(p), m)
    with pytest.raises(InvalidArgument):
        write_pgm(p, np.zeros((2, 2, 2)))


def test_pgm_comments_and_16_bit(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1\n# another\n255\n\x00\xff")
    np.testing.assert_array_equal(read_grid(p), [[0.0, 1.0]])
    p.write_bytes(b"P5 2 1 1000\n" + np.array([0, 1000], ">u2").tobytes())
    np.testing.assert_array_equal(read_grid(p), [[0.0, 1.0]])


@pytest.mark.parametrize("content", [b"P2\n1 1\n255\n0", b"P5\n2 2\n255\n\x00", b"P5\n2 x\n255\n",
                                     b"P5\n1 1\n70000\n\x00\x00", b"P5\n1"])
def test_malformed_pgm(tmp_path, content):
    p = tmp_path / "bad.pgm"
    p.write_bytes(content)
    with pytest.raises(FormatError):
        read_grid(p)


def test_mask_as_raw(tmp_path):
    m = np.eye(4, dtype=bool)
    p = tmp_path / "m.raw"
    write_mask(p, m)
    np.testing.assert_array_equal(read_mask(p), m)


def test_csv_round_trip_keeps_floats(tmp_path):
    p = tmp_path / "t.csv"
    write_csv(p, ["a", "b"], [(1, 0.1), (2, math.inf), (3, np.float64(1 / 3))])
    rows = read_csv(p)
    assert [r["a"] for r in rows] == ["1", "2", "3"]
    assert [float(r["b"]) for r in rows] == [0.1, math.inf, 1 / 3]
