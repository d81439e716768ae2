import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays, array_shapes

from qcpd.tensorfile import TensorFileError, decode_tensor, encode_tensor, read_tensor, write_tensor


def test_header_layout():
    buf = encode_tensor(np.arange(6.0).reshape(2, 3))
    assert buf[:4] == b"QTNS"
    assert struct.unpack_from("<5I", buf, 4) == (1, 2, 2, 3, 0)
    assert len(buf) == 24 + 6 * 8
    assert struct.unpack_from("<d", buf, 24 + 8 * 4)[0] == 4.0  # row-major


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, array_shapes(min_dims=1, max_dims=4, max_side=5)))
def test_round_trip_bit_exact(t):
    out = decode_tensor(encode_tensor(t))
    assert out.shape == t.shape
    assert out.tobytes() == np.ascontiguousarray(t).tobytes()


def test_file_round_trip(tmp_path):
    t = np.random.default_rng(0).standard_normal((3, 4, 5))
    t[0, 0, 0] = -0.0
    write_tensor(tmp_path / "t.qtns", t)
    out = read_tensor(tmp_path / "t.qtns")
    assert out.tobytes() == t.tobytes()


def test_non_contiguous_input():
    t = np.arange(12.0).reshape(3, 4).T
    np.testing.assert_array_equal(decode_tensor(encode_tensor(t)), t)


def test_rejects_unstorable():
    with pytest.raises(ValueError):
        encode_tensor(np.float64(1.0))
    with pytest.raises(ValueError):
        encode_tensor(np.zeros((0, 3)))


GOOD = encode_tensor(np.ones((2, 3)))


@pytest.mark.parametrize(
    "buf, offset",
    [
        (b"", 0),
        (b"QTN", 0),
        (b"XTNS" + GOOD[4:], 0),
        (GOOD[:6], 4),
        (GOOD[:4] + struct.pack("<I", 2) + GOOD[8:], 4),
        (GOOD[:8] + struct.pack("<I", 0) + GOOD[12:], 8),
        (GOOD[:12] + struct.pack("<I", 0) + GOOD[16:], 12),
        (GOOD[:14], 12),
        (GOOD[:20] + struct.pack("<I", 1) + GOOD[24:], 20),
        (GOOD[:-1], len(GOOD) - 1),
        (GOOD[:24], 24),
        (GOOD + b"\0", len(GOOD)),
    ],
    ids=[
        "empty", "short-magic", "bad-magic", "short-version", "bad-version", "zero-ndim",
        "zero-dim", "short-dim", "bad-dtype", "short-payload", "no-payload", "trailing",
    ],
)
def test_malformed_offsets(buf, offset):
    with pytest.raises(TensorFileError) as exc:
        decode_tensor(buf)
    assert exc.value.offset == offset
    assert f"byte offset {offset}" in str(exc.value)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, len(GOOD) - 1))
def test_every_truncation_rejected(n):
    with pytest.raises(TensorFileError):
        decode_tensor(GOOD[:n])
