import struct

import numpy as np
import pytest

from frbnet import frbt


def test_real_layout_is_exact():
    arr = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    buf = frbt.dumps(arr)
    assert buf[:4] == b"FRBT"
    assert struct.unpack_from("<IIIIB", buf, 4) == (1, 2, 2, 3, 0)
    assert buf[21:] == struct.pack("<6d", 1, 2, 3, 4, 5, 6)


def test_complex_is_interleaved():
    arr = np.array([1 + 2j, -3.5 + 0.25j])
    buf = frbt.dumps(arr)
    assert struct.unpack_from("<B", buf, 16)[0] == 1
    assert buf[17:] == struct.pack("<4d", 1, 2, -3.5, 0.25)


@pytest.mark.parametrize("arr", [
    np.random.default_rng(0).standard_normal((3, 5, 7)),
    np.random.default_rng(1).standard_normal((4, 4)) + 1j * np.random.default_rng(2).standard_normal((4, 4)),
    np.array(2.5),
])
def test_roundtrip(arr, tmp_path):
    path = tmp_path / "t.frbt"
    frbt.save(path, arr)
    back = frbt.load(path)
    assert back.shape == arr.shape
    assert np.array_equal(back, arr)


def test_rejects_bad_magic_and_truncation():
    with pytest.raises(frbt.FRBTError):
        frbt.loads(b"NOPE" + bytes(20))
    buf = frbt.dumps(np.zeros(4))
    with pytest.raises(frbt.FRBTError):
        frbt.loads(buf[:-1])
