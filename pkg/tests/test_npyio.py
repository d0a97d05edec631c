import io

import numpy as np
import pytest

from awt.core import EmbeddingMatrix
from awt.errors import BadMagic, TruncatedPayload, UnsupportedDtype, UnsupportedOrder
from awt.npyio import read_array, read_header, write_array


def _save_with_numpy(path, arr):
    with open(path, "wb") as fh:
        np.save(fh, arr)


def test_round_trip_identity(tmp_path):
    m = EmbeddingMatrix(np.eye(2, dtype=np.float32))
    path = tmp_path / "eye.npy"
    write_array(m, path)
    back = read_array(path)
    assert back.data.tobytes() == m.data.tobytes()
    path2 = tmp_path / "eye2.npy"
    write_array(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_writer_matches_independent_writer(tmp_path):
    arr = np.arange(20, dtype=np.float32).reshape(4, 5)
    ours = tmp_path / "ours.npy"
    theirs = tmp_path / "theirs.npy"
    write_array(EmbeddingMatrix(arr), ours)
    _save_with_numpy(theirs, arr)
    assert ours.read_bytes() == theirs.read_bytes()


def test_header_arithmetic_1x4(tmp_path):
    path = tmp_path / "row.npy"
    write_array(EmbeddingMatrix(np.ones((1, 4), dtype=np.float32)), path)
    blob = path.read_bytes()
    assert len(blob) == 128 + 16
    assert blob[:6] == b"\x93NUMPY"
    assert blob[127:128] == b"\n"


def test_payload_size_51x512(tmp_path):
    path = tmp_path / "big.npy"
    rng = np.random.default_rng(0)
    write_array(EmbeddingMatrix(rng.standard_normal((51, 512)).astype(np.float32)), path)
    rows, dim = read_header(path)
    assert (rows, dim) == (51, 512)
    payload = len(path.read_bytes()) - 128
    assert payload == 51 * 512 * 4


def test_rejects_float64(tmp_path):
    path = tmp_path / "f8.npy"
    _save_with_numpy(path, np.zeros((2, 2), dtype=np.float64))
    with pytest.raises(UnsupportedDtype):
        read_array(path)


def test_rejects_fortran_order(tmp_path):
    path = tmp_path / "fortran.npy"
    _save_with_numpy(path, np.asfortranarray(np.arange(6, dtype=np.float32).reshape(2, 3)))
    with pytest.raises(UnsupportedOrder):
        read_array(path)


def test_rejects_truncated_payload(tmp_path):
    path = tmp_path / "trunc.npy"
    write_array(EmbeddingMatrix(np.ones((2, 3), dtype=np.float32)), path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-4])
    with pytest.raises(TruncatedPayload):
        read_array(path)


def test_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.npy"
    path.write_bytes(b"not an array file at all")
    with pytest.raises(BadMagic):
        read_array(path)
    with pytest.raises(BadMagic):
        read_header(path)


def test_rejects_wrong_version(tmp_path):
    path = tmp_path / "v2.npy"
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.zeros((2, 2), dtype=np.float32), version=(2, 0))
    path.write_bytes(buf.getvalue())
    with pytest.raises(BadMagic):
        read_array(path)


def test_normalize_on_read(tmp_path):
    path = tmp_path / "scaled.npy"
    write_array(EmbeddingMatrix(np.array([[3.0, 4.0]], dtype=np.float32)), path)
    raw = read_array(path)
    np.testing.assert_allclose(raw.data[0], [3.0, 4.0])
    unit = read_array(path, normalize=True)
    np.testing.assert_allclose(unit.data[0], [0.6, 0.8], atol=1e-7)


def test_random_round_trips(tmp_path):
    rng = np.random.default_rng(42)
    path = tmp_path / "rt.npy"
    for _ in range(100):
        rows = int(rng.integers(1, 9))
        dim = int(rng.integers(1, 17))
        arr = rng.standard_normal((rows, dim)).astype(np.float32)
        write_array(EmbeddingMatrix(arr), path)
        again = read_array(path)
        assert again.data.tobytes() == arr.tobytes()
        assert again.data.shape == (rows, dim)
