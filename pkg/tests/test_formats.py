import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oscres.errors import DataFormatError
from oscres.formats import (
    encoded_cache_path,
    read_encoded,
    read_snapshots,
    write_encoded,
    write_snapshots,
    write_snapshots_csv,
)


@settings(max_examples=30, deadline=None)
@given(count=st.integers(1, 4), N=st.integers(1, 40), n_snap=st.integers(1, 9), seed=st.integers(0, 10**6))
def test_snapshot_roundtrip(tmp_path_factory, count, N, n_snap, seed):
    Y = np.random.default_rng(seed).integers(0, 2, (count, N, n_snap)).astype(np.uint8)
    times = np.arange(1, n_snap + 1) * 3
    path = tmp_path_factory.mktemp("s") / "x.osnp"
    write_snapshots(path, Y, times)
    back, t = read_snapshots(path)
    np.testing.assert_array_equal(back, Y)
    np.testing.assert_array_equal(t, times)


def test_snapshot_bit_layout(tmp_path):
    # 2 neurons x 5 snapshots -> 10 bits, row-major, MSB first
    Y = np.array([[1, 0, 0, 0, 0], [0, 0, 0, 0, 1]], dtype=np.uint8)
    write_snapshots(tmp_path / "a", Y, [1, 2, 3, 4, 5])
    buf = (tmp_path / "a").read_bytes()
    assert buf[:4] == b"OSNP"
    header = np.frombuffer(buf[4:20], "<u4").tolist()
    assert header == [1, 1, 2, 5]
    assert np.frombuffer(buf[20:40], "<u4").tolist() == [1, 2, 3, 4, 5]
    assert buf[40:] == bytes([0b10000000, 0b01000000])


def test_snapshot_rejects_bad(tmp_path):
    with pytest.raises(DataFormatError):
        write_snapshots(tmp_path / "a", np.full((2, 2), 2), [1, 2])
    with pytest.raises(DataFormatError):
        write_snapshots(tmp_path / "a", np.zeros((2, 2)), [1])
    write_snapshots(tmp_path / "ok", np.zeros((3, 2)), [1, 2])
    buf = (tmp_path / "ok").read_bytes()
    (tmp_path / "short").write_bytes(buf[:-1])
    with pytest.raises(DataFormatError):
        read_snapshots(tmp_path / "short")
    (tmp_path / "magic").write_bytes(b"XXXX" + buf[4:])
    with pytest.raises(DataFormatError):
        read_snapshots(tmp_path / "magic")


def test_snapshot_csv(tmp_path):
    Y = np.array([[0, 1], [1, 1], [0, 0]], dtype=np.uint8)
    write_snapshots_csv(tmp_path / "s.csv", Y, [10, 20])
    lines = (tmp_path / "s.csv").read_text().strip().splitlines()
    assert len(lines) == 4
    assert lines[1:] == ["0,0,1", "1,1,1", "2,0,0"]


def test_encoded_roundtrip_and_errors(tmp_path):
    frames = np.random.default_rng(0).uniform(0, 1, (3, 7, 4))
    write_encoded(tmp_path / "e", frames)
    np.testing.assert_array_equal(read_encoded(tmp_path / "e"), frames)
    buf = (tmp_path / "e").read_bytes()
    (tmp_path / "t").write_bytes(buf[:-8])
    with pytest.raises(DataFormatError):
        read_encoded(tmp_path / "t")
    (tmp_path / "m").write_bytes(b"OSNP" + buf[4:])
    with pytest.raises(DataFormatError):
        read_encoded(tmp_path / "m")


def test_cache_path_depends_on_params(tmp_path):
    a = encoded_cache_path(tmp_path, "train", {"n_in": 16, "n_ts": 2018})
    b = encoded_cache_path(tmp_path, "train", {"n_ts": 2018, "n_in": 16})
    c = encoded_cache_path(tmp_path, "train", {"n_in": 8, "n_ts": 2018})
    assert a == b and a != c and a.parent == tmp_path
