import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tcdnpe.goldref import MlpModel
from tcdnpe.npesim.formats import (
    FEATURES_MAGIC,
    HEADER,
    FormatError,
    load_matrix,
    load_model,
    pack_matrix,
    save_matrix,
    save_model,
    unpack_matrix,
)
from tcdnpe.npesim.rlc import RlcError, rlc_decode, rlc_encode


def test_rlc_examples():
    assert rlc_encode(b"") == b""
    assert len(rlc_encode(bytes(64))) < 64
    assert rlc_encode(b"aaab") == b"a\x03b\x01"
    assert rlc_decode(rlc_encode(bytes(600))) == bytes(600)


@given(st.binary(max_size=2000))
def test_rlc_round_trip(data):
    assert rlc_decode(rlc_encode(data)) == data


@given(st.lists(st.tuples(st.integers(0, 255), st.integers(1, 700)), max_size=20))
def test_rlc_round_trip_runs(runs):
    data = b"".join(bytes((v,)) * n for v, n in runs)
    assert rlc_decode(rlc_encode(data)) == data


@pytest.mark.parametrize("bad", [b"a", b"a\x00", b"a\x01b"])
def test_rlc_malformed(bad):
    with pytest.raises(RlcError):
        rlc_decode(bad)


def test_header_is_16_bytes():
    assert HEADER.size == 16


def test_matrix_round_trip(tmp_path):
    m = np.array([[1, -2, 3], [-32768, 32767, 0]])
    buf = pack_matrix(m, FEATURES_MAGIC)
    assert buf[:4] == b"TCDF"
    got, end = unpack_matrix(buf)
    assert np.array_equal(got, m) and end == len(buf)
    save_matrix(tmp_path / "f.bin", m, FEATURES_MAGIC)
    assert np.array_equal(load_matrix(tmp_path / "f.bin", FEATURES_MAGIC), m)


def test_model_round_trip(tmp_path):
    m = MlpModel.random([4, 10, 5, 3], np.random.default_rng(0))
    save_model(tmp_path / "m.bin", m)
    got = load_model(tmp_path / "m.bin")
    assert got.layer_sizes == [4, 10, 5, 3]
    assert all(np.array_equal(a, b) for a, b in zip(got.weights, m.weights))


def test_format_errors(tmp_path):
    buf = pack_matrix(np.ones((2, 2)), b"TCDW")
    with pytest.raises(FormatError):
        unpack_matrix(buf[:10])
    with pytest.raises(FormatError):
        unpack_matrix(buf[:-1])
    with pytest.raises(FormatError):
        unpack_matrix(b"XXXX" + buf[4:])
    with pytest.raises(FormatError):
        unpack_matrix(buf, magic=FEATURES_MAGIC)
    with pytest.raises(ValueError):
        pack_matrix(np.array([[70000]]), b"TCDW")
    (tmp_path / "e.bin").write_bytes(b"")
    with pytest.raises(FormatError):
        load_model(tmp_path / "e.bin")
    (tmp_path / "t.bin").write_bytes(buf + b"\0")
    with pytest.raises(FormatError):
        load_matrix(tmp_path / "t.bin")
