import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfa.arrays import QacfArray, QdftArray, QSpecMatrix, QuantileSeriesArray
from qfa.container import read_container, write_container
from qfa.errors import ValidationError
from qfa.qseries import qacf, qper, qser


class TestRoundTrip:
    def test_qdft_bit_exact(self, small_qdft, tmp_path):
        path = tmp_path / "z.qfa"
        write_container(path, small_qdft)
        back = read_container(path)
        assert isinstance(back, QdftArray)
        assert np.array_equal(back.z, small_qdft.z)
        assert np.array_equal(back.levels, small_qdft.levels)

    def test_qser_bit_exact(self, small_qdft, tmp_path):
        qs = qser(small_qdft)
        path = tmp_path / "x.qfa"
        write_container(path, qs)
        back = read_container(path)
        assert isinstance(back, QuantileSeriesArray)
        assert np.array_equal(back.x, qs.x)
        assert np.array_equal(back.xbar, qs.xbar)

    def test_qacf_bit_exact(self, small_qdft, tmp_path):
        g = qacf(qser(small_qdft))
        path = tmp_path / "g.qfa"
        write_container(path, g)
        back = read_container(path)
        assert isinstance(back, QacfArray)
        assert np.array_equal(back.gamma, g.gamma)

    def test_qspec_bit_exact_with_kind(self, small_qdft, tmp_path):
        p = qper(small_qdft)
        path = tmp_path / "p.qfa"
        write_container(path, p)
        back = read_container(path)
        assert isinstance(back, QSpecMatrix)
        assert back.kind == "periodogram"
        assert np.array_equal(back.s, p.s)
        assert np.array_equal(back.freqs, p.freqs)

    @settings(max_examples=20, deadline=None)
    @given(
        m=st.integers(1, 3),
        L=st.integers(1, 5),
        n=st.integers(2, 16),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_random_qdft_round_trip(self, m, L, n, seed, tmp_path_factory):
        rng = np.random.default_rng(seed)
        z = rng.normal(size=(m, L, n)) + 1j * rng.normal(size=(m, L, n))
        levels = np.linspace(0.1, 0.9, L + 1)[:L] + rng.uniform(0, 0.005)
        arr = QdftArray(z=z, levels=levels)
        path = tmp_path_factory.mktemp("rt") / "z.qfa"
        write_container(path, arr)
        back = read_container(path)
        assert np.array_equal(back.z, arr.z)
        assert np.array_equal(back.levels, arr.levels)


class TestValidation:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.qfa"
        path.write_bytes(b"NOPE" + b"\0" * 64)
        with pytest.raises(ValidationError, match="magic"):
            read_container(path)

    def test_truncated_payload(self, small_qdft, tmp_path):
        path = tmp_path / "trunc.qfa"
        write_container(path, small_qdft)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) - 16])
        with pytest.raises(ValidationError, match="truncated"):
            read_container(path)

    def test_trailing_garbage(self, small_qdft, tmp_path):
        path = tmp_path / "long.qfa"
        write_container(path, small_qdft)
        with open(path, "ab") as fh:
            fh.write(b"\0" * 8)
        with pytest.raises(ValidationError, match="length mismatch"):
            read_container(path)

    def test_unwritable_type(self, tmp_path):
        with pytest.raises(ValidationError):
            write_container(tmp_path / "x.qfa", np.zeros(3))
