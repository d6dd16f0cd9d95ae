import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from fcsl.channel import ConfigError
from fcsl.codec import (BitFrame, FrameError, bits_per_element, dequantize, desparsify, pack_complex,
                        quantize, quantize_dequantize, quantize_indices, reconstruct, sparsify,
                        unpack_complex)
from fcsl.pilots import dft_matrix

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


# ---------------------------------------------------------------- quantizer

def test_quantizer_hand_example():
    f = quantize([0.0, 0.3, 0.9], 6)
    np.testing.assert_array_equal(f.indices(), [0, 1, 3])
    np.testing.assert_allclose(dequantize(f), [0.1125, 0.3375, 0.7875], atol=1e-7)


def test_zero_range_rebuilds_exactly():
    f = quantize(np.full(4, -2.5), 8)
    assert f.z == 0.0
    np.testing.assert_array_equal(f.indices(), 0)
    np.testing.assert_array_equal(dequantize(f), -2.5)


@pytest.mark.parametrize("b", [2, 4, 8])
def test_error_within_half_step(b):
    rng = np.random.default_rng(b)
    v = rng.normal(size=(100, 24)) * rng.uniform(0.01, 50, size=(100, 1))
    idx, vmin, z = quantize_indices(v, b)
    rec = reconstruct(idx, vmin, z, b)
    rho = z * 2.0 ** -b
    assert np.all(np.abs(rec - v) <= rho[:, None] / 2 + 1e-12)
    assert idx.min() >= 0 and idx.max() <= 2**b - 1


def test_mse_decreases_with_bits():
    v = np.random.default_rng(0).normal(size=(100, 24))
    mse = [np.mean((quantize_dequantize(v, b) - v) ** 2) for b in (2, 4, 8)]
    assert mse[0] > mse[1] > mse[2]


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(1, 16), elements=finite), st.integers(1, 10))
def test_quantizer_index_idempotent(v, b):
    f = quantize(v, b * v.size)
    np.testing.assert_array_equal(quantize(dequantize(f), b * v.size).indices(), f.indices())


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(1, 16), elements=finite), st.integers(1, 12))
def test_frame_byte_round_trip(v, b):
    f = quantize(v, b * v.size)
    g = BitFrame.from_bytes(f.to_bytes())
    assert g == f
    np.testing.assert_array_equal(dequantize(g), dequantize(f))
    assert len(f.payload) == (b * v.size + 7) // 8


def test_frame_rejects_short_header():
    with pytest.raises(FrameError, match="header"):
        BitFrame.from_bytes(b"\x00" * 5)


def test_frame_rejects_wrong_payload_length():
    raw = quantize(np.arange(4.0), 16).to_bytes()
    with pytest.raises(FrameError, match="payload"):
        BitFrame.from_bytes(raw[:-1])
    with pytest.raises(FrameError, match="payload"):
        BitFrame.from_bytes(raw + b"\x00")


def test_frame_rejects_budget_not_multiple():
    f = quantize(np.arange(4.0), 16)
    bad = BitFrame(15, 4, f.v_min, f.z, f.payload).to_bytes()
    with pytest.raises(FrameError):
        BitFrame.from_bytes(bad)


def test_bits_per_element_errors():
    assert bits_per_element(400, 100) == 4
    with pytest.raises(ConfigError):
        bits_per_element(0, 4)
    with pytest.raises(ConfigError):
        bits_per_element(10, 4)


def test_non_finite_codeword():
    with pytest.raises(ValueError):
        quantize([0.0, np.nan], 4)


def test_side_info_encloses_entries_after_float32_rounding():
    v = np.array([0.1, 0.2, 0.30000000000000004, 1 / 3])
    f = quantize(v, 32)
    assert f.v_min <= v.min()
    assert f.v_min + f.z >= v.max()


# ---------------------------------------------------------------- transforms

def test_sparsify_matches_kron_definition():
    rng = np.random.default_rng(1)
    n_rb, m_c, n_rx = 3, 4, 2
    g = rng.normal(size=(n_rb * m_c, n_rx)) + 1j * rng.normal(size=(n_rb * m_c, n_rx))
    expect = np.kron(dft_matrix(n_rb), dft_matrix(m_c)) @ g @ dft_matrix(n_rx)
    np.testing.assert_allclose(sparsify(g, n_rb, m_c), expect.reshape(n_rb, m_c * n_rx), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 4), st.integers(0, 2**31))
def test_sparsify_round_trip_and_norm(n_rb, m_c, n_rx, seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(2, n_rb * m_c, n_rx)) + 1j * rng.normal(size=(2, n_rb * m_c, n_rx))
    s = sparsify(g, n_rb, m_c)
    assert s.shape == (2, n_rb, m_c * n_rx)
    assert np.abs(desparsify(s, m_c, n_rx) - g).max() <= 1e-10
    assert abs(np.linalg.norm(s) - np.linalg.norm(g)) <= 1e-10 * np.linalg.norm(g)


def test_sparsify_single_path_concentrates():
    # a port pattern that is one DFT column in every domain lands in one coefficient
    n_rb, m_c, n_rx = 8, 8, 2
    f_rb, f_c, f_rx = (dft_matrix(n).conj().T for n in (n_rb, m_c, n_rx))
    g = np.kron(f_rb[:, 3], f_c[:, 5])[:, None] * f_rx[1][None, :].conj()
    s = sparsify(g, n_rb, m_c)
    e = np.abs(s) ** 2
    assert e[3].sum() >= 0.99 * e.sum()
    assert e.max() >= 0.99 * e.sum()


def test_sparsify_shape_errors():
    with pytest.raises(ValueError):
        sparsify(np.zeros((10, 2)), 3, 4)
    with pytest.raises(ValueError):
        desparsify(np.zeros((3, 7)), 4, 2)


def test_pack_unpack_row_order():
    x = np.array([[1 + 2j, 3 - 1j]])
    p = pack_complex(x)
    np.testing.assert_array_equal(p, [[1, 3], [2, -1]])
    np.testing.assert_array_equal(unpack_complex(p), x)
