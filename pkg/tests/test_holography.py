import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import crandn
from oracles import dft2_loop
from scatter_crypt.errors import CarrierOverlap, GeometryMismatch
from scatter_crypt.holography import (
    carrier_frequency, check_carrier, demodulate, hologram_record, intensity_record,
    passband_basis, passband_mask,
)
from scatter_crypt.scene import PlaneSpec, sample_plane
from scatter_crypt.wavefield import ReferenceWave, reference_field

PLANE32 = PlaneSpec(32.0, 32.0, 32, 32)
# 0.625 wavelength pitch puts the 0.4 tilt at a quarter-sample carrier
PLANE_Q = PlaneSpec(20.0, 20.0, 32, 32)
REF = ReferenceWave(1.0, 0.4, 0.0)


def _ref_values(plane=PLANE32, ref=REF):
    return reference_field(ref, sample_plane(plane))


def test_intensity_examples():
    np.testing.assert_array_equal(intensity_record(np.ones(4, complex)), np.ones(4))
    assert intensity_record(np.array([1 + 1j]))[0] == 2.0
    np.testing.assert_array_equal(intensity_record(np.zeros(3, complex)), np.zeros(3))


def test_hologram_examples():
    rv = _ref_values(ref=ReferenceWave(2.0, 0.4, 0.0))
    np.testing.assert_allclose(hologram_record(np.zeros_like(rv), rv), 4.0, rtol=1e-15)
    np.testing.assert_allclose(hologram_record(rv, rv), 16.0, rtol=1e-14)
    assert hologram_record(np.array([1 + 1j]), np.array([1.0]))[0] == pytest.approx(5.0)
    with pytest.raises(GeometryMismatch):
        hologram_record(np.zeros(3), np.ones(4))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), amp=st.floats(0.1, 10))
def test_expansion_identity(seed, amp):
    rng = np.random.default_rng(seed)
    psi = crandn(rng, 64)
    ref = amp * np.exp(1j * rng.uniform(0, 2 * np.pi, 64))
    h = hologram_record(psi, ref)
    expanded = intensity_record(psi) + intensity_record(ref) + 2 * np.real(psi * ref.conj())
    np.testing.assert_allclose(h, expanded, rtol=1e-12, atol=1e-12 * amp**2)


def test_mask_matches_direct_frequencies():
    m = passband_mask((8, 8), 0.5)
    for u in range(8):
        for v in range(8):
            fu = u / 8 if u < 4 else u / 8 - 1
            fv = v / 8 if v < 4 else v / 8 - 1
            assert m[u, v] == (np.hypot(fu, fv) <= 0.25)


def test_demodulate_zero_field():
    rv = _ref_values()
    out = demodulate(hologram_record(np.zeros_like(rv), rv), rv, PLANE32.shape)
    assert np.abs(out).max() <= 1e-10


def test_demodulate_inband_plane_wave_roundtrip():
    pts = sample_plane(PLANE_Q)
    psi = 0.3 * np.exp(2j * np.pi * (2 * pts[:, 0] - 1 * pts[:, 2]) / 20)
    rv = _ref_values(PLANE_Q)
    out = demodulate(hologram_record(psi, rv), rv, PLANE_Q.shape)
    assert np.linalg.norm(out - psi) / np.linalg.norm(psi) <= 0.05


def test_demodulate_uses_fft_consistently():
    """The hard disc acts on the DFT exactly as a direct DFT would see it."""
    rng = np.random.default_rng(4)
    plane = PlaneSpec(6.0, 6.0, 6, 6)
    rv = reference_field(ReferenceWave(1.0, 0.0, 0.0), sample_plane(plane))
    h = crandn(rng, 36)
    out = demodulate(h, rv, (6, 6), 0.6)
    spec = dft2_loop((h - h.mean()).reshape(6, 6))
    mask = passband_mask((6, 6), 0.6)
    np.testing.assert_allclose(np.fft.fft2(out.reshape(6, 6)), spec * mask, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1),
       c1=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       c2=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_demodulation_linear(seed, c1, c2):
    rng = np.random.default_rng(seed)
    rv = _ref_values()
    h1 = hologram_record(crandn(rng, 1024), rv)
    h2 = hologram_record(crandn(rng, 1024), rv)
    lhs = demodulate(c1 * h1 + c2 * h2, rv, PLANE32.shape)
    rhs = c1 * demodulate(h1, rv, PLANE32.shape) + c2 * demodulate(h2, rv, PLANE32.shape)
    scale = (abs(c1) + abs(c2)) * (np.linalg.norm(h1) + np.linalg.norm(h2))
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(scale, 1e-300)


def test_demodulate_geometry_checked():
    with pytest.raises(GeometryMismatch):
        demodulate(np.ones(10), np.ones(10), (4, 4))


def test_carrier_frequency():
    fx, fz = carrier_frequency(REF, PLANE32)
    assert (fx, fz) == pytest.approx((0.4, 0.0))
    assert carrier_frequency(REF, PLANE_Q) == pytest.approx((0.25, 0.0))
    with pytest.warns(CarrierOverlap, match="twin"):
        check_carrier(REF, PLANE32, 0.25)
    fx, _ = carrier_frequency(ReferenceWave(1.0, 0.8, 0.0), PLANE32)
    assert fx == pytest.approx(-0.2)


def test_check_carrier():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_carrier(REF, PLANE_Q, 0.25, gain=10.0)
        assert check_carrier(ReferenceWave(1.0, 0.25, 0), PLANE32, 0.44, gain=10.0)
    with pytest.warns(CarrierOverlap, match="zero-order"):
        assert not check_carrier(ReferenceWave(1.0, 0.25, 0), PLANE32, 0.44)
    with pytest.warns(CarrierOverlap, match="twin"):
        assert not check_carrier(ReferenceWave(1.0, 0.05, 0), PLANE32, 0.25, gain=100.0)


def test_passband_basis_orthonormal_and_inband():
    b = passband_basis((12, 10), 0.4)
    assert b.shape[1] == passband_mask((12, 10), 0.4).sum()
    np.testing.assert_allclose(b.conj().T @ b, np.eye(b.shape[1]), atol=1e-12)
    spec = np.fft.fft2(b[:, 3].reshape(12, 10))
    assert np.abs(spec[~passband_mask((12, 10), 0.4)]).max() < 1e-12
