"""Analog prototype magnitudes: anchor values, symmetries, validation."""

import numpy as np
import pytest

from peqfdn import (
    BandKind,
    BandParams,
    InvalidParameterError,
    band_magnitude,
    bell_magnitude,
    db_to_linear_amp,
    high_shelf_magnitude,
    low_shelf_magnitude,
)

# Far enough from fc that the asymptotic value holds to well under 1e-6.
FAR_FACTOR = 1e6


def random_band(rng, kind):
    return BandParams(
        kind=kind,
        fc_hz=float(rng.uniform(30.0, 18000.0)),
        gain_db=float(rng.uniform(-30.0, 6.0)),
        q=float(rng.uniform(0.3, 10.0)),
    )


def test_db_to_linear_amp_known_values():
    assert db_to_linear_amp(0.0) == 1.0
    assert db_to_linear_amp(40.0) == pytest.approx(10.0, rel=1e-12)
    assert db_to_linear_amp(-40.0) == pytest.approx(0.1, rel=1e-12)
    with pytest.raises(InvalidParameterError):
        db_to_linear_amp(float("nan"))


def test_bell_peak_equals_full_gain(rng):
    for _ in range(300):
        band = random_band(rng, BandKind.BELL)
        peak = bell_magnitude(band.fc_hz, band)
        assert peak == pytest.approx(10.0 ** (band.gain_db / 20.0), rel=1e-9)


def test_bell_edges_are_unity(rng):
    for _ in range(100):
        band = random_band(rng, BandKind.BELL)
        assert bell_magnitude(0.0, band) == pytest.approx(1.0, rel=1e-12)
        far = bell_magnitude(band.fc_hz * FAR_FACTOR, band)
        assert far == pytest.approx(1.0, rel=1e-6)


def test_low_shelf_anchors(rng):
    for _ in range(100):
        band = random_band(rng, BandKind.LOW_SHELF)
        full = 10.0 ** (band.gain_db / 20.0)
        half = 10.0 ** (band.gain_db / 40.0)
        assert low_shelf_magnitude(0.0, band) == pytest.approx(full, rel=1e-9)
        assert low_shelf_magnitude(band.fc_hz * FAR_FACTOR, band) == pytest.approx(1.0, rel=1e-6)
        # The squared-term shelf passes exactly through half gain at fc for any Q.
        assert low_shelf_magnitude(band.fc_hz, band) == pytest.approx(half, rel=1e-9)


def test_high_shelf_anchors(rng):
    for _ in range(100):
        band = random_band(rng, BandKind.HIGH_SHELF)
        full = 10.0 ** (band.gain_db / 20.0)
        half = 10.0 ** (band.gain_db / 40.0)
        assert high_shelf_magnitude(0.0, band) == pytest.approx(1.0, rel=1e-9)
        assert high_shelf_magnitude(band.fc_hz * FAR_FACTOR, band) == pytest.approx(full, rel=1e-6)
        assert high_shelf_magnitude(band.fc_hz, band) == pytest.approx(half, rel=1e-9)


def test_opposite_gains_invert_the_response(rng):
    freqs = np.geomspace(10.0, 24000.0, 64)
    for _ in range(50):
        band = random_band(rng, BandKind.BELL)
        flipped = BandParams(band.kind, band.fc_hz, -band.gain_db, band.q)
        product = bell_magnitude(freqs, band) * bell_magnitude(freqs, flipped)
        assert np.allclose(product, 1.0, rtol=1e-10)


def test_bell_is_geometrically_symmetric_about_fc(rng):
    for _ in range(50):
        band = random_band(rng, BandKind.BELL)
        ratios = np.geomspace(1.01, 50.0, 16)
        above = bell_magnitude(band.fc_hz * ratios, band)
        below = bell_magnitude(band.fc_hz / ratios, band)
        assert np.allclose(above, below, rtol=1e-10)


def test_shelves_mirror_each_other(rng):
    # HS(f) equals LS(fc^2 / f) with the same gain and Q.
    for _ in range(50):
        fc = float(rng.uniform(100.0, 10000.0))
        g = float(rng.uniform(-20.0, 6.0))
        q = float(rng.uniform(0.4, 4.0))
        hs = BandParams(BandKind.HIGH_SHELF, fc, g, q)
        ls = BandParams(BandKind.LOW_SHELF, fc, g, q)
        freqs = np.geomspace(fc / 100.0, fc * 100.0, 41)
        assert np.allclose(
            high_shelf_magnitude(freqs, hs),
            low_shelf_magnitude(fc * fc / freqs, ls),
            rtol=1e-10,
        )


def test_zero_gain_band_is_transparent():
    freqs = np.geomspace(10.0, 20000.0, 32)
    for kind in BandKind:
        band = BandParams(kind, 1000.0, 0.0, 0.7)
        assert np.allclose(band_magnitude(freqs, band), 1.0, rtol=1e-12)


def test_band_magnitude_dispatches_and_preserves_shape():
    band = BandParams(BandKind.BELL, 500.0, -6.0, 2.0)
    scalar = band_magnitude(500.0, band)
    assert isinstance(scalar, float)
    arr = band_magnitude(np.array([250.0, 500.0, 1000.0]), band)
    assert arr.shape == (3,)
    assert arr[1] == pytest.approx(scalar)


def test_kind_mismatch_rejected():
    bell = BandParams(BandKind.BELL, 1000.0, -3.0, 1.0)
    with pytest.raises(InvalidParameterError):
        low_shelf_magnitude(100.0, bell)
    with pytest.raises(InvalidParameterError):
        high_shelf_magnitude(100.0, bell)


def test_negative_frequency_rejected():
    band = BandParams(BandKind.BELL, 1000.0, -3.0, 1.0)
    with pytest.raises(InvalidParameterError):
        bell_magnitude(-1.0, band)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"fc_hz": 0.0},
        {"fc_hz": -100.0},
        {"fc_hz": float("inf")},
        {"gain_db": float("nan")},
        {"q": 0.0},
        {"q": -1.0},
    ],
)
def test_band_params_validation(kwargs):
    base = {"kind": BandKind.BELL, "fc_hz": 1000.0, "gain_db": -3.0, "q": 1.0}
    base.update(kwargs)
    with pytest.raises(InvalidParameterError):
        BandParams(**base)
