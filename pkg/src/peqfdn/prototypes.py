"""Analog magnitude prototypes for the three second-order PEQ band types.

The bell, low-shelf, and high-shelf responses are evaluated directly from
their squared-term closed forms in normalized frequency x = f / fc, which is
what the fitting gradients are derived from.  All math is float64.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidParameterError

__all__ = [
    "BandKind",
    "BandParams",
    "db_to_linear_amp",
    "bell_magnitude",
    "low_shelf_magnitude",
    "high_shelf_magnitude",
    "band_magnitude",
]


class BandKind(str, Enum):
    """The three supported second-order band types."""

    LOW_SHELF = "low_shelf"
    BELL = "bell"
    HIGH_SHELF = "high_shelf"


@dataclass(frozen=True)
class BandParams:
    """One band of the parametric EQ in analog-prototype form.

    Attributes
    ----------
    kind : BandKind
        Bell or shelf variant.
    fc_hz : float
        Center (bell) or transition (shelf) frequency in Hz, > 0.
    gain_db : float
        Band gain in dB; 0 dB is a transparent band.
    q : float
        Quality factor, > 0.
    """

    kind: BandKind
    fc_hz: float
    gain_db: float
    q: float

    def __post_init__(self):
        if not isinstance(self.kind, BandKind):
            raise InvalidParameterError(f"kind must be a BandKind, got {self.kind!r}")
        if not (math.isfinite(self.fc_hz) and self.fc_hz > 0):
            raise InvalidParameterError(f"fc_hz must be finite and > 0, got {self.fc_hz}")
        if not math.isfinite(self.gain_db):
            raise InvalidParameterError(f"gain_db must be finite, got {self.gain_db}")
        if not (math.isfinite(self.q) and self.q > 0):
            raise InvalidParameterError(f"q must be finite and > 0, got {self.q}")


def db_to_linear_amp(gain_db: float) -> float:
    """Convert a dB gain to the linear amplitude factor A = 10^(G/40).

    A is the square root of the linear gain at the band's reference point;
    the full boost/cut there is A^2 = 10^(G/20).
    """
    if not math.isfinite(gain_db):
        raise InvalidParameterError(f"gain_db must be finite, got {gain_db}")
    return 10.0 ** (gain_db / 40.0)


def _normalized_sq(f, band: BandParams):
    """Return X = (f / fc)^2 as float64, validating f >= 0."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise InvalidParameterError("frequencies must be >= 0")
    x = f / band.fc_hz
    return x * x


def _as_input_shape(result: np.ndarray, f):
    return float(result) if np.isscalar(f) or np.ndim(f) == 0 else result


def bell_magnitude(f, band: BandParams):
    """Linear magnitude of a bell band at frequency f (Hz, scalar or array).

    Peaks (or dips) to 10^(G/20) at fc and returns to unity at both spectrum
    edges.
    """
    if band.kind is not BandKind.BELL:
        raise InvalidParameterError(f"expected a bell band, got {band.kind}")
    a = db_to_linear_amp(band.gain_db)
    xx = _normalized_sq(f, band)
    edge = (1.0 - xx) ** 2
    damp = xx / band.q**2
    mag = np.sqrt((edge + a**2 * damp) / (edge + damp / a**2))
    return _as_input_shape(mag, f)


def low_shelf_magnitude(f, band: BandParams):
    """Linear magnitude of a low shelf: 10^(G/20) at DC, unity far above fc."""
    if band.kind is not BandKind.LOW_SHELF:
        raise InvalidParameterError(f"expected a low-shelf band, got {band.kind}")
    a = db_to_linear_amp(band.gain_db)
    xx = _normalized_sq(f, band)
    damp = a * xx / band.q**2
    mag = a * np.sqrt(((a - xx) ** 2 + damp) / ((1.0 - a * xx) ** 2 + damp))
    return _as_input_shape(mag, f)


def high_shelf_magnitude(f, band: BandParams):
    """Linear magnitude of a high shelf: unity at DC, 10^(G/20) far above fc."""
    if band.kind is not BandKind.HIGH_SHELF:
        raise InvalidParameterError(f"expected a high-shelf band, got {band.kind}")
    a = db_to_linear_amp(band.gain_db)
    xx = _normalized_sq(f, band)
    damp = a * xx / band.q**2
    mag = a * np.sqrt(((1.0 - a * xx) ** 2 + damp) / ((a - xx) ** 2 + damp))
    return _as_input_shape(mag, f)


_MAGNITUDE_FNS = {
    BandKind.BELL: bell_magnitude,
    BandKind.LOW_SHELF: low_shelf_magnitude,
    BandKind.HIGH_SHELF: high_shelf_magnitude,
}


def band_magnitude(f, band: BandParams):
    """Linear magnitude of any band kind at frequency f."""
    return _MAGNITUDE_FNS[band.kind](f, band)
