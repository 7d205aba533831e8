"""N-band PEQ composition and the delay-length gain-scaling law.

A PEQ is a low shelf, N-2 bells, and a high shelf whose dB magnitudes add.
One PEQ is fitted at a reference delay length; every other delay line of the
FDN reuses the same frequencies and Q values with all dB gains multiplied by
m_k / m_ref, so a single fit serves the whole network.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidParameterError, NonDecayingResponseError
from .prototypes import BandKind, BandParams, band_magnitude

__all__ = [
    "PeqParams",
    "FittedPeq",
    "peq_log_magnitude",
    "scale_to_delay",
    "response_to_t60",
]


@dataclass(frozen=True)
class PeqParams:
    """Ordered band list: low shelf, bells by ascending fc, high shelf.

    A fitted shelf corner may land inside the bell frequency range (the
    optimizer moves frequencies freely), so only the interior bells are
    held to strictly increasing fc; the cascade response is order
    independent either way.
    """

    bands: tuple[BandParams, ...]

    def __post_init__(self):
        object.__setattr__(self, "bands", tuple(self.bands))
        n = len(self.bands)
        if n < 3:
            raise InvalidParameterError(f"a PEQ needs at least 3 bands, got {n}")
        if self.bands[0].kind is not BandKind.LOW_SHELF:
            raise InvalidParameterError("first band must be a low shelf")
        if self.bands[-1].kind is not BandKind.HIGH_SHELF:
            raise InvalidParameterError("last band must be a high shelf")
        for band in self.bands[1:-1]:
            if band.kind is not BandKind.BELL:
                raise InvalidParameterError("interior bands must be bells")
        fcs = [band.fc_hz for band in self.bands[1:-1]]
        if any(lo >= hi for lo, hi in zip(fcs, fcs[1:])):
            raise InvalidParameterError(f"bell frequencies must strictly increase, got {fcs}")

    @property
    def n_bands(self) -> int:
        return len(self.bands)


@dataclass(frozen=True)
class FittedPeq:
    """A PEQ fitted at reference delay length m_ref samples for sample rate fs."""

    params: PeqParams
    m_ref: float
    fs: float

    def __post_init__(self):
        if not (math.isfinite(self.m_ref) and self.m_ref >= 1):
            raise InvalidParameterError(f"m_ref must be >= 1 sample, got {self.m_ref}")
        if not (math.isfinite(self.fs) and self.fs > 0):
            raise InvalidParameterError(f"fs must be > 0, got {self.fs}")

    def to_dict(self) -> dict:
        return {
            "fs": self.fs,
            "m_ref": self.m_ref,
            "bands": [
                {
                    "kind": band.kind.value,
                    "fc_hz": band.fc_hz,
                    "gain_db": band.gain_db,
                    "q": band.q,
                }
                for band in self.params.bands
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FittedPeq":
        try:
            bands = tuple(
                BandParams(
                    kind=BandKind(entry["kind"]),
                    fc_hz=float(entry["fc_hz"]),
                    gain_db=float(entry["gain_db"]),
                    q=float(entry["q"]),
                )
                for entry in data["bands"]
            )
            return cls(params=PeqParams(bands), m_ref=float(data["m_ref"]), fs=float(data["fs"]))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidParameterError):
                raise
            raise InvalidParameterError(f"malformed fitted-PEQ document: {exc}") from exc


def peq_log_magnitude(params: PeqParams, freqs) -> np.ndarray:
    """Composite PEQ response in dB: the sum of per-band dB magnitudes.

    ``freqs`` must be strictly positive and sorted ascending.
    """
    freqs = np.asarray(freqs, dtype=np.float64)
    if freqs.size == 0:
        raise InvalidParameterError("frequency vector must not be empty")
    if np.any(freqs <= 0):
        raise InvalidParameterError("frequencies must be strictly positive")
    if np.any(np.diff(freqs) < 0):
        raise InvalidParameterError("frequencies must be sorted ascending")
    total = np.zeros_like(freqs)
    for band in params.bands:
        total += 20.0 * np.log10(band_magnitude(freqs, band))
    return total


def scale_to_delay(fitted: FittedPeq, m_k: float) -> PeqParams:
    """Rescale the fitted PEQ's dB gains to delay length m_k samples.

    Frequencies and Q are untouched; every gain is multiplied by
    m_k / m_ref so the per-sample attenuation matches the longer or
    shorter recirculation path.
    """
    if not (math.isfinite(m_k) and m_k >= 1):
        raise InvalidParameterError(f"m_k must be >= 1 sample, got {m_k}")
    factor = m_k / fitted.m_ref
    bands = tuple(replace(band, gain_db=band.gain_db * factor) for band in fitted.params.bands)
    return PeqParams(bands)


def response_to_t60(response_db, m_k: float, fs: float) -> np.ndarray:
    """Invert the gain law: the T60 a delay line of m_k samples achieves.

    Every response value must be strictly negative (an actual attenuation),
    otherwise the loop would sustain or grow.
    """
    response_db = np.asarray(response_db, dtype=np.float64)
    if not (math.isfinite(m_k) and m_k >= 1):
        raise InvalidParameterError(f"m_k must be >= 1 sample, got {m_k}")
    if not (math.isfinite(fs) and fs > 0):
        raise InvalidParameterError(f"fs must be > 0, got {fs}")
    if np.any(response_db >= 0):
        worst = int(np.argmax(response_db))
        raise NonDecayingResponseError(
            f"response must be < 0 dB everywhere; index {worst} is {response_db.flat[worst]:+.6g} dB"
        )
    return -60.0 * m_k / (response_db * fs)
