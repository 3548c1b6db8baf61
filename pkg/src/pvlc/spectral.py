"""Frequency-domain collision analysis: magnitude spectra of RSS traces,
prominent-peak extraction, and the single-object vs two-object verdict."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import numpy as np
from scipy.signal import find_peaks

from .channel import RssTrace

DEFAULT_SEPARATION_RATIO = 1.5
DEFAULT_DOMINANCE_RATIO = 2.0
DEFAULT_MIN_PROMINENCE_FRAC = 0.2


class WindowKind(Enum):
    HANN = "Hann"
    RECT = "Rect"


@dataclass(frozen=True)
class Spectrum:
    bin_hz: float
    magnitudes: np.ndarray  # one-sided, length fft_length/2 + 1
    window: WindowKind

    def frequencies(self) -> np.ndarray:
        return np.arange(len(self.magnitudes)) * self.bin_hz


@dataclass(frozen=True)
class SpectralPeak:
    frequency_hz: float
    magnitude: float
    prominence: float


@dataclass(frozen=True)
class PeakSet:
    peaks: Tuple[SpectralPeak, ...]

    def __post_init__(self):
        object.__setattr__(self, "peaks", tuple(self.peaks))

    def __len__(self):
        return len(self.peaks)


class CollisionKind(Enum):
    SINGLE_DOMINANT = "SingleDominant"
    TWO_OBJECTS = "TwoObjects"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class CollisionVerdict:
    kind: CollisionKind
    details: PeakSet


def compute_spectrum(
    trace: RssTrace,
    fft_length: int,
    window: WindowKind = WindowKind.HANN,
) -> Spectrum:
    """Mean-removed, windowed, one-sided magnitude spectrum.

    Traces shorter than fft_length are zero-padded after windowing; longer
    traces are truncated to the first fft_length samples.
    """
    if fft_length < 16 or fft_length & (fft_length - 1) != 0:
        raise ValueError("fft_length must be a power of two >= 16")
    if len(trace.samples) == 0:
        raise ValueError("trace is empty")
    x = trace.samples[:fft_length].astype(float)
    x = x - x.mean()
    if window is WindowKind.HANN:
        x = x * np.hanning(len(x))
    mags = np.abs(np.fft.rfft(x, n=fft_length))
    return Spectrum(
        bin_hz=trace.sampling_rate_hz / fft_length,
        magnitudes=mags,
        window=window,
    )


def detect_peaks(
    spectrum: Spectrum,
    min_prominence_frac: float = DEFAULT_MIN_PROMINENCE_FRAC,
) -> PeakSet:
    """Local spectral maxima with prominence above a fraction of the
    largest non-DC magnitude, sorted by magnitude descending."""
    if not 0 < min_prominence_frac < 1:
        raise ValueError("min_prominence_frac must lie in (0, 1)")
    mags = spectrum.magnitudes
    if len(mags) < 3:
        return PeakSet(peaks=())
    body = mags[1:]  # DC carries the ambient floor, never packet structure
    top = float(body.max())
    if top <= 0:
        return PeakSet(peaks=())
    idx, props = find_peaks(body, prominence=min_prominence_frac * top)
    peaks: List[SpectralPeak] = [
        SpectralPeak(
            frequency_hz=(i + 1) * spectrum.bin_hz,
            magnitude=float(body[i]),
            prominence=float(p),
        )
        for i, p in zip(idx, props["prominences"])
    ]
    peaks.sort(key=lambda p: (-p.magnitude, p.frequency_hz))
    return PeakSet(peaks=tuple(peaks))


def collision_verdict(
    peaks: PeakSet,
    separation_ratio: float = DEFAULT_SEPARATION_RATIO,
    dominance_ratio: float = DEFAULT_DOMINANCE_RATIO,
) -> CollisionVerdict:
    """SingleDominant when one fundamental towers over the rest; TwoObjects
    when two well-separated fundamentals coexist; Indeterminate otherwise."""
    if separation_ratio <= 1 or dominance_ratio <= 1:
        raise ValueError("ratios must be > 1")
    ps = peaks.peaks
    if len(ps) == 0:
        return CollisionVerdict(CollisionKind.INDETERMINATE, peaks)
    if len(ps) == 1:
        return CollisionVerdict(CollisionKind.SINGLE_DOMINANT, peaks)
    first, second = ps[0], ps[1]
    if first.magnitude >= dominance_ratio * second.magnitude:
        return CollisionVerdict(CollisionKind.SINGLE_DOMINANT, peaks)
    f_hi = max(first.frequency_hz, second.frequency_hz)
    f_lo = min(first.frequency_hz, second.frequency_hz)
    if f_lo > 0 and f_hi / f_lo >= separation_ratio:
        return CollisionVerdict(CollisionKind.TWO_OBJECTS, peaks)
    return CollisionVerdict(CollisionKind.INDETERMINATE, peaks)
