"""Manchester packet codec and the preamble-anchored RSS threshold decoder.

A packet is a physical strip of high/low-reflectance symbols: a fixed
four-symbol HIGH-LOW-HIGH-LOW preamble followed by the Manchester-coded
payload (0 -> HIGH,LOW; 1 -> LOW,HIGH).  The decoder locates the first two
peaks and first valley (points A, B, C), derives an amplitude threshold and
the symbol period from them, and slices the rest of the trace into
symbol-period windows.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence, TYPE_CHECKING

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks

if TYPE_CHECKING:
    from .channel import RssTrace


class Symbol(Enum):
    HIGH = "H"
    LOW = "L"

    @property
    def is_high(self) -> bool:
        return self is Symbol.HIGH


PREAMBLE = (Symbol.HIGH, Symbol.LOW, Symbol.HIGH, Symbol.LOW)


class DecodeError(Exception):
    """Base class for decoder failures."""


class PreambleNotFound(DecodeError):
    pass


class ManchesterViolation(DecodeError):
    pass


class SaturatedTrace(DecodeError):
    pass


class DecodeStatus(Enum):
    OK = "Ok"
    PREAMBLE_NOT_FOUND = "PreambleNotFound"
    MANCHESTER_VIOLATION = "ManchesterViolation"
    SATURATED = "Saturated"


def _check_bits(bits: str) -> None:
    if any(c not in "01" for c in bits):
        raise ValueError(f"bits must contain only 0/1 characters, got {bits!r}")


def manchester_encode(bits: str) -> List[Symbol]:
    """0 -> HIGH,LOW; 1 -> LOW,HIGH."""
    _check_bits(bits)
    out: List[Symbol] = []
    for c in bits:
        if c == "0":
            out += [Symbol.HIGH, Symbol.LOW]
        else:
            out += [Symbol.LOW, Symbol.HIGH]
    return out


def manchester_decode(symbols: Sequence[Symbol]) -> str:
    """Inverse of manchester_encode; raises ManchesterViolation on HH/LL
    pairs and rejects odd-length input."""
    if len(symbols) % 2 != 0:
        raise ValueError("symbol sequence must have even length")
    bits = []
    for i in range(0, len(symbols), 2):
        a, b = symbols[i], symbols[i + 1]
        if a is Symbol.HIGH and b is Symbol.LOW:
            bits.append("0")
        elif a is Symbol.LOW and b is Symbol.HIGH:
            bits.append("1")
        else:
            raise ManchesterViolation(
                f"invalid Manchester pair {a.value}{b.value} at symbol {i}"
            )
    return "".join(bits)


def symbols_to_str(symbols: Sequence[Symbol]) -> str:
    return "".join(s.value for s in symbols)


def symbols_from_str(text: str) -> List[Symbol]:
    return [Symbol(c) for c in text]


@dataclass(frozen=True)
class ReflectivePacket:
    """Physical packet: preamble + Manchester payload, constant symbol
    width, two materials."""

    symbols: tuple
    symbol_width_m: float
    reflectance_high: float = 0.9
    reflectance_low: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        if tuple(self.symbols[:4]) != PREAMBLE:
            raise ValueError("packet must start with the HIGH,LOW,HIGH,LOW preamble")
        if (len(self.symbols) - 4) % 2 != 0:
            raise ValueError("data field must hold an even number of symbols")
        if self.symbol_width_m <= 0:
            raise ValueError("symbol_width_m must be > 0")
        if not 0 < self.reflectance_high <= 1:
            raise ValueError("reflectance_high must lie in (0, 1]")
        if not 0 <= self.reflectance_low < 1:
            raise ValueError("reflectance_low must lie in [0, 1)")
        if self.reflectance_high <= self.reflectance_low:
            raise ValueError("reflectance_high must exceed reflectance_low")

    @property
    def bits(self) -> str:
        return manchester_decode(self.symbols[4:])

    @property
    def length_m(self) -> float:
        return len(self.symbols) * self.symbol_width_m


def build_packet(
    bits: str,
    symbol_width_m: float,
    reflectance_high: float = 0.9,
    reflectance_low: float = 0.1,
) -> ReflectivePacket:
    """Preamble plus Manchester-coded payload."""
    symbols = PREAMBLE + tuple(manchester_encode(bits))
    return ReflectivePacket(
        symbols=symbols,
        symbol_width_m=symbol_width_m,
        reflectance_high=reflectance_high,
        reflectance_low=reflectance_low,
    )


@dataclass(frozen=True)
class PreambleFix:
    """Anchor points A (first peak), B (first valley), C (second peak) and
    the thresholds derived from them."""

    idx_A: int
    idx_B: int
    idx_C: int
    r_A: float
    r_B: float
    r_C: float
    t_A: float
    t_B: float
    t_C: float
    tau_r: float
    tau_t: float

    @classmethod
    def from_points(cls, r_A, t_A, r_B, t_B, r_C, t_C, idx_A=0, idx_B=0, idx_C=0):
        """Apply the threshold formulas exactly to located anchor points."""
        if not (t_A < t_B < t_C):
            raise ValueError("anchor times must satisfy t_A < t_B < t_C")
        if not (r_A > r_B and r_C > r_B):
            raise ValueError("anchors must form a peak-valley-peak triple")
        tau_r = ((r_A - r_B) + (r_C - r_B)) / 2.0
        tau_t = ((t_B - t_A) + (t_C - t_B)) / 2.0
        return cls(idx_A, idx_B, idx_C, r_A, r_B, r_C, t_A, t_B, t_C, tau_r, tau_t)


@dataclass(frozen=True)
class DecodeResult:
    status: DecodeStatus
    symbols: tuple = ()
    bits: str = ""
    preamble: Optional[PreambleFix] = None
    vehicle_anchor: Optional[int] = None
    detail: str = ""


@dataclass(frozen=True)
class DecoderConfig:
    """Knobs the decoding method leaves open.

    smoothing_window -- centered moving-average length in samples (odd).
    peak_prominence_frac -- anchor prominence as a fraction of trace range.
    decision_level_frac -- HIGH decision level sits at
        r_B + decision_level_frac * tau_r; 0.5 = midpoint between the
        valley floor and the mean peak level.
    window_core_frac -- fraction of each symbol window, centered, over which
        the maximum is taken; keeps the decision clear of edge ramps.
    expected_bits -- payload length when known; None = detect end of packet.
    """

    smoothing_window: int = 5
    peak_prominence_frac: float = 0.25
    decision_level_frac: float = 0.5
    min_preamble_seconds: float = 0.1
    saturation_frac: float = 0.98
    saturated_sample_frac: float = 0.1
    window_core_frac: float = 0.6
    expected_bits: Optional[int] = None

    def __post_init__(self):
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ValueError("smoothing_window must be odd and >= 1")
        for name in ("peak_prominence_frac", "decision_level_frac", "window_core_frac"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not 0 < self.saturation_frac <= 1:
            raise ValueError("saturation_frac must lie in (0, 1]")
        if not 0 < self.saturated_sample_frac <= 1:
            raise ValueError("saturated_sample_frac must lie in (0, 1]")
        if self.min_preamble_seconds <= 0:
            raise ValueError("min_preamble_seconds must be > 0")
        if self.expected_bits is not None and self.expected_bits < 0:
            raise ValueError("expected_bits must be >= 0")


def _smooth(samples: np.ndarray, window: int) -> np.ndarray:
    if window <= 1:
        return samples.astype(float)
    return uniform_filter1d(samples.astype(float), size=window, mode="nearest")


def _check_saturation(trace: "RssTrace", cfg: DecoderConfig) -> None:
    ceiling = trace.meta.get("saturation_ceiling") if trace.meta else None
    if ceiling is None:
        return
    near = np.count_nonzero(trace.samples >= cfg.saturation_frac * ceiling)
    if near > cfg.saturated_sample_frac * len(trace.samples):
        raise SaturatedTrace(
            f"{near}/{len(trace.samples)} samples within "
            f"{cfg.saturation_frac:.0%} of the saturation ceiling"
        )


def _lobe_center(
    s: np.ndarray,
    peak: int,
    level_left: float,
    level_right: float,
    fs: float,
    above: bool,
) -> float:
    """Midpoint of the contiguous region around ``peak`` on one side of the
    crossing levels, with the crossings located by linear interpolation.

    The two sides of an extremum may face different baselines (the first
    preamble peak rises out of the background but falls into a low stripe),
    so each edge gets its own half-amplitude level.  Interpolation keeps the
    estimate free of sample quantization, which would otherwise drift the
    symbol windows over long payloads.
    """
    sign = 1.0 if above else -1.0
    v = sign * s
    l_left, l_right = sign * level_left, sign * level_right
    if v[peak] <= max(l_left, l_right):
        return peak / fs
    lo = peak
    while lo > 0 and v[lo - 1] > l_left:
        lo -= 1
    hi = peak
    while hi < len(s) - 1 and v[hi + 1] > l_right:
        hi += 1
    if lo == 0 or hi == len(s) - 1:
        # lobe runs off the trace; the midpoint would be biased
        return peak / fs
    d_lo = v[lo] - v[lo - 1]
    t_lo = lo - (v[lo] - l_left) / d_lo if d_lo != 0 else float(lo)
    d_hi = v[hi + 1] - v[hi]
    t_hi = hi + (l_right - v[hi]) / d_hi if d_hi != 0 else float(hi)
    return (t_lo + t_hi) / 2.0 / fs


def find_preamble(trace: "RssTrace", cfg: DecoderConfig = DecoderConfig()) -> PreambleFix:
    """Locate the peak-valley-peak anchor triple on the smoothed trace.

    Peak times are refined to the midpoints of their half-amplitude lobes so
    that flat-topped (footprint-widened) symbols do not jitter the period
    estimate.
    """
    if len(trace.samples) == 0:
        raise ValueError("trace is empty")
    _check_saturation(trace, cfg)
    fs = trace.sampling_rate_hz
    s = _smooth(trace.samples, cfg.smoothing_window)
    span = float(s.max() - s.min())
    if span <= 0:
        raise PreambleNotFound("trace is constant")
    prom = cfg.peak_prominence_frac * span

    peaks, _ = find_peaks(s, prominence=prom)
    valleys, _ = find_peaks(-s, prominence=prom)
    for p_a in peaks:
        after_a = valleys[valleys > p_a]
        if len(after_a) == 0:
            continue
        p_b = after_a[0]
        after_b = peaks[peaks > p_b]
        if len(after_b) == 0:
            continue
        p_c = after_b[0]
        r_a, r_b, r_c = float(s[p_a]), float(s[p_b]), float(s[p_c])
        level_ab = (r_a + r_b) / 2.0
        level_cb = (r_c + r_b) / 2.0
        # the first peak rises out of whatever precedes the packet (often a
        # darker background), so its leading edge is measured against a
        # robust estimate of that local baseline rather than the valley level
        left0 = max(0, p_a - 2 * (p_b - p_a))
        lead = s[left0:p_a + 1]
        base_a = float(np.percentile(lead, 25)) if len(lead) > 2 else r_b
        if base_a >= level_ab:
            base_a = r_b  # lead-in never drops below the peak half-level
        t_a = _lobe_center(s, p_a, (r_a + base_a) / 2.0, level_ab, fs, above=True)
        t_b = _lobe_center(s, p_b, level_ab, level_cb, fs, above=False)
        t_c = _lobe_center(s, p_c, level_cb, level_cb, fs, above=True)
        if not (t_a < t_b < t_c):
            continue
        return PreambleFix.from_points(
            r_a, t_a, r_b, t_b, r_c, t_c,
            idx_A=int(p_a), idx_B=int(p_b), idx_C=int(p_c),
        )
    raise PreambleNotFound("no peak-valley-peak triple above the prominence floor")


def _window_max(s: np.ndarray, fs: float, t0: float, t1: float) -> Optional[float]:
    i0 = max(0, int(np.ceil(t0 * fs)))
    i1 = min(len(s) - 1, int(np.floor(t1 * fs)))
    if i0 > i1:
        return None
    return float(s[i0 : i1 + 1].max())


def _crossing_time(
    s: np.ndarray,
    fs: float,
    t0: float,
    t1: float,
    level: float,
    rising: bool,
    near: float,
) -> Optional[float]:
    """Interpolated time where ``s`` crosses ``level`` in the given direction
    within [t0, t1], choosing the crossing closest to ``near``."""
    i0 = max(0, int(np.ceil(t0 * fs)))
    i1 = min(len(s) - 2, int(np.floor(t1 * fs)))
    if i0 > i1:
        return None
    seg0 = s[i0 : i1 + 1]
    seg1 = s[i0 + 1 : i1 + 2]
    if rising:
        hits = np.flatnonzero((seg0 < level) & (seg1 >= level))
    else:
        hits = np.flatnonzero((seg0 >= level) & (seg1 < level))
    if len(hits) == 0:
        return None
    times = np.empty(len(hits))
    for j, h in enumerate(hits):
        i = i0 + h
        d = s[i + 1] - s[i]
        frac = (level - s[i]) / d if d != 0 else 0.5
        times[j] = (i + frac) / fs
    return float(times[np.argmin(np.abs(times - near))])


def _region_range(s: np.ndarray, fs: float, t0: float, t1: float) -> Optional[float]:
    i0 = max(0, int(np.ceil(t0 * fs)))
    i1 = min(len(s) - 1, int(np.floor(t1 * fs)))
    if i0 > i1:
        return None
    seg = s[i0 : i1 + 1]
    return float(seg.max() - seg.min())


def decode_trace(
    trace: "RssTrace",
    cfg: DecoderConfig = DecoderConfig(),
    vehicle: bool = False,
) -> DecodeResult:
    """Full threshold decode: preamble anchors, then symbol windows of
    length tau_t centered on t_C + k*tau_t.

    Returns a DecodeResult whose status reflects any failure instead of
    raising.  With ``vehicle`` the trace is first anchored on the car's
    long-duration preamble (hood peak + windshield valley).
    """
    anchor: Optional[int] = None
    try:
        if vehicle:
            anchor = find_vehicle_preamble(trace, cfg)
            # keep a little of the dark body before the anchor so the packet
            # preamble's first peak still has its local baseline on the left
            margin = int(0.5 * cfg.min_preamble_seconds * trace.sampling_rate_hz)
            start = max(0, anchor - margin)
            sub = type(trace)(
                trace.sampling_rate_hz, trace.samples[start:], dict(trace.meta)
            )
            result = _decode_from_preamble(sub, cfg)
            return replace(result, vehicle_anchor=anchor)
        return _decode_from_preamble(trace, cfg)
    except SaturatedTrace as e:
        return DecodeResult(DecodeStatus.SATURATED, vehicle_anchor=anchor, detail=str(e))
    except PreambleNotFound as e:
        return DecodeResult(
            DecodeStatus.PREAMBLE_NOT_FOUND, vehicle_anchor=anchor, detail=str(e)
        )
    except ManchesterViolation as e:
        return DecodeResult(
            DecodeStatus.MANCHESTER_VIOLATION, vehicle_anchor=anchor, detail=str(e)
        )


def _decode_from_preamble(trace: "RssTrace", cfg: DecoderConfig) -> DecodeResult:
    fix = find_preamble(trace, cfg)
    fs = trace.sampling_rate_hz
    s = _smooth(trace.samples, cfg.smoothing_window)
    span = float(s.max() - s.min())
    floor = cfg.peak_prominence_frac * span
    decision = fix.r_B + cfg.decision_level_frac * fix.tau_r
    tau = fix.tau_t
    core = cfg.window_core_frac / 2.0

    decoded: List[Symbol] = []  # symbols k = 1, 2, ...
    drift = 0.0  # decision-directed clock correction, updated on transitions

    def read_symbol(k: int) -> Optional[Symbol]:
        nonlocal drift
        center = fix.t_C + k * tau + drift
        m = _window_max(s, fs, center - core * tau, center + core * tau)
        if m is None:
            return None
        sym = Symbol.HIGH if m > decision else Symbol.LOW
        # each transition exposes the true symbol boundary as a decision-level
        # crossing; nudging the clock towards it absorbs the small period
        # error left in the anchor estimate, which would otherwise accumulate
        # over long payloads
        if decoded and sym is not decoded[-1]:
            boundary = fix.t_C + (k - 0.5) * tau + drift
            t_x = _crossing_time(
                s, fs, center - tau, center, decision, rising=sym.is_high,
                near=boundary,
            )
            if t_x is not None and abs(t_x - boundary) < 0.5 * tau:
                drift += 0.5 * (t_x - boundary)
        decoded.append(sym)
        return sym

    if cfg.expected_bits is not None:
        total = 1 + 2 * cfg.expected_bits  # final preamble LOW + data
        for k in range(1, total + 1):
            if read_symbol(k) is None:
                raise PreambleNotFound(
                    "trace ends before the expected symbol count"
                )
    else:
        k = 1
        max_symbols = int(len(trace.samples) / max(1.0, tau * fs)) + 2
        while k <= max_symbols:
            center = fix.t_C + k * tau + drift
            # the current window plus the next two symbols always contains a
            # Manchester transition while the packet lasts; past the packet
            # it is flat (looking backward would catch the final edge ramp)
            rng = _region_range(s, fs, center - 0.5 * tau, center + 2.5 * tau)
            if rng is None or rng < floor:
                break
            if read_symbol(k) is None:
                break
            k += 1

    data = decoded[1:]  # k = 1 is the final preamble LOW
    if cfg.expected_bits is None and len(data) % 2 == 1:
        # the final HIGH's trailing edge can masquerade as one extra LOW
        # window; Manchester parity disambiguates
        if data[-1] is Symbol.LOW:
            data = data[:-1]
        else:
            data = data + [Symbol.LOW]
    bits = manchester_decode(data)  # raises ManchesterViolation on bad pairs
    symbols = PREAMBLE + tuple(data)
    return DecodeResult(DecodeStatus.OK, symbols=symbols, bits=bits, preamble=fix)


def find_vehicle_preamble(trace: "RssTrace", cfg: DecoderConfig = DecoderConfig()) -> int:
    """Index where the roof segment begins: the end of the first broad
    windshield valley that follows a broad hood plateau, both lasting at
    least ``cfg.min_preamble_seconds``."""
    if len(trace.samples) == 0:
        raise ValueError("trace is empty")
    _check_saturation(trace, cfg)
    fs = trace.sampling_rate_hz
    s = _smooth(trace.samples, cfg.smoothing_window)
    span = float(s.max() - s.min())
    if span <= 0:
        raise PreambleNotFound("trace is constant")
    mid = float(s.min()) + span / 2.0
    high = s >= mid

    min_run = int(np.ceil(cfg.min_preamble_seconds * fs))
    # run-length encode the high/low classification
    change = np.flatnonzero(np.diff(high.astype(np.int8))) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [len(s)]])
    runs = [(bool(high[a]), int(a), int(b)) for a, b in zip(starts, ends)]

    for i in range(len(runs) - 1):
        is_high, a, b = runs[i]
        nxt_high, c, d = runs[i + 1]
        if is_high and not nxt_high and (b - a) >= min_run and (d - c) >= min_run:
            if d >= len(s):
                continue  # valley runs off the trace; nothing follows it
            return d
    raise PreambleNotFound("no hood-plateau / windshield-valley pair found")
