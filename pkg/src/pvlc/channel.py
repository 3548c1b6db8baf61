"""Passive optical channel: scenes of reflective patterns moving under an
ambient emitter, rendered into received-signal-strength (RSS) traces.

The receiver integrates reflected light over its field-of-view footprint on
the ground plane (a uniform box kernel), applies inverse-square path gain
referenced to 0.2 m, adds ambient floor / AC ripple / Gaussian noise, and
clips to the detector's saturation ceiling.  All lux-valued inputs are
optical quantities; detector output is ``sensitivity * optical``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from .codec import ReflectivePacket

# Height at which path gain is unity (the indoor baseline scenario).
REFERENCE_HEIGHT_M = 0.2

DEFAULT_GROUND_REFLECTANCE = 0.02


class EmitterKind(Enum):
    LED_LAMP = "LedLamp"
    FLUORESCENT = "Fluorescent"
    SUN = "Sun"


@dataclass(frozen=True)
class EmitterModel:
    """Unmodulated ambient light source; only its illuminance on the
    reflective surface matters, the kind is metadata."""

    illuminance_lux: float
    kind: EmitterKind = EmitterKind.LED_LAMP

    def __post_init__(self):
        if self.illuminance_lux <= 0:
            raise ValueError("illuminance_lux must be > 0")


class ReceiverKind(Enum):
    PD_G1 = "PD_G1"
    PD_G2 = "PD_G2"
    PD_G3 = "PD_G3"
    RX_LED = "RxLed"
    CUSTOM = "Custom"


# kind -> (saturation_lux, relative sensitivity), sensitivities normalized
# to the photodiode at gain G1.
RECEIVER_PRESETS = {
    ReceiverKind.PD_G1: (450.0, 1.0),
    ReceiverKind.PD_G2: (1200.0, 0.45),
    ReceiverKind.PD_G3: (5000.0, 0.089),
    ReceiverKind.RX_LED: (35000.0, 0.013),
}

DEFAULT_PD_FOV_RAD = math.radians(45.0)
DEFAULT_RX_LED_FOV_RAD = math.radians(15.0)


@dataclass(frozen=True)
class ReceiverModel:
    kind: ReceiverKind
    sensitivity: float
    saturation_lux: float
    fov_half_angle_rad: float
    height_m: float
    sampling_rate_hz: float
    cap_rad: Optional[float] = None

    def __post_init__(self):
        if self.kind in RECEIVER_PRESETS:
            sat, sens = RECEIVER_PRESETS[self.kind]
            if self.saturation_lux != sat or self.sensitivity != sens:
                raise ValueError(
                    f"{self.kind.value} must carry saturation={sat} lux, "
                    f"sensitivity={sens}"
                )
        if not 0 < self.fov_half_angle_rad < math.pi / 2:
            raise ValueError("fov_half_angle_rad must lie in (0, pi/2)")
        if self.height_m <= 0:
            raise ValueError("height_m must be > 0")
        if self.sampling_rate_hz <= 0:
            raise ValueError("sampling_rate_hz must be > 0")
        if self.saturation_lux <= 0 or self.sensitivity <= 0:
            raise ValueError("saturation_lux and sensitivity must be > 0")
        if self.cap_rad is not None and not 0 < self.cap_rad < self.fov_half_angle_rad:
            raise ValueError("cap_rad must be in (0, fov_half_angle_rad)")

    @classmethod
    def preset(
        cls,
        kind: ReceiverKind,
        height_m: float,
        sampling_rate_hz: float,
        fov_half_angle_rad: Optional[float] = None,
        cap_rad: Optional[float] = None,
    ) -> "ReceiverModel":
        """Receiver with the built-in saturation/sensitivity for ``kind``."""
        if kind not in RECEIVER_PRESETS:
            raise ValueError("preset() requires a built-in receiver kind")
        sat, sens = RECEIVER_PRESETS[kind]
        if fov_half_angle_rad is None:
            fov_half_angle_rad = (
                DEFAULT_RX_LED_FOV_RAD if kind is ReceiverKind.RX_LED else DEFAULT_PD_FOV_RAD
            )
        return cls(
            kind=kind,
            sensitivity=sens,
            saturation_lux=sat,
            fov_half_angle_rad=fov_half_angle_rad,
            height_m=height_m,
            sampling_rate_hz=sampling_rate_hz,
            cap_rad=cap_rad,
        )

    @property
    def ceiling(self) -> float:
        """Detector-referred saturation level."""
        return self.saturation_lux * self.sensitivity


def footprint_width(receiver: ReceiverModel) -> float:
    """Ground-projected FoV diameter: 2 h tan(theta), with an optional
    physical cap narrowing the effective half-angle."""
    angle = receiver.cap_rad if receiver.cap_rad is not None else receiver.fov_half_angle_rad
    return 2.0 * receiver.height_m * math.tan(angle)


@dataclass(frozen=True)
class SpeedProfile:
    """Piecewise-constant speed; position is its (strictly increasing)
    integral.  The last segment's speed extends beyond the profile end."""

    segments: tuple

    def __post_init__(self):
        segs = tuple((float(d), float(v)) for d, v in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError("SpeedProfile needs at least one segment")
        for d, v in segs:
            if d <= 0 or v <= 0:
                raise ValueError("segment durations and speeds must be > 0")

    @classmethod
    def constant(cls, speed_mps: float, duration_s: float = 1e9) -> "SpeedProfile":
        return cls(segments=((duration_s, speed_mps),))

    def displacement(self, t: np.ndarray) -> np.ndarray:
        """Distance travelled by time t (t >= 0), vectorized."""
        t = np.asarray(t, dtype=float)
        durs = np.array([d for d, _ in self.segments])
        speeds = np.array([v for _, v in self.segments])
        bounds = np.concatenate([[0.0], np.cumsum(durs)])
        dists = np.concatenate([[0.0], np.cumsum(durs * speeds)])
        pos = np.interp(t, bounds, dists)
        # hold the final speed past the last segment
        over = t > bounds[-1]
        if np.any(over):
            pos = np.where(over, dists[-1] + (t - bounds[-1]) * speeds[-1], pos)
        return pos


@dataclass(frozen=True)
class VehicleProfile:
    """Front-to-back reflectance segments of a vehicle (hood, windshield,
    roof, rear windshield, trunk), optionally with a packet glued onto the
    roof segment at ``packet_offset_m`` from the segment start."""

    segments: tuple  # ((length_m, reflectance), ...)
    embedded_packet: Optional[ReflectivePacket] = None
    packet_offset_m: float = 0.0
    roof_segment: int = 2

    def __post_init__(self):
        segs = tuple((float(l), float(r)) for l, r in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError("VehicleProfile needs at least one segment")
        for l, r in segs:
            if l <= 0:
                raise ValueError("segment lengths must be > 0")
            if not 0 <= r <= 1:
                raise ValueError("reflectances must lie in [0, 1]")
        if self.embedded_packet is not None:
            if not 0 <= self.roof_segment < len(segs):
                raise ValueError("roof_segment out of range")
            roof_len = segs[self.roof_segment][0]
            pkt_len = self.embedded_packet.length_m
            if self.packet_offset_m < 0 or self.packet_offset_m + pkt_len > roof_len:
                raise ValueError("embedded packet does not fit inside the roof segment")

    @property
    def length_m(self) -> float:
        return sum(l for l, _ in self.segments)


def default_vehicle_profile(
    packet: Optional[ReflectivePacket] = None,
    packet_offset_m: float = 0.3,
) -> VehicleProfile:
    """Volvo-like five-segment body: bright hood/trunk, dark windshields,
    mid-tone roof carrying the optional packet."""
    roof_len = 1.4
    if packet is not None:
        roof_len = max(roof_len, packet_offset_m + packet.length_m + 0.3)
    return VehicleProfile(
        segments=(
            (1.0, 0.75),   # hood
            (0.8, 0.08),   # windshield
            (roof_len, 0.25),
            (0.6, 0.08),   # rear windshield
            (0.9, 0.70),   # trunk
        ),
        embedded_packet=packet,
        packet_offset_m=packet_offset_m,
        roof_segment=2,
    )


Pattern = Union[ReflectivePacket, VehicleProfile]


@dataclass(frozen=True)
class SceneObject:
    pattern: Pattern
    start_offset_m: float
    speed: SpeedProfile
    fov_share: float = 1.0

    def __post_init__(self):
        if not 0 < self.fov_share <= 1:
            raise ValueError("fov_share must lie in (0, 1]")

    def leading_edge(self, t: np.ndarray) -> np.ndarray:
        """Position of the pattern's leading edge relative to the receiver's
        ground projection.  Symbol 0 sits at the leading edge, so the pattern
        is read front-to-back as the object moves forward."""
        return self.start_offset_m + self.speed.displacement(t)


@dataclass(frozen=True)
class Scene:
    objects: tuple
    ground_reflectance: float = DEFAULT_GROUND_REFLECTANCE

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if not 0 <= self.ground_reflectance < 1:
            raise ValueError("ground_reflectance must lie in [0, 1)")
        if sum(o.fov_share for o in self.objects) > 1 + 1e-12:
            raise ValueError("fov_share values must sum to at most 1")


@dataclass(frozen=True)
class NoiseModel:
    ambient_floor_lux: float = 0.0
    ripple_amplitude_lux: float = 0.0
    ripple_hz: float = 100.0
    gaussian_sigma_lux: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.ambient_floor_lux < 0 or self.ripple_amplitude_lux < 0:
            raise ValueError("noise amplitudes must be >= 0")
        if self.gaussian_sigma_lux < 0:
            raise ValueError("gaussian_sigma_lux must be >= 0")


@dataclass
class RssTrace:
    """Uniformly sampled received-signal-strength series."""

    sampling_rate_hz: float
    samples: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.sampling_rate_hz <= 0:
            raise ValueError("sampling_rate_hz must be > 0")

    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) / self.sampling_rate_hz

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sampling_rate_hz


class ReflectanceProfile:
    """Piecewise-constant reflectance over pattern-local position s in
    [0, L); ground reflectance outside.  Supports exact box-kernel averages
    via the cumulative integral."""

    def __init__(self, breakpoints: Sequence[float], values: Sequence[float], ground: float):
        self.breakpoints = np.asarray(breakpoints, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if len(self.breakpoints) != len(self.values) + 1:
            raise ValueError("need one more breakpoint than values")
        self.ground = float(ground)
        widths = np.diff(self.breakpoints)
        self._cum = np.concatenate([[0.0], np.cumsum(widths * self.values)])

    @property
    def length_m(self) -> float:
        return float(self.breakpoints[-1] - self.breakpoints[0])

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.breakpoints, s, side="right") - 1
        inside = (s >= self.breakpoints[0]) & (s < self.breakpoints[-1])
        idx = np.clip(idx, 0, len(self.values) - 1)
        return np.where(inside, self.values[idx], self.ground)

    def _integral(self, s: np.ndarray) -> np.ndarray:
        """Integral of reflectance from breakpoint 0 to s, with the ground
        level extending the profile on both sides."""
        s = np.asarray(s, dtype=float)
        lo, hi = self.breakpoints[0], self.breakpoints[-1]
        core = np.interp(np.clip(s, lo, hi), self.breakpoints, self._cum)
        below = np.where(s < lo, (s - lo) * self.ground, 0.0)
        above = np.where(s > hi, (s - hi) * self.ground, 0.0)
        return core + below + above

    def box_average(self, centers, width: float) -> np.ndarray:
        """Mean reflectance over a window of ``width`` centered at each
        pattern-local position; exact for the piecewise-constant profile."""
        centers = np.asarray(centers, dtype=float)
        if width <= 0:
            return self(centers)
        half = width / 2.0
        return (self._integral(centers + half) - self._integral(centers - half)) / width


def render_reflectance(
    pattern: Pattern, ground_reflectance: float = DEFAULT_GROUND_REFLECTANCE
) -> ReflectanceProfile:
    """Map a packet or vehicle profile to reflectance over local position."""
    if isinstance(pattern, ReflectivePacket):
        n = len(pattern.symbols)
        w = pattern.symbol_width_m
        bps = np.arange(n + 1) * w
        vals = np.array(
            [pattern.reflectance_high if s.is_high else pattern.reflectance_low
             for s in pattern.symbols]
        )
        return ReflectanceProfile(bps, vals, ground_reflectance)
    if isinstance(pattern, VehicleProfile):
        bps = [0.0]
        vals = []
        for length, refl in pattern.segments:
            bps.append(bps[-1] + length)
            vals.append(refl)
        profile = ReflectanceProfile(np.array(bps), np.array(vals), ground_reflectance)
        if pattern.embedded_packet is None:
            return profile
        pkt = pattern.embedded_packet
        roof_start = sum(l for l, _ in pattern.segments[: pattern.roof_segment])
        p0 = roof_start + pattern.packet_offset_m
        pkt_profile = render_reflectance(pkt, ground_reflectance)
        # splice the packet's intervals into the vehicle's
        new_bps = [0.0]
        new_vals = []
        for i, v in enumerate(vals):
            seg_lo, seg_hi = bps[i], bps[i + 1]
            cuts = [seg_lo]
            cuts += [p0 + b for b in pkt_profile.breakpoints if seg_lo < p0 + b < seg_hi]
            cuts.append(seg_hi)
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                mid = (lo + hi) / 2.0
                if p0 <= mid < p0 + pkt.length_m:
                    new_vals.append(float(pkt_profile(mid - p0)))
                else:
                    new_vals.append(v)
                new_bps.append(hi)
        return ReflectanceProfile(np.array(new_bps), np.array(new_vals), ground_reflectance)
    raise TypeError(f"unsupported pattern type: {type(pattern).__name__}")


def path_gain(height_m: float) -> float:
    """Inverse-square gain, unity at the 0.2 m reference height."""
    if height_m <= 0:
        raise ValueError("height_m must be > 0")
    return (REFERENCE_HEIGHT_M / height_m) ** 2


def transit_symbol_rate(speed_mps: float, symbol_width_m: float) -> float:
    """Symbols per second seen by a static receiver: speed / width."""
    if speed_mps <= 0 or symbol_width_m <= 0:
        raise ValueError("speed and symbol width must be > 0")
    return speed_mps / symbol_width_m


def simulate(
    scene: Scene,
    emitter: EmitterModel,
    receiver: ReceiverModel,
    noise: NoiseModel,
    duration_s: float,
) -> RssTrace:
    """Render the scene into an RSS trace.

    Per sample: sensitivity * path_gain * illuminance * sum over objects of
    fov_share * (box average of the object's reflectance over the footprint),
    then ambient floor, AC ripple, Gaussian noise, and clipping to the
    detector ceiling.
    """
    if not scene.objects:
        raise ValueError("scene has no objects")
    if duration_s <= 0:
        raise ValueError("duration_s must be > 0")
    n = int(round(duration_s * receiver.sampling_rate_hz))
    if n < 16:
        raise ValueError("duration x sampling rate must cover at least 16 samples")
    t = np.arange(n) / receiver.sampling_rate_hz

    width = footprint_width(receiver)
    reflect = np.zeros(n)
    for obj in scene.objects:
        profile = render_reflectance(obj.pattern, scene.ground_reflectance)
        centers = obj.leading_edge(t)
        reflect += obj.fov_share * profile.box_average(centers, width)

    gain = receiver.sensitivity * path_gain(receiver.height_m)
    samples = gain * emitter.illuminance_lux * reflect
    samples += noise.ambient_floor_lux * receiver.sensitivity
    if noise.ripple_amplitude_lux > 0:
        samples += (
            noise.ripple_amplitude_lux
            * receiver.sensitivity
            * np.sin(2 * np.pi * noise.ripple_hz * t)
        )
    if noise.gaussian_sigma_lux > 0:
        rng = np.random.default_rng(noise.seed)
        samples += rng.normal(0.0, noise.gaussian_sigma_lux * receiver.sensitivity, n)
    np.clip(samples, 0.0, receiver.ceiling, out=samples)

    meta = {
        "sampling_rate_hz": receiver.sampling_rate_hz,
        "saturation_ceiling": receiver.ceiling,
        "seed": noise.seed,
    }
    return RssTrace(receiver.sampling_rate_hz, samples, meta)
