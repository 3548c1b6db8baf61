"""Deployment planning: decodable-region / throughput trends fitted from
simulator sweeps, and receiver selection against an ambient noise floor."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import codec
from . import channel


class NoViableReceiver(Exception):
    """The noise floor exceeds every receiver's saturation limit."""


@dataclass(frozen=True)
class TrendModel:
    """max_height(width) = a*width + b; throughput(height) = c*exp(-d*height)."""

    width_slope_a: float
    width_intercept_b: float
    thr_scale_c: float
    thr_decay_d: float
    width_residual: float = 0.0
    thr_log_residual: float = 0.0
    fitted_from: str = ""

    def __post_init__(self):
        if self.width_slope_a <= 0:
            raise ValueError("width_slope_a must be > 0")
        if self.thr_scale_c <= 0 or self.thr_decay_d <= 0:
            raise ValueError("throughput parameters must be > 0")


def fit_trends(
    sweep: Sequence[Tuple[float, float, float]],
    fitted_from: str = "",
) -> TrendModel:
    """Least-squares fits of the linear decodable-height model and the
    log-linear throughput model from (height, min_decodable_width,
    max_throughput) sweep points."""
    pts = [(float(h), float(w), float(t)) for h, w, t in sweep]
    heights = np.array([p[0] for p in pts])
    widths = np.array([p[1] for p in pts])
    thr = np.array([p[2] for p in pts])
    if len(pts) < 3 or len(np.unique(heights)) < 3:
        raise ValueError("need at least 3 sweep points with distinct heights")
    if np.any(thr <= 0):
        raise ValueError("throughput values must be > 0 for the log-linear fit")
    if len(np.unique(widths)) < 2:
        raise ValueError("degenerate sweep: all min widths identical")

    a, b = np.polyfit(widths, heights, 1)
    width_res = float(np.linalg.norm(heights - (a * widths + b)))
    d_neg, logc = np.polyfit(heights, np.log(thr), 1)
    c = math.exp(logc)
    d = -d_neg
    if a <= 0 or d <= 0:
        raise ValueError(
            "sweep does not exhibit the expected trends "
            f"(width slope {a:.3g}, throughput decay {d:.3g})"
        )
    log_res = float(np.linalg.norm(np.log(thr) - (logc + d_neg * heights)))
    return TrendModel(
        width_slope_a=float(a),
        width_intercept_b=float(b),
        thr_scale_c=float(c),
        thr_decay_d=float(d),
        width_residual=width_res,
        thr_log_residual=log_res,
        fitted_from=fitted_from,
    )


def max_height_for_width(model: TrendModel, width_m: float) -> float:
    if width_m <= 0:
        raise ValueError("width_m must be > 0")
    return model.width_slope_a * width_m + model.width_intercept_b


def throughput_at_height(model: TrendModel, height_m: float) -> float:
    return model.thr_scale_c * math.exp(-model.thr_decay_d * height_m)


@dataclass(frozen=True)
class CatalogEntry:
    kind: str
    saturation_lux: float
    relative_sensitivity: float


BUILTIN_ENTRIES = (
    CatalogEntry("PD_G1", 450.0, 1.0),
    CatalogEntry("PD_G2", 1200.0, 0.45),
    CatalogEntry("PD_G3", 5000.0, 0.089),
    CatalogEntry("RxLed", 35000.0, 0.013),
)


@dataclass(frozen=True)
class ReceiverCatalog:
    entries: tuple = BUILTIN_ENTRIES

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    @classmethod
    def builtin(cls) -> "ReceiverCatalog":
        return cls()

    def extended(self, *extra: CatalogEntry) -> "ReceiverCatalog":
        return ReceiverCatalog(entries=self.entries + tuple(extra))


def select_receiver(
    catalog: ReceiverCatalog,
    noise_floor_lux: float,
    margin_frac: float = 0.0,
) -> str:
    """Most sensitive receiver whose saturation limit strictly exceeds the
    noise floor (plus optional safety margin)."""
    if noise_floor_lux < 0:
        raise ValueError("noise_floor_lux must be >= 0")
    if margin_frac < 0:
        raise ValueError("margin_frac must be >= 0")
    required = noise_floor_lux * (1.0 + margin_frac)
    viable = [e for e in catalog.entries if e.saturation_lux > required]
    if not viable:
        raise NoViableReceiver(
            f"no receiver tolerates a {noise_floor_lux:g} lux noise floor"
        )
    return max(viable, key=lambda e: e.relative_sensitivity).kind


# ---------------------------------------------------------------------------
# Feasibility sweeps driven by the channel simulator


@dataclass(frozen=True)
class SweepPoint:
    height_m: float
    min_width_m: Optional[float]
    throughput_sps: Optional[float]  # symbols/s; bits/s is half (Manchester)


@dataclass(frozen=True)
class SweepConfig:
    """Clean-channel sweep scenario; defaults mirror the indoor baseline
    (8 cm/s, narrow-FoV receiver, faint noise)."""

    bits: str = "00"
    speed_mps: float = 0.08
    illuminance_lux: float = 800.0
    fov_half_angle_rad: float = 0.06
    sampling_rate_hz: float = 400.0
    gaussian_sigma_lux: float = 0.5
    seed: int = 7
    reflectance_high: float = 0.9
    reflectance_low: float = 0.1


def _decodable(height_m: float, width_m: float, cfg: SweepConfig) -> bool:
    packet = codec.build_packet(
        cfg.bits, width_m, cfg.reflectance_high, cfg.reflectance_low
    )
    receiver = channel.ReceiverModel(
        kind=channel.ReceiverKind.CUSTOM,
        sensitivity=1.0,
        saturation_lux=1e9,
        fov_half_angle_rad=cfg.fov_half_angle_rad,
        height_m=height_m,
        sampling_rate_hz=cfg.sampling_rate_hz,
    )
    fp = channel.footprint_width(receiver)
    start = -(fp / 2.0 + 2.0 * width_m)
    travel = abs(start) + packet.length_m + fp / 2.0 + 2.0 * width_m
    duration = travel / cfg.speed_mps
    scene = channel.Scene(
        objects=(
            channel.SceneObject(
                pattern=packet,
                start_offset_m=start,
                speed=channel.SpeedProfile.constant(cfg.speed_mps),
            ),
        )
    )
    trace = channel.simulate(
        scene,
        channel.EmitterModel(cfg.illuminance_lux),
        receiver,
        channel.NoiseModel(gaussian_sigma_lux=cfg.gaussian_sigma_lux, seed=cfg.seed),
        duration,
    )
    result = codec.decode_trace(
        trace, codec.DecoderConfig(expected_bits=len(cfg.bits))
    )
    return result.status is codec.DecodeStatus.OK and result.bits == cfg.bits


def run_sweep(
    heights_m: Sequence[float],
    widths_m: Sequence[float],
    cfg: SweepConfig = SweepConfig(),
) -> List[SweepPoint]:
    """For each height, the narrowest decodable symbol width from the given
    candidates (ascending scan) and the resulting symbol rate."""
    widths = sorted(widths_m)
    points: List[SweepPoint] = []
    for h in heights_m:
        min_w = None
        for w in widths:
            if _decodable(h, w, cfg):
                min_w = w
                break
        thr = channel.transit_symbol_rate(cfg.speed_mps, min_w) if min_w else None
        points.append(SweepPoint(height_m=h, min_width_m=min_w, throughput_sps=thr))
    return points


def fit_sweep(points: Sequence[SweepPoint], fitted_from: str = "sweep") -> TrendModel:
    """Fit the trend model from the feasible sweep points."""
    feasible = [
        (p.height_m, p.min_width_m, p.throughput_sps)
        for p in points
        if p.min_width_m is not None
    ]
    return fit_trends(feasible, fitted_from=fitted_from)
