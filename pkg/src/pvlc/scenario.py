"""Scenario and trace file formats.

Scenarios are strict JSON documents (unknown fields rejected with the
offending path named); traces are CSV with a ``time_s,rss`` header and
``#``-prefixed metadata comments carrying the sampling rate, the saturation
ceiling, and a digest of the generating scenario.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import channel, codec


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    emitter: channel.EmitterModel
    receiver: channel.ReceiverModel
    noise: channel.NoiseModel
    scene: channel.Scene
    duration_s: float
    seed: Optional[int] = None

    def effective_noise(self) -> channel.NoiseModel:
        """Top-level seed overrides the noise model's seed when present."""
        if self.seed is None:
            return self.noise
        return channel.NoiseModel(
            ambient_floor_lux=self.noise.ambient_floor_lux,
            ripple_amplitude_lux=self.noise.ripple_amplitude_lux,
            ripple_hz=self.noise.ripple_hz,
            gaussian_sigma_lux=self.noise.gaussian_sigma_lux,
            seed=self.seed,
        )


def run_scenario(sc: Scenario) -> channel.RssTrace:
    trace = channel.simulate(
        sc.scene, sc.emitter, sc.receiver, sc.effective_noise(), sc.duration_s
    )
    trace.meta["scenario_digest"] = scenario_digest(sc)
    return trace


# --- serialization ---------------------------------------------------------


def _check_keys(d: dict, allowed: set, required: set, path: str) -> None:
    if not isinstance(d, dict):
        raise ScenarioError(f"{path}: expected an object")
    for k in d:
        if k not in allowed:
            raise ScenarioError(f"unknown field at {path}.{k}")
    for k in required:
        if k not in d:
            raise ScenarioError(f"missing field {path}.{k}")


def _packet_to_dict(p: codec.ReflectivePacket) -> dict:
    return {
        "type": "packet",
        "bits": p.bits,
        "symbol_width_m": p.symbol_width_m,
        "reflectance_high": p.reflectance_high,
        "reflectance_low": p.reflectance_low,
    }


def _packet_from_dict(d: dict, path: str) -> codec.ReflectivePacket:
    _check_keys(
        d,
        {"type", "bits", "symbol_width_m", "reflectance_high", "reflectance_low"},
        {"type", "bits", "symbol_width_m"},
        path,
    )
    try:
        return codec.build_packet(
            d["bits"],
            d["symbol_width_m"],
            d.get("reflectance_high", 0.9),
            d.get("reflectance_low", 0.1),
        )
    except ValueError as e:
        raise ScenarioError(f"{path}: {e}") from e


def _vehicle_to_dict(v: channel.VehicleProfile) -> dict:
    out = {
        "type": "vehicle",
        "segments": [[l, r] for l, r in v.segments],
    }
    if v.embedded_packet is not None:
        out["embedded_packet"] = _packet_to_dict(v.embedded_packet)
        out["packet_offset_m"] = v.packet_offset_m
        out["roof_segment"] = v.roof_segment
    return out


def _vehicle_from_dict(d: dict, path: str) -> channel.VehicleProfile:
    _check_keys(
        d,
        {"type", "segments", "embedded_packet", "packet_offset_m", "roof_segment"},
        {"type", "segments"},
        path,
    )
    packet = None
    if "embedded_packet" in d:
        packet = _packet_from_dict(d["embedded_packet"], f"{path}.embedded_packet")
    try:
        return channel.VehicleProfile(
            segments=tuple((l, r) for l, r in d["segments"]),
            embedded_packet=packet,
            packet_offset_m=d.get("packet_offset_m", 0.0),
            roof_segment=d.get("roof_segment", 2),
        )
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"{path}: {e}") from e


def _pattern_from_dict(d: dict, path: str):
    if not isinstance(d, dict) or "type" not in d:
        raise ScenarioError(f"{path}: pattern needs a 'type' field")
    if d["type"] == "packet":
        return _packet_from_dict(d, path)
    if d["type"] == "vehicle":
        return _vehicle_from_dict(d, path)
    raise ScenarioError(f"{path}.type: unknown pattern type {d['type']!r}")


def scenario_to_dict(sc: Scenario) -> dict:
    receiver = {
        "kind": sc.receiver.kind.value,
        "sensitivity": sc.receiver.sensitivity,
        "saturation_lux": sc.receiver.saturation_lux,
        "fov_half_angle_rad": sc.receiver.fov_half_angle_rad,
        "height_m": sc.receiver.height_m,
        "sampling_rate_hz": sc.receiver.sampling_rate_hz,
    }
    if sc.receiver.cap_rad is not None:
        receiver["cap_rad"] = sc.receiver.cap_rad
    out = {
        "emitter": {
            "illuminance_lux": sc.emitter.illuminance_lux,
            "kind": sc.emitter.kind.value,
        },
        "receiver": receiver,
        "noise": {
            "ambient_floor_lux": sc.noise.ambient_floor_lux,
            "ripple_amplitude_lux": sc.noise.ripple_amplitude_lux,
            "ripple_hz": sc.noise.ripple_hz,
            "gaussian_sigma_lux": sc.noise.gaussian_sigma_lux,
            "seed": sc.noise.seed,
        },
        "scene": {
            "ground_reflectance": sc.scene.ground_reflectance,
            "objects": [
                {
                    "pattern": (
                        _packet_to_dict(o.pattern)
                        if isinstance(o.pattern, codec.ReflectivePacket)
                        else _vehicle_to_dict(o.pattern)
                    ),
                    "start_offset_m": o.start_offset_m,
                    "speed": {"segments": [[d, v] for d, v in o.speed.segments]},
                    "fov_share": o.fov_share,
                }
                for o in sc.scene.objects
            ],
        },
        "duration_s": sc.duration_s,
    }
    if sc.seed is not None:
        out["seed"] = sc.seed
    return out


def scenario_from_dict(d: dict) -> Scenario:
    _check_keys(
        d,
        {"emitter", "receiver", "noise", "scene", "duration_s", "seed"},
        {"emitter", "receiver", "scene", "duration_s"},
        "$",
    )
    em = d["emitter"]
    _check_keys(em, {"illuminance_lux", "kind"}, {"illuminance_lux"}, "$.emitter")
    try:
        emitter = channel.EmitterModel(
            illuminance_lux=em["illuminance_lux"],
            kind=channel.EmitterKind(em.get("kind", "LedLamp")),
        )
    except ValueError as e:
        raise ScenarioError(f"$.emitter: {e}") from e

    rx = d["receiver"]
    _check_keys(
        rx,
        {"kind", "sensitivity", "saturation_lux", "fov_half_angle_rad",
         "height_m", "sampling_rate_hz", "cap_rad"},
        {"kind", "height_m", "sampling_rate_hz"},
        "$.receiver",
    )
    try:
        kind = channel.ReceiverKind(rx["kind"])
        if kind in channel.RECEIVER_PRESETS:
            sat, sens = channel.RECEIVER_PRESETS[kind]
            sat = rx.get("saturation_lux", sat)
            sens = rx.get("sensitivity", sens)
        else:
            sat = rx["saturation_lux"]
            sens = rx["sensitivity"]
        fov_default = (
            channel.DEFAULT_RX_LED_FOV_RAD
            if kind is channel.ReceiverKind.RX_LED
            else channel.DEFAULT_PD_FOV_RAD
        )
        receiver = channel.ReceiverModel(
            kind=kind,
            sensitivity=sens,
            saturation_lux=sat,
            fov_half_angle_rad=rx.get("fov_half_angle_rad", fov_default),
            height_m=rx["height_m"],
            sampling_rate_hz=rx["sampling_rate_hz"],
            cap_rad=rx.get("cap_rad"),
        )
    except (KeyError, ValueError) as e:
        raise ScenarioError(f"$.receiver: {e}") from e

    nz = d.get("noise", {})
    _check_keys(
        nz,
        {"ambient_floor_lux", "ripple_amplitude_lux", "ripple_hz",
         "gaussian_sigma_lux", "seed"},
        set(),
        "$.noise",
    )
    try:
        noise = channel.NoiseModel(
            ambient_floor_lux=nz.get("ambient_floor_lux", 0.0),
            ripple_amplitude_lux=nz.get("ripple_amplitude_lux", 0.0),
            ripple_hz=nz.get("ripple_hz", 100.0),
            gaussian_sigma_lux=nz.get("gaussian_sigma_lux", 0.0),
            seed=nz.get("seed", 0),
        )
    except ValueError as e:
        raise ScenarioError(f"$.noise: {e}") from e

    sd = d["scene"]
    _check_keys(sd, {"ground_reflectance", "objects"}, {"objects"}, "$.scene")
    objects = []
    for i, od in enumerate(sd["objects"]):
        opath = f"$.scene.objects[{i}]"
        _check_keys(
            od,
            {"pattern", "start_offset_m", "speed", "fov_share"},
            {"pattern", "start_offset_m", "speed"},
            opath,
        )
        spd = od["speed"]
        _check_keys(spd, {"segments"}, {"segments"}, f"{opath}.speed")
        try:
            speed = channel.SpeedProfile(
                segments=tuple((a, b) for a, b in spd["segments"])
            )
            objects.append(
                channel.SceneObject(
                    pattern=_pattern_from_dict(od["pattern"], f"{opath}.pattern"),
                    start_offset_m=od["start_offset_m"],
                    speed=speed,
                    fov_share=od.get("fov_share", 1.0),
                )
            )
        except (TypeError, ValueError) as e:
            if isinstance(e, ScenarioError):
                raise
            raise ScenarioError(f"{opath}: {e}") from e
    try:
        scene = channel.Scene(
            objects=tuple(objects),
            ground_reflectance=sd.get("ground_reflectance", channel.DEFAULT_GROUND_REFLECTANCE),
        )
        return Scenario(
            emitter=emitter,
            receiver=receiver,
            noise=noise,
            scene=scene,
            duration_s=float(d["duration_s"]),
            seed=d.get("seed"),
        )
    except ValueError as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(f"$: {e}") from e


def serialize_scenario(sc: Scenario) -> str:
    return json.dumps(scenario_to_dict(sc), indent=2, sort_keys=True)


def parse_scenario(text: str) -> Scenario:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"invalid JSON: {e}") from e
    return scenario_from_dict(d)


def load_scenario(path: Union[str, Path]) -> Scenario:
    return parse_scenario(Path(path).read_text())


def save_scenario(sc: Scenario, path: Union[str, Path]) -> None:
    Path(path).write_text(serialize_scenario(sc) + "\n")


def scenario_digest(sc: Scenario) -> str:
    canonical = json.dumps(scenario_to_dict(sc), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


# --- trace CSV -------------------------------------------------------------


def write_trace_csv(trace: channel.RssTrace, path: Union[str, Path]) -> None:
    lines = [f"# sampling_rate_hz: {trace.sampling_rate_hz!r}"]
    ceiling = trace.meta.get("saturation_ceiling")
    if ceiling is not None:
        lines.append(f"# saturation_ceiling: {ceiling!r}")
    digest = trace.meta.get("scenario_digest")
    if digest is not None:
        lines.append(f"# scenario_digest: {digest}")
    lines.append("time_s,rss")
    times = trace.times()
    for t, v in zip(times, trace.samples):
        lines.append(f"{float(t)!r},{float(v)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace_csv(path: Union[str, Path]) -> channel.RssTrace:
    meta: dict = {}
    times = []
    values = []
    header_seen = False
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body:
                key, _, val = body.partition(":")
                key = key.strip()
                val = val.strip()
                if key in ("sampling_rate_hz", "saturation_ceiling"):
                    meta[key] = float(val)
                else:
                    meta[key] = val
            continue
        if not header_seen:
            if line != "time_s,rss":
                raise ValueError(f"{path}:{lineno}: expected header 'time_s,rss'")
            header_seen = True
            continue
        t_s, _, v_s = line.partition(",")
        times.append(float(t_s))
        values.append(float(v_s))
    if not header_seen or not times:
        raise ValueError(f"{path}: no trace samples found")
    times_arr = np.array(times)
    steps = np.diff(times_arr)
    if len(steps):
        step = steps.mean()
        if step <= 0 or np.any(np.abs(steps - step) > 1e-9 * max(1.0, abs(step))):
            raise ValueError(f"{path}: time_s must increase with a uniform step")
        fs = 1.0 / step
    else:
        fs = meta.get("sampling_rate_hz", 1.0)
    fs = meta.get("sampling_rate_hz", fs)
    return channel.RssTrace(fs, np.array(values), meta)
