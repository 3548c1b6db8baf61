import math

import numpy as np
import pytest

from pvlc import (
    EmitterModel,
    NoiseModel,
    ReceiverKind,
    ReceiverModel,
    Scene,
    SceneObject,
    SpeedProfile,
    build_packet,
    simulate,
)


def receiver_for_footprint(
    footprint_m, height_m=0.2, sampling_rate_hz=500.0, saturation_lux=1e9
):
    """Custom unit-sensitivity receiver whose ground footprint is exactly
    ``footprint_m`` wide."""
    angle = math.atan(footprint_m / (2.0 * height_m))
    return ReceiverModel(
        kind=ReceiverKind.CUSTOM,
        sensitivity=1.0,
        saturation_lux=saturation_lux,
        fov_half_angle_rad=angle,
        height_m=height_m,
        sampling_rate_hz=sampling_rate_hz,
    )


def simulate_packet(
    bits="00",
    symbol_width_m=0.03,
    speed_mps=0.08,
    height_m=0.2,
    footprint_frac=0.5,
    snr_db=None,
    seed=0,
    sampling_rate_hz=500.0,
    illuminance_lux=800.0,
    ambient_floor_lux=0.0,
    ripple_amplitude_lux=0.0,
    speed_profile=None,
    receiver=None,
    lead_in_m=None,
    tail_m=None,
):
    """Single-packet transit trace.  footprint_frac sizes the FoV footprint
    relative to the symbol width.  snr_db sets the Gaussian sigma relative
    to the clean trace's half peak-to-valley amplitude; None = noise-free."""
    packet = build_packet(bits, symbol_width_m)
    if receiver is None:
        receiver = receiver_for_footprint(
            footprint_frac * symbol_width_m, height_m, sampling_rate_hz
        )
    from pvlc import footprint_width

    fp = footprint_width(receiver)
    if lead_in_m is None:
        lead_in_m = fp / 2.0 + 3.0 * symbol_width_m
    if tail_m is None:
        tail_m = fp / 2.0 + 3.0 * symbol_width_m
    start = -lead_in_m
    if speed_profile is None:
        speed_profile = SpeedProfile.constant(speed_mps)
    travel = lead_in_m + packet.length_m + tail_m
    # duration long enough for the slowest constant-speed case
    t, dist = 0.0, 0.0
    for dur, v in speed_profile.segments:
        if dist + dur * v >= travel:
            t += (travel - dist) / v
            dist = travel
            break
        t += dur
        dist += dur * v
    if dist < travel:
        t += (travel - dist) / speed_profile.segments[-1][1]
    duration = max(t, 16.0 / receiver.sampling_rate_hz)

    scene = Scene(
        objects=(
            SceneObject(pattern=packet, start_offset_m=start, speed=speed_profile),
        )
    )
    emitter = EmitterModel(illuminance_lux)

    def run(sigma):
        return simulate(
            scene,
            emitter,
            receiver,
            NoiseModel(
                ambient_floor_lux=ambient_floor_lux,
                ripple_amplitude_lux=ripple_amplitude_lux,
                gaussian_sigma_lux=sigma,
                seed=seed,
            ),
            duration,
        )

    if snr_db is None:
        return run(0.0)
    clean = run(0.0)
    amplitude = (clean.samples.max() - clean.samples.min()) / 2.0
    sigma = amplitude / (10.0 ** (snr_db / 20.0)) / receiver.sensitivity
    return run(sigma)


def speed_change_profile(bits, symbol_width_m, speed_mps, lead_in_m, factor=2.0):
    """Speed profile that multiplies the speed by ``factor`` once the
    four-symbol preamble has passed the receiver."""
    preamble_travel = lead_in_m + 4.0 * symbol_width_m
    return SpeedProfile(
        segments=(
            (preamble_travel / speed_mps, speed_mps),
            (1e6, factor * speed_mps),
        )
    )


def collision_trace(
    share_low=0.5,
    share_high=0.5,
    speed_mps=0.08,
    width_low_m=0.04,
    width_high_m=0.02,
    bits_low="0" * 8,
    bits_high="0" * 18,
    snr_db=None,
    seed=0,
    sampling_rate_hz=500.0,
):
    """Two alternating-stripe packets (wide = low frequency, narrow = high
    frequency) transiting together; the fov shares set which one dominates."""
    pkt_low = build_packet(bits_low, width_low_m)
    pkt_high = build_packet(bits_high, width_high_m)
    receiver = receiver_for_footprint(
        0.5 * width_high_m, sampling_rate_hz=sampling_rate_hz
    )
    from pvlc import footprint_width

    fp = footprint_width(receiver)
    lead_in = fp / 2.0 + 2.0 * width_low_m
    length = max(pkt_low.length_m, pkt_high.length_m)
    speed = SpeedProfile.constant(speed_mps)
    scene = Scene(
        objects=(
            SceneObject(pkt_low, -lead_in, speed, fov_share=share_low),
            SceneObject(pkt_high, -lead_in, speed, fov_share=share_high),
        )
    )
    duration = (lead_in + length + fp / 2.0 + 2.0 * width_low_m) / speed_mps

    def run(sigma):
        return simulate(
            scene, EmitterModel(800.0), receiver,
            NoiseModel(gaussian_sigma_lux=sigma, seed=seed), duration,
        )

    if snr_db is None:
        return run(0.0)
    clean = run(0.0)
    amplitude = (clean.samples.max() - clean.samples.min()) / 2.0
    return run(amplitude / (10.0 ** (snr_db / 20.0)))


@pytest.fixture(scope="session")
def warm_dtw():
    # trigger the numba compile once so timed tests stay honest
    from pvlc import dtw_distance

    dtw_distance([0.0, 1.0], [0.0, 1.0])
