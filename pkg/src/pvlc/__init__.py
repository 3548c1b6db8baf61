"""Passive visible-light communication toolkit: channel simulator,
Manchester threshold decoder, DTW classifier, collision spectral analysis,
and deployment planner."""

from .codec import (
    DecodeResult,
    DecodeStatus,
    DecoderConfig,
    ManchesterViolation,
    PreambleFix,
    PreambleNotFound,
    ReflectivePacket,
    SaturatedTrace,
    Symbol,
    build_packet,
    decode_trace,
    find_preamble,
    find_vehicle_preamble,
    manchester_decode,
    manchester_encode,
)
from .channel import (
    EmitterKind,
    EmitterModel,
    NoiseModel,
    ReceiverKind,
    ReceiverModel,
    RssTrace,
    Scene,
    SceneObject,
    SpeedProfile,
    VehicleProfile,
    default_vehicle_profile,
    footprint_width,
    render_reflectance,
    simulate,
    transit_symbol_rate,
)
from .classify import (
    Codebook,
    DtwClassifier,
    DtwResult,
    Template,
    build_codebook,
    classify_trace,
    dtw_distance,
)
from .spectral import (
    CollisionKind,
    CollisionVerdict,
    PeakSet,
    Spectrum,
    WindowKind,
    collision_verdict,
    compute_spectrum,
    detect_peaks,
)
from .planner import (
    NoViableReceiver,
    ReceiverCatalog,
    SweepConfig,
    TrendModel,
    fit_sweep,
    fit_trends,
    max_height_for_width,
    run_sweep,
    select_receiver,
)
from .scenario import (
    Scenario,
    ScenarioError,
    load_scenario,
    parse_scenario,
    read_trace_csv,
    run_scenario,
    save_scenario,
    serialize_scenario,
    write_trace_csv,
)

__version__ = "0.1.0"
