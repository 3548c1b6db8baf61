"""Command-line front end.

Exit codes: 0 success, 2 usage/input error, 3 decode failure, 4 saturation.
Results go to standard output as JSON/CSV; diagnostics to standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import channel, classify, codec, planner, scenario, spectral

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DECODE = 3
EXIT_SATURATED = 4


def _fail(msg: str, code: int = EXIT_USAGE) -> int:
    print(msg, file=sys.stderr)
    return code


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_encode(args) -> int:
    try:
        packet = codec.build_packet(args.bits, args.width_m, args.r_high, args.r_low)
    except ValueError as e:
        if "bits" in str(e):
            return _fail(f"--bits: {e}")
        return _fail(str(e))
    _print_json(
        {
            "bits": args.bits,
            "symbols": codec.symbols_to_str(packet.symbols),
            "symbol_width_m": packet.symbol_width_m,
            "reflectance_high": packet.reflectance_high,
            "reflectance_low": packet.reflectance_low,
            "length_m": packet.length_m,
        }
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    path = Path(args.scenario)
    if not path.exists():
        return _fail(f"scenario file not found: {path}")
    try:
        sc = scenario.load_scenario(path)
        trace = scenario.run_scenario(sc)
    except (scenario.ScenarioError, ValueError) as e:
        return _fail(f"{path}: {e}")
    scenario.write_trace_csv(trace, args.out)
    print(
        f"wrote {len(trace.samples)} samples "
        f"({trace.duration_s:.3f} s at {trace.sampling_rate_hz:g} Hz) to {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


def _decoder_config(args) -> codec.DecoderConfig:
    return codec.DecoderConfig(
        smoothing_window=args.smoothing_window,
        peak_prominence_frac=args.peak_prominence,
        decision_level_frac=args.decision_level,
        min_preamble_seconds=args.min_preamble_s,
        expected_bits=args.expected_bits,
    )


def cmd_decode(args) -> int:
    try:
        trace = scenario.read_trace_csv(args.trace)
        cfg = _decoder_config(args)
    except (ValueError, OSError) as e:
        return _fail(str(e))
    result = codec.decode_trace(trace, cfg, vehicle=args.vehicle)
    out = {
        "status": result.status.value,
        "bits": result.bits,
        "symbols": codec.symbols_to_str(result.symbols),
        "vehicle_anchor": result.vehicle_anchor,
    }
    if result.preamble is not None:
        fix = result.preamble
        out["tau_r"] = fix.tau_r
        out["tau_t_s"] = fix.tau_t
        out["anchors"] = {
            name: {"index": idx, "time_s": t, "rss": r}
            for name, idx, t, r in (
                ("A", fix.idx_A, fix.t_A, fix.r_A),
                ("B", fix.idx_B, fix.t_B, fix.r_B),
                ("C", fix.idx_C, fix.t_C, fix.r_C),
            )
        }
    if result.detail:
        out["detail"] = result.detail
    _print_json(out)
    if result.status is codec.DecodeStatus.OK:
        return EXIT_OK
    if result.status is codec.DecodeStatus.SATURATED:
        return EXIT_SATURATED
    return EXIT_DECODE


def cmd_classify(args) -> int:
    tdir = Path(args.templates)
    manifest = tdir / "manifest.json"
    if not manifest.exists():
        return _fail(f"no manifest.json in template directory {tdir}")
    try:
        entries = json.loads(manifest.read_text())["templates"]
        if not entries:
            return _fail(f"{manifest}: template list is empty")
        templates = [
            classify.Template.from_trace(
                e["label"], scenario.read_trace_csv(tdir / e["file"]),
                length=args.resample_length,
            )
            for e in entries
        ]
        trace = scenario.read_trace_csv(args.trace)
        result = classify.classify_trace(trace, templates, radius=args.radius)
    except (KeyError, ValueError, OSError) as e:
        return _fail(str(e))
    _print_json(
        {
            "distances": result.distances,
            "best_label": result.best_label,
            "margin": result.margin,
        }
    )
    return EXIT_OK


def cmd_spectrum(args) -> int:
    try:
        trace = scenario.read_trace_csv(args.trace)
        n = args.fft
        if n is None:
            n = 16
            while n < len(trace.samples):
                n *= 2
        spec = spectral.compute_spectrum(trace, n)
    except (ValueError, OSError) as e:
        return _fail(str(e))
    peaks = spectral.detect_peaks(spec, args.min_prominence)
    verdict = spectral.collision_verdict(peaks, args.separation_ratio, args.dominance_ratio)
    if args.csv_out:
        lines = ["frequency_hz,magnitude"]
        for f, m in zip(spec.frequencies(), spec.magnitudes):
            lines.append(f"{float(f)!r},{float(m)!r}")
        Path(args.csv_out).write_text("\n".join(lines) + "\n")
    _print_json(
        {
            "verdict": verdict.kind.value,
            "bin_hz": spec.bin_hz,
            "peaks": [
                {
                    "frequency_hz": p.frequency_hz,
                    "magnitude": p.magnitude,
                    "prominence": p.prominence,
                }
                for p in peaks.peaks
            ],
        }
    )
    return EXIT_OK


def _parse_float_list(text: str, flag: str):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{flag}: expected comma-separated numbers")
    if not values:
        raise argparse.ArgumentTypeError(f"{flag}: empty list")
    return values


def cmd_sweep(args) -> int:
    if args.from_csv:
        try:
            points = _read_sweep_csv(args.from_csv)
        except (ValueError, OSError) as e:
            return _fail(str(e))
    else:
        cfg = planner.SweepConfig()
        if args.scenario:
            try:
                sc = scenario.load_scenario(args.scenario)
            except (scenario.ScenarioError, OSError) as e:
                return _fail(str(e))
            obj = sc.scene.objects[0]
            bits = (
                obj.pattern.bits
                if isinstance(obj.pattern, codec.ReflectivePacket)
                else cfg.bits
            )
            cfg = planner.SweepConfig(
                bits=bits,
                speed_mps=obj.speed.segments[0][1],
                illuminance_lux=sc.emitter.illuminance_lux,
                fov_half_angle_rad=(
                    sc.receiver.cap_rad
                    if sc.receiver.cap_rad is not None
                    else sc.receiver.fov_half_angle_rad
                ),
                sampling_rate_hz=sc.receiver.sampling_rate_hz,
                gaussian_sigma_lux=sc.noise.gaussian_sigma_lux,
                seed=sc.effective_noise().seed,
            )
        points = planner.run_sweep(args.heights, args.widths, cfg)

    lines = ["height_m,min_width_m,throughput_sps"]
    for p in points:
        w = "" if p.min_width_m is None else repr(p.min_width_m)
        t = "" if p.throughput_sps is None else repr(p.throughput_sps)
        lines.append(f"{p.height_m!r},{w},{t}")
    csv_text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)

    feasible = [p for p in points if p.min_width_m is not None]
    if len(feasible) >= 3 and len({p.height_m for p in feasible}) >= 3:
        try:
            model = planner.fit_sweep(points, fitted_from=args.scenario or "sweep")
        except ValueError as e:
            print(f"trend fit skipped: {e}", file=sys.stderr)
            return EXIT_OK
        model_json = json.dumps(
            {
                "width_slope_a": model.width_slope_a,
                "width_intercept_b": model.width_intercept_b,
                "thr_scale_c": model.thr_scale_c,
                "thr_decay_d": model.thr_decay_d,
                "width_residual": model.width_residual,
                "thr_log_residual": model.thr_log_residual,
                "fitted_from": model.fitted_from,
            },
            indent=2,
            sort_keys=True,
        )
        if args.model_out:
            Path(args.model_out).write_text(model_json + "\n")
        else:
            print(model_json)
    else:
        print("trend fit skipped: fewer than 3 feasible heights", file=sys.stderr)
    return EXIT_OK


def _read_sweep_csv(path):
    points = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("height_m"):
            continue
        h, w, t = (line.split(",") + ["", ""])[:3]
        points.append(
            planner.SweepPoint(
                height_m=float(h),
                min_width_m=float(w) if w else None,
                throughput_sps=float(t) if t else None,
            )
        )
    if not points:
        raise ValueError(f"{path}: no sweep rows found")
    return points


def cmd_select_receiver(args) -> int:
    try:
        kind = planner.select_receiver(
            planner.ReceiverCatalog.builtin(), args.noise_lux, args.margin_frac
        )
    except ValueError as e:
        return _fail(str(e))
    except planner.NoViableReceiver:
        return _fail("no viable receiver", code=1)
    print(kind)
    return EXIT_OK


def _add_decode_flags(p):
    p.add_argument("--expected-bits", type=int, default=None,
                   help="payload bit count when known")
    p.add_argument("--vehicle", action="store_true",
                   help="anchor on the vehicle long-duration preamble first")
    p.add_argument("--smoothing-window", type=int, default=5)
    p.add_argument("--peak-prominence", type=float, default=0.25)
    p.add_argument("--decision-level", type=float, default=0.5)
    p.add_argument("--min-preamble-s", type=float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pvlc",
        description="Passive visible-light communication simulator and decoder",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="build a reflective packet from bits")
    p.add_argument("--bits", required=True)
    p.add_argument("--width-m", type=float, required=True)
    p.add_argument("--r-high", type=float, default=0.9)
    p.add_argument("--r-low", type=float, default=0.1)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("simulate", help="render a scenario file into a trace CSV")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("decode", help="threshold-decode a trace CSV")
    p.add_argument("trace")
    _add_decode_flags(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("classify", help="DTW-classify a trace against templates")
    p.add_argument("trace")
    p.add_argument("--templates", required=True,
                   help="directory with manifest.json and template trace CSVs")
    p.add_argument("--resample-length", type=int,
                   default=classify.DEFAULT_RESAMPLE_LENGTH)
    p.add_argument("--radius", type=int, default=None,
                   help="Sakoe-Chiba band radius (default: unconstrained)")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("spectrum", help="FFT collision analysis of a trace")
    p.add_argument("trace")
    p.add_argument("--fft", type=int, default=None)
    p.add_argument("--csv-out", default=None)
    p.add_argument("--min-prominence", type=float,
                   default=spectral.DEFAULT_MIN_PROMINENCE_FRAC)
    p.add_argument("--separation-ratio", type=float,
                   default=spectral.DEFAULT_SEPARATION_RATIO)
    p.add_argument("--dominance-ratio", type=float,
                   default=spectral.DEFAULT_DOMINANCE_RATIO)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("sweep", help="height/width feasibility sweep + trend fit")
    p.add_argument("--heights", type=lambda s: _parse_float_list(s, "--heights"))
    p.add_argument("--widths", type=lambda s: _parse_float_list(s, "--widths"))
    p.add_argument("--scenario", default=None,
                   help="base scenario providing emitter/receiver/noise/speed")
    p.add_argument("--from-csv", default=None,
                   help="refit trends from an existing sweep CSV")
    p.add_argument("--out", default=None)
    p.add_argument("--model-out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("select-receiver", help="pick a receiver for a noise floor")
    p.add_argument("--noise-lux", type=float, required=True)
    p.add_argument("--margin-frac", type=float, default=0.0)
    p.set_defaults(func=cmd_select_receiver)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "sweep" and not args.from_csv:
        if args.heights is None or args.widths is None:
            return _fail("sweep requires --heights and --widths (or --from-csv)")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
