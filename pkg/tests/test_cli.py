import json

import numpy as np
import pytest

from pvlc import RssTrace, save_scenario, write_trace_csv
from pvlc.cli import main

from conftest import collision_trace, simulate_packet
from test_scenario import make_scenario


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestEncode:
    def test_emits_packet_json(self, capsys):
        code, out, _ = run_cli(capsys, "encode", "--bits", "10", "--width-m", "0.03")
        assert code == 0
        doc = json.loads(out)
        assert doc["symbols"] == "HLHLLHHL"
        assert doc["length_m"] == pytest.approx(8 * 0.03)

    def test_empty_bits_is_preamble_only(self, capsys):
        code, out, _ = run_cli(capsys, "encode", "--bits", "", "--width-m", "0.05")
        assert code == 0
        assert json.loads(out)["symbols"] == "HLHL"

    def test_bad_bits_named_in_error(self, capsys):
        code, out, err = run_cli(capsys, "encode", "--bits", "2", "--width-m", "0.03")
        assert code == 2
        assert out == ""
        assert "--bits" in err


class TestSimulateAndDecode:
    def test_pipeline(self, capsys, tmp_path):
        sc_path = tmp_path / "scene.json"
        trace_path = tmp_path / "trace.csv"
        save_scenario(make_scenario(), sc_path)
        code, out, err = run_cli(
            capsys, "simulate", "--scenario", str(sc_path), "--out", str(trace_path)
        )
        assert code == 0
        assert trace_path.exists()
        assert "wrote" in err

        code, out, _ = run_cli(capsys, "decode", str(trace_path))
        assert code == 0
        doc = json.loads(out)
        assert doc["status"] == "Ok"
        assert doc["bits"] == "01"
        assert doc["symbols"].startswith("HLHL")
        assert set(doc["anchors"]) == {"A", "B", "C"}
        assert doc["tau_t_s"] == pytest.approx(0.03 / 0.08, rel=0.05)

    def test_missing_scenario_file(self, capsys, tmp_path):
        out_path = tmp_path / "never.csv"
        code, out, err = run_cli(
            capsys, "simulate", "--scenario", str(tmp_path / "nope.json"),
            "--out", str(out_path),
        )
        assert code == 2
        assert not out_path.exists()
        assert "not found" in err

    def test_simulate_is_deterministic(self, capsys, tmp_path):
        sc_path = tmp_path / "scene.json"
        save_scenario(make_scenario(), sc_path)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli(capsys, "simulate", "--scenario", str(sc_path), "--out", str(a))
        run_cli(capsys, "simulate", "--scenario", str(sc_path), "--out", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_decode_failure_exit_code(self, capsys, tmp_path):
        path = tmp_path / "flat.csv"
        write_trace_csv(RssTrace(500.0, np.zeros(600)), path)
        code, out, _ = run_cli(capsys, "decode", str(path))
        assert code == 3
        doc = json.loads(out)
        assert doc["status"] == "PreambleNotFound"
        assert doc["bits"] == ""

    def test_saturated_trace_exit_code(self, capsys, tmp_path):
        trace = simulate_packet("00")
        ceiling = float(trace.samples.max()) * 0.9
        clipped = RssTrace(
            trace.sampling_rate_hz,
            np.minimum(trace.samples, ceiling),
            {"saturation_ceiling": ceiling},
        )
        path = tmp_path / "clipped.csv"
        write_trace_csv(clipped, path)
        code, out, _ = run_cli(capsys, "decode", str(path))
        assert code == 4
        assert json.loads(out)["status"] == "Saturated"

    def test_expected_bits_flag(self, capsys, tmp_path):
        path = tmp_path / "trace.csv"
        write_trace_csv(simulate_packet("0110"), path)
        code, out, _ = run_cli(capsys, "decode", str(path), "--expected-bits", "4")
        assert code == 0
        assert json.loads(out)["bits"] == "0110"


@pytest.fixture
def template_dir(tmp_path):
    tdir = tmp_path / "templates"
    tdir.mkdir()
    entries = []
    for label in ("00", "10"):
        fname = f"tmpl_{label}.csv"
        write_trace_csv(simulate_packet(label), tdir / fname)
        entries.append({"label": label, "file": fname})
    (tdir / "manifest.json").write_text(json.dumps({"templates": entries}))
    return tdir


class TestClassify:
    def test_classifies_query(self, capsys, tmp_path, template_dir, warm_dtw):
        query = tmp_path / "query.csv"
        write_trace_csv(simulate_packet("10", snr_db=20, seed=5), query)
        code, out, _ = run_cli(
            capsys, "classify", str(query), "--templates", str(template_dir)
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["best_label"] == "10"
        assert doc["distances"]["10"] < doc["distances"]["00"]
        assert doc["margin"] > 1.0

    def test_self_distance_is_zero(self, capsys, tmp_path, template_dir, warm_dtw):
        query = tmp_path / "query.csv"
        write_trace_csv(simulate_packet("00"), query)
        code, out, _ = run_cli(
            capsys, "classify", str(query), "--templates", str(template_dir)
        )
        assert code == 0
        assert json.loads(out)["distances"]["00"] == pytest.approx(0.0, abs=1e-9)

    def test_missing_manifest(self, capsys, tmp_path):
        query = tmp_path / "query.csv"
        write_trace_csv(simulate_packet("00"), query)
        empty = tmp_path / "empty"
        empty.mkdir()
        code, _, err = run_cli(
            capsys, "classify", str(query), "--templates", str(empty)
        )
        assert code == 2
        assert "manifest.json" in err

    def test_empty_template_list(self, capsys, tmp_path):
        query = tmp_path / "query.csv"
        write_trace_csv(simulate_packet("00"), query)
        tdir = tmp_path / "templates"
        tdir.mkdir()
        (tdir / "manifest.json").write_text(json.dumps({"templates": []}))
        code, _, err = run_cli(
            capsys, "classify", str(query), "--templates", str(tdir)
        )
        assert code == 2
        assert "empty" in err


class TestSpectrum:
    def test_two_object_collision(self, capsys, tmp_path):
        path = tmp_path / "collision.csv"
        write_trace_csv(collision_trace(share_low=0.5, share_high=0.5), path)
        code, out, _ = run_cli(capsys, "spectrum", str(path))
        assert code == 0
        doc = json.loads(out)
        assert doc["verdict"] == "TwoObjects"
        assert len(doc["peaks"]) >= 2

    def test_single_packet_dominant_with_csv_out(self, capsys, tmp_path):
        path = tmp_path / "single.csv"
        write_trace_csv(simulate_packet("000000"), path)
        spec_csv = tmp_path / "spec.csv"
        code, out, _ = run_cli(
            capsys, "spectrum", str(path), "--csv-out", str(spec_csv)
        )
        assert code == 0
        assert json.loads(out)["verdict"] == "SingleDominant"
        header, first = spec_csv.read_text().splitlines()[:2]
        assert header == "frequency_hz,magnitude"
        assert float(first.split(",")[0]) == 0.0

    def test_bad_fft_length(self, capsys, tmp_path):
        path = tmp_path / "trace.csv"
        write_trace_csv(simulate_packet("00"), path)
        code, _, err = run_cli(capsys, "spectrum", str(path), "--fft", "100")
        assert code == 2
        assert "power of two" in err


SWEEP_CSV = """height_m,min_width_m,throughput_sps
0.2,0.025,3.2
0.3,0.0417,1.92
0.4,0.0583,1.37
0.9,,
"""


class TestSweep:
    def test_refit_from_csv(self, capsys, tmp_path):
        src = tmp_path / "sweep.csv"
        src.write_text(SWEEP_CSV)
        model_path = tmp_path / "model.json"
        code, out, _ = run_cli(
            capsys, "sweep", "--from-csv", str(src), "--model-out", str(model_path)
        )
        assert code == 0
        model = json.loads(model_path.read_text())
        assert model["width_slope_a"] > 0
        assert model["thr_decay_d"] > 0

    def test_refit_is_idempotent(self, capsys, tmp_path):
        src = tmp_path / "sweep.csv"
        src.write_text(SWEEP_CSV)
        m1, m2 = tmp_path / "m1.json", tmp_path / "m2.json"
        run_cli(capsys, "sweep", "--from-csv", str(src), "--model-out", str(m1))
        run_cli(capsys, "sweep", "--from-csv", str(src), "--model-out", str(m2))
        assert m1.read_bytes() == m2.read_bytes()

    def test_too_few_points_skips_fit(self, capsys, tmp_path):
        src = tmp_path / "sweep.csv"
        src.write_text("height_m,min_width_m,throughput_sps\n0.2,0.025,3.2\n")
        code, out, err = run_cli(capsys, "sweep", "--from-csv", str(src))
        assert code == 0
        assert "skipped" in err

    def test_simulated_sweep_writes_points(self, capsys, tmp_path):
        out_csv = tmp_path / "sweep.csv"
        code, _, _ = run_cli(
            capsys, "sweep", "--heights", "0.2,0.3",
            "--widths", "0.01,0.02,0.03,0.04", "--out", str(out_csv),
        )
        assert code == 0
        rows = out_csv.read_text().splitlines()
        assert rows[0] == "height_m,min_width_m,throughput_sps"
        assert len(rows) == 3

    def test_requires_heights_and_widths(self, capsys):
        code, _, err = run_cli(capsys, "sweep", "--heights", "0.2,0.3")
        assert code == 2
        assert "--heights and --widths" in err


class TestSelectReceiver:
    def test_selects_receiver(self, capsys):
        code, out, _ = run_cli(capsys, "select-receiver", "--noise-lux", "3000")
        assert code == 0
        assert out.strip() == "PD_G3"

    def test_no_viable_receiver(self, capsys):
        code, out, err = run_cli(capsys, "select-receiver", "--noise-lux", "40000")
        assert code == 1
        assert out == ""
        assert "no viable receiver" in err
