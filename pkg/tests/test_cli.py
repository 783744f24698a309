import json

import numpy as np
import pytest

from acslm.audio import SampleBuffer, amplitude_for_spl, write_wav
from acslm.cli import main
from acslm.compensation import CompensationFilter
from acslm.meter import SplSeries
from acslm.micmodel import default_mic_response

from conftest import RATE, tone


def test_bad_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["conformance", "run", "--bogus"])
    assert exc.value.code == 2


def test_missing_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_conformance_quick_ideal(tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main(
        ["conformance", "run", "--profile", "ideal", "--out", str(out), "--quick"]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["overall_pass"] is True
    assert doc["seed"] == 1
    table = capsys.readouterr().out
    assert "overall: PASS" in table


def test_conformance_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["conformance", "run", "--profile", "ideal", "--quick", "--out", str(a)]) == 0
    assert main(["conformance", "run", "--profile", "ideal", "--quick", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_spl_compute_on_calibration_tone(tmp_path, capsys):
    wav = tmp_path / "cal.wav"
    write_wav(wav, SampleBuffer(tone(1000.0, 3.0, amplitude=amplitude_for_spl(94.0)), RATE))
    out = tmp_path / "series.csv"
    code = main(
        ["spl", "compute", "--in", str(wav), "--cal", "94", "--weighting", "A",
         "--detector", "fast", "--out", str(out)]
    )
    assert code == 0
    series = SplSeries.from_csv(out)
    plateau = float(np.mean(series.levels_dba[len(series) // 2 :]))
    assert plateau == pytest.approx(94.0, abs=0.05)


def test_comp_design_writes_filter(tmp_path, capsys):
    curve_csv = tmp_path / "mic.csv"
    default_mic_response().to_csv(curve_csv)
    out = tmp_path / "inverse.cfir"
    code = main(
        ["comp", "design", "--responses", str(curve_csv), str(curve_csv),
         "--taps", "8191", "--out", str(out)]
    )
    assert code == 0
    filt = CompensationFilter.load(out)
    assert len(filt.taps) == 8191
    assert "averaged 2 responses" in capsys.readouterr().out


def test_sweep_measure_recovers_curve(tmp_path):
    curve_csv = tmp_path / "mic.csv"
    curve = default_mic_response()
    curve.to_csv(curve_csv)
    out = tmp_path / "measured.csv"
    code = main(
        ["sweep", "measure", "--through", str(curve_csv), "--out", str(out),
         "--duration", "5"]
    )
    assert code == 0
    from acslm.response import MagnitudeResponse

    measured = MagnitudeResponse.from_csv(out)
    chk = np.geomspace(100.0, 10000.0, 50)
    err = measured.level_at(chk) - curve.normalized().level_at(chk)
    assert np.max(np.abs(err)) <= 0.5


def test_compare_series(tmp_path, capsys):
    base = np.sin(np.arange(300) / 9.0) * 5 + 60
    times = 0.125 * (np.arange(300) + 1)
    from acslm.meter import FAST

    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    SplSeries(times, base, FAST).to_csv(a)
    SplSeries(times, base + 0.5, FAST).to_csv(b)
    assert main(["compare", "--a", str(a), "--b", str(b)]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["r_squared"] == pytest.approx(1.0, abs=1e-9)
    assert stats["mean_diff"] == pytest.approx(-0.5, abs=1e-9)


def test_node_server_over_tcp(tmp_path, capsys):
    from acslm.nodenet.envelope import generate_keypair
    from acslm.nodenet.server import IngestServer
    from acslm.nodenet.transport import TcpFrameServer

    private_pem, public_pem = generate_keypair()
    store = tmp_path / "store"
    store.mkdir()
    key_path = tmp_path / "server.pub"
    key_path.write_bytes(public_pem)
    server = IngestServer(store, private_pem)
    tcp = TcpFrameServer(("127.0.0.1", 0), server)
    tcp.serve_background()
    try:
        port = tcp.server_address[1]
        code = main(
            ["node", "run", "--minutes", "2", "--server", f"127.0.0.1:{port}",
             "--server-key", str(key_path), "--storage", str(tmp_path / "node"),
             "--rate", "44100"]
        )
        assert code == 0
        assert len(server.records_for("node-0")) == 2
    finally:
        tcp.shutdown()
    printed = capsys.readouterr().out
    assert "2 segments captured, 0 left in backlog" in printed


def test_seed_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("ACSLM_SEED", "42")
    out = tmp_path / "r.json"
    assert main(["conformance", "run", "--profile", "ideal", "--quick", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["seed"] == 42
