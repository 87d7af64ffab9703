import csv
import io
import math

import numpy as np
import pytest

from packconv.bench import (
    BENCH_COLUMNS,
    GRID_COLUMNS,
    TIMING_COLUMNS,
    BenchConfig,
    csv_text,
    run_bench,
    snr_grid,
    uniform_model,
    write_bench_csv,
    write_grid_csv,
)
from packconv.cli import main, read_config_file, read_floor_file
from packconv.errors import ConfigError
from packconv.packing import PackingMode
from packconv.precision import SnrModel, select_mode
from packconv.sigio import read_raw, write_raw, write_wav

SMALL = dict(L=4096, N=(9,), W=(64,), repetitions=3, seed=3)


def _rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_bench_config_validation():
    with pytest.raises(ConfigError):
        BenchConfig(repetitions=2)
    with pytest.raises(ConfigError):
        BenchConfig(backend="gpu")
    with pytest.raises(ValueError):
        BenchConfig(modes=("asym5",))
    cfg = BenchConfig()
    assert cfg.ranges(PackingMode.ASYM2) == (256, 256)
    assert cfg.ranges(PackingMode.SYMMETRIC) == (16, 16)
    assert cfg.ranges(PackingMode.FULL) == (None, None)


def test_bench_csv_schema_and_full_row():
    cfg = BenchConfig(**SMALL)
    text = csv_text(write_bench_csv, run_bench(cfg), cfg)
    assert text.startswith("# L=4096")
    rows = _rows(text)
    assert list(rows[0]) == BENCH_COLUMNS
    full = next(r for r in rows if r["mode"] == "full")
    assert full["gain_pct"] == "0.00" and full["snr_db"] == "inf"
    assert {r["mode"] for r in rows} == {"full", "sym", "asym2", "asym3"}
    sym = next(r for r in rows if r["mode"] == "sym")
    assert float(sym["flops"]) == 9 * 9 + 9


def test_bench_deterministic_apart_from_timing():
    cfg = BenchConfig(**SMALL)
    a = _rows(csv_text(write_bench_csv, run_bench(cfg), cfg))
    b = _rows(csv_text(write_bench_csv, run_bench(cfg), cfg))
    for ra, rb in zip(a, b):
        for col in BENCH_COLUMNS:
            if col not in TIMING_COLUMNS:
                assert ra[col] == rb[col]


def test_snr_grid_uniform_predictions():
    rows = snr_grid(uniform_model(128.0, 800), [8, 16, 32, 64, 128, 256], "sym")
    pred = {r.s_q: r.predicted_db for r in rows}
    assert round(pred[16], 1) == 27.1 and round(pred[256], 1) == 51.2
    assert all(r.measured_db is None for r in rows)


def test_snr_grid_empty_has_header():
    assert csv_text(write_grid_csv, snr_grid(uniform_model(1.0, 3), [])) == \
        ",".join(GRID_COLUMNS) + "\n"


def test_snr_grid_measures_and_calibrates():
    rng = np.random.default_rng(0)
    s, k = rng.uniform(-1, 1, 8192), rng.uniform(-1, 1, 15)
    m = SnrModel.from_stats(*(__import__("packconv").estimate_stats(x) for x in (s, k)), 15)
    rows = snr_grid(m, [(8, 8), (16, 16)], "asym2", signal=s, kernel=k, calibrate_at=(8, 8))
    assert rows[0].predicted_db == pytest.approx(rows[0].measured_db, abs=1e-9)
    assert abs(rows[1].predicted_db - rows[1].measured_db) < 1.5
    with pytest.raises(ValueError):
        snr_grid(m, [8], calibrate_at=(8, 8))


def test_config_and_floor_files(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nsq = 8\nbound-policy=warn\n")
    assert read_config_file(cfg) == {"sq": "8", "bound_policy": "warn"}
    cfg.write_text("nonsense\n")
    with pytest.raises(ConfigError):
        read_config_file(cfg)
    floors = tmp_path / "floors.txt"
    floors.write_text("20\n30 # dB\ninf\n")
    assert read_floor_file(floors) == [20.0, 30.0, math.inf]


@pytest.fixture
def files(tmp_path):
    rng = np.random.default_rng(1)
    s, k = rng.uniform(-1, 1, 3000), rng.uniform(-1, 1, 21)
    write_raw(tmp_path / "s.f64", s)
    write_raw(tmp_path / "k.f64", k)
    return tmp_path, s, k


def test_cli_conv_full_exact(files):
    d, s, k = files
    assert main(["conv", "--mode", "full", str(d / "s.f64"), str(d / "k.f64"),
                 str(d / "o.f64")]) == 0
    np.testing.assert_allclose(read_raw(d / "o.f64"), np.convolve(s, k), atol=1e-12)


def test_cli_xcorr_reverses(files):
    d, s, k = files
    assert main(["xcorr", "--mode", "sym", "--sq", "64", "--kq", "64", str(d / "s.f64"),
                 str(d / "k.f64"), str(d / "x.f64")]) == 0
    out = read_raw(d / "x.f64")
    ref = np.correlate(s, k, "full")
    assert len(out) == len(s) + len(k) - 1
    assert 10 * np.log10(np.sum(ref ** 2) / np.sum((ref - out) ** 2)) > 30


def test_cli_exit_codes(files, tmp_path):
    d, _, _ = files
    args = [str(d / "s.f64"), str(d / "k.f64"), str(d / "o.f64")]
    assert main(["conv", "--mode", "sym", "--sq", "200", "--kq", "200"] + args) == 3
    with pytest.warns(RuntimeWarning):
        assert main(["conv", "--mode", "sym", "--sq", "200", "--kq", "200",
                     "--bound-policy", "warn"] + args) == 0
    assert main(["conv", "--backend", "fft", "--mode", "sym", "--sq", "100", "--kq", "100"]
                + args) == 4
    assert main(["conv", "--backend", "fft", "--mode", "full"] + args) == 0
    assert main(["adaptive"] + args) == 2
    assert main(["conv", str(tmp_path / "missing.f64"), str(d / "k.f64"), str(d / "o.f64")]) == 1
    with pytest.raises(SystemExit) as info:
        main(["conv", "--mode", "nope"] + args)
    assert info.value.code == 2


def test_cli_config_file(files):
    d, s, k = files
    cfg = d / "c.cfg"
    cfg.write_text("mode=asym2\nsq=8\nkq=8\n")
    assert main(["conv", "--config", str(cfg), str(d / "s.f64"), str(d / "k.f64"),
                 str(d / "o.f64")]) == 0
    cfg.write_text("colour=blue\n")
    assert main(["conv", "--config", str(cfg), str(d / "s.f64"), str(d / "k.f64"),
                 str(d / "o.f64")]) == 2


def test_cli_adaptive_decisions_match_select_mode(files, capsys):
    d, s, k = files
    floors = d / "floors.txt"
    floors.write_text("10\n40\ninf\n")
    assert main(["adaptive", "--floor-file", str(floors), "--block-w", "1000", str(d / "s.f64"),
                 str(d / "k.f64"), str(d / "o.f64")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3
    import packconv
    kstats = packconv.estimate_stats(k)
    for w, (line, floor) in enumerate(zip(lines, [10, 40, math.inf])):
        start = 0 if w == 0 else w * 1000 - 2
        block = np.zeros(1000 + 21 + 1)
        chunk = s[start: start + len(block)]
        block[: len(chunk)] = chunk
        model = SnrModel.from_stats(packconv.estimate_stats(block), kstats, 21)
        assert f"-> {select_mode(model, floor).mode.value} " in line


def test_cli_wav_delta(tmp_path):
    x = np.round(np.random.default_rng(2).uniform(-0.9, 0.9, 500) * 32768) / 32768
    write_wav(tmp_path / "in.wav", x, 8000)
    write_raw(tmp_path / "delta.f64", [1.0])
    assert main(["conv", "--mode", "full", str(tmp_path / "in.wav"), str(tmp_path / "delta.f64"),
                 str(tmp_path / "out.wav")]) == 0
    from packconv.sigio import read_wav
    y, rate = read_wav(tmp_path / "out.wav")
    assert rate == 8000 and np.array_equal(y, x)


def test_cli_snr_grid_and_validate(tmp_path, capsys):
    out = tmp_path / "g.csv"
    assert main(["snr-grid", "--n", "800", "--grid", "16", "256", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [round(float(r["predicted_db"]), 1) for r in rows] == [27.1, 51.2]
    assert main(["validate-backend", "--n", "5", "--r-max", "45"]) == 0
    assert "direct N=5 r_max=45: pass max_abs_error=0" in capsys.readouterr().out
    assert main(["validate-backend", "--backend", "fft", "--n", "801", "--sq", "8",
                 "--kq", "8"]) == 4


def test_cli_bench_small(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bench", "--length", "2048", "--n", "9", "--w", "64", "--modes", "full,sym",
                 "--out", str(out)]) == 0
    text = out.read_text()
    assert "bound_policy=warn" in text.splitlines()[0]
    assert [r["mode"] for r in _rows(text)] == ["full", "sym"]
