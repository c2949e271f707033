import numpy as np
import pytest

from mrfrf import io as mio
from mrfrf.bench import build_benchmark_scenario
from mrfrf.errors import DataFormatError
from mrfrf.lti import FrfMatrix, dft_grid
from mrfrf.multirate import SignalRecord


def test_signal_csv_roundtrip_and_determinism(tmp_path):
    rng = np.random.default_rng(0)
    rec = SignalRecord(rng.standard_normal((2, 30)), 1e-4)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    mio.write_signal_csv(p1, rec)
    mio.write_signal_csv(p2, rec)
    assert p1.read_bytes() == p2.read_bytes()
    first = p1.read_text().splitlines()
    assert first[0].startswith("# format_version=")
    assert first[1] == "ch0,ch1"
    back = mio.read_signal_csv(p1, 1e-4)
    assert np.array_equal(back.data, rec.data)


def test_signal_csv_corrupt_row_reports_row_number(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# format_version=1\nch0\n1.0\nnot-a-number\n2.0\n")
    with pytest.raises(DataFormatError) as exc:
        mio.read_signal_csv(path, 1e-4)
    assert exc.value.row == 4
    assert "row 4" in str(exc.value)


def test_signal_csv_field_count_mismatch(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("ch0,ch1\n1.0,2.0\n3.0\n")
    with pytest.raises(DataFormatError) as exc:
        mio.read_signal_csv(path, 1e-4)
    assert exc.value.row == 3


def test_frf_entry_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    n = 12
    vals = rng.standard_normal((n, 1, 1)) + 1j * rng.standard_normal((n, 1, 1))
    flags = np.zeros(n, dtype=bool)
    flags[5] = True
    vals[5] = np.nan
    frf = FrfMatrix(vals, dft_grid(n, 1e-4), 1e-4)
    path = tmp_path / "frf.csv"
    mio.write_frf_entry_csv(path, frf, 0, 0, flags=flags)
    ks, v, fl = mio.read_frf_entry_csv(path)
    assert np.array_equal(ks, np.arange(n))
    assert fl[5] and fl.sum() == 1
    keep = ~fl
    assert np.abs(v[keep] - vals[keep, 0, 0]).max() == 0.0


def test_scenario_roundtrip(tmp_path):
    sc = build_benchmark_scenario("noisy", seed=9)
    path = tmp_path / "scenario.json"
    mio.save_scenario(path, sc)
    back = mio.load_scenario(path)
    assert back.loop.factor == sc.loop.factor
    assert back.excitation.rms == sc.excitation.rms
    assert back.excitation.seed == sc.excitation.seed
    assert back.lrm == sc.lrm
    assert back.loop.noise.eh_std == sc.loop.noise.eh_std
    a = sc.loop.plant
    b = back.loop.plant
    for i in range(a.n_outputs):
        for j in range(a.n_inputs):
            assert np.array_equal(a.num[i][j], b.num[i][j])
            assert np.array_equal(a.den[i][j], b.den[i][j])


def test_scenario_preset_reference(tmp_path):
    path = tmp_path / "scenario.json"
    mio.write_json(path, {"preset": "default", "seed": 4321})
    sc = mio.load_scenario(path)
    assert sc.seed == 4321
    assert sc.excitation.n_samples == 3600


def test_missing_scenario_raises_config_error(tmp_path):
    from mrfrf.errors import ConfigError

    with pytest.raises(ConfigError, match="not found"):
        mio.load_scenario(tmp_path / "nope.json")


def test_spectrum_csv_format(tmp_path):
    from mrfrf.multirate import SignalRecord as SR
    from mrfrf.spectral import dft

    rng = np.random.default_rng(5)
    spec = dft(SR(rng.standard_normal((2, 8)), 0.5))
    path = tmp_path / "spec.csv"
    mio.write_spectrum_csv(path, spec)
    lines = path.read_text().splitlines()
    assert lines[1] == "k,freq_hz,re_ch0,im_ch0,re_ch1,im_ch1"
    assert len(lines) == 2 + 8
    first = lines[2].split(",")
    assert first[0] == "0"
    assert float(first[2]) == spec.values[0, 0].real
