import numpy as np
import pytest

from conftest import synth_cfg
from explainrul.dsp import hann_window, power_spectrum
from explainrul.errors import ConfigError, NoDataError, ParseError, StructuralError
from explainrul.ingest import (
    FormatSpec,
    Record,
    RecordSet,
    SynthConfig,
    load_record_set,
    read_format_spec,
    synth_bearing_run,
    write_format_spec,
    write_record_set,
)


def _write_csv(path, t0, n, fs=25600.0, rng=None, bad_line=None):
    rng = rng or np.random.default_rng(0)
    lines = ["timestamp_s,horiz_g,vert_g"]
    for i in range(n):
        h, v = (float(u) for u in rng.normal(size=2))
        lines.append(f"{t0 + i / fs!r},{h!r},{v!r}")
    if bad_line is not None:
        lines[bad_line - 1] = lines[bad_line - 1].rsplit(",", 1)[0] + ",abc"
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def fmt():
    return FormatSpec(25600.0, 2560, 10.0)


def test_directory_of_three_files(tmp_path, fmt):
    for i in range(3):
        _write_csv(tmp_path / f"acc_{i:05d}.csv", 10.0 * i, 2560)
    rs = load_record_set(tmp_path, fmt)
    assert len(rs) == 3
    assert rs.record_len == 2560
    assert all(r.horiz.shape == (2560,) for r in rs.records)


def test_non_numeric_cell_names_line(tmp_path):
    _write_csv(tmp_path / "a.csv", 0.0, 20, bad_line=7)
    with pytest.raises(ParseError) as err:
        load_record_set(tmp_path / "a.csv", FormatSpec(25600.0, 20, 10.0))
    assert err.value.line == 7
    assert ":7:" in str(err.value)


def test_wrong_column_count_names_line(tmp_path):
    path = tmp_path / "a.csv"
    _write_csv(path, 0.0, 5)
    lines = path.read_text().splitlines()
    lines[3] += ",1.0"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ParseError) as err:
        load_record_set(path, FormatSpec(25600.0, 5, 10.0))
    assert err.value.line == 4


def test_bad_header(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("t,x,y\n0,1,2\n")
    with pytest.raises(ParseError):
        load_record_set(path, FormatSpec(1.0, 1, 1.0))


def test_order_by_timestamp_not_name(tmp_path):
    names = ["zz.csv", "aa.csv", "mm.csv"]
    for i, name in enumerate(names):
        _write_csv(tmp_path / name, 10.0 * i, 8)
    rs = load_record_set(tmp_path, FormatSpec(25600.0, 8, 10.0))
    np.testing.assert_array_equal(rs.timestamps, [0.0, 10.0, 20.0])


def test_wrong_row_count(tmp_path):
    _write_csv(tmp_path / "a.csv", 0.0, 9)
    with pytest.raises(StructuralError):
        load_record_set(tmp_path, FormatSpec(25600.0, 8, 10.0))


def test_irregular_spacing_rejected():
    z = np.zeros(4)
    with pytest.raises(StructuralError):
        RecordSet(1.0, 4, 10.0, [Record(0.0, z, z), Record(10.0, z, z), Record(25.0, z, z)])


def test_empty_directory(tmp_path, fmt):
    with pytest.raises(NoDataError):
        load_record_set(tmp_path, fmt)


def test_meta_sidecar_roundtrip(tmp_path, fmt):
    write_format_spec(fmt, tmp_path / "meta.txt")
    assert read_format_spec(tmp_path / "meta.txt") == fmt


def test_write_then_load_is_lossless(tmp_path):
    rs = synth_bearing_run(synth_cfg(3, duration_records=5, degradation_onset_record=2, record_len=256))
    write_record_set(rs, tmp_path)
    back = load_record_set(tmp_path)
    assert len(back) == 5
    for a, b in zip(rs.records, back.records):
        assert a.timestamp_s == b.timestamp_s
        np.testing.assert_array_equal(a.horiz, b.horiz)
        np.testing.assert_array_equal(a.vert, b.vert)


def test_synth_is_deterministic():
    cfg = synth_cfg(7, duration_records=6, degradation_onset_record=3)
    a, b = synth_bearing_run(cfg), synth_bearing_run(cfg)
    for ra, rb in zip(a.records, b.records):
        assert ra.horiz.tobytes() == rb.horiz.tobytes()
        assert ra.vert.tobytes() == rb.vert.tobytes()


def test_synth_stationary_case():
    rs = synth_bearing_run(SynthConfig(duration_records=5, degradation_onset_record=2, degradation_rate=0.0, noise_std_g=0.0))
    for r in rs.records[1:]:
        np.testing.assert_array_equal(r.horiz, rs.records[0].horiz)
        np.testing.assert_array_equal(r.vert, rs.records[0].vert)


def test_synth_fault_tone_grows():
    cfg = SynthConfig(fault_freqs_hz=(168.0,), duration_records=100, degradation_onset_record=60,
                      degradation_rate=5e-3, seed=4)
    rs = synth_bearing_run(cfg)
    w = hann_window(cfg.record_len)
    early = power_spectrum(rs.records[0].horiz, cfg.sample_rate_hz, w)
    late = power_spectrum(rs.records[-1].horiz, cfg.sample_rate_hz, w)
    k = int(round(168.0 / late.bin_width_hz))
    window = late.psd[k - 1:k + 2]
    peak = k - 1 + int(np.argmax(window))
    assert abs(peak - 168.0 / late.bin_width_hz) <= 1
    assert late.psd[peak] > late.psd[peak - 1] and late.psd[peak] > late.psd[peak + 1]
    assert late.psd[peak] > early.psd[peak]


@pytest.mark.parametrize(
    "kw",
    [
        dict(fault_freqs_hz=(13000.0,)),
        dict(shaft_hz=-1.0),
        dict(degradation_onset_record=100),
        dict(resonance_centers_hz=(12700.0,)),
        dict(noise_std_g=-0.1),
    ],
)
def test_synth_config_rejected(kw):
    with pytest.raises(ConfigError):
        synth_bearing_run(SynthConfig(**kw))
