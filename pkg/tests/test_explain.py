import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import ONSET
from oracles import band_of_linear, importance_by_product, spearman
from explainrul.dsp import band_edges
from explainrul.explain import (
    DEFAULT_SWEEP,
    BearingGeometry,
    FeatureTrajectory,
    annotate_bands,
    characteristic_frequencies,
    connection_weight_importance,
    inject_features,
    reactive_monitor,
    write_annotations_csv,
    write_pgm,
)
from explainrul.models import decode, encode
from explainrul.neural import Layer, LayerSpec, Network
from explainrul.preprocess import FeatureMatrix
from explainrul.prognosis import detect_change_points


def _net_from_in_out(mats, acts=None):
    """Build a Network from (in x out) weight matrices."""
    layers = []
    for i, m in enumerate(mats):
        m = np.asarray(m, dtype=float)
        act = acts[i] if acts else "linear"
        layers.append(Layer(LayerSpec(m.shape[0], m.shape[1], act), m.T.copy(), np.zeros(m.shape[1])))
    return Network(layers)


class TestReactiveMonitor:
    def test_constant_columns(self, trained_ae):
        ae, _ = trained_ae
        m = FeatureMatrix(np.tile(np.linspace(-1, 1, ae.input_dim)[:, None], (1, 6)))
        f = reactive_monitor(ae, m).features
        assert np.all(f == f[:, :1])

    def test_columns_equal_encode(self, trained_ae, synthetic_matrices):
        ae, _ = trained_ae
        m = synthetic_matrices[1]
        traj = reactive_monitor(ae, m, np.arange(m.cols) * 10.0)
        for j in range(m.cols):
            assert traj.features[:, j].tobytes() == encode(ae, m.values[:, j]).tobytes()

    def test_change_point_near_onset(self, trained_ae, synthetic_matrices):
        ae, _ = trained_ae
        for m in synthetic_matrices:
            f = reactive_monitor(ae, m).features
            hits = [i for row in f for i in detect_change_points(row, 1).indices]
            assert any(abs(i - ONSET) <= 5 for i in hits)

    def test_csv_roundtrip(self, tmp_path):
        traj = FeatureTrajectory(np.arange(3) * 10.0, np.random.default_rng(0).normal(size=(4, 3)))
        traj.write_csv(tmp_path / "t.csv")
        back = FeatureTrajectory.read_csv(tmp_path / "t.csv")
        np.testing.assert_array_equal(back.features, traj.features)
        assert (tmp_path / "t.csv").read_text().splitlines()[0] == "time_s,f1,f2,f3,f4"


class TestInjection:
    def test_zero_sweep_is_decode_zero(self, trained_ae):
        ae, _ = trained_ae
        for k in range(ae.bottleneck_dim):
            grid = inject_features(ae, k, [0.0])
            assert grid.reconstructions[:, 0].tobytes() == decode(ae, np.zeros(ae.bottleneck_dim)).tobytes()

    def test_default_sweep(self, trained_ae):
        ae, _ = trained_ae
        assert DEFAULT_SWEEP.size == 9
        np.testing.assert_array_equal(DEFAULT_SWEEP, np.arange(9) * 0.5 - 1.0)
        assert inject_features(ae, 0).reconstructions.shape == (ae.input_dim, 9)

    def test_bad_index(self, trained_ae):
        with pytest.raises(IndexError):
            inject_features(trained_ae[0], 4)

    def test_fault_band_monotone(self, trained_ae, synthetic_matrices, paper_spec):
        ae, _ = trained_ae
        band = paper_spec.band_of(168.0)
        rows = [band, paper_spec.n_bands + band]
        best = 0.0
        for k in range(ae.bottleneck_dim):
            grid = inject_features(ae, k)
            for r in rows:
                best = max(best, abs(spearman(list(grid.sweep_values), list(grid.reconstructions[r]))))
        assert best > 0.9


class TestImportance:
    def test_hand_example(self):
        net = _net_from_in_out([[[1, 2], [3, 4]], [[0.5], [-1]]], ["elu", "relu"])
        np.testing.assert_array_equal(connection_weight_importance(net), [-1.5, -2.5])

    def test_unit_chain(self):
        net = _net_from_in_out([[[1.0]], [[1.0]]])
        np.testing.assert_array_equal(connection_weight_importance(net), [1.0])

    def test_matches_matrix_product(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            depth = int(rng.integers(2, 5))
            dims = [int(d) for d in rng.integers(1, 7, size=depth + 1)]
            mats = [rng.normal(size=(a, b)) for a, b in zip(dims[:-1], dims[1:])]
            got = connection_weight_importance(_net_from_in_out(mats))
            ref = importance_by_product([m.tolist() for m in mats])
            scale = max(1.0, max(abs(v) for v in ref))
            assert np.max(np.abs(got - ref)) <= 1e-12 * scale


class TestBearing:
    def test_thin_ball_limit(self):
        f = characteristic_frequencies(BearingGeometry(9, 1e-9, 40.0, 0.0, 25.0))
        assert math.isclose(f["ftf"], 12.5, rel_tol=1e-9)
        assert math.isclose(f["bpfo"], 9 * 12.5, rel_tol=1e-9)

    @given(st.integers(3, 30), st.floats(0.05, 0.45), st.floats(0, 0.7), st.floats(1, 200))
    def test_bpfo_plus_bpfi(self, nb, ratio, angle, fs):
        f = characteristic_frequencies(BearingGeometry(nb, ratio * 50.0, 50.0, angle, fs))
        assert math.isclose(f["bpfo"] + f["bpfi"], nb * fs, rel_tol=1e-12)

    def test_published_geometry(self):
        # a deep-groove bearing: 9 balls, d = 7.94 mm, D = 39.04 mm, 0 deg, 1797 rpm
        fs = 1797 / 60
        f = characteristic_frequencies(BearingGeometry(9, 7.94, 39.04, 0.0, fs))
        r = 7.94 / 39.04
        assert math.isclose(f["bpfo"], 9 / 2 * fs * (1 - r), rel_tol=1e-12)
        assert math.isclose(f["bpfi"], 9 / 2 * fs * (1 + r), rel_tol=1e-12)
        assert math.isclose(f["bsf"], 39.04 / (2 * 7.94) * fs * (1 - r * r), rel_tol=1e-12)
        assert math.isclose(f["ftf"], fs / 2 * (1 - r), rel_tol=1e-12)
        assert round(f["bpfo"], 1) == 107.4

    def test_invalid(self):
        with pytest.raises(ValueError):
            BearingGeometry(9, 50.0, 40.0)


class TestAnnotate:
    def test_upper_edge_inclusive(self, paper_spec):
        e = paper_spec.edges_hz
        (a,) = annotate_bands(paper_spec, [("X", e[30])], 1)
        assert a.band_index == 29

    def test_harmonic_count(self, paper_spec):
        out = annotate_bands(paper_spec, [("BPFO", 168.0)], 3)
        assert len(out) <= 3
        assert [a.label for a in out] == ["1 X BPFO", "2 X BPFO", "3 X BPFO"]

    def test_matches_linear_scan(self, paper_spec):
        freqs = np.random.default_rng(7).uniform(-100, 13500, size=100)
        got = annotate_bands(paper_spec, [(f"f{i}", f) for i, f in enumerate(freqs)], 1)
        edges = list(paper_spec.edges_hz)
        assert [a.band_index for a in got] == [band_of_linear(edges, f) for f in freqs]

    def test_csv(self, tmp_path):
        spec = band_edges(1, 1, 16.0)
        ann = annotate_bands(spec, [("A", 3.0), ("B", 100.0)], 1)
        write_annotations_csv(spec, ann, tmp_path / "a.csv")
        assert (tmp_path / "a.csv").read_text().splitlines() == [
            "band_index,f_low,f_high,label", "2,2.0,4.0,1 X A", ",,,1 X B",
        ]


def test_pgm(tmp_path):
    write_pgm(np.array([[0.0, 1.0], [2.0, 3.0]]), tmp_path / "a.pgm")
    data = (tmp_path / "a.pgm").read_bytes()
    assert data.startswith(b"P5\n2 2\n255\n")
    assert list(data[-4:]) == [170, 255, 0, 85]
