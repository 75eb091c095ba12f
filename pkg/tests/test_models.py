import numpy as np
import pytest

from conftest import ONSET
from explainrul.errors import ChecksumError, KindMismatchError, StructuralError, TruncatedFileError
from explainrul.explain import reactive_monitor
from explainrul.models import (
    AeModel,
    FfnnModel,
    autoencoder_network,
    decode,
    dumps_model,
    encode,
    estimate_rul,
    ffnn_network,
    load_model,
    loads_model,
    save_model,
    train_autoencoder,
    train_ffnn,
)
from explainrul.neural import CostConfig, TrainOptions
from explainrul.preprocess import NormalizationStats


@pytest.fixture(scope="module")
def default_ae():
    enc, dec = autoencoder_network(seed=3)
    return AeModel(enc, dec)


def test_default_architecture(default_ae):
    assert default_ae.input_dim == 176
    assert default_ae.bottleneck_dim == 4
    assert [l.spec.activation for l in default_ae.encoder.layers] == ["sigmoid", "elu", "elu"]
    assert default_ae.decoder.layers[-1].spec.output_scale == 3.0


def test_shapes(default_ae):
    f = encode(default_ae, np.zeros(176))
    assert f.shape == (4,)
    assert decode(default_ae, f).shape == (176,)
    with pytest.raises(StructuralError):
        encode(default_ae, np.zeros(175))
    with pytest.raises(StructuralError):
        decode(default_ae, np.zeros(3))


def test_decoder_range(default_ae):
    rng = np.random.default_rng(0)
    for _ in range(20):
        out = decode(default_ae, rng.normal(0, 5, 4))
        assert np.all(out >= -3.0)


def test_decode_zero_is_stable(default_ae):
    a = decode(default_ae, np.zeros(4))
    b = decode(default_ae, np.zeros(4))
    assert a.tobytes() == b.tobytes()


def test_identical_columns():
    col = np.random.default_rng(1).normal(size=12)
    data = np.tile(col, (40, 1))
    ae, hist = train_autoencoder(data, (12, 6, 2), (6,), CostConfig(beta=0.0),
                                 TrainOptions(epochs=300, learning_rate=1e-2, seed=2, validation_fraction=0.5))
    feats = np.array([encode(ae, c) for c in data])
    assert np.ptp(feats, axis=0).max() < 1e-3
    assert hist.val_loss[-1] < hist.val_loss[0]


def test_identical_columns_give_identical_features(trained_ae, synthetic_matrices):
    ae, _ = trained_ae
    c = synthetic_matrices[0].column(5)
    assert encode(ae, c).tobytes() == encode(ae, c.copy()).tobytes()


def test_trained_reconstruction(trained_ae, synthetic_matrices):
    ae, _ = trained_ae
    m = synthetic_matrices[0].values
    errs = [np.mean((decode(ae, encode(ae, m[:, j])) - m[:, j]) ** 2) for j in range(0, m.shape[1], 7)]
    assert np.mean(errs) < 10 * ae.validation_loss


def test_feature_shifts_after_onset(trained_ae, synthetic_matrices):
    ae, _ = trained_ae
    for m in synthetic_matrices:
        f = reactive_monitor(ae, m).features
        pre, post = f[:, :ONSET], f[:, ONSET:]
        shift = np.abs(post.mean(axis=1) - pre.mean(axis=1)) / pre.std(axis=1)
        assert shift.max() > 3.0


class TestFfnn:
    def test_constant_zero_labels(self):
        x = np.random.default_rng(0).normal(size=(80, 4))
        model, _ = train_ffnn(x, np.zeros(80), opt=TrainOptions(epochs=300, learning_rate=3e-3, validation_fraction=0.3))
        assert estimate_rul(model, x)[0].mean() < 0.05

    def test_linear_relation(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(-1, 1, size=(300, 4))
        w = np.array([0.2, -0.15, 0.1, 0.05])
        y = np.clip(x @ w + 0.5, 0, 1)
        model, hist = train_ffnn(x, y, opt=TrainOptions(epochs=2000, learning_rate=3e-3, validation_fraction=0.3, seed=4))
        assert np.sqrt(hist.best_val_loss) < 0.05

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        x, y = rng.normal(size=(50, 4)), rng.uniform(size=50)
        opt = TrainOptions(epochs=40, seed=9, validation_fraction=0.3)
        a, _ = train_ffnn(x, y, opt=opt)
        b, _ = train_ffnn(x, y, opt=opt)
        for p, q in zip(a.net.parameters(), b.net.parameters()):
            assert p.tobytes() == q.tobytes()

    def test_label_range(self):
        with pytest.raises(ValueError):
            train_ffnn(np.zeros((5, 4)), np.full(5, 1.5))

    def test_estimate_scaling(self):
        net = ffnn_network(4, seed=0)
        for l in net.layers:
            l.W[:] = 0.0
            l.b[:] = 0.0
        model = FfnnModel(net, 28000.0)
        assert estimate_rul(model, np.zeros(4)) == (0.0, 0.0)
        net.layers[-1].b[:] = 1.0
        assert estimate_rul(model, np.zeros(4)) == (1.0, 28000.0)
        norm, secs = estimate_rul(model, np.zeros((17, 4)))
        assert norm.shape == secs.shape == (17,)

    def test_requires_relu_output(self):
        from explainrul.neural import Network
        with pytest.raises(StructuralError):
            FfnnModel(Network.from_dims([4, 1], ["elu"]))


class TestSerialization:
    def _models(self):
        enc, dec = autoencoder_network((10, 6, 3), (6,), seed=1)
        ae = AeModel(enc, dec, NormalizationStats(np.arange(10.0), np.full(10, 2.0)), 0.25, 0.2)
        ff = FfnnModel(ffnn_network(3, seed=2), 1234.5, 0.01)
        return ae, ff

    def test_resave_is_byte_identical(self, tmp_path):
        for model in self._models():
            p1, p2 = tmp_path / "a.model", tmp_path / "b.model"
            save_model(model, p1)
            save_model(load_model(p1), p2)
            assert p1.read_bytes() == p2.read_bytes()

    def test_roundtrip_values(self, tmp_path):
        ae, ff = self._models()
        save_model(ae, tmp_path / "ae.model")
        back = load_model(tmp_path / "ae.model", "autoencoder")
        x = np.random.default_rng(0).normal(size=10)
        assert encode(back, x).tobytes() == encode(ae, x).tobytes()
        np.testing.assert_array_equal(back.normalization.mu, ae.normalization.mu)
        save_model(ff, tmp_path / "ff.model")
        assert load_model(tmp_path / "ff.model", "ffnn").rul_max_s == 1234.5

    def test_corrupt_weight_byte(self):
        ae, _ = self._models()
        data = bytearray(dumps_model(ae))
        pos = data.index(b"[encoder.0]") + 60
        data[pos] = ord("7") if data[pos] != ord("7") else ord("8")
        with pytest.raises(ChecksumError):
            loads_model(bytes(data))

    def test_truncated(self):
        _, ff = self._models()
        data = dumps_model(ff)
        with pytest.raises(TruncatedFileError):
            loads_model(data[: len(data) // 2])

    def test_kind_mismatch(self, tmp_path):
        ae, _ = self._models()
        save_model(ae, tmp_path / "ae.model")
        with pytest.raises(KindMismatchError):
            load_model(tmp_path / "ae.model", "ffnn")

    def test_created_is_reproducible(self, monkeypatch):
        _, ff = self._models()
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "86400")
        assert b"created=1970-01-02T00:00:00Z" in dumps_model(ff)
