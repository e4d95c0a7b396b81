import numpy as np
import pytest

from radius_lsh.predictor import (MLP, Linear, MLPConfig, cross_validate, fit_predictor,
                                  load_predictor, save_predictor, train)
from radius_lsh.radius_model import TrainingSet

FAST = MLPConfig(max_epochs=60, seed=3)


@pytest.fixture
def smooth(rng):
    x = rng.uniform(-3, 3, size=(800, 4))
    y = 500 + 120 * np.sin(x[:, 0]) + 40 * x[:, 1] ** 2 + 25 * x[:, 2]
    return x, y


class TestFit:
    def test_constant_target(self, rng):
        x = rng.normal(size=(100, 3))
        pred = fit_predictor(x, np.full(100, 37.0), "mlp", FAST)
        assert np.all(pred.predict_radii(x) == 37)

    def test_exact_linear_target(self, rng):
        x = rng.normal(size=(200, 5))
        y = x @ np.array([3.0, -1.0, 0.5, 0.0, 2.0]) + 10
        pred = fit_predictor(x, y, "linear")
        assert np.allclose(pred.predict_scaled(x) * pred.y_scale + pred.y_mean, y)
        mse, r2 = cross_validate(x, y, "linear", folds=5)
        assert mse < 1e-20 and r2 == pytest.approx(1.0)

    def test_mlp_generalises(self, smooth):
        x, y = smooth
        pred = fit_predictor(x[:600], y[:600], "mlp", MLPConfig(seed=1))
        rel = np.abs(pred.predict_radii(x[600:]) - y[600:]) / y[600:]
        assert np.median(rel) <= 0.25

    def test_mlp_beats_linear_on_nonlinear_target(self, smooth):
        x, y = smooth
        mlp, _ = cross_validate(x, y, "mlp", folds=4, cfg=FAST)
        lin, _ = cross_validate(x, y, "linear", folds=4)
        assert mlp < lin

    def test_loss_decreases(self, smooth):
        x, y = smooth
        model = MLP.fit((x - x.mean(0)) / x.std(0), (y - y.mean()) / y.std(), FAST)
        assert model.loss_curve[-1] < model.loss_curve[0]

    def test_deterministic(self, smooth):
        x, y = smooth
        a = fit_predictor(x, y, "mlp", FAST)
        b = fit_predictor(x, y, "mlp", FAST)
        assert np.array_equal(a.predict_scaled(x), b.predict_scaled(x))

    def test_clamped(self, rng):
        x = rng.normal(size=(50, 2))
        pred = fit_predictor(x, x[:, 0] * 100, "linear", max_radius=20)
        out = pred.predict_radii(np.array([[-50.0, 0.0], [50.0, 0.0]]))
        assert out.tolist() == [1, 20]

    def test_unknown_kind(self, rng):
        with pytest.raises(ValueError):
            fit_predictor(rng.normal(size=(20, 2)), np.ones(20), "forest")

    def test_linear_intercept_only(self):
        model = Linear.fit(np.zeros((4, 2)), np.array([1.0, 2.0, 3.0, 4.0]))
        assert model.predict(np.zeros((1, 2)))[0] == pytest.approx(2.5)


class TestTrain:
    def training_set(self, rng, n=120, m=6):
        sigs = rng.integers(-50, 50, size=(n, m))
        ks = rng.choice([1, 10, 50], size=n)
        targets = 10 + np.abs(sigs[:, 0]) + ks
        return TrainingSet(sigs, ks, targets)

    def test_predict_from_signature(self, rng):
        pred = train(self.training_set(rng), "linear")
        assert pred.predict(np.array([4, 0, 0, 0, 0, 0]), 10) >= 1

    def test_cv_recorded(self, rng):
        pred = train(self.training_set(rng), "linear", cv_folds=5)
        assert np.isfinite(pred.cv_mse) and pred.cv_mse >= 0

    def test_needs_ten_samples(self, rng):
        with pytest.raises(ValueError):
            train(self.training_set(rng, n=9))

    @pytest.mark.parametrize("kind", ["mlp", "linear"])
    def test_round_trip(self, tmp_path, rng, kind):
        ts = self.training_set(rng)
        pred = train(ts, kind, MLPConfig(hidden=16, max_epochs=20), max_radius=5000)
        save_predictor(pred, tmp_path / "p.bin")
        back = load_predictor(tmp_path / "p.bin")
        assert back.kind == kind and back.max_radius == 5000
        assert np.array_equal(back.predict_radii(ts.features), pred.predict_radii(ts.features))

    def test_rejects_foreign_file(self, tmp_path):
        (tmp_path / "p.bin").write_bytes(b"\0" * 128)
        with pytest.raises(ValueError):
            load_predictor(tmp_path / "p.bin")
