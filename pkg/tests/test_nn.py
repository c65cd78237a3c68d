import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _gradcheck import KINDS, max_relative_error, random_instance
from halowsync.errors import FormatError, NumericError
from halowsync.nn import (AdamState, LayerSpec, TrainConfig, adam_step, backward, forward,
                          init_weights, load_checkpoint, mse_loss, n_params, param_shapes,
                          save_checkpoint, train, zero_weights)


class TestForward:
    def test_dense_identity(self):
        net = [LayerSpec.dense(3, 3)]
        w = [{"W": np.eye(3), "b": np.zeros(3)}]
        x = np.array([[1.0, -2.0, 3.0]])
        np.testing.assert_array_equal(forward(net, w, x), x)

    def test_relu(self):
        out = forward([LayerSpec.relu()], [{}], np.array([[-1.0, 0.0, 2.0]]))
        np.testing.assert_array_equal(out, [[0.0, 0.0, 2.0]])

    @pytest.mark.parametrize("cell", ["lstm", "gru"])
    def test_zero_recurrent_gives_zero_state(self, cell):
        spec = getattr(LayerSpec, cell)(4, 3, 5)
        x = np.random.default_rng(0).standard_normal((2, 5, 3))
        np.testing.assert_array_equal(forward([spec], zero_weights([spec]), x), 0.0)

    def test_conv_matches_loops(self):
        rng = np.random.default_rng(1)
        spec = LayerSpec.conv1d(3, 2, 4)
        w = init_weights([spec], 0, np.float64)
        x = rng.standard_normal((2, 2, 9))
        out = forward([spec], w, x)
        W, b = w[0]["W"], w[0]["b"]
        ref = np.zeros((2, 4, 7))
        for n in range(2):
            for o in range(4):
                for k in range(7):
                    ref[n, o, k] = b[o] + sum(W[o, i, f] * x[n, i, k + f]
                                              for i in range(2) for f in range(3))
        np.testing.assert_allclose(out, ref, atol=1e-12)

    def test_lstm_single_step_by_hand(self):
        # U=1, NF=1: every gate sees the same pre-activation a = x
        spec = LayerSpec.lstm(1, 1, 1)
        w = [{"W_ih": np.ones((4, 1)), "W_hh": np.zeros((4, 1)),
              "b_ih": np.zeros(4), "b_hh": np.zeros(4)}]
        x = 0.7
        sig = 1 / (1 + np.exp(-x))
        c = sig * np.tanh(x)
        h = sig * np.tanh(c)
        assert forward([spec], w, np.array([[[x]]]))[0, 0] == pytest.approx(h, rel=1e-12)

    def test_gru_single_step_by_hand(self):
        spec = LayerSpec.gru(1, 1, 1)
        w = [{"W_ih": np.ones((3, 1)), "W_hh": np.zeros((3, 1)),
              "b_ih": np.zeros(3), "b_hh": np.zeros(3)}]
        x = -0.4
        z = 1 / (1 + np.exp(-x))
        h = (1 - z) * np.tanh(x)
        assert forward([spec], w, np.array([[[x]]]))[0, 0] == pytest.approx(h, rel=1e-12)

    @given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 6))
    @settings(max_examples=30, deadline=None)
    def test_conv_width(self, F, ci, extra):
        spec = LayerSpec.conv1d(F, ci, 2)
        out = forward([spec], zero_weights([spec]), np.zeros((1, ci, F + extra)))
        assert out.shape == (1, 2, extra + 1)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            forward([LayerSpec.dense(3, 1)], zero_weights([LayerSpec.dense(3, 1)]), np.zeros((1, 4)))
        spec = LayerSpec.lstm(2, 3, 4)
        with pytest.raises(ValueError):
            forward([spec], zero_weights([spec]), np.zeros((1, 4, 2)))

    def test_layer_validation(self):
        with pytest.raises(ValueError):
            LayerSpec.dense(0, 3)
        with pytest.raises(ValueError):
            LayerSpec("pool")


class TestInit:
    @pytest.mark.parametrize("spec", [LayerSpec.dense(40, 5), LayerSpec.conv1d(8, 4, 9),
                                      LayerSpec.gru(30, 16, 10)])
    def test_uniform_bound(self, spec):
        w = init_weights([spec], 3)
        fan = {"dense": 40, "conv1d": 32, "gru": 30}[spec.kind]
        for v in w[0].values():
            assert np.abs(v).max() <= np.sqrt(1 / fan) + 1e-7

    def test_lstm_forget_bias(self):
        w = init_weights([LayerSpec.lstm(3, 2, 2)], 0)[0]
        np.testing.assert_array_equal(w["b_ih"][3:6] + w["b_hh"][3:6], 1.0)

    def test_shapes(self):
        assert param_shapes(LayerSpec.lstm(30, 16, 10)) == {
            "W_ih": (120, 16), "W_hh": (120, 30), "b_ih": (120,), "b_hh": (120,)}
        assert n_params(init_weights([LayerSpec.dense(160, 32)], 0)) == 160 * 32 + 32


class TestBackward:
    @pytest.mark.parametrize("kind", KINDS)
    @pytest.mark.parametrize("seed", range(3))
    def test_finite_differences(self, kind, seed):
        rng = np.random.default_rng(100 * seed + len(kind))
        spec, x = random_instance(kind, rng)
        assert max_relative_error(spec, x, seed) < 1e-4

    def test_stack_gradient(self):
        rng = np.random.default_rng(7)
        net = [LayerSpec.conv1d(3, 2, 3), LayerSpec.relu(), LayerSpec.dense(12, 2),
               LayerSpec.tanh(), LayerSpec.dense(2, 1)]
        w = init_weights(net, 1, np.float64)
        x = rng.standard_normal((3, 2, 6))
        out, caches = forward(net, w, x, keep_cache=True)
        grads, _ = backward(net, w, caches, np.ones_like(out))
        theta = w[2]["W"]
        h = 1e-5
        theta[0, 0] += h
        up = forward(net, w, x).sum()
        theta[0, 0] -= 2 * h
        down = forward(net, w, x).sum()
        theta[0, 0] += h
        assert grads[2]["W"][0, 0] == pytest.approx((up - down) / (2 * h), rel=1e-5)

    @pytest.mark.parametrize("kind", KINDS)
    def test_zero_upstream(self, kind):
        spec, x = random_instance(kind, np.random.default_rng(0))
        w = init_weights([spec], 0, np.float64)
        out, caches = forward([spec], w, x, keep_cache=True)
        grads, dx = backward([spec], w, caches, np.zeros_like(out))
        assert all(np.all(g == 0) for g in grads[0].values())
        assert np.all(dx == 0)


class TestLossAndAdam:
    def test_mse_hand(self):
        loss, grad = mse_loss(np.array([[0.0]]), np.array([[1.0]]))
        assert loss == 1.0 and grad[0, 0] == -2.0

    def test_mse_perfect(self):
        p = np.array([[0.3], [0.1]])
        loss, grad = mse_loss(p, p)
        assert loss == 0.0 and np.all(grad == 0)

    def test_mse_random_oracle(self):
        rng = np.random.default_rng(0)
        p, t = rng.standard_normal((7, 2)), rng.standard_normal((7, 2))
        loss, grad = mse_loss(p, t)
        ref = sum((p[i, j] - t[i, j]) ** 2 for i in range(7) for j in range(2)) / 7
        assert loss == pytest.approx(ref, rel=1e-12)
        np.testing.assert_allclose(grad, 2 * (p - t) / 7)

    def test_adam_first_step(self):
        w = [{"theta": np.array([1.0])}]
        adam_step(AdamState(), w, [{"theta": np.array([2.0])}])
        assert w[0]["theta"][0] == pytest.approx(0.999, abs=1e-9)

    def test_zero_gradient_keeps_params(self):
        w = [{"theta": np.array([1.5, -2.0])}]
        st_ = AdamState()
        for _ in range(10):
            adam_step(st_, w, [{"theta": np.zeros(2)}])
        np.testing.assert_array_equal(w[0]["theta"], [1.5, -2.0])

    def test_identical_trajectories(self):
        rng = np.random.default_rng(5)
        gs = [rng.standard_normal(3) for _ in range(20)]
        runs = []
        for _ in range(2):
            w, s = [{"theta": np.ones(3)}], AdamState()
            for g in gs:
                adam_step(s, w, [{"theta": g}])
            runs.append(w[0]["theta"].copy())
        np.testing.assert_array_equal(*runs)


class TestTrain:
    def test_recovers_linear_slope(self):
        x = np.linspace(-1, 1, 200)[:, None]
        res = train([LayerSpec.dense(1, 1)], (x, 2 * x),
                    TrainConfig(batch=20, epochs=300, seed=0, alpha=0.01, dtype=np.float64))
        assert res.weights[0]["W"][0, 0] == pytest.approx(2.0, abs=0.01)

    def test_constant_target_reaches_variance_baseline(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((100, 3))
        y = np.full((100, 1), 0.25)
        res = train([LayerSpec.dense(3, 1)], (x, y), TrainConfig(batch=10, epochs=200, alpha=0.01))
        assert res.train_loss[-1] < 1e-4  # variance of a constant target is 0

    def test_overfit_smoke(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((50, 8))
        y = np.sin(x.sum(axis=1, keepdims=True))
        net = [LayerSpec.dense(8, 16), LayerSpec.relu(), LayerSpec.dense(16, 1)]
        res = train(net, (x, y), TrainConfig(batch=10, epochs=200, seed=2, alpha=0.01))
        assert res.train_loss[-1] <= 0.1 * res.train_loss[0]

    def test_bit_identical_repeat(self):
        rng = np.random.default_rng(2)
        x, y = rng.standard_normal((40, 4)), rng.standard_normal((40, 1))
        net = [LayerSpec.dense(4, 3), LayerSpec.relu(), LayerSpec.dense(3, 1)]
        a = train(net, (x, y), TrainConfig(batch=8, epochs=5, seed=9))
        b = train(net, (x, y), TrainConfig(batch=8, epochs=5, seed=9))
        for la, lb in zip(a.weights, b.weights):
            for k in la:
                assert la[k].tobytes() == lb[k].tobytes()
        assert a.train_loss == b.train_loss

    def test_validation_curve_and_sink(self):
        x = np.linspace(0, 1, 30)[:, None]
        seen = []
        res = train([LayerSpec.dense(1, 1)], (x, x), TrainConfig(batch=10, epochs=4,
                    loss_sink=lambda e, t, v: seen.append((e, v is not None))),
                    validation=(x[:5], x[:5]))
        assert len(res.val_loss) == 4 and seen == [(e, True) for e in range(4)]

    def test_early_stopping(self):
        x = np.linspace(0, 1, 30)[:, None]
        res = train([LayerSpec.dense(1, 1)], (x, x), TrainConfig(batch=10, epochs=500, patience=3,
                    alpha=0.1), validation=(x, 5 - x))
        assert len(res.train_loss) < 500 and res.best_epoch is not None

    def test_nan_aborts(self):
        x = np.array([[np.nan]])
        with pytest.raises(NumericError):
            train([LayerSpec.dense(1, 1)], (x, x), TrainConfig(batch=1, epochs=1))

    def test_empty_data(self):
        with pytest.raises(ValueError):
            train([LayerSpec.dense(1, 1)], (np.zeros((0, 1)), np.zeros((0, 1))), TrainConfig())


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        net = [LayerSpec.conv1d(3, 2, 4), LayerSpec.relu(), LayerSpec.dense(8, 1)]
        w = init_weights(net, 4)
        save_checkpoint(tmp_path / "m", net, w, {"note": "x"})
        net2, w2, meta = load_checkpoint(tmp_path / "m")
        assert net2 == net and meta == {"note": "x"}
        for a, b in zip(w, w2):
            for k in a:
                np.testing.assert_array_equal(a[k], b[k])

    def test_truncated_blob(self, tmp_path):
        net = [LayerSpec.dense(4, 2)]
        save_checkpoint(tmp_path / "m", net, init_weights(net, 0))
        blob = tmp_path / "m.bin"
        blob.write_bytes(blob.read_bytes()[:-4])
        with pytest.raises(FormatError):
            load_checkpoint(tmp_path / "m")

    def test_missing(self, tmp_path):
        with pytest.raises(FormatError):
            load_checkpoint(tmp_path / "nothing")
