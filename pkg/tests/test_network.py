import math

import numpy as np
import pytest

from pidenn.network import (MlpConfig, activation_value_d1_d2, forward,
                            forward_batch, init, load_checkpoint, save_checkpoint)

from conftest import rel_err, small_net


class TestInit:
    def test_deterministic(self):
        cfg = MlpConfig(hidden_layers=2, hidden_size=16, seed=42)
        a, b = init(cfg), init(cfg)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)
        for ba, bb in zip(a.biases, b.biases):
            assert np.array_equal(ba, bb)

    def test_biases_zero(self):
        net = init(MlpConfig(hidden_layers=3, hidden_size=10, seed=1))
        assert all(np.all(b == 0.0) for b in net.biases)

    def test_shapes(self):
        net = init(MlpConfig(input_dim=7, hidden_layers=3, hidden_size=12, seed=0))
        shapes = [w.shape for w in net.weights]
        assert shapes == [(12, 7), (12, 12), (12, 12), (1, 12)]
        assert [b.shape for b in net.biases] == [(12,), (12,), (12,), (1,)]

    def test_he_normal_variance(self):
        # 200x200 block: sample variance within 10% of 2/200
        net = init(MlpConfig(input_dim=7, hidden_layers=2, hidden_size=200,
                             init_scheme="he_normal", seed=7))
        block = net.weights[1]
        assert block.size == 40000
        assert abs(block.var() / (2.0 / 200) - 1.0) < 0.10
        # truncation: no draw beyond 2 renormalized sd
        trunc_std = math.sqrt(
            1.0 - 4.0 * (math.exp(-2.0) / math.sqrt(2 * math.pi)) / math.erf(math.sqrt(2.0))
        )
        bound = 2.0 * math.sqrt(2.0 / 200) / trunc_std
        assert np.abs(block).max() <= bound * 1.0000001

    @pytest.mark.parametrize("scheme,var_fn", [
        ("lecun_normal", lambda n_in, n_out: 1.0 / n_in),
        ("glorot_normal", lambda n_in, n_out: 2.0 / (n_in + n_out)),
    ])
    def test_normal_scheme_variances(self, scheme, var_fn):
        net = init(MlpConfig(input_dim=7, hidden_layers=2, hidden_size=200,
                             init_scheme=scheme, seed=3))
        block = net.weights[1]
        assert abs(block.var() / var_fn(200, 200) - 1.0) < 0.10

    @pytest.mark.parametrize("scheme,var_fn", [
        ("he_uniform", lambda n: 2.0 / n),
        ("lecun_uniform", lambda n: 1.0 / n),
    ])
    def test_uniform_bounds_and_variance(self, scheme, var_fn):
        net = init(MlpConfig(input_dim=7, hidden_layers=2, hidden_size=200,
                             init_scheme=scheme, seed=5))
        block = net.weights[1]
        bound = math.sqrt(3.0 * var_fn(200))
        assert np.abs(block).max() <= bound
        assert abs(block.var() / var_fn(200) - 1.0) < 0.10

    def test_config_validation(self):
        with pytest.raises(ValueError):
            MlpConfig(hidden_layers=0)
        with pytest.raises(ValueError):
            MlpConfig(dropout_rate=1.0)
        with pytest.raises(ValueError):
            MlpConfig(activation="relu")
        with pytest.raises(ValueError):
            MlpConfig(init_scheme="orthogonal")
        with pytest.raises(ValueError):
            MlpConfig(input_dim=1)


class TestActivations:
    def test_silu_at_zero(self):
        g, gp, gpp = activation_value_d1_d2(0.0, "silu")
        assert g == pytest.approx(0.0)
        assert gp == pytest.approx(0.5)

    def test_softplus_at_zero(self):
        g, gp, _ = activation_value_d1_d2(0.0, "softplus")
        assert g == pytest.approx(math.log(2.0), rel=1e-12)
        assert gp == pytest.approx(0.5)

    def test_large_argument_asymptote(self):
        for kind in ("silu", "softplus"):
            g, gp, gpp = activation_value_d1_d2(30.0, kind)
            assert g == pytest.approx(30.0, abs=1e-8)
            assert gp == pytest.approx(1.0, abs=1e-8)
            # no overflow far out either
            g2, _, _ = activation_value_d1_d2(800.0, kind)
            assert np.isfinite(g2) and g2 == pytest.approx(800.0)
            g3, _, _ = activation_value_d1_d2(-800.0, kind)
            assert np.isfinite(g3) and abs(g3) < 1e-12

    @pytest.mark.parametrize("kind", ["silu", "softplus"])
    def test_derivatives_match_finite_differences(self, kind):
        z = np.linspace(-4, 4, 41)
        h = 1e-5
        g, gp, gpp = activation_value_d1_d2(z, kind)
        gp_fd = (activation_value_d1_d2(z + h, kind)[0]
                 - activation_value_d1_d2(z - h, kind)[0]) / (2 * h)
        gpp_fd = (activation_value_d1_d2(z + h, kind)[0] - 2 * g
                  + activation_value_d1_d2(z - h, kind)[0]) / h**2
        assert np.max(np.abs(gp - gp_fd)) < 1e-8
        assert np.max(np.abs(gpp - gpp_fd)) < 1e-5

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            activation_value_d1_d2(0.0, "tanh")


class TestForward:
    def test_zero_network(self):
        net = small_net()
        for w in net.weights:
            w[:] = 0.0
        assert forward(net, np.ones(7)) == 0.0

    def test_single_layer_hand_value(self):
        cfg = MlpConfig(input_dim=7, hidden_layers=1, hidden_size=5, seed=0)
        net = init(cfg)
        net.weights[0][:] = 0.0
        net.biases[0][:] = 0.7
        net.weights[1][:] = 1.0
        net.biases[1][:] = 0.0
        g = activation_value_d1_d2(0.7, "silu")[0]
        assert forward(net, np.zeros(7)) == pytest.approx(5 * g, rel=1e-14)

    def test_matches_straight_line_reimplementation(self):
        net = small_net(layers=3, width=6, seed=11)
        rng = np.random.default_rng(2)
        x = rng.normal(size=7)

        def sigmoid(z):
            return 1.0 / (1.0 + np.exp(-z))

        h = x
        for W, b in zip(net.weights[:-1], net.biases[:-1]):
            a = W @ h + b
            h = a * sigmoid(a)
        ref = float((net.weights[-1] @ h + net.biases[-1])[0])
        assert rel_err(forward(net, x), ref) < 1e-12

    def test_dropout_rate_zero_masks_match_no_masks(self):
        net = small_net(layers=2, width=6)
        x = np.linspace(-1, 1, 7)[None, :]
        masks = [np.ones((1, 6)), np.ones((1, 6))]
        assert forward_batch(net, x, masks)[0] == forward_batch(net, x)[0]

    def test_dimension_mismatch(self):
        net = small_net()
        with pytest.raises(ValueError):
            forward_batch(net, np.ones((3, 5)))

    def test_fd_second_derivative_converges(self):
        # error of the central second difference shrinks as the step does
        net = small_net(layers=2, width=12, seed=9)
        x = np.array([0.3, 1.0, 0.2, 0.3, -0.3, 0.05, 0.02])

        def second_diff(h):
            xp, xm = x.copy(), x.copy()
            xp[0] += h
            xm[0] -= h
            return (forward(net, xp) - 2 * forward(net, x) + forward(net, xm)) / h**2

        from pidenn.autodiff import jet_forward

        exact = jet_forward(net, x).dxx
        errs = [abs(second_diff(h) - exact) for h in (1e-2, 1e-3, 1e-4)]
        assert errs[1] < errs[0]
        assert errs[2] < errs[0]


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        net = small_net(layers=3, width=9, seed=21)
        path = tmp_path / "net.npz"
        save_checkpoint(net, path)
        back = load_checkpoint(path)
        assert back.config == net.config
        for a, b in zip(net.weights + net.biases, back.weights + back.biases):
            assert np.array_equal(a, b) and a.dtype == b.dtype

    def test_format_guard(self, tmp_path):
        path = tmp_path / "bogus.npz"
        np.savez(path, format=np.array("something-else"))
        with pytest.raises(ValueError):
            load_checkpoint(path)
