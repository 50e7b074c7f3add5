import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from donlab import gradcheck, nn
from donlab.errors import ConfigurationError, InputError

from conftest import random_params


class TestSpecAndCounting:
    def test_param_count_closed_form(self):
        assert nn.param_count(nn.MlpSpec((2, 3, 1))) == 13  # 2*3+3 + 3*1+1

    def test_depth_is_weight_layers(self):
        assert nn.MlpSpec((40, 50, 50, 50, 50, 5)).depth == 5

    @pytest.mark.parametrize("dims", [(0, 3), (3,), (2, 0, 1)])
    def test_bad_dims_rejected(self, dims):
        with pytest.raises(ConfigurationError):
            nn.MlpSpec(dims)

    def test_bad_enums_rejected(self):
        with pytest.raises(ConfigurationError):
            nn.MlpSpec((2, 2), hidden_activation="gelu")
        with pytest.raises(ConfigurationError):
            nn.MlpSpec((2, 2), output_activation="relu")
        with pytest.raises(ConfigurationError):
            nn.MlpSpec((2, 2), init_scheme="orthogonal")

    @given(
        dims=st.lists(st.integers(1, 7), min_size=2, max_size=5),
        seed=st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=50, deadline=None)
    def test_flatten_unflatten_round_trip(self, dims, seed):
        spec = nn.MlpSpec(tuple(dims))
        params = nn.init_mlp(spec, seed)
        rebuilt = nn.flatten(spec, nn.unflatten(params))
        assert np.array_equal(rebuilt, params.flat)


class TestInit:
    def test_deterministic_in_seed(self):
        spec = nn.MlpSpec((2, 3, 1))
        a = nn.init_mlp(spec, 7)
        b = nn.init_mlp(spec, 7)
        assert np.array_equal(a.flat, b.flat)
        assert not np.array_equal(a.flat, nn.init_mlp(spec, 8).flat)

    def test_biases_zero(self):
        params = nn.init_mlp(nn.MlpSpec((4, 5, 2)), 0)
        for _, b in nn.unflatten(params):
            assert np.all(b == 0.0)

    def test_he_variance_first_layer(self):
        spec = nn.MlpSpec((40, 50, 50, 50, 50, 5), init_scheme="he")
        w0, _ = nn.unflatten(nn.init_mlp(spec, 123))[0]
        assert w0.size >= 2000
        assert abs(w0.var() - 2.0 / 40) <= 0.15 * (2.0 / 40)

    def test_xavier_variance_first_layer(self):
        spec = nn.MlpSpec((40, 50, 50, 5), init_scheme="xavier")
        w0, _ = nn.unflatten(nn.init_mlp(spec, 9))[0]
        assert abs(w0.var() - 2.0 / 90) <= 0.15 * (2.0 / 90)


class TestForward:
    def test_zero_params_linear_gives_zero(self):
        spec = nn.MlpSpec((3, 4, 2), output_activation="linear")
        params = nn.MlpParams(spec, np.zeros(nn.param_count(spec)))
        assert np.array_equal(nn.forward(params, np.ones(3)), np.zeros(2))

    def test_zero_params_sigmoid_gives_half(self):
        spec = nn.MlpSpec((3, 4, 2), output_activation="sigmoid")
        params = nn.MlpParams(spec, np.zeros(nn.param_count(spec)))
        assert np.allclose(nn.forward(params, np.ones(3)), 0.5)

    def test_single_layer_identity(self):
        spec = nn.MlpSpec((1, 1), output_activation="linear")
        params = nn.MlpParams(spec, np.array([1.0, 0.0]))
        assert nn.forward(params, np.array([3.0]))[0] == 3.0

    def test_dim_mismatch_rejected(self):
        params = nn.init_mlp(nn.MlpSpec((3, 2)), 0)
        with pytest.raises(InputError):
            nn.forward(params, np.ones(4))

    @pytest.mark.parametrize("act,lo,hi", [("sigmoid", 0.0, 1.0), ("tanh", -1.0, 1.0)])
    def test_bounded_outputs(self, rng, act, lo, hi):
        # saturated gates round to the endpoints in float64, so the sup-norm
        # bound is the closed interval; moderate inputs stay strictly inside
        spec = nn.MlpSpec((3, 6, 4), output_activation=act)
        for _ in range(20):
            params = random_params(spec, rng, scale=5.0)
            out = nn.forward(params, rng.uniform(-10, 10, 3))
            assert np.all(out >= lo) and np.all(out <= hi)
        mild = random_params(spec, rng, scale=0.3)
        out = nn.forward(mild, rng.uniform(-1, 1, 3))
        assert np.all(out > lo) and np.all(out < hi)


class TestBackward:
    def test_zero_out_grad_gives_zero(self, rng):
        spec = nn.MlpSpec((3, 4, 2))
        params = random_params(spec, rng)
        g = nn.backward(params, rng.uniform(-1, 1, 3), np.zeros(2))
        assert np.all(g == 0.0)

    def test_linear_one_by_one_by_hand(self):
        # forward = w*a + b, so d/dw = a, d/db = 1
        spec = nn.MlpSpec((1, 1), output_activation="linear")
        params = nn.MlpParams(spec, np.array([0.7, 0.2]))
        g = nn.backward(params, np.array([3.5]), np.array([1.0]))
        assert np.allclose(g, [3.5, 1.0])

    def test_matches_finite_differences(self, rng):
        worst = 0.0
        for _ in range(15):
            n_layers = int(rng.integers(2, 5))
            dims = tuple(int(rng.integers(1, 9)) for _ in range(n_layers))
            spec = nn.MlpSpec(
                dims,
                hidden_activation=str(rng.choice(["relu", "tanh"])),
                output_activation=str(rng.choice(["sigmoid", "tanh", "linear"])),
            )
            params = random_params(spec, rng)
            x = rng.uniform(-1, 1, dims[0])
            out_grad = rng.uniform(-1, 1, dims[-1])
            analytic = nn.backward(params, x, out_grad)
            numeric = gradcheck.fd_backward(params, x, out_grad)
            worst = max(worst, gradcheck.relative_error(analytic, numeric))
        assert worst < 1e-6

    def test_shape_mismatch_rejected(self, rng):
        params = random_params(nn.MlpSpec((3, 2)), rng)
        with pytest.raises(InputError):
            nn.backward(params, np.ones(3), np.ones(3))


class TestAdam:
    def test_zero_grads_are_a_fixed_point(self):
        spec = nn.MlpSpec((2, 2))
        params = nn.init_mlp(spec, 3)
        state = nn.adam_init(params.flat.size)
        p = params
        for _ in range(5):
            state, p = nn.adam_step(state, p, np.zeros(p.flat.size))
        assert np.array_equal(p.flat, params.flat)

    def test_first_step_collapses_to_lr_sign(self):
        spec = nn.MlpSpec((1, 1))
        params = nn.MlpParams(spec, np.zeros(2))
        state = nn.adam_init(2)
        _, p = nn.adam_step(state, params, np.array([2.0, 0.0]))
        assert p.flat[0] == pytest.approx(-0.001 * 2.0 / (2.0 + 1e-8), abs=1e-15)
        assert p.flat[1] == 0.0

    def test_two_step_trajectory_matches_hand_recurrence(self):
        lr, b1, b2, eps = 0.001, 0.9, 0.999, 1e-8

        def hand(theta, g1, g2):
            m = (1 - b1) * g1
            v = (1 - b2) * g1 * g1
            theta = theta - lr * (m / (1 - b1)) / (math.sqrt(v / (1 - b2)) + eps)
            m = b1 * m + (1 - b1) * g2
            v = b2 * v + (1 - b2) * g2 * g2
            theta = theta - lr * (m / (1 - b1**2)) / (math.sqrt(v / (1 - b2**2)) + eps)
            return theta

        spec = nn.MlpSpec((1, 1))
        p = nn.MlpParams(spec, np.array([0.5, -0.3]))
        state = nn.adam_init(2)
        state, p = nn.adam_step(state, p, np.array([1.0, 0.3]))
        state, p = nn.adam_step(state, p, np.array([1.0, -0.2]))
        assert p.flat[0] == pytest.approx(hand(0.5, 1.0, 1.0), abs=1e-12)
        assert p.flat[1] == pytest.approx(hand(-0.3, 0.3, -0.2), abs=1e-12)

    def test_state_invariants(self):
        with pytest.raises(InputError):
            nn.AdamState(m=np.zeros(2), v=np.zeros(3))
        with pytest.raises(InputError):
            nn.AdamState(m=np.zeros(2), v=np.zeros(2), t=-1)

    def test_length_mismatch_rejected(self):
        params = nn.init_mlp(nn.MlpSpec((2, 2)), 0)
        with pytest.raises(InputError):
            nn.adam_step(nn.adam_init(3), params, np.zeros(params.flat.size))


class TestNorms:
    def test_zero_params_zero_norm(self):
        spec = nn.MlpSpec((2, 3, 1))
        assert nn.param_l2_norm(nn.MlpParams(spec, np.zeros(13))) == 0.0

    def test_three_four_five(self):
        spec = nn.MlpSpec((1, 1))
        assert nn.param_l2_norm(nn.MlpParams(spec, np.array([3.0, 4.0]))) == 5.0

    def test_projection_is_identity_inside_ball(self):
        spec = nn.MlpSpec((1, 1))
        params = nn.MlpParams(spec, np.array([3.0, 4.0]))
        assert np.array_equal(nn.project_to_ball(params, 6.0).flat, params.flat)

    def test_projection_rescales_onto_sphere(self):
        spec = nn.MlpSpec((1, 1))
        params = nn.MlpParams(spec, np.array([3.0, 4.0]))
        projected = nn.project_to_ball(params, 1.0)
        assert nn.param_l2_norm(projected) == pytest.approx(1.0)
        assert np.allclose(projected.flat, [0.6, 0.8])

    def test_projection_rejects_bad_radius(self):
        params = nn.MlpParams(nn.MlpSpec((1, 1)), np.array([1.0, 1.0]))
        with pytest.raises(InputError):
            nn.project_to_ball(params, 0.0)
