"""Layer engine: forward semantics, analytic gradients, batch-norm behavior."""
import numpy as np
import pytest

import oracles
from yieldfill import nn
from yieldfill.exceptions import ShapeError, StateError
from yieldfill.rng import stream


def make_net(layers, in_shape):
    return nn.Network(layers, in_shape)


class TestForwardSemantics:
    def test_identity_dense_then_relu(self):
        dense = nn.Dense(2, 2)
        dense.params[0][...] = np.eye(2)
        net = make_net([dense, nn.ReLU()], (2,))
        out = net.forward(np.array([[1.0, -2.0]]))
        np.testing.assert_array_equal(out, [[1.0, 0.0]])

    def test_sigmoid_of_zeros(self):
        net = make_net([nn.Sigmoid()], (3,))
        np.testing.assert_array_equal(net.forward(np.zeros((2, 3))), np.full((2, 3), 0.5))

    def test_maxpool_2x2(self):
        net = make_net([nn.MaxPool2x2()], (1, 2, 2))
        out = net.forward(np.array([[[[1.0, 2.0], [3.0, 4.0]]]]))
        np.testing.assert_array_equal(out, [[[[4.0]]]])

    def test_maxpool_ceil_mode_on_surface_dims(self):
        net = make_net([nn.MaxPool2x2()], (1, 13, 15))
        assert net.output_shape == (1, 7, 8)

    def test_upsample_nearest(self):
        net = make_net([nn.Upsample2x2()], (1, 1, 2))
        out = net.forward(np.array([[[[1.0, 2.0]]]]))
        np.testing.assert_array_equal(out[0, 0], [[1, 1, 2, 2], [1, 1, 2, 2]])

    def test_pad_replicates_edges(self):
        net = make_net([nn.Pad(3, 4)], (1, 1, 2))
        out = net.forward(np.array([[[[1.0, 2.0]]]]))
        np.testing.assert_array_equal(
            out[0, 0], [[1, 1, 2, 2], [1, 1, 2, 2], [1, 1, 2, 2]]
        )

    def test_pad_then_crop_identity(self):
        gen = stream(1, "padcrop")
        x = gen.normal(0, 1, (3, 1, 13, 15))
        net = make_net([nn.Pad(16, 16), nn.Crop(13, 15)], (1, 13, 15))
        np.testing.assert_array_equal(net.forward(x), x)

    def test_relu_nonnegative_sigmoid_bounded(self):
        gen = stream(2, "ranges")
        x = gen.normal(0, 3, (4, 10))
        relu_out = make_net([nn.ReLU()], (10,)).forward(x)
        sig_out = make_net([nn.Sigmoid()], (10,)).forward(x)
        assert (relu_out >= 0).all()
        assert ((sig_out > 0) & (sig_out < 1)).all()

    def test_conv_matches_direct_convolution(self):
        gen = stream(3, "convref")
        conv = nn.Conv3x3(2, 3, rng=gen)
        x = gen.normal(0, 1, (2, 2, 5, 6))
        out = make_net([conv], (2, 5, 6)).forward(x)
        weight, bias = conv.params
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        expected = np.zeros_like(out)
        for b in range(2):
            for o in range(3):
                for i in range(5):
                    for j in range(6):
                        patch = xp[b, :, i:i + 3, j:j + 3]
                        expected[b, o, i, j] = (patch * weight[o]).sum() + bias[o]
        np.testing.assert_allclose(out, expected, atol=1e-12)


class TestShapeAlgebra:
    def test_incompatible_stack_rejected_at_construction(self):
        with pytest.raises(ShapeError):
            make_net([nn.Dense(4, 5), nn.Dense(6, 2)], (4,))

    def test_input_shape_checked_at_forward(self):
        net = make_net([nn.Dense(4, 2)], (4,))
        with pytest.raises(ShapeError):
            net.forward(np.zeros((1, 5)))

    def test_backward_without_forward_is_state_error(self):
        net = make_net([nn.Dense(4, 2)], (4,))
        with pytest.raises(StateError):
            net.backward(np.zeros((1, 2)))
        net.forward(np.zeros((1, 4)), train=False)  # inference leaves no caches
        with pytest.raises(StateError):
            net.backward(np.zeros((1, 2)))

    def test_crop_pad_bounds(self):
        with pytest.raises(ShapeError):
            make_net([nn.Crop(14, 15)], (1, 13, 15))
        with pytest.raises(ShapeError):
            make_net([nn.Pad(12, 15)], (1, 13, 15))


class TestGradients:
    def test_every_layer_kind_against_finite_differences(self):
        gen = stream(4, "layers")
        cases = {
            "dense": ([nn.Dense(6, 5, rng=gen)], (6,)),
            "conv3x3": ([nn.Conv3x3(2, 3, rng=gen)], (2, 4, 5)),
            "maxpool": ([nn.Conv3x3(1, 2, rng=gen), nn.MaxPool2x2()], (1, 5, 7)),
            "upsample": ([nn.Conv3x3(1, 2, rng=gen), nn.Upsample2x2()], (1, 3, 4)),
            "batchnorm2d": ([nn.Dense(4, 6, rng=gen), nn.BatchNorm(6)], (4,)),
            "batchnorm4d": ([nn.Conv3x3(2, 3, rng=gen), nn.BatchNorm(3)], (2, 4, 4)),
            "relu": ([nn.Dense(5, 8, rng=gen), nn.ReLU(), nn.Dense(8, 3, rng=gen)], (5,)),
            "sigmoid": ([nn.Dense(5, 4, rng=gen), nn.Sigmoid()], (5,)),
            "crop": ([nn.Conv3x3(1, 2, rng=gen), nn.Crop(3, 4)], (1, 6, 7)),
            "pad": ([nn.Conv3x3(1, 2, rng=gen), nn.Pad(8, 9)], (1, 5, 6)),
            "flatten_reshape": (
                [nn.Flatten(), nn.Dense(12, 12, rng=gen), nn.Reshape(1, 3, 4)],
                (1, 3, 4),
            ),
        }
        for name, (layers, in_shape) in cases.items():
            net = make_net(layers, in_shape)
            x = gen.normal(0, 1, (4,) + in_shape)
            target = gen.normal(0, 1, (4,) + net.output_shape)
            err = nn.gradient_check(net, x, target)
            assert err < 1e-4, f"{name}: rel err {err}"

    def test_zero_loss_gradient_gives_zero_parameter_gradients(self):
        gen = stream(5, "zero")
        net = make_net([nn.Dense(4, 3, rng=gen), nn.ReLU(), nn.BatchNorm(3)], (4,))
        out = net.forward(gen.normal(0, 1, (3, 4)), train=True)
        grads = net.backward(np.zeros_like(out))
        np.testing.assert_array_equal(grads, np.zeros_like(grads))

    def test_dense_weight_gradient_closed_form(self):
        # single example, linear net: dL/dW = outer(x, dL/dy)
        net = make_net([nn.Dense(2, 2)], (2,))
        net.layers[0].params[0][...] = [[0.3, -0.2], [0.5, 0.7]]
        x = np.array([[1.5, -0.5]])
        target = np.array([[0.0, 1.0]])
        out = net.forward(x, train=True)
        loss, loss_grad = nn.mse_loss(out, target)
        net.backward(loss_grad)
        expected = np.outer(x[0], loss_grad[0])
        np.testing.assert_allclose(net.layers[0].grads[0], expected, atol=1e-14)

    def test_linear_net_quadratic_loss_near_exact(self):
        # central differences are exact for cubics; only roundoff remains
        gen = stream(6, "quad")
        net = make_net([nn.Dense(5, 3, rng=gen)], (5,))
        x = gen.normal(0, 1, (4, 5))
        target = gen.normal(0, 1, (4, 3))
        assert nn.gradient_check(net, x, target) < 1e-8


class TestBatchNorm:
    def test_train_mode_normalizes(self):
        gen = stream(7, "bn")
        bn = nn.BatchNorm(6)
        x = gen.normal(3.0, 2.5, (64, 6))
        out = bn.forward(x, train=True)  # gamma=1, beta=0 at init
        assert np.abs(out.mean(axis=0)).max() <= 1e-9
        assert np.abs(out.var(axis=0) - 1.0).max() <= 1e-6

    def test_running_stats_converge_for_constant_batches(self):
        gen = stream(8, "bnrun")
        bn = nn.BatchNorm(4)
        x = gen.normal(-1.0, 0.7, (32, 4))
        for _ in range(1500):  # 0.99^1500 ~ 3e-7 of the initial stats remain
            bn.forward(x, train=True)
        np.testing.assert_allclose(bn.buffers[0], x.mean(axis=0), atol=1e-3)
        np.testing.assert_allclose(bn.buffers[1], x.var(axis=0), atol=1e-3)

    def test_inference_uses_running_stats(self):
        bn = nn.BatchNorm(3)
        bn.buffers[0][...] = [1.0, 2.0, 3.0]
        bn.buffers[1][...] = [4.0, 4.0, 4.0]
        x = np.array([[3.0, 2.0, 1.0]])
        out = bn.forward(x, train=False)
        np.testing.assert_allclose(out, [[1.0, 0.0, -1.0]], atol=1e-7)

    def test_channelwise_on_4d(self):
        gen = stream(9, "bn4")
        bn = nn.BatchNorm(2)
        x = gen.normal(5.0, 3.0, (8, 2, 6, 7))
        out = bn.forward(x, train=True)
        assert np.abs(out.mean(axis=(0, 2, 3))).max() <= 1e-9
        assert np.abs(out.var(axis=(0, 2, 3)) - 1.0).max() <= 1e-6
