"""Autoencoder architectures, the training objective, random search."""
import dataclasses

import numpy as np
import pytest

from yieldfill import dae, nn
from yieldfill.corruption import AugmentedDataset, CorruptionSpec, augment
from yieldfill.exceptions import ConfigError, DivergenceError
from yieldfill.rng import stream
from yieldfill.surface import ScalingTransform, YieldSurface

SCALING = ScalingTransform(8.0)


def constant_surfaces(n, base=0.4, step=0.01):
    return [YieldSurface(np.full((13, 15), base + step * k)) for k in range(n)]


def smooth_surfaces(n, seed=0):
    gen = stream(seed, "smooth")
    i = np.arange(13)[:, None] / 12.0
    j = np.arange(15)[None, :] / 14.0
    out = []
    for _ in range(n):
        a, b, c = gen.uniform(0.2, 0.4), gen.uniform(0.1, 0.3), gen.uniform(0.05, 0.2)
        out.append(YieldSurface(a + b * i + c * np.sqrt(j + 0.1)))
    return out


class TestBuilders:
    def test_fcnn_parameter_count_formula(self):
        net = dae.build_fcnn(dae.FcnnConfig(hidden_width=256))
        expected = (195 * 256 + 256) + 2 * 256 + (256 * 195 + 195)
        assert net.n_params == expected == 100803

    def test_fcnn_boundary_width_accepted(self):
        assert dae.build_fcnn(dae.FcnnConfig(hidden_width=195)).n_params > 0

    def test_fcnn_undercomplete_rejected(self):
        with pytest.raises(ConfigError, match="overcomplete"):
            dae.FcnnConfig(hidden_width=100)

    def test_cnn_output_shape_for_all_block_counts(self):
        for blocks, filters in ((1, (4,)), (2, (8, 8)), (3, (4, 8, 4))):
            net = dae.build_cnn(
                dae.CnnConfig(conv_blocks=blocks, filters_per_block=filters)
            )
            assert net.output_shape == (1, 13, 15)

    def test_cnn_fewer_parameters_than_fcnn(self):
        cnn = dae.build_cnn(dae.CnnConfig())
        fcnn = dae.build_fcnn(dae.FcnnConfig(hidden_width=256))
        assert cnn.n_params < fcnn.n_params

    def test_minimal_cnn_builds_and_gradchecks(self):
        net = dae.build_cnn(dae.CnnConfig(conv_blocks=1, filters_per_block=(1,)))
        gen = stream(21, "mincnn")
        x = gen.uniform(0, 1, (2, 1, 13, 15))
        t = gen.uniform(0, 1, (2, 1, 13, 15))
        assert nn.gradient_check(net, x, t) < 1e-4

    def test_cnn_config_validation(self):
        with pytest.raises(ConfigError):
            dae.CnnConfig(conv_blocks=4, filters_per_block=(1, 1, 1, 1))
        with pytest.raises(ConfigError):
            dae.CnnConfig(conv_blocks=2, filters_per_block=(8,))

    def test_reconstruction_range_is_sigmoid_scaled(self):
        model = dae.TrainedModel(
            network=dae.build_fcnn(dae.FcnnConfig(seed=3)),
            scaling=SCALING,
            config={},
            kind="fcnn",
            final_train_loss=0.0,
        )
        masked = augment(constant_surfaces(1), CorruptionSpec(0.5, seed=2), 1).examples[0][0]
        out = dae.reconstruct(model, masked)
        assert out.is_complete
        assert (out.values > 0).all() and (out.values < SCALING.factor).all()


class TestTraining:
    def test_identity_pairs_learnable(self):
        surfaces = constant_surfaces(10)
        train_set = augment(surfaces, CorruptionSpec(nu=0.0, seed=1), copies=1)
        cfg = dae.FcnnConfig(hidden_width=195, epochs=200, seed=4)
        model = dae.train("fcnn", cfg, train_set, SCALING)
        assert model.final_train_loss < 1e-3

    def test_progress_over_epochs_across_seeds(self):
        surfaces = smooth_surfaces(6)
        first, last = [], []
        for seed in range(5):
            train_set = augment(surfaces, CorruptionSpec(nu=0.5, seed=seed), copies=2)
            cfg = dae.FcnnConfig(epochs=12, seed=seed)
            model = dae.train("fcnn", cfg, train_set, SCALING)
            first.append(model.loss_history[0])
            last.append(model.loss_history[-1])
        assert np.mean(last) <= np.mean(first)

    def test_same_seed_identical_parameters(self):
        surfaces = smooth_surfaces(4)
        train_set = augment(surfaces, CorruptionSpec(nu=0.5, seed=9), copies=2)
        cfg = dae.CnnConfig(epochs=3, seed=11)
        a = dae.train("cnn", cfg, train_set, SCALING)
        b = dae.train("cnn", cfg, train_set, SCALING)
        np.testing.assert_array_equal(
            a.network.param_vector(), b.network.param_vector()
        )

    def test_loss_is_against_uncorrupted_targets(self):
        # swapping targets for the corrupted inputs must change the loss
        surfaces = smooth_surfaces(3)
        train_set = augment(surfaces, CorruptionSpec(nu=0.5, seed=5), copies=1)
        net = dae.build_fcnn(dae.FcnnConfig(seed=6))
        inputs = train_set.inputs_array()
        targets = train_set.targets_array()
        out = net.forward(inputs)
        clean_loss, _ = nn.mse_loss(out, targets)
        corrupted_loss, _ = nn.mse_loss(out, inputs)
        assert clean_loss != corrupted_loss

    def test_divergence_guard(self):
        surfaces = smooth_surfaces(3)
        train_set = augment(surfaces, CorruptionSpec(nu=0.5, seed=7), copies=1)
        cfg = dae.FcnnConfig(epochs=20, learning_rate=1e6, seed=8)
        with pytest.raises(DivergenceError) as info:
            dae.train("fcnn", cfg, train_set, SCALING)
        assert info.value.last_good_params is not None

    def test_early_stopping_restores_best(self):
        surfaces = smooth_surfaces(8)
        train_set = augment(surfaces[:6], CorruptionSpec(nu=0.5, seed=10), copies=2)
        val_set = augment(surfaces[6:], CorruptionSpec(nu=0.5, seed=11), copies=2)
        cfg = dae.FcnnConfig(epochs=40, seed=12)
        model = dae.train("fcnn", cfg, train_set, SCALING, val_set=val_set, patience=5)
        assert model.val_history
        val_inputs = val_set.inputs_array()
        val_targets = val_set.targets_array()
        loss, _ = nn.mse_loss(model.network.forward(val_inputs), val_targets)
        assert loss == pytest.approx(min(model.val_history), rel=1e-9)


class TestRandomSearch:
    def _sets(self):
        surfaces = smooth_surfaces(6)
        train_set = augment(surfaces[:5], CorruptionSpec(nu=0.5, seed=1), copies=2)
        val_set = augment(surfaces[5:], CorruptionSpec(nu=0.5, seed=2), copies=2)
        return train_set, val_set

    def test_single_trial_returns_sampled_config(self):
        train_set, val_set = self._sets()
        space = dae.SearchSpace(epochs=2)
        best, log = dae.random_search(
            "fcnn", space, train_set, val_set, SCALING, trials=1, seed=42
        )
        assert best == dae.sample_config("fcnn", space, 42, 0)
        assert len(log) == 1

    def test_point_space_returns_that_point(self):
        train_set, val_set = self._sets()
        space = dae.SearchSpace(
            learning_rate=(1e-3, 1e-3),
            decay=(0.0, 0.0),
            batch_size=(16,),
            hidden_width=(195,),
            epochs=2,
        )
        best, _ = dae.random_search(
            "fcnn", space, train_set, val_set, SCALING, trials=3, seed=0
        )
        assert best.learning_rate == 1e-3
        assert best.hidden_width == 195
        assert best.batch_size == 16

    def test_best_no_worse_than_median(self):
        train_set, val_set = self._sets()
        space = dae.SearchSpace(epochs=2)
        best, log = dae.random_search(
            "cnn", space, train_set, val_set, SCALING, trials=6, seed=3
        )
        losses = sorted(mse for mse, _ in log)
        best_mse = min(mse for mse, _ in log)
        assert best_mse <= np.median(losses)

    def test_empty_space_rejected(self):
        with pytest.raises(ConfigError):
            dae.SearchSpace(batch_size=())
        with pytest.raises(ConfigError):
            dae.random_search(
                "fcnn", dae.SearchSpace(epochs=1),
                AugmentedDataset((), 1), AugmentedDataset((), 1), SCALING,
                trials=0, seed=0,
            )


class TestModelPersistence:
    def test_save_load_round_trip(self, tmp_path):
        surfaces = smooth_surfaces(3)
        train_set = augment(surfaces, CorruptionSpec(nu=0.5, seed=13), copies=1)
        cfg = dae.CnnConfig(epochs=2, seed=14)
        model = dae.train("cnn", cfg, train_set, SCALING)
        path = tmp_path / "model.bin"
        sidecar = dae.save_model(model, path)
        assert sidecar.exists()
        loaded = dae.load_model(path)
        assert loaded.kind == "cnn"
        assert loaded.scaling.factor == SCALING.factor
        assert loaded.config == dataclasses.asdict(cfg)
        x = train_set.inputs_array()
        np.testing.assert_array_equal(
            loaded.network.forward(x), model.network.forward(x)
        )
