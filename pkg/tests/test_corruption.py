"""Cell-zeroing corruption and the 10x augmentation protocol."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from yieldfill.corruption import AugmentedDataset, CorruptionSpec, augment, corrupt, zero_count
from yieldfill.surface import YieldSurface


def _constant_surface(value=0.5):
    return YieldSurface(np.full((13, 15), value))


class TestCorrupt:
    def test_exact_zero_count_at_table_nu(self):
        spec = CorruptionSpec(nu=0.75, seed=11)
        masked = corrupt(_constant_surface(), spec, 0)
        zeros = int((masked.values == 0.0).sum())
        assert zeros == 146  # floor(0.75 * 195)
        assert masked.n_observed == 49
        assert not masked.observed.ravel()[masked.values.ravel() == 0.0].any()

    def test_nu_zero_is_identity(self):
        surface = _constant_surface(0.7)
        masked = corrupt(surface, CorruptionSpec(nu=0.0, seed=1), 5)
        np.testing.assert_array_equal(masked.values, surface.values)
        assert masked.observed.all()

    def test_deterministic_per_stream(self):
        spec = CorruptionSpec(nu=0.5, seed=9)
        a = corrupt(_constant_surface(), spec, 3)
        b = corrupt(_constant_surface(), spec, 3)
        np.testing.assert_array_equal(a.observed, b.observed)
        c = corrupt(_constant_surface(), spec, 4)
        assert (a.observed != c.observed).any()

    def test_survivors_bit_identical(self):
        rng = np.random.default_rng(0)
        values = rng.uniform(0.01, 1.0, (13, 15))
        surface = YieldSurface(values)
        masked = corrupt(surface, CorruptionSpec(nu=0.6, seed=2), 7)
        kept = masked.observed
        assert (masked.values[kept] == values[kept]).all()

    def test_min_survivors_guard(self):
        spec = CorruptionSpec(nu=0.99, seed=0, min_survivors=5)
        with pytest.raises(ValueError, match="fewer than 5"):
            corrupt(_constant_surface(), spec, 0)

    def test_incomplete_surface_rejected(self):
        values = np.full((13, 15), 0.5)
        values[0, 0] = np.nan
        with pytest.raises(ValueError, match="complete"):
            corrupt(YieldSurface(values), CorruptionSpec(nu=0.1, seed=0), 0)

    @settings(max_examples=40, deadline=None)
    @given(nu=st.floats(min_value=0.0, max_value=0.97))
    def test_zero_count_is_floor(self, nu):
        spec = CorruptionSpec(nu=nu, seed=4)
        masked = corrupt(_constant_surface(), spec, 1)
        assert int((~masked.observed).sum()) == int(np.floor(nu * 195))

    def test_survival_frequency_roughly_uniform(self):
        # quick version of the 10k-draw acceptance bound
        spec = CorruptionSpec(nu=0.5, seed=21)
        surface = _constant_surface()
        counts = np.zeros((13, 15))
        n = 2000
        for sid in range(n):
            counts += corrupt(surface, spec, sid).observed
        freq = counts / n
        assert freq.min() > 0.44 and freq.max() < 0.56


class TestAugment:
    def test_counts(self):
        surfaces = [_constant_surface(0.3 + 0.01 * k) for k in range(56)]
        out = augment(surfaces, CorruptionSpec(nu=0.75, seed=5), copies=10)
        assert len(out) == 560
        test_surfaces = [_constant_surface(0.3 + 0.01 * k) for k in range(7)]
        assert len(augment(test_surfaces, CorruptionSpec(nu=0.75, seed=5), copies=10)) == 70

    def test_targets_are_uncorrupted(self):
        surfaces = [_constant_surface(0.4)]
        out = augment(surfaces, CorruptionSpec(nu=0.5, seed=6), copies=3)
        for masked, target in out.examples:
            np.testing.assert_array_equal(target.values, surfaces[0].values)
            assert (~masked.observed).sum() == 97

    def test_identity_pairs_when_nu_zero(self):
        out = augment([_constant_surface(0.9)], CorruptionSpec(nu=0.0, seed=6), copies=1)
        masked, target = out.examples[0]
        np.testing.assert_array_equal(masked.values, target.values)

    def test_distinct_streams_per_copy(self):
        out = augment([_constant_surface()], CorruptionSpec(nu=0.5, seed=8), copies=4)
        patterns = {tuple(m.observed.ravel()) for m, _ in out.examples}
        assert len(patterns) == 4

    def test_pure_function_of_inputs(self):
        surfaces = [_constant_surface(0.2 + 0.1 * k) for k in range(3)]
        spec = CorruptionSpec(nu=0.4, seed=13)
        first = augment(surfaces, spec, copies=5)
        second = augment(surfaces, spec, copies=5)
        for (m1, t1), (m2, t2) in zip(first.examples, second.examples):
            np.testing.assert_array_equal(m1.values, m2.values)
            np.testing.assert_array_equal(m1.observed, m2.observed)
            np.testing.assert_array_equal(t1.values, t2.values)

    def test_copies_validation(self):
        with pytest.raises(ValueError):
            augment([_constant_surface()], CorruptionSpec(nu=0.1, seed=0), copies=0)

    def test_arrays_shapes(self):
        out = augment([_constant_surface()], CorruptionSpec(nu=0.1, seed=0), copies=2)
        assert out.inputs_array().shape == (2, 1, 13, 15)
        assert out.targets_array().shape == (2, 1, 13, 15)


class TestSpecValidation:
    def test_nu_range(self):
        with pytest.raises(ValueError):
            CorruptionSpec(nu=1.0, seed=0)
        with pytest.raises(ValueError):
            CorruptionSpec(nu=-0.1, seed=0)

    def test_zero_count_bound(self):
        spec = CorruptionSpec(nu=0.98, seed=0, min_survivors=5)
        with pytest.raises(ValueError):
            zero_count(spec, 195)
        assert zero_count(CorruptionSpec(nu=0.97, seed=0), 195) == 189
