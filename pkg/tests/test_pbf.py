"""Fourier transform core, checked against brute-force summation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fourspin import pbf


def direct_spectrum(values, n_sites):
    """Reference transform: explicit sum over configurations per subset."""
    states = pbf.enumerate_states(n_sites)
    coeff = np.empty(2**n_sites)
    for mask in range(2**n_sites):
        chi = pbf.parity(states, mask)
        coeff[mask] = np.mean(values * chi)
    return coeff


class TestEnumeration:
    def test_states_are_spins(self):
        states = pbf.enumerate_states(4)
        assert states.shape == (16, 4)
        assert set(np.unique(states)) == {-1, 1}

    def test_states_roundtrip_encoding(self):
        states = pbf.enumerate_states(5)
        assert np.array_equal(pbf.encode_states(states), np.arange(32))

    def test_limit_refusal(self):
        with pytest.raises(pbf.EnumerationLimitError):
            pbf.enumerate_states(25, limit=20)

    def test_subset_order_scalar_and_array(self):
        assert pbf.subset_order(0b1011) == 3
        assert np.array_equal(
            pbf.subset_order(np.asarray([0, 1, 3, 7])), [0, 1, 2, 3]
        )

    def test_subset_sites(self):
        assert np.array_equal(pbf.subset_sites(0b100101), [0, 2, 5])

    def test_parity_rejects_non_spins(self):
        with pytest.raises(ValueError):
            pbf.parity(np.asarray([0.5, 1.0]), 1)


class TestTransform:
    def test_fwht_involution(self, rng):
        v = rng.standard_normal(64)
        assert np.allclose(pbf.fwht(pbf.fwht(v)), 64 * v, atol=1e-12)

    def test_fwht_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            pbf.fwht(np.zeros(12))

    def test_matches_direct_summation(self, rng):
        values = rng.standard_normal(2**6)
        spec = pbf.fast_transform(values)
        assert np.allclose(
            spec.coefficients, direct_spectrum(values, 6), atol=1e-12
        )

    def test_single_coefficient_reference(self, rng):
        values = rng.standard_normal(2**5)
        spec = pbf.fast_transform(values)
        for mask in (0, 1, 0b101, 0b11111):
            direct = pbf.fourier_coefficient_direct(values, 5, mask)
            assert spec.coefficient(mask) == pytest.approx(direct, abs=1e-12)

    def test_roundtrip(self, rng):
        values = rng.standard_normal(2**7)
        back = pbf.inverse_transform(pbf.fast_transform(values))
        assert np.allclose(back, values, atol=1e-12)

    def test_parity_function_spectrum(self):
        mask = 0b1101
        states = pbf.enumerate_states(5)
        spec = pbf.fast_transform(pbf.parity(states, mask))
        expected = np.zeros(32)
        expected[mask] = 1.0
        assert np.allclose(spec.coefficients, expected, atol=1e-12)

    def test_parseval(self, rng):
        values = rng.standard_normal(2**6)
        spec = pbf.fast_transform(values)
        assert spec.squared_norm() == pytest.approx(np.mean(values**2), rel=1e-12)

    def test_plancherel(self, rng):
        f = rng.standard_normal(2**6)
        g = rng.standard_normal(2**6)
        lhs = np.dot(
            pbf.fast_transform(f).coefficients, pbf.fast_transform(g).coefficients
        )
        assert lhs == pytest.approx(pbf.inner_product(f, g, 6), rel=1e-12)

    def test_callable_input(self):
        spec = pbf.fast_transform(lambda s: s[..., 0] * s[..., 2], 4)
        assert spec.coefficient(0b0101) == pytest.approx(1.0)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_roundtrip_property(self, seed):
        values = np.random.default_rng(seed).standard_normal(2**4)
        back = pbf.inverse_transform(pbf.fast_transform(values))
        assert np.allclose(back, values, atol=1e-12)

    @given(st.integers(0, 2**32 - 1), st.floats(-5, 5), st.floats(-5, 5))
    @settings(max_examples=25, deadline=None)
    def test_linearity(self, seed, a, b):
        gen = np.random.default_rng(seed)
        f, g = gen.standard_normal((2, 2**4))
        combined = pbf.fast_transform(a * f + b * g).coefficients
        parts = (
            a * pbf.fast_transform(f).coefficients
            + b * pbf.fast_transform(g).coefficients
        )
        assert np.allclose(combined, parts, atol=1e-9)

    def test_constant_shift_moves_only_empty_subset(self, rng):
        values = rng.standard_normal(2**5)
        base = pbf.fast_transform(values).coefficients
        shifted = pbf.fast_transform(values + 2.5).coefficients
        assert shifted[0] == pytest.approx(base[0] + 2.5, abs=1e-12)
        assert np.allclose(shifted[1:], base[1:], atol=1e-12)


class TestInfluence:
    def influence_by_derivative(self, values, n_sites, site):
        """Reference: mean squared discrete derivative in coordinate i."""
        flipped = values[np.arange(2**n_sites) ^ (1 << site)]
        return float(np.mean(((values - flipped) / 2.0) ** 2))

    def test_matches_derivative_definition(self, rng):
        values = rng.standard_normal(2**6)
        spec = pbf.fast_transform(values)
        for site in range(6):
            assert pbf.influence(spec, site) == pytest.approx(
                self.influence_by_derivative(values, 6, site), abs=1e-12
            )

    def test_total_is_degree_weighted_weight(self, rng):
        values = rng.standard_normal(2**6)
        spec = pbf.fast_transform(values)
        orders = spec.orders()
        expected = float(np.sum(orders * spec.coefficients**2))
        assert pbf.total_influence(spec) == pytest.approx(expected, rel=1e-12)
        assert pbf.total_influence(spec) == pytest.approx(
            np.sum(pbf.influences(spec)), rel=1e-12
        )

    def test_weight_bound(self, rng):
        values = rng.standard_normal(2**6)
        spec = pbf.fast_transform(values)
        total = pbf.total_influence(spec)
        for order in range(1, 7):
            assert pbf.spectral_weight_above(spec, order) <= total / order + 1e-12

    def test_weight_bound_tight_on_homogeneous(self, rng):
        coeff = np.zeros(2**6)
        masks = [m for m in range(2**6) if pbf.subset_order(m) == 3]
        coeff[masks] = rng.standard_normal(len(masks))
        spec = pbf.FourierSpectrum(6, coeff)
        assert pbf.spectral_weight_above(spec, 3) == pytest.approx(
            pbf.total_influence(spec) / 3, rel=1e-12
        )

    def test_dictator_function(self):
        states = pbf.enumerate_states(4)
        spec = pbf.fast_transform(states[:, 2].astype(np.float64))
        assert pbf.influence(spec, 2) == pytest.approx(1.0)
        assert pbf.total_influence(spec) == pytest.approx(1.0)


class TestMaskEnumeration:
    def test_dense_matches_sparse(self):
        for order in (1, 2, 3):
            dense = pbf.masks_up_to_order(10, order)
            sparse = pbf.masks_up_to_order_sparse(10, order)
            assert np.array_equal(dense, sparse)

    def test_sparse_avoids_dense_limit(self):
        masks = pbf.masks_up_to_order_sparse(40, 2)
        assert len(masks) == 40 + 40 * 39 // 2
        assert masks.dtype == np.int64

    def test_excludes_empty_set(self):
        assert 0 not in pbf.masks_up_to_order(6, 2)

    def test_none_gives_all_nonempty(self):
        masks = pbf.masks_up_to_order(5, None)
        assert np.array_equal(masks, np.arange(1, 32))


class TestSubsetVector:
    def test_sorted_unique_masks_required(self):
        with pytest.raises(ValueError):
            pbf.SubsetVector(4, np.asarray([3, 1]), np.asarray([0.0, 1.0]))

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            pbf.SubsetVector(4, np.asarray([0, 1]), np.asarray([0.0, 1.0]))

    def test_order_norms(self):
        vec = pbf.SubsetVector(
            4, np.asarray([1, 2, 3]), np.asarray([3.0, 4.0, 2.0])
        )
        norms = vec.order_norms()
        assert norms[0] == pytest.approx(5.0)
        assert norms[1] == pytest.approx(2.0)

    def test_csv_roundtrip(self, rng):
        masks = pbf.masks_up_to_order(5, 2)
        vec = pbf.SubsetVector(5, masks, rng.standard_normal(len(masks)))
        back = pbf.SubsetVector.from_csv(vec.to_csv())
        assert back.n_sites == 5
        assert np.array_equal(back.masks, vec.masks)
        assert np.array_equal(back.values, vec.values)

    def test_json_roundtrip(self, rng):
        masks = pbf.masks_up_to_order(5, 3)
        vec = pbf.SubsetVector(5, masks, rng.standard_normal(len(masks)))
        back = pbf.SubsetVector.from_json(vec.to_json())
        assert np.array_equal(back.values, vec.values)


class TestEnergyExpansion:
    def test_couplings_negate_energy_spectrum(self, rng):
        energy = rng.standard_normal(2**5)
        coup = pbf.effective_couplings_from_energy(energy, 5)
        spec = pbf.fast_transform(energy)
        for mask, value in zip(coup.masks, coup.values):
            assert value == pytest.approx(-spec.coefficient(int(mask)), abs=1e-12)

    def test_expansion_reproduces_energy(self, rng):
        energy = rng.standard_normal(2**5)
        coup = pbf.effective_couplings_from_energy(energy, 5)
        states = pbf.enumerate_states(5)
        rebuilt = np.mean(energy) - pbf.evaluate_subset_expansion(coup, states)
        assert np.allclose(rebuilt, energy, atol=1e-12)
