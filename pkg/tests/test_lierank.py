"""
Tests for the Lie-algebra rank analysis.
"""

import numpy as np
import pytest

from sme_manifolds.exceptions import InvalidArgumentError
from sme_manifolds.fields import GField
from sme_manifolds.lierank import confinement_diagnostic, manifold_dimension, oscillator_support, rank_at
from sme_manifolds.multi.emission import emission_model
from sme_manifolds.ops import PAULI, random_density, random_unitary
from sme_manifolds.qnd import repetition_model
from sme_manifolds.scenarios import build_qutrit_qnd


class TestRankAt:

    def test_single_field(self, rng):
        rank, svals = rank_at([GField(PAULI['Z'])], random_density(2, rng))
        assert rank == 1
        assert svals.shape == (1,)

    def test_anti_hermitian_paulis_are_dependent(self, rng):
        fields = [GField(1j * PAULI[k]) for k in 'XYZ']
        rank, _ = rank_at(fields, random_density(2, rng))
        assert rank == 2

    def test_empty_field_list_rejected(self, rng):
        with pytest.raises(InvalidArgumentError):
            rank_at([], random_density(2, rng))


class TestManifoldDimension:

    @pytest.mark.parametrize("variant,expected", [("single", 1), ("two", 2), ("rabi", 4)])
    def test_qutrit_family(self, variant, expected):
        report = manifold_dimension(build_qutrit_qnd(variant).model)
        assert report.M == expected
        assert report.converged
        assert not any(report.ambiguous)

    @pytest.mark.parametrize("syndromes,expected", [((1, 2), 2), ((1, 2, 3), 3)])
    def test_repetition_code(self, syndromes, expected):
        report = manifold_dimension(repetition_model(0.8, syndromes=syndromes).model)
        assert report.M == expected
        assert report.converged

    def test_single_qubit_flips_close_at_four(self):
        code = repetition_model(0.8, gamma_flip=0.3, syndromes=(1, 3), flip_qubits=(1,))
        report = manifold_dimension(code.model)
        assert report.M == 4
        assert report.converged

    @pytest.mark.slow
    def test_bit_flips_on_all_qubits_keep_growing(self):
        code = repetition_model(0.8, gamma_flip=0.3, syndromes=(1, 2))
        report = manifold_dimension(code.model, max_depth=4)
        assert report.M > 4
        assert not report.converged
        assert report.lower_bound
        assert report.depth_reached == 4

    @pytest.mark.parametrize("eta1,eta2", [(1.0, 1.0), (0.9, 0.4)])
    def test_emission_equal_rates(self, eta1, eta2):
        report = manifold_dimension(emission_model(rate=2.0, eta1=eta1, eta2=eta2))
        assert report.M == 2

    def test_emission_unequal_rates_expand(self):
        report = manifold_dimension(emission_model(rate=2.0, rate2=4.0))
        assert report.M > 2

    def test_report_serialization(self):
        data = manifold_dimension(build_qutrit_qnd('single').model).to_dict()
        assert data['M'] == 1
        assert data['lower_bound'] is False
        assert len(data['generators']) == 1
        assert len(data['ranks']) == 5

    def test_same_seed_same_points(self):
        model = build_qutrit_qnd('two').model
        a = manifold_dimension(model, seed=4)
        b = manifold_dimension(model, seed=4)
        for pa, pb in zip(a.sample_points, b.sample_points):
            np.testing.assert_array_equal(pa, pb)

    @pytest.mark.parametrize("variant", ["two", "rabi"])
    def test_invariant_under_change_of_basis(self, variant, rng):
        model = build_qutrit_qnd(variant).model
        rotated = model.conjugated(random_unitary(model.dim, rng))
        assert manifold_dimension(rotated).M == manifold_dimension(model).M

    @pytest.mark.parametrize("kwargs", [{'n_points': 2}, {'max_depth': 0}])
    def test_invalid_arguments(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            manifold_dimension(build_qutrit_qnd('single').model, **kwargs)


class TestSupport:

    def test_oscillator_support_avoids_top_levels(self):
        support = oscillator_support([2, 5], oscillator_factor=1, margin=2)
        assert support == [0, 1, 2, 5, 6, 7]


class TestConfinementDiagnostic:

    def test_spread_and_absent_values(self):
        snaps = [np.diag([p, 1 - p]).astype(complex) for p in np.linspace(0.1, 0.9, 60)]

        def coords(rho):
            p = float(np.real(rho[0, 0]))
            return [1.0, p, None if p > 0.5 else p]

        stats = confinement_diagnostic(snaps, coords, names=['const', 'p', 'half'])
        assert stats['const']['std'] == 0.0
        assert stats['p']['std'] > 0.2
        assert stats['p']['count'] == 60
        assert stats['half']['count'] == 30
