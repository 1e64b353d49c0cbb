"""
Tests for QND invariants, explicit populations and the repetition code.
"""

import numpy as np
import pytest

from sme_manifolds.exceptions import InvalidArgumentError
from sme_manifolds.qnd import (
    QndModel, alpha_sigma2, beta_basis, coherence_decay_rate, divided_difference_alpha,
    heterodyne_phase_state, invariants_of, level_pairs, mixed_ratio_rate, number_quadruple_alpha,
    populations_explicit, position_posterior, posterior_center, posterior_width, repetition_conserved_z,
    repetition_model, z_alpha_basis,
)
from sme_manifolds.sme import simulate

QUTRIT_LAM = [0.0, 1.0, 1.8]


@pytest.fixture
def qutrit_qnd():
    return QndModel(lam=[QUTRIT_LAM], eta=[0.8])


@pytest.fixture
def number_qnd():
    return QndModel(lam=[list(range(7))], eta=[0.7])


class TestQndModel:

    def test_efficiency_count_must_match(self):
        with pytest.raises(InvalidArgumentError):
            QndModel(lam=[QUTRIT_LAM], eta=[0.5, 0.5])

    def test_efficiency_range(self):
        with pytest.raises(InvalidArgumentError):
            QndModel(lam=[QUTRIT_LAM], eta=[1.2])

    def test_basis_must_be_orthonormal(self):
        with pytest.raises(InvalidArgumentError):
            QndModel(lam=[QUTRIT_LAM], eta=[0.5], basis=2 * np.eye(3))

    def test_heterodyne_appends_partners(self, qutrit_qnd):
        het = QndModel(lam=[QUTRIT_LAM], eta=[0.8], heterodyne=True, partner_eta=[0.3])
        model = het.to_scenario()
        assert [ch.label for ch in model.channels] == ["L1", "iL1"]
        np.testing.assert_allclose(model.channels[1].L, 1j * np.diag(QUTRIT_LAM))
        assert model.channels[1].eta == pytest.approx(0.3)

    def test_rotated_basis(self):
        u = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
        qnd = QndModel(lam=[[1.0, -1.0]], eta=[1.0], basis=u)
        np.testing.assert_allclose(qnd.operators()[0], np.array([[0, 1], [1, 0]]), atol=1e-12)


class TestExponents:

    def test_single_channel_qutrit_has_one_product(self, qutrit_qnd):
        basis = z_alpha_basis(qutrit_qnd)
        assert len(basis) == 1
        alpha, s2 = basis[0]
        assert alpha.sum() == pytest.approx(0.0, abs=1e-12)
        assert alpha @ np.array(QUTRIT_LAM) == pytest.approx(0.0, abs=1e-12)
        assert s2 >= 0

    def test_two_channels_leave_no_product(self):
        qnd = QndModel(lam=[QUTRIT_LAM, [0.0, 1.0, 0.2]], eta=[0.8, 0.8])
        assert z_alpha_basis(qnd) == []

    def test_equally_spaced_quadruple_is_constant(self, number_qnd):
        alpha = number_quadruple_alpha((1, 2, 4, 5), 7)
        assert alpha.sum() == 0
        assert alpha_sigma2(number_qnd, alpha) == pytest.approx(0.0)

    def test_unequal_quadruple_drifts(self, number_qnd):
        alpha = number_quadruple_alpha((0, 1, 3, 6), 7)
        assert alpha_sigma2(number_qnd, alpha) != pytest.approx(0.0)

    def test_divided_difference_kills_quadratics(self, number_qnd):
        alpha = divided_difference_alpha((0, 1, 3, 6), 7)
        n = np.arange(7)
        assert alpha.sum() == pytest.approx(0.0, abs=1e-12)
        assert alpha @ n == pytest.approx(0.0, abs=1e-12)
        assert alpha_sigma2(number_qnd, alpha) == pytest.approx(0.0, abs=1e-12)

    def test_divided_difference_needs_distinct_levels(self):
        with pytest.raises(InvalidArgumentError):
            divided_difference_alpha((0, 1, 1, 3), 4)

    def test_coherence_decay_rate(self, qutrit_qnd):
        assert coherence_decay_rate(qutrit_qnd, 0, 2) == pytest.approx(0.2 * 1.8 ** 2)
        perfect = QndModel(lam=[QUTRIT_LAM], eta=[1.0])
        assert coherence_decay_rate(perfect, 0, 1) == 0.0


class TestInvariantValues:

    def test_pure_state_ratios_are_one(self, qutrit_qnd, qutrit_rho0):
        inv = invariants_of(qutrit_qnd, qutrit_rho0)
        for value in inv.coherence_ratios.values():
            assert value == pytest.approx(1.0)
        assert set(inv.flat()) == {'phase_0_1', 'phase_0_2', 'phase_1_2', 'c_0_1', 'c_0_2', 'c_1_2', 'logz_0'}

    def test_empty_level_makes_entries_absent(self, qutrit_qnd):
        rho = np.diag([0.5, 0.5, 0.0]).astype(complex)
        inv = invariants_of(qutrit_qnd, rho)
        assert inv.coherence_ratios[(0, 2)] is None
        assert inv.phases[(1, 2)] is None
        assert inv.log_z == [None]

    def test_phase_continuation(self, qutrit_qnd):
        rho = np.eye(3, dtype=complex) / 3
        rho[0, 1] = 0.1 * np.exp(-3.1j)
        rho[1, 0] = np.conj(rho[0, 1])
        previous = invariants_of(qutrit_qnd, rho)
        previous.phases[(0, 1)] = 3.1
        inv = invariants_of(qutrit_qnd, rho, previous=previous)
        assert inv.phases[(0, 1)] == pytest.approx(2 * np.pi - 3.1)


class TestExplicitPopulations:

    def test_zero_time_returns_initial(self, qutrit_qnd):
        pops0 = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(populations_explicit(qutrit_qnd, pops0, np.zeros(1), 0.0), pops0)

    def test_two_level_ratio(self):
        qnd = QndModel(lam=[[1.0, -1.0]], eta=[0.6])
        y, t = 0.3, 0.2
        p = populations_explicit(qnd, np.array([0.4, 0.6]), np.array([y]), t)
        expected = (0.4 / 0.6) * np.exp(2 * (2 * np.sqrt(0.6) * y))
        assert p[0] / p[1] == pytest.approx(expected)

    def test_invalid_inputs(self, qutrit_qnd):
        with pytest.raises(InvalidArgumentError):
            populations_explicit(qutrit_qnd, np.array([0.2, 0.3, 0.5]), np.zeros(1), -1.0)
        with pytest.raises(InvalidArgumentError):
            populations_explicit(qutrit_qnd, np.zeros(3), np.zeros(1), 1.0)


class TestTrajectoryLaws:

    @pytest.fixture
    def records(self, qutrit_qnd, qutrit_rho0):
        return simulate(qutrit_qnd.to_scenario(), qutrit_rho0, 0.1, 1e-4, seed=8, n_traj=3,
                        snapshot_times=[0.05, 0.1])

    def test_phases_are_frozen(self, qutrit_qnd, qutrit_rho0, records):
        start = invariants_of(qutrit_qnd, qutrit_rho0)
        for rec in records:
            for snap in rec.snapshots:
                inv = invariants_of(qutrit_qnd, snap)
                for pair in level_pairs(3):
                    assert inv.phases[pair] == pytest.approx(start.phases[pair], abs=5e-3)

    def test_coherence_ratios_decay_deterministically(self, qutrit_qnd, qutrit_rho0, records):
        start = invariants_of(qutrit_qnd, qutrit_rho0)
        for rec in records:
            for t, snap in zip(rec.times, rec.snapshots):
                inv = invariants_of(qutrit_qnd, snap)
                for a, b in level_pairs(3):
                    law = np.log(start.coherence_ratios[(a, b)]) - coherence_decay_rate(qutrit_qnd, a, b) * t
                    assert np.log(inv.coherence_ratios[(a, b)]) == pytest.approx(law, abs=5e-2)

    def test_mixed_ratio_decays_at_the_combined_rate(self, qutrit_qnd, qutrit_rho0, records):
        alpha, _ = z_alpha_basis(qutrit_qnd)[0]
        start = invariants_of(qutrit_qnd, qutrit_rho0, [alpha])
        rate = mixed_ratio_rate(qutrit_qnd, 0, 2, alpha, 0.5)
        assert rate == pytest.approx(coherence_decay_rate(qutrit_qnd, 0, 2) + alpha_sigma2(qutrit_qnd, alpha))
        for rec in records:
            for t, snap in zip(rec.times, rec.snapshots):
                inv = invariants_of(qutrit_qnd, snap, [alpha])
                combined = (np.log(inv.coherence_ratios[(0, 2)] / start.coherence_ratios[(0, 2)])
                            + 0.5 * (inv.log_z[0] - start.log_z[0]))
                assert combined == pytest.approx(-rate * t, abs=5e-2)

    def test_populations_follow_the_integrated_signal(self, qutrit_qnd, qutrit_rho0, records):
        for rec in records:
            y = rec.integrated_output()
            for t, step, snap in zip(rec.times, rec.snapshot_steps, rec.snapshots):
                predicted = populations_explicit(qutrit_qnd, qutrit_rho0, y[step], t)
                np.testing.assert_allclose(np.real(np.diag(snap)), predicted, atol=2e-2)


class TestHeterodyne:

    @pytest.fixture
    def het(self):
        return QndModel(lam=[QUTRIT_LAM], eta=[0.8], heterodyne=True, partner_eta=[0.5])

    def test_beta_basis_annihilates_differences(self, het):
        beta = beta_basis(het)
        diffs = np.array([QUTRIT_LAM[a] - QUTRIT_LAM[b] for a, b in level_pairs(3)])
        assert beta.shape == (3, 2)
        np.testing.assert_allclose(diffs @ beta, 0, atol=1e-12)

    def test_homodyne_leaves_all_phases_free(self, qutrit_qnd):
        np.testing.assert_allclose(beta_basis(qutrit_qnd), np.eye(3))

    def test_phase_walk_matches_partner_record(self, het, qutrit_rho0):
        rec = simulate(het.to_scenario(), qutrit_rho0, 0.05, 1e-4, seed=2, n_traj=1,
                       snapshot_times=[0.025, 0.05])[0]
        report = heterodyne_phase_state(het, rec)
        assert report.gamma.shape == (2, 1)
        assert report.max_residual < 5e-2

    def test_needs_heterodyne_model(self, qutrit_qnd, qutrit_rho0):
        rec = simulate(qutrit_qnd.to_scenario(), qutrit_rho0, 0.01, 1e-3, seed=0, n_traj=1)[0]
        with pytest.raises(InvalidArgumentError):
            heterodyne_phase_state(qutrit_qnd, rec)


class TestPositionPosterior:

    def test_width_and_center(self):
        assert posterior_width(0.25, 1.0) == pytest.approx(1.0)
        assert posterior_center(0.5, 0.25, 1.0) == pytest.approx(1.0)

    def test_flat_prior_gives_gaussian(self):
        x = np.linspace(-6, 6, 1201)
        p = position_posterior(np.ones_like(x), x, y=0.5, t=0.25, eta=1.0)
        assert p.sum() == pytest.approx(1.0)
        mean = np.sum(x * p)
        var = np.sum((x - mean) ** 2 * p)
        assert mean == pytest.approx(1.0, abs=1e-6)
        assert var == pytest.approx(1.0, rel=1e-3)

    def test_matches_explicit_populations_on_grid(self):
        x = np.linspace(-2, 2, 21)
        p0 = np.exp(-x ** 4 / 3) * (1.2 + np.sin(x))
        p0 /= p0.sum()
        qnd = QndModel(lam=[x], eta=[0.7])
        expected = populations_explicit(qnd, p0, np.array([0.4]), 0.5)
        np.testing.assert_allclose(position_posterior(p0, x, y=0.4, t=0.5, eta=0.7), expected,
                                   rtol=0, atol=1e-10)

    def test_log_curvature_shift(self):
        eta, t = 0.7, 0.5
        x = np.linspace(-2, 2, 81)
        h = x[1] - x[0]
        p0 = np.exp(-x ** 4 / 3) * (1.2 + np.sin(x))
        p0 /= p0.sum()
        log0 = np.log(p0)
        logt = np.log(position_posterior(p0, x, y=0.3, t=t, eta=eta))
        d2 = lambda f: (f[2:] - 2 * f[1:-1] + f[:-2]) / h ** 2
        np.testing.assert_allclose(d2(logt) - d2(log0), -4 * eta * t, atol=1e-6)
        # third differences see no change
        np.testing.assert_allclose(np.diff(logt, 3), np.diff(log0, 3), atol=1e-9)

    def test_zero_time_keeps_prior(self):
        x = np.linspace(0, 1, 5)
        p0 = np.array([0.1, 0.2, 0.3, 0.2, 0.2])
        np.testing.assert_array_equal(position_posterior(p0, x, 1.0, 0.0, 1.0), p0)

    def test_non_uniform_grid_rejected(self):
        x = np.array([0.0, 0.1, 0.3, 0.4])
        with pytest.raises(InvalidArgumentError):
            position_posterior(np.ones(4), x, 0.0, 1.0, 1.0)


class TestRepetitionCode:

    def test_syndrome_signatures(self):
        code = repetition_model(0.8)
        assert code.signature(0) == (1, 1, 1)
        assert code.signature(1) == (1, -1, -1)
        assert code.signature(3) == (-1, -1, 1)

    def test_flips_add_unmonitored_channels(self):
        code = repetition_model(0.8, gamma_flip=0.3, syndromes=(1, 2))
        assert [ch.label for ch in code.model.channels] == ["L1", "L2", "flip1", "flip2", "flip3"]
        assert all(ch.eta == 0 for ch in code.model.channels[2:])

    @pytest.mark.parametrize("kwargs", [{'eta': 1.5}, {'eta': 0.5, 'gamma_flip': -0.1}])
    def test_invalid_parameters(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            repetition_model(**kwargs)

    def test_projectors_partition_identity(self):
        code = repetition_model(0.8)
        np.testing.assert_allclose(sum(code.projectors.values()), np.eye(8))

    def test_conserved_z(self):
        d = np.zeros(8)
        d[0b000], d[0b010], d[0b001], d[0b100] = 0.4, 0.2, 0.1, 0.3
        d[0b111] = 0.0
        assert repetition_conserved_z(np.diag(d)) == pytest.approx(0.4 * 0.2 / (0.1 * 0.3))
        d[0b001] = 0.0
        assert repetition_conserved_z(np.diag(d)) is None

    def test_qnd_view(self):
        qnd = repetition_model(0.8, syndromes=(1, 3)).qnd()
        assert qnd.n_base == 2
        assert qnd.n_levels == 8
