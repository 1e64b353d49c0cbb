"""
Tests for the Gaussian-kernel filters of the monitored oscillator.
"""

import logging
import math

import numpy as np
import pytest

from sme_manifolds.exceptions import IntegrationFailure, InvalidArgumentError
from sme_manifolds.gauss import (
    FluorescenceKernelState, InitialWignerHandle, XpKernelState, XpParameters, fluorescence_filter,
    fluorescence_params, fluorescence_reduced, fluorescence_riccati_residual, moments,
    reduced_reference, sme_oscillator_model, suggest_truncation, xp_closed_form, xp_filter,
)
from sme_manifolds.ops import quadratures
from sme_manifolds.sme import simulate


class TestFluorescenceClosedForms:

    @pytest.mark.parametrize("eta,n_th", [(1.0, 0.0), (0.8, 0.0), (0.8, 2.3), (0.3, 0.5)])
    def test_initial_values(self, eta, n_th):
        a, s, d = fluorescence_params(eta, n_th, 0.0)
        assert a == pytest.approx(1.0)
        assert s == pytest.approx(0.0, abs=1e-14)
        assert d == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("eta,n_th", [(1.0, 0.0), (0.8, 2.3), (0.3, 0.5)])
    def test_riccati_residual(self, eta, n_th):
        t = np.linspace(0.01, 3.0, 60)
        assert fluorescence_riccati_residual(eta, n_th, t) < 1e-7

    def test_stationary_limit(self):
        a, s, d = fluorescence_params(0.8, 0.0, 40.0)
        assert a == pytest.approx(0.0, abs=1e-12)
        assert s == pytest.approx(0.5)
        assert d == pytest.approx(-2 * 0.8 / (2 - 0.8))

    def test_vectorized(self):
        a, s, d = fluorescence_params(0.5, 0.1, np.array([0.0, 0.5, 1.0]))
        assert a.shape == s.shape == d.shape == (3,)

    @pytest.mark.parametrize("eta,n_th", [(0.0, 0.0), (1.2, 0.0), (0.5, -1.0)])
    def test_invalid_parameters(self, eta, n_th):
        with pytest.raises(InvalidArgumentError):
            fluorescence_params(eta, n_th, 1.0)


class TestFluorescenceFilter:

    def test_zero_record_keeps_linear_terms_zero(self):
        state = fluorescence_filter(np.zeros((100, 2)), 1e-3, 0.8)[0]
        assert isinstance(state, FluorescenceKernelState)
        assert state.t == pytest.approx(0.1)
        assert (state.xi, state.theta, state.pi, state.phi) == (0.0, 0.0, 0.0, 0.0)

    def test_snapshot_selection(self):
        states = fluorescence_filter(np.zeros((10, 2)), 0.1, 0.8, snapshot_steps=[0, 5, 10])
        np.testing.assert_allclose([s.t for s in states], [0.0, 0.5, 1.0])

    def test_non_finite_record_is_logged_and_raised(self, caplog):
        dy = np.zeros((10, 2))
        dy[3, 0] = np.inf
        with caplog.at_level(logging.ERROR, logger="sme_manifolds.gauss"):
            with pytest.raises(IntegrationFailure) as err:
                fluorescence_filter(dy, 0.1, 0.8)
        assert err.value.time == pytest.approx(0.3)
        assert any("diverged" in r.getMessage() for r in caplog.records)

    def test_reduced_combinations_ignore_the_record(self, rng):
        dt, n = 1e-3, 1000
        dy = rng.standard_normal((n, 2)) * math.sqrt(dt)
        state = fluorescence_filter(dy, dt, 0.8, u=0.5, v=0.2)[0]
        z, h = fluorescence_reduced(state)
        z_ref, h_ref = reduced_reference(1.0, dt, u=0.5, v=0.2)
        assert z == pytest.approx(z_ref, abs=1e-2)
        assert h == pytest.approx(h_ref, abs=1e-2)

    def test_reduced_reference(self):
        z, h = reduced_reference(1.0, 1e-3, u=0.5, v=0.0)
        assert z == 0.0
        assert h == pytest.approx(-0.5 * (1 - math.exp(-1.0)), abs=1e-10)


class TestXpKernel:

    @pytest.mark.parametrize("params", [
        XpParameters(gamma_x=1.0, gamma_p=0.5, gamma_l=0.3, eta_x=0.7, eta_p=0.9),
        XpParameters(gamma_x=1.0, gamma_p=1.0, gamma_l=0.2, eta_x=0.6, eta_p=0.6, delta=0.8, n_th=0.4),
        XpParameters(gamma_x=1.0, gamma_p=0.0, eta_x=1.0),
    ])
    def test_closed_form_matches_integration(self, params):
        state = xp_filter(np.zeros((1000, 2)), 1e-3, params)[0]
        closed = xp_closed_form(params, 1.0)
        assert isinstance(state, XpKernelState)
        np.testing.assert_allclose(state.S, closed['S'], atol=1e-6)
        np.testing.assert_allclose(state.Z, closed['Z'], atol=1e-6)
        np.testing.assert_allclose(state.A, closed['A'], atol=1e-6)
        np.testing.assert_allclose(state.R, closed['R'], atol=1e-6)

    def test_closed_form_needs_decoupled_blocks(self):
        params = XpParameters(gamma_x=1.0, gamma_p=0.5, delta=0.3)
        with pytest.raises(InvalidArgumentError):
            xp_closed_form(params, 1.0)

    def test_rotation_matrices_are_symmetric(self):
        params = XpParameters(gamma_x=1.0, gamma_p=0.4, eta_x=0.5, delta=0.7)
        for t in (0.0, 0.3, 1.1):
            np.testing.assert_allclose(params.m_matrix(t), params.m_matrix(t).T)
            assert np.trace(params.n_matrix(t)) == pytest.approx(1.4)

    @pytest.mark.parametrize("kwargs", [{'gamma_x': -1.0, 'gamma_p': 1.0},
                                        {'gamma_x': 1.0, 'gamma_p': 1.0, 'eta_p': 1.5}])
    def test_invalid_parameters(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            XpParameters(**kwargs)

    def test_serialization(self):
        data = XpKernelState.initial(XpParameters(gamma_x=1.0, gamma_p=1.0)).to_dict()
        assert data['A'] == [1.0, 0.0]
        assert data['R'] == [0.0, 1.0]


class TestInitialWigner:

    @pytest.mark.parametrize("handle", [
        InitialWignerHandle(kind='coherent', alpha=1 + 0.5j),
        InitialWignerHandle(kind='cat', alpha=2.0),
        InitialWignerHandle(kind='thermal', n_bar=0.5),
        InitialWignerHandle(kind='fock', n=2),
    ])
    def test_normalized_on_grid(self, handle):
        X0, P0, cell = handle.quadrature_grid()
        assert np.sum(handle.wigner(X0, P0)) * cell == pytest.approx(1.0, abs=1e-4)

    def test_cat_needs_amplitude(self):
        with pytest.raises(InvalidArgumentError):
            InitialWignerHandle(kind='cat', alpha=0.0)

    def test_grid_needs_samples(self):
        with pytest.raises(InvalidArgumentError):
            InitialWignerHandle(kind='grid')

    def test_initial_kernel_moments_are_the_state_moments(self):
        handle = InitialWignerHandle(kind='coherent', alpha=1 + 0.5j)
        m = moments(FluorescenceKernelState.initial(0.8), handle)
        assert m.mean_x == pytest.approx(1.0, abs=1e-4)
        assert m.mean_p == pytest.approx(0.5, abs=1e-4)
        assert m.var_x == pytest.approx(0.25, abs=1e-4)
        assert m.var_p == pytest.approx(0.25, abs=1e-4)
        assert m.cov_xp == pytest.approx(0.0, abs=1e-4)


class TestAgainstFockSimulation:

    @staticmethod
    def _assert_moments_match(m, rho, n_max, tol=5e-2):
        X, P = quadratures(n_max)
        mx = np.real(np.trace(X @ rho))
        mp = np.real(np.trace(P @ rho))
        assert m.mean_x == pytest.approx(mx, abs=tol)
        assert m.mean_p == pytest.approx(mp, abs=tol)
        assert m.var_x == pytest.approx(np.real(np.trace(X @ X @ rho)) - mx ** 2, abs=tol)
        assert m.var_p == pytest.approx(np.real(np.trace(P @ P @ rho)) - mp ** 2, abs=tol)
        cov = np.real(np.trace((X @ P + P @ X) @ rho)) / 2 - mx * mp
        assert m.cov_xp == pytest.approx(cov, abs=tol)

    def _fluorescence(self, T, dt, seed):
        handle = InitialWignerHandle(kind='coherent', alpha=1.0)
        n_max = 20
        model = sme_oscillator_model('fluorescence', {'eta': 0.8}, n_max, initial=handle)
        rec = simulate(model, handle.density(n_max), T, dt, seed=seed, n_traj=1)[0]
        state = fluorescence_filter(rec.dy, dt, 0.8)[0]
        self._assert_moments_match(moments(state, handle), rec.snapshots[-1], n_max)

    def _xp(self, T, dt, seed):
        handle = InitialWignerHandle(kind='coherent', alpha=0.5 - 0.5j)
        n_max = 20
        params = {'gamma_x': 1.0, 'gamma_p': 0.5, 'eta_x': 0.9, 'eta_p': 0.7}
        model = sme_oscillator_model('xp', params, n_max, initial=handle)
        rec = simulate(model, handle.density(n_max), T, dt, seed=seed, n_traj=1)[0]
        state = xp_filter(rec.dy, dt, XpParameters(**params))[0]
        self._assert_moments_match(moments(state, handle), rec.snapshots[-1], n_max)

    def test_fluorescence_moments_track_the_sme(self):
        self._fluorescence(0.5, 1e-3, seed=21)

    @pytest.mark.slow
    def test_fluorescence_moments_track_the_sme_fine_grid(self):
        self._fluorescence(1.0, 1e-4, seed=21)

    def test_xp_moments_track_the_sme(self):
        self._xp(0.5, 1e-3, seed=5)

    @pytest.mark.slow
    def test_xp_moments_track_the_sme_fine_grid(self):
        self._xp(1.0, 1e-4, seed=5)

    def test_deterministic_parameters_agree_across_seeds(self):
        handle = InitialWignerHandle(kind='coherent', alpha=1.0)
        model = sme_oscillator_model('fluorescence', {'eta': 0.8}, 15, initial=handle)
        records = simulate(model, handle.density(15), 0.2, 1e-3, seed=3, n_traj=3)
        states = [fluorescence_filter(rec.dy, 1e-3, 0.8)[0] for rec in records]
        assert len({(s.a, s.s, s.d) for s in states}) == 1
        assert len({s.xi for s in states}) == 3

        params = XpParameters(gamma_x=1.0, gamma_p=0.5, eta_x=0.9, eta_p=0.7)
        xp_states = [xp_filter(rec.dy, 1e-3, params)[0] for rec in records]
        for other in xp_states[1:]:
            np.testing.assert_array_equal(other.S, xp_states[0].S)
            np.testing.assert_array_equal(other.Z, xp_states[0].Z)
            np.testing.assert_array_equal(other.B, xp_states[0].B)


class TestOscillatorModels:

    def test_thermal_bath_channels(self):
        model = sme_oscillator_model('fluorescence', {'eta': 0.5, 'n_th': 1.0}, 10)
        assert [ch.label for ch in model.channels] == ["a", "ia", "bath-", "bath+"]
        assert [ch.eta for ch in model.channels] == [0.5, 0.5, 0.0, 0.0]

    def test_relaxation_channels(self):
        model = sme_oscillator_model('xp', {'gamma_x': 1.0, 'gamma_p': 1.0, 'gamma_l': 0.2, 'n_th': 0.5}, 10)
        assert [ch.label for ch in model.channels] == ["X", "P", "loss", "gain"]

    def test_unknown_kind(self):
        with pytest.raises(InvalidArgumentError):
            sme_oscillator_model('kerr', {}, 10)

    def test_truncation_guard_suggests_cutoff(self, caplog):
        handle = InitialWignerHandle(kind='coherent', alpha=3.0)
        suggestion = suggest_truncation(handle, 5)
        assert suggestion is not None and suggestion > 9
        with caplog.at_level(logging.WARNING, logger="sme_manifolds.gauss"):
            with pytest.raises(InvalidArgumentError, match="n_max >="):
                sme_oscillator_model('fluorescence', {'eta': 0.8}, 5, initial=handle)
        assert any(r.levelno == logging.WARNING and "n_max=5" in r.getMessage() for r in caplog.records)
        sme_oscillator_model('fluorescence', {'eta': 0.8}, suggestion, initial=handle)
