"""
Tests for the stochastic master equation integrator and the Lindblad reference.
"""

import numpy as np
import pytest

from sme_manifolds.exceptions import IntegrationFailure, InvalidArgumentError
from sme_manifolds.models.scenario import MeasurementChannel, ScenarioModel, compensated_cumsum
from sme_manifolds.ops import PAULI, annihilation, coherent_ket, projector, purity, validate_density
from sme_manifolds.sme import (
    coarsen_noise, ensemble_mean, filter_apply, lindblad_propagate, lindblad_trajectory,
    measurement_means, run_trajectory, sample_noise, simulate, snapshot_grid, step_ito,
    trajectory_rng,
)


@pytest.fixture
def qutrit_model():
    L = np.diag([0.0, 1.0, 1.8]).astype(complex)
    H = np.zeros((3, 3), dtype=complex)
    H[0, 1] = H[1, 0] = 1.35
    return ScenarioModel(H=H, channels=[MeasurementChannel(L=L, eta=0.8, label="L")], name="qutrit")


@pytest.fixture
def qubit_model():
    return ScenarioModel(H=0.5 * PAULI['X'], channels=[MeasurementChannel(L=PAULI['Z'], eta=0.6)])


class TestGrid:

    def test_snapshot_indices(self):
        n_steps, times, steps = snapshot_grid(0.3, 1e-3, [0.3, 0.1])
        assert n_steps == 300
        np.testing.assert_allclose(times, [0.1, 0.3])
        np.testing.assert_array_equal(steps, [100, 300])

    def test_default_snapshot_is_final_time(self):
        _, times, steps = snapshot_grid(1.0, 0.25, None)
        np.testing.assert_allclose(times, [1.0])
        np.testing.assert_array_equal(steps, [4])

    @pytest.mark.parametrize("T,dt,snaps", [
        (1.0, 0.3, None),
        (1.0, 0.1, [0.55]),
        (1.0, 0.1, [1.5]),
        (-1.0, 0.1, None),
        (1.0, 0.0, None),
    ])
    def test_invalid_grids_rejected(self, T, dt, snaps):
        with pytest.raises(InvalidArgumentError):
            snapshot_grid(T, dt, snaps)


class TestNoise:

    def test_substreams_are_reproducible_and_distinct(self):
        a = sample_noise(trajectory_rng(5, 0), 10, 2, 0.01)
        b = sample_noise(trajectory_rng(5, 0), 10, 2, 0.01)
        c = sample_noise(trajectory_rng(5, 1), 10, 2, 0.01)
        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, c)

    def test_coarsening_sums_blocks(self):
        dw = np.arange(12, dtype=float).reshape(6, 2)
        np.testing.assert_allclose(coarsen_noise(dw, 3), [[6, 9], [24, 27]])

    def test_coarsening_needs_divisor(self):
        with pytest.raises(InvalidArgumentError):
            coarsen_noise(np.zeros((5, 1)), 2)

    def test_compensated_cumsum(self):
        inc = np.random.default_rng(0).standard_normal((1000, 2)) * 1e-3
        out = compensated_cumsum(inc)
        assert out.shape == (1001, 2)
        np.testing.assert_array_equal(out[0], 0)
        np.testing.assert_allclose(out[1:], np.cumsum(inc, axis=0), atol=1e-14)


class TestStep:

    def test_output_increment_is_signal_plus_noise(self, qubit_model):
        rho = np.diag([0.7, 0.3]).astype(complex)
        dt = 1e-3
        _, dy = step_ito(qubit_model, rho, 0.0, dt, [0.01])
        mean = measurement_means(qubit_model, rho)[0]
        assert dy[0] == pytest.approx(np.sqrt(0.6) * mean * dt + 0.01)

    def test_step_rejects_wrong_noise_length(self, qubit_model):
        with pytest.raises(InvalidArgumentError):
            step_ito(qubit_model, np.eye(2) / 2, 0.0, 1e-3, [0.0, 0.0])

    def test_step_rejects_nonpositive_dt(self, qubit_model):
        with pytest.raises(InvalidArgumentError):
            step_ito(qubit_model, np.eye(2) / 2, 0.0, 0.0, [0.0])


class TestTrajectories:

    def test_states_remain_valid(self, qutrit_model, qutrit_rho0):
        records = simulate(qutrit_model, qutrit_rho0, 0.3, 1e-3, seed=1, n_traj=5,
                           snapshot_times=[0.1, 0.2, 0.3])
        for rec in records:
            for rho in rec.snapshots:
                validate_density(rho)

    def test_same_seed_gives_identical_ensembles(self, qutrit_model, qutrit_rho0):
        a = simulate(qutrit_model, qutrit_rho0, 0.1, 1e-3, seed=3, n_traj=4)
        b = simulate(qutrit_model, qutrit_rho0, 0.1, 1e-3, seed=3, n_traj=4, n_workers=2)
        for ra, rb in zip(a, b):
            np.testing.assert_array_equal(ra.snapshots, rb.snapshots)
            np.testing.assert_array_equal(ra.dy, rb.dy)

    def test_filter_replay_is_bit_identical(self, qutrit_model, qutrit_rho0):
        rec = simulate(qutrit_model, qutrit_rho0, 0.2, 1e-3, seed=11, n_traj=1,
                       snapshot_times=[0.1, 0.2])[0]
        np.testing.assert_array_equal(filter_apply(qutrit_model, qutrit_rho0, rec), rec.snapshots)

    def test_filter_rejects_foreign_record(self, qutrit_model, qubit_model, qutrit_rho0):
        rec = simulate(qutrit_model, qutrit_rho0, 0.01, 1e-3, seed=0, n_traj=1)[0]
        two_channel = ScenarioModel(H=np.zeros((3, 3)), channels=list(qutrit_model.channels) * 2)
        with pytest.raises(InvalidArgumentError):
            filter_apply(two_channel, qutrit_rho0, rec)

    def test_integrated_output(self, qutrit_model, qutrit_rho0):
        rec = simulate(qutrit_model, qutrit_rho0, 0.05, 1e-3, seed=2, n_traj=1)[0]
        y = rec.integrated_output()
        assert y.shape == (51, 1)
        np.testing.assert_allclose(rec.output_at(20), y[20])
        with pytest.raises(InvalidArgumentError):
            rec.output_at(51)

    def test_unmonitored_channel_follows_lindblad(self, qutrit_rho0):
        L = np.diag([0.0, 1.0, 1.8]).astype(complex)
        model = ScenarioModel(H=np.zeros((3, 3)), channels=[MeasurementChannel(L=L, eta=0.0)])
        rec = simulate(model, qutrit_rho0, 0.3, 1e-4, seed=0, n_traj=1)[0]
        np.testing.assert_allclose(rec.snapshots[-1], lindblad_propagate(model, qutrit_rho0, 0.3, 1e-4),
                                   atol=1e-4)

    def test_failures_become_error_records(self):
        L = 1e200 * PAULI['Z']
        model = ScenarioModel(H=np.zeros((2, 2)), channels=[MeasurementChannel(L=L, eta=1.0)])
        rho0 = np.eye(2, dtype=complex) / 2
        with np.errstate(all='ignore'):
            with pytest.raises(IntegrationFailure) as info:
                simulate(model, rho0, 0.01, 1e-3, seed=0, n_traj=1)
            assert info.value.trajectory == 0
            records = simulate(model, rho0, 0.01, 1e-3, seed=0, n_traj=2, keep_failures=True)
        assert all(r.failed for r in records)
        assert records[0].snapshots.shape[0] == 0

    def test_replay_of_noise_at_two_resolutions(self, qubit_model):
        rho0 = np.eye(2, dtype=complex) / 2
        dw = sample_noise(trajectory_rng(0, 0), 400, 1, 2.5e-4)
        fine = run_trajectory(qubit_model, rho0, 0.1, 2.5e-4, dw)
        coarse = run_trajectory(qubit_model, rho0, 0.1, 1e-3, coarsen_noise(dw, 4))
        np.testing.assert_allclose(fine.snapshots[-1], coarse.snapshots[-1], atol=5e-2)


class TestAccuracy:

    @pytest.fixture
    def homodyne_mode_model(self):
        n_max = 8
        return ScenarioModel(H=np.zeros((n_max + 1, n_max + 1), dtype=complex),
                             channels=[MeasurementChannel(L=annihilation(n_max), eta=1.0)])

    @pytest.fixture
    def coherent_rho0(self):
        return projector(coherent_ket(0.8, 8))

    def test_pure_states_stay_pure_at_unit_efficiency(self, homodyne_mode_model, coherent_rho0):
        records = simulate(homodyne_mode_model, coherent_rho0, 0.3, 1e-4, seed=8, n_traj=3,
                           snapshot_times=[0.1, 0.2, 0.3])
        for rec in records:
            for rho in rec.snapshots:
                assert purity(rho) > 1 - 5e-3

    @pytest.mark.slow
    def test_pure_states_stay_pure_fine_grid(self, homodyne_mode_model, coherent_rho0):
        records = simulate(homodyne_mode_model, coherent_rho0, 1.0, 1e-5, seed=8, n_traj=2,
                           snapshot_times=[0.25, 0.5, 0.75, 1.0])
        for rec in records:
            for rho in rec.snapshots:
                assert purity(rho) >= 1 - 1e-3

    def test_strong_error_halves_when_dt_quarters(self, qutrit_model, qutrit_rho0):
        T, dt, n_paths = 0.2, 4e-3, 24
        finest = dt / 64
        coarse_err, fine_err = [], []
        for i in range(n_paths):
            dw = sample_noise(trajectory_rng(5, i), int(round(T / finest)), 1, finest)

            def final(step):
                factor = int(round(step / finest))
                rec = run_trajectory(qutrit_model, qutrit_rho0, T, step, coarsen_noise(dw, factor))
                return rec.snapshots[-1]

            coarse_err.append(np.linalg.norm(final(dt) - final(dt / 16)) ** 2)
            fine_err.append(np.linalg.norm(final(dt / 4) - final(dt / 64)) ** 2)
        ratio = np.sqrt(np.mean(coarse_err) / np.mean(fine_err))
        assert ratio >= 1.8


class TestMartingale:

    def _compare(self, model, rho0, n_traj, dt, slack):
        T = 0.3
        records = simulate(model, rho0, T, dt, seed=17, n_traj=n_traj, snapshot_times=[0.1, 0.2, 0.3])
        mean, sem = ensemble_mean(records)
        reference = lindblad_trajectory(model, rho0, T, dt, [0.1, 0.2, 0.3])
        err = np.abs(mean - reference)
        bound = 3 * np.abs(sem) + slack
        assert np.all(err <= bound), f"max excess {np.max(err - bound):.3g}"

    def test_ensemble_mean_tracks_lindblad(self, qutrit_model, qutrit_rho0):
        self._compare(qutrit_model, qutrit_rho0, n_traj=300, dt=1e-3, slack=1e-2)

    @pytest.mark.slow
    def test_ensemble_mean_tracks_lindblad_fine_grid(self, qutrit_model, qutrit_rho0):
        self._compare(qutrit_model, qutrit_rho0, n_traj=1000, dt=1e-4, slack=5e-3)

    def test_ensemble_mean_needs_successes(self):
        with pytest.raises(InvalidArgumentError):
            ensemble_mean([])
