"""
Tests for the invariant checker and its residual tables.
"""

import math

import pytest

from sme_manifolds.checks import CheckReport, CheckRow, InvariantChecker
from sme_manifolds.exceptions import InvalidArgumentError
from sme_manifolds.models.run_config import CheckSettings, ScenarioConfig

LOOSE = 0.2


def make_config(scenario, params=None, initial_state=None, T=0.05, dt=1e-4, n_seeds=3, **check):
    return ScenarioConfig(scenario=scenario, params=params or {}, initial_state=initial_state,
                          T=T, dt=dt, seed=11, check=CheckSettings(n_seeds=n_seeds, **check))


class TestCheckRow:

    def test_upper_bound(self):
        assert CheckRow('a', 0.01, 0.02).passed
        assert not CheckRow('a', 0.03, 0.02).passed

    def test_lower_bound(self):
        assert CheckRow('a', 2.0, 1.8, comparison='ge').passed
        assert not CheckRow('a', 1.5, 1.8, comparison='ge').passed

    def test_non_finite_residual_fails(self):
        assert not CheckRow('a', math.nan, 1.0).passed
        assert not CheckRow('a', math.inf, 1.0, comparison='ge').passed

    def test_report_passes_only_if_every_row_does(self):
        report = CheckReport(kind='qnd', scenario='x', rows=[CheckRow('a', 0.0, 0.0), CheckRow('b', 1.0, 0.5)])
        assert not report.passed
        data = report.to_dict()
        assert data['passed'] is False
        assert [r['passed'] for r in data['rows']] == [True, False]


class TestChecker:

    def test_tolerance_scale(self):
        assert InvariantChecker(make_config('emission', dt=1e-6)).scale == 1.0
        assert InvariantChecker(make_config('emission', dt=1e-3)).scale == pytest.approx(10.0)

    def test_unknown_kind(self):
        with pytest.raises(InvalidArgumentError):
            InvariantChecker(make_config('emission')).run('entropy')

    def test_configured_tolerance_wins(self):
        checker = InvariantChecker(make_config('emission', tolerances={'closed_form': 0.5}))
        assert checker._tol('closed_form', 1e-2) == 0.5
        assert checker._tol('other', 1e-2) == pytest.approx(1e-2 * checker.scale)
        assert checker._tol('other', 1e-2, scaled=False) == 1e-2

    @pytest.mark.parametrize("kind,scenario,params", [
        ('qnd', 'qutrit-qnd', {'variant': 'rabi'}),
        ('qnd', 'repetition', {'gamma_flip': 0.3}),
        ('gauss', 'emission', {}),
        ('gauss', 'fluorescence', {'kerr': 0.1, 'n_max': 10}),
        ('emission', 'xp', {'n_max': 10}),
        ('dispersive', 'qutrit-qnd', {}),
        ('dispersive', 'dispersive', {'n_max': 6, 'u': 0.3}),
    ])
    def test_inapplicable_scenarios(self, kind, scenario, params):
        initial = 'coherent:0.5' if scenario in ('fluorescence', 'xp') else None
        checker = InvariantChecker(make_config(scenario, params, initial_state=initial))
        with pytest.raises(InvalidArgumentError):
            checker.run(kind)


class TestQndCheck:

    def test_qutrit_rows(self):
        names = ('phase_drift', 'coherence_law', 'log_z_law', 'population_oracle')
        config = make_config('qutrit-qnd', {'variant': 'two'}, tolerances={n: LOOSE for n in names})
        report = InvariantChecker(config).run('qnd')
        assert {row.name for row in report.rows} == set(names)
        assert report.info['n_trajectories'] == 3
        assert report.passed

    def test_single_channel_adds_mixed_law(self):
        config = make_config('qutrit-qnd', {'variant': 'single'}, n_seeds=2)
        names = {row.name for row in InvariantChecker(config).run('qnd').rows}
        assert 'mixed_ratio_law' in names

    def test_heterodyne_replaces_phase_row(self):
        config = make_config('qutrit-qnd', {'heterodyne': True}, n_seeds=2)
        names = {row.name for row in InvariantChecker(config).run('qnd').rows}
        assert 'heterodyne_phase' in names
        assert 'phase_drift' not in names

    def test_repetition_rows(self):
        config = make_config('repetition', {'syndromes': [1, 3]}, n_seeds=2)
        names = {row.name for row in InvariantChecker(config).run('qnd').rows}
        assert {'subspace_ratio', 'conserved_z'} <= names

    def test_conserved_z_only_for_first_and_third_syndromes(self):
        config = make_config('repetition', {'syndromes': [1, 2]}, n_seeds=2)
        names = {row.name for row in InvariantChecker(config).run('qnd').rows}
        assert 'subspace_ratio' in names
        assert 'conserved_z' not in names

    @pytest.mark.slow
    def test_refinement_rows(self):
        config = make_config('qutrit-qnd', {'variant': 'single'}, T=0.05, dt=1e-3, n_seeds=2, refine=True)
        rows = {row.name: row for row in InvariantChecker(config).run('qnd').rows}
        refined = [row for name, row in rows.items() if name.endswith('_refinement')]
        assert refined
        assert all(row.comparison == 'ge' and row.tolerance == 1.8 for row in refined)


class TestGaussCheck:

    def test_fluorescence_rows(self):
        config = make_config('fluorescence', {'eta': 0.8, 'n_max': 12}, initial_state='coherent:0.5',
                             T=0.2, dt=1e-3, n_seeds=2, grid=101)
        rows = {row.name: row for row in InvariantChecker(config).run('gauss').rows}
        assert set(rows) == {'riccati_closed_form', 'initial_parameters', 'reduction_n_th_0',
                             'moment_agreement', 'deterministic_spread'}
        assert rows['riccati_closed_form'].passed
        assert rows['initial_parameters'].passed
        assert rows['deterministic_spread'].residual == 0.0
        assert rows['deterministic_spread'].passed

    def test_thermal_bath_skips_reduction(self):
        config = make_config('fluorescence', {'eta': 0.8, 'n_th': 0.5, 'n_max': 12},
                             initial_state='coherent:0.5', T=0.1, dt=1e-3, n_seeds=2, grid=101)
        names = {row.name for row in InvariantChecker(config).run('gauss').rows}
        assert 'reduction_n_th_0' not in names

    def test_xp_rows(self):
        config = make_config('xp', {'gamma_x': 1.0, 'gamma_p': 0.5, 'eta_x': 0.9, 'n_max': 12},
                             initial_state='coherent:0.5', T=0.2, dt=1e-3, n_seeds=2, grid=101)
        rows = {row.name: row for row in InvariantChecker(config).run('gauss').rows}
        assert rows['riccati_closed_form'].passed
        assert rows['deterministic_spread'].passed
        assert 'moment_agreement' in rows


class TestEmissionCheck:

    def test_rows(self):
        config = make_config('emission', {'eta1': 0.9, 'eta2': 0.7}, T=0.05, dt=1e-4, n_seeds=3)
        rows = {row.name: row for row in InvariantChecker(config).run('emission').rows}
        assert {'closed_form', 'deterministic_std', 'stochastic_std', 'record_variables'} <= set(rows)
        assert rows['closed_form'].passed
        assert rows['deterministic_std'].passed
        assert rows['stochastic_std'].comparison == 'ge'

    def test_record_law_needs_natural_rate(self):
        config = make_config('emission', {'rate': 4.0}, T=0.02, dt=1e-4, n_seeds=2)
        names = {row.name for row in InvariantChecker(config).run('emission').rows}
        assert 'record_variables' not in names

    def test_ground_state_has_no_ratios(self):
        config = make_config('emission', initial_state='basis:0', n_seeds=1)
        with pytest.raises(InvalidArgumentError):
            InvariantChecker(config).run('emission')


class TestDispersiveCheck:

    def test_rows(self):
        config = make_config('dispersive', {'shifts': [0.0, 1.0], 'n_max': 8}, T=0.2, dt=1e-3, n_seeds=2)
        report = InvariantChecker(config).run('dispersive')
        rows = {row.name: row for row in report.rows}
        assert set(rows) == {'offdiagonal_riccati', 'zero_frequency_limit',
                             'population_agreement', 'qudit_state_agreement'}
        assert rows['offdiagonal_riccati'].passed
        assert rows['zero_frequency_limit'].passed
        assert report.info['omegas'] == [0.0, 1.0]
        assert report.info['singular_points'] == 0
