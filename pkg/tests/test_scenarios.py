"""
Tests for scenario builders, initial-state parsing and observable maps.
"""

import numpy as np
import pytest

from sme_manifolds.exceptions import InvalidArgumentError
from sme_manifolds.scenarios import (
    DIFFUSION_PANELS, build_scenario, figure_panels, fig1_state, parse_initial_state,
    parse_oscillator_state, repetition_start_state,
)


class TestInitialStates:

    def test_named_states(self):
        np.testing.assert_allclose(np.diag(parse_initial_state('basis:2', 3)), [0, 0, 1])
        np.testing.assert_allclose(parse_initial_state('uniform', 2), np.full((2, 2), 0.5))
        np.testing.assert_allclose(parse_initial_state('mixed', 4), np.eye(4) / 4)

    def test_amplitudes_are_normalized(self):
        rho = parse_initial_state({'amplitudes': [1, [0, 1]]}, 2)
        np.testing.assert_allclose(rho, np.array([[0.5, -0.5j], [0.5j, 0.5]]))

    def test_populations(self):
        rho = parse_initial_state({'populations': [1, 3]}, 2)
        np.testing.assert_allclose(rho, np.diag([0.25, 0.75]))

    @pytest.mark.parametrize("spec,dim", [
        ('basis:3', 3),
        ('coherent:1', 2),
        ({'amplitudes': [1, 0, 0]}, 2),
        ({'populations': [-1, 2]}, 2),
        ({'matrix': [[1, 0], [0, 1]]}, 2),
        (42, 2),
    ])
    def test_invalid_entries(self, spec, dim):
        with pytest.raises(InvalidArgumentError):
            parse_initial_state(spec, dim)

    def test_oscillator_strings(self):
        handle = parse_oscillator_state('coherent:1+0.5i')
        assert handle.kind == 'coherent'
        assert handle.alpha == 1 + 0.5j
        assert parse_oscillator_state('fock:3').n == 3
        assert parse_oscillator_state({'kind': 'thermal', 'n_bar': 0.4}).n_bar == 0.4
        with pytest.raises(InvalidArgumentError):
            parse_oscillator_state('squeezed:1')

    def test_default_states(self):
        assert np.real(np.diag(fig1_state())) == pytest.approx([0.3, 0.55, 0.15])
        d = np.real(np.diag(repetition_start_state()))
        assert d[0b000] == pytest.approx(0.5)
        assert d[0b111] == pytest.approx(0.3)
        assert d.sum() == pytest.approx(1.0)


class TestBuilders:

    def test_unknown_kind_and_params(self):
        with pytest.raises(InvalidArgumentError):
            build_scenario('ising')
        with pytest.raises(InvalidArgumentError):
            build_scenario('emission', {'gamma': 1.0})

    def test_qutrit_variants(self):
        single = build_scenario('qutrit-qnd', {'variant': 'single'})
        two = build_scenario('qutrit-qnd', {'variant': 'two'})
        rabi = build_scenario('qutrit-qnd', {'variant': 'rabi'})
        assert single.model.n_channels == 1 and two.model.n_channels == 2
        assert rabi.qnd is None and single.qnd is not None
        assert rabi.model.H[0, 1] == pytest.approx(1.35)
        assert 'c_0_1' in single.deterministic and not rabi.deterministic
        with pytest.raises(InvalidArgumentError):
            build_scenario('qutrit-qnd', {'variant': 'three'})

    def test_repetition_with_flips_has_no_deterministic_ratios(self):
        sc = build_scenario('repetition', {'gamma_flip': 0.3})
        assert sc.deterministic == []
        assert sc.stochastic == ['p_V0', 'p_V1', 'p_V2']

    def test_custom_scenario(self):
        sc = build_scenario('custom', {
            'H': [[0, 1], [1, 0]],
            'channels': [{'L': [[1, 0], [0, -1]], 'eta': 0.5}],
        }, initial_state='basis:0')
        assert sc.model.dim == 2
        assert sc.columns() == ['pop_0', 'pop_1', 'purity']

    def test_custom_needs_initial_state(self):
        with pytest.raises(InvalidArgumentError):
            build_scenario('custom', {'H': [[0, 0], [0, 0]], 'channels': []})

    def test_serialization(self):
        data = build_scenario('emission').to_dict()
        assert data['kind'] == 'emission'
        assert data['factor_dims'] == [2, 2]
        assert data['stochastic'] == ['B1', 'B2']


class TestObservables:

    def test_qutrit_columns(self):
        sc = build_scenario('qutrit-qnd', {'variant': 'single'})
        row = sc.observe(sc.rho0)
        assert row['pop_0'] == pytest.approx(0.3)
        assert row['c_0_1'] == pytest.approx(1.0)
        assert row['cr_0_1'] == pytest.approx(4.0 * 0.3 * 0.55 / (0.3 * 0.55))
        assert set(sc.deterministic) <= set(row)
        assert set(sc.stochastic) <= set(row)

    def test_repetition_columns(self):
        sc = build_scenario('repetition')
        row = sc.observe(sc.rho0)
        assert row['p_V0'] == pytest.approx(0.8)
        assert row['ratio_V0'] == pytest.approx(0.5 / 0.3)
        assert row['ratio_V3'] is None

    def test_emission_columns(self):
        sc = build_scenario('emission')
        cols = sc.columns()
        assert len(cols) == 28
        assert set(sc.deterministic) <= set(cols)

    def test_oscillator_columns(self):
        sc = build_scenario('fluorescence', {'n_max': 20}, initial_state='coherent:1')
        row = sc.observe(sc.rho0)
        assert row['x'] == pytest.approx(1.0, abs=1e-8)
        assert row['n'] == pytest.approx(1.0, abs=1e-8)

    def test_dispersive_columns(self):
        sc = build_scenario('dispersive', {'n_max': 8})
        row = sc.observe(sc.rho0)
        assert row['q_pop_0'] == pytest.approx(0.5)
        assert row['x'] == pytest.approx(0.0, abs=1e-12)

    def test_inapplicable_observable(self):
        sc = build_scenario('qutrit-qnd')
        with pytest.raises(InvalidArgumentError):
            sc.observe(sc.rho0, ['oscillator'])
        with pytest.raises(InvalidArgumentError):
            sc.observe(sc.rho0, ['entropy'])


class TestFigurePanels:

    def test_panels_build(self):
        panels = figure_panels()
        assert len(panels) == 9
        assert set(DIFFUSION_PANELS) <= set(panels)
        for block in panels.values():
            dt = block['dt']
            for t in block['snapshot_times']:
                assert abs(round(t / dt) * dt - t) < 1e-12

    def test_kerr_panel_has_no_confined_coordinates(self):
        block = figure_panels()['fig3-kerr']
        sc = build_scenario(block['scenario'], block['params'], block.get('initial_state'))
        assert sc.deterministic == []
        assert sc.model.name == 'fluorescence-kerr'
