"""
Scenario Builders
Named monitored-system scenarios, initial states and observable maps.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from .exceptions import InvalidArgumentError
from .gauss import InitialWignerHandle, sme_oscillator_model
from .lierank import oscillator_support
from .models.run_config import SCENARIO_KINDS
from .models.scenario import ScenarioModel, matrix_from_list
from .multi.dispersive import dispersive_model
from .multi.emission import DETERMINISTIC_NAMES, emission_coords, emission_deterministic_vars, emission_model
from .ops import (
    annihilation, creation, embed, normalize_ket, number_op, parity, pauli_coords, projector,
    purity, quadratures, validate_density,
)
from .qnd import QndModel, RepetitionCode, REPETITION_SUBSPACES, invariants_of, repetition_model

logger = logging.getLogger(__name__)

# Accepted keys under ``params`` for every scenario kind
SCENARIO_PARAMS: Dict[str, tuple] = {
    'qutrit-qnd': ('variant', 'lam', 'lam2', 'eta', 'eta2', 'omega', 'heterodyne'),
    'repetition': ('eta', 'syndromes', 'gamma_flip', 'flip_qubits'),
    'fluorescence': ('eta', 'n_th', 'u', 'v', 'n_max', 'kerr'),
    'xp': ('gamma_x', 'gamma_p', 'gamma_l', 'eta_x', 'eta_p', 'delta', 'n_th', 'u', 'v', 'n_max'),
    'emission': ('rate', 'eta1', 'eta2', 'rate2'),
    'dispersive': ('shifts', 'chi', 'eta', 'n_max', 'u', 'v'),
    'custom': ('H', 'channels', 'drives', 'factor_dims'),
}

QUTRIT_VARIANTS = ('single', 'two', 'rabi')

# Population split of the repetition-code start state over the eight basis kets
REPETITION_START = {
    '000': 0.5, '111': 0.3,
    '100': 0.07, '011': 0.03,
    '010': 0.06, '101': 0.04,
}

ObservableMap = Callable[['BuiltScenario', np.ndarray], Dict[str, Optional[float]]]


@dataclass
class BuiltScenario:
    """A ready-to-run scenario: model, initial state and its coordinate maps."""
    kind: str
    model: ScenarioModel
    rho0: np.ndarray
    params: Dict[str, Any] = field(default_factory=dict)
    qnd: Optional[QndModel] = None
    repetition: Optional[RepetitionCode] = None
    initial: Optional[InitialWignerHandle] = None
    oscillator_factor: Optional[int] = None
    default_observables: List[str] = field(default_factory=list)
    deterministic: List[str] = field(default_factory=list)
    stochastic: List[str] = field(default_factory=list)
    _cache: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def rank_support(self) -> Optional[List[int]]:
        """Basis indices for rank sample points (None: the full space)."""
        if self.oscillator_factor is None:
            return None
        return oscillator_support(self.model.factor_dims, self.oscillator_factor)

    def observe(self, rho: np.ndarray, names: Optional[Sequence[str]] = None) -> Dict[str, Optional[float]]:
        """
        Evaluate coordinate maps on a state.

        Args:
            rho: Density operator of the scenario
            names: Observable map names (default: the scenario defaults)

        Returns:
            Ordered mapping column -> value (None where absent)

        Raises:
            InvalidArgumentError: On an unknown or inapplicable observable
        """
        names = list(names) if names else self.default_observables
        row: Dict[str, Optional[float]] = {}
        for name in names:
            if name not in OBSERVABLES:
                raise InvalidArgumentError(
                    f"Unknown observable '{name}'; choose from {sorted(OBSERVABLES)}"
                )
            row.update(OBSERVABLES[name](self, rho))
        return row

    def columns(self, names: Optional[Sequence[str]] = None) -> List[str]:
        return list(self.observe(self.rho0, names).keys())

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'params': _jsonable(self.params),
            'dim': self.model.dim,
            'factor_dims': list(self.model.factor_dims),
            'channels': [ch.label for ch in self.model.channels],
            'default_observables': list(self.default_observables),
            'deterministic': list(self.deterministic),
            'stochastic': list(self.stochastic),
        }


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


# ---------------------------------------------------------------- initial states

def _complex(value: Any) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise InvalidArgumentError(f"Complex numbers are written [re, im], got {value}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        try:
            return complex(value.replace(' ', '').replace('i', 'j'))
        except ValueError as e:
            raise InvalidArgumentError(f"Cannot read a complex number from '{value}'") from e
    return complex(value)


def parse_initial_state(spec: Any, dim: int) -> np.ndarray:
    """
    Density operator from a configuration entry.

    Accepted forms: ``"basis:k"``, ``"uniform"`` (equal superposition),
    ``"mixed"``, ``{"amplitudes": [...]}`` (numbers or [re, im] pairs,
    normalized), ``{"populations": [...]}`` (diagonal state) and
    ``{"matrix": [[...]]}``.

    Raises:
        InvalidArgumentError: On an unreadable entry or a non-density matrix
    """
    if isinstance(spec, str):
        name, _, arg = spec.partition(':')
        if name == 'basis':
            k = int(arg or 0)
            if not 0 <= k < dim:
                raise InvalidArgumentError(f"Basis index {k} outside 0..{dim - 1}")
            ket = np.zeros(dim, dtype=complex)
            ket[k] = 1.0
            return projector(ket)
        if name == 'uniform':
            return projector(np.ones(dim, dtype=complex) / math.sqrt(dim))
        if name == 'mixed':
            return np.eye(dim, dtype=complex) / dim
        raise InvalidArgumentError(f"Unknown named initial state '{spec}'")
    if isinstance(spec, dict):
        if 'amplitudes' in spec:
            ket = normalize_ket(_complex(a) for a in spec['amplitudes'])
            if ket.shape[0] != dim:
                raise InvalidArgumentError(f"Expected {dim} amplitudes, got {ket.shape[0]}")
            return projector(ket)
        if 'populations' in spec:
            pops = np.asarray(spec['populations'], dtype=float)
            if pops.shape != (dim,) or np.any(pops < 0) or pops.sum() <= 0:
                raise InvalidArgumentError(f"Populations must be {dim} non-negative numbers")
            return np.diag(pops / pops.sum()).astype(complex)
        if 'matrix' in spec:
            rho = matrix_from_list(spec['matrix'])
            if rho.shape != (dim, dim):
                raise InvalidArgumentError(f"Initial matrix has shape {rho.shape}, expected {(dim, dim)}")
            return validate_density(rho, "initial_state")
    raise InvalidArgumentError(f"Cannot read an initial state from {spec!r}")


def parse_oscillator_state(spec: Any) -> InitialWignerHandle:
    """
    Initial oscillator state from ``"coherent:1+0.5i"``, ``"cat:2"``,
    ``"thermal:0.5"``, ``"fock:3"`` or a mapping with ``kind`` and the
    matching ``alpha``/``n_bar``/``n`` key.

    Raises:
        InvalidArgumentError: On an unreadable entry
    """
    if isinstance(spec, str):
        kind, _, arg = spec.partition(':')
        if kind in ('coherent', 'cat'):
            return InitialWignerHandle(kind=kind, alpha=_complex(arg or 0))
        if kind == 'thermal':
            return InitialWignerHandle(kind='thermal', n_bar=float(arg or 0))
        if kind == 'fock':
            return InitialWignerHandle(kind='fock', n=int(arg or 0))
        raise InvalidArgumentError(f"Unknown oscillator state '{spec}'")
    if isinstance(spec, dict) and 'kind' in spec:
        return InitialWignerHandle(
            kind=spec['kind'],
            alpha=_complex(spec.get('alpha', 0)),
            n_bar=float(spec.get('n_bar', 0.0)),
            n=int(spec.get('n', 0)),
        )
    raise InvalidArgumentError(f"Cannot read an oscillator state from {spec!r}")


def fig1_state() -> np.ndarray:
    return projector(normalize_ket([math.sqrt(.3), math.sqrt(.55), math.sqrt(.15)]))


def repetition_start_state() -> np.ndarray:
    """Three-qubit start state with |<111|psi>|^2 = 0.3 and |<000|psi>|^2 = 0.5."""
    ket = np.zeros(8, dtype=complex)
    for bits, pop in REPETITION_START.items():
        ket[int(bits, 2)] = math.sqrt(pop)
    return projector(ket)


def emission_start_state() -> np.ndarray:
    """Product of two distinct partially excited qubits (|1> excited)."""
    qa = normalize_ket([math.sqrt(0.3), math.sqrt(0.7)])
    qb = normalize_ket([math.sqrt(0.4) * np.exp(0.6j), math.sqrt(0.6)])
    return projector(np.kron(qa, qb))


# ---------------------------------------------------------------- builders

def build_qutrit_qnd(variant: str = 'single', lam: Sequence[float] = (0.0, 1.0, 1.8),
                     lam2: Sequence[float] = (0.0, 1.0, 0.2), eta: float = 0.8,
                     eta2: Optional[float] = None, omega: float = 1.35, heterodyne: bool = False,
                     rho0: Optional[np.ndarray] = None) -> BuiltScenario:
    """
    Qutrit under diagonal QND monitoring.

    ``single``: one channel diag(lam); ``two``: a second channel diag(lam2);
    ``rabi``: one channel plus H = omega (|0><1| + |1><0|).
    """
    if variant not in QUTRIT_VARIANTS:
        raise InvalidArgumentError(f"Unknown qutrit variant '{variant}'; choose from {QUTRIT_VARIANTS}")
    rows = [list(lam)] if variant != 'two' else [list(lam), list(lam2)]
    etas = [eta] if variant != 'two' else [eta, eta if eta2 is None else eta2]
    qnd = QndModel(lam=rows, eta=etas, heterodyne=heterodyne, name=f"qutrit-{variant}")
    H = np.zeros((3, 3), dtype=complex)
    if variant == 'rabi':
        H[0, 1] = H[1, 0] = omega
    model = qnd.to_scenario(H)
    model.name = f"qutrit-{variant}"
    deterministic = [] if variant == 'rabi' else ['c_0_1', 'c_0_2', 'c_1_2', 'phase_0_1', 'phase_0_2', 'phase_1_2']
    stochastic = ['pop_0', 'pop_1'] if variant != 'rabi' else ['pop_0', 'pop_1', 'coh_0_1']
    return BuiltScenario(
        kind='qutrit-qnd', model=model, rho0=fig1_state() if rho0 is None else rho0,
        params={'variant': variant, 'lam': list(lam), 'eta': eta, 'omega': omega},
        qnd=None if variant == 'rabi' else qnd,
        default_observables=['populations', 'coherences', 'coherence_ratios'],
        deterministic=deterministic, stochastic=stochastic,
    )


def build_repetition(eta: float = 0.8, syndromes: Sequence[int] = (1, 2), gamma_flip: float = 0.0,
                     flip_qubits: Sequence[int] = (1, 2, 3),
                     rho0: Optional[np.ndarray] = None) -> BuiltScenario:
    """Three-qubit repetition code with syndrome monitoring and optional bit flips."""
    code = repetition_model(eta, gamma_flip=gamma_flip, syndromes=syndromes, flip_qubits=flip_qubits)
    confined = gamma_flip == 0
    return BuiltScenario(
        kind='repetition', model=code.model,
        rho0=repetition_start_state() if rho0 is None else rho0,
        params={'eta': eta, 'syndromes': list(syndromes), 'gamma_flip': gamma_flip,
                'flip_qubits': list(flip_qubits)},
        repetition=code,
        default_observables=['subspaces'],
        deterministic=['ratio_V0', 'ratio_V1', 'ratio_V2'] if confined else [],
        stochastic=['p_V0', 'p_V1', 'p_V2'],
    )


def _oscillator_start(spec: Any, default: str) -> InitialWignerHandle:
    return parse_oscillator_state(default if spec is None else spec)


def build_fluorescence(eta: float = 0.8, n_th: float = 0.0, u: float = 0.0, v: float = 0.0,
                       n_max: int = 30, kerr: float = 0.0, initial: Any = None) -> BuiltScenario:
    """
    Oscillator with a and i a monitored; ``kerr`` adds H = kerr (a a^dag)^2.

    The Kerr term takes the model outside the Gaussian-kernel family and is
    only simulated.
    """
    handle = _oscillator_start(initial, 'cat:2')
    model = sme_oscillator_model('fluorescence', {'eta': eta, 'n_th': n_th, 'u': u, 'v': v},
                                 n_max, initial=handle)
    if kerr:
        aad = annihilation(n_max) @ creation(n_max)
        model = ScenarioModel(H=kerr * aad @ aad, channels=model.channels, drives=model.drives,
                              factor_dims=model.factor_dims, name="fluorescence-kerr")
    return BuiltScenario(
        kind='fluorescence', model=model, rho0=handle.density(n_max),
        params={'eta': eta, 'n_th': n_th, 'u': u, 'v': v, 'n_max': n_max, 'kerr': kerr},
        initial=handle, oscillator_factor=0,
        default_observables=['oscillator'],
        stochastic=['x', 'parity', 'n'],
    )


def build_xp(n_max: int = 20, initial: Any = None, **params) -> BuiltScenario:
    """Oscillator with X and P monitored, optional relaxation and detuning."""
    params = dict({'gamma_x': 1.0, 'gamma_p': 1.0}, **params)
    handle = _oscillator_start(initial, 'coherent:1')
    model = sme_oscillator_model('xp', params, n_max, initial=handle)
    return BuiltScenario(
        kind='xp', model=model, rho0=handle.density(n_max), params=dict(params, n_max=n_max),
        initial=handle, oscillator_factor=0,
        default_observables=['oscillator'],
        stochastic=['x', 'p'],
    )


def build_emission(rate: float = 2.0, eta1: float = 1.0, eta2: float = 1.0,
                   rate2: Optional[float] = None, rho0: Optional[np.ndarray] = None) -> BuiltScenario:
    """Two qubits emitting into symmetric and antisymmetric monitored channels."""
    model = emission_model(rate=rate, eta1=eta1, eta2=eta2, rate2=rate2)
    return BuiltScenario(
        kind='emission', model=model, rho0=emission_start_state() if rho0 is None else rho0,
        params={'rate': rate, 'eta1': eta1, 'eta2': eta2, 'rate2': rate2},
        default_observables=['emission'],
        deterministic=list(DETERMINISTIC_NAMES) if rate2 in (None, rate) else [],
        stochastic=['B1', 'B2'],
    )


def build_dispersive(shifts: Sequence[float] = (0.0, 1.0), chi: float = 1.0, eta: float = 1.0,
                     n_max: int = 15, u: float = 0.0, v: float = 0.0,
                     qudit: Any = None) -> BuiltScenario:
    """Qudit read out through a dispersively shifted oscillator starting in vacuum."""
    d = len(shifts)
    q0 = parse_initial_state(qudit if qudit is not None else 'uniform', d)
    vac = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    vac[0, 0] = 1.0
    rho0 = np.kron(q0, vac)
    model = dispersive_model(shifts, chi=chi, eta=eta, n_max=n_max, u=u, v=v, rho0=rho0)
    return BuiltScenario(
        kind='dispersive', model=model, rho0=rho0,
        params={'shifts': list(shifts), 'chi': chi, 'eta': eta, 'n_max': n_max, 'u': u, 'v': v},
        oscillator_factor=1,
        default_observables=['qudit', 'oscillator'],
        stochastic=['q_pop_0', 'x', 'p'],
    )


def build_custom(H: Any, channels: Sequence[Dict[str, Any]], drives: Sequence[Dict[str, Any]] = (),
                 factor_dims: Optional[Sequence[int]] = None, rho0: Optional[np.ndarray] = None) -> BuiltScenario:
    """Scenario from explicit matrices (``[[re, im], ...]`` nested lists)."""
    model = ScenarioModel.from_dict({
        'H': H, 'channels': list(channels), 'drives': list(drives),
        'factor_dims': list(factor_dims) if factor_dims else None, 'name': 'custom',
    })
    if rho0 is None:
        raise InvalidArgumentError("A custom scenario needs an explicit initial_state")
    return BuiltScenario(kind='custom', model=model, rho0=rho0,
                         params={'factor_dims': model.factor_dims},
                         default_observables=['populations', 'purity'])


def build_scenario(kind: str, params: Optional[Dict[str, Any]] = None,
                   initial_state: Any = None) -> BuiltScenario:
    """
    Build a named scenario from configuration parameters.

    Args:
        kind: One of SCENARIO_KINDS
        params: Scenario parameters (keys listed in SCENARIO_PARAMS)
        initial_state: Initial-state entry (see parse_initial_state and
            parse_oscillator_state); None selects the scenario default

    Raises:
        InvalidArgumentError: On an unknown kind, unknown parameters or
            invalid values
    """
    if kind not in SCENARIO_KINDS:
        raise InvalidArgumentError(f"Unknown scenario '{kind}'; choose from {SCENARIO_KINDS}")
    params = dict(params or {})
    unknown = sorted(set(params) - set(SCENARIO_PARAMS[kind]))
    if unknown:
        raise InvalidArgumentError(f"Unknown parameters for '{kind}': {unknown}")
    logger.info(f"Building scenario '{kind}' with {params}")

    if kind == 'qutrit-qnd':
        rho0 = None if initial_state is None else parse_initial_state(initial_state, 3)
        return build_qutrit_qnd(rho0=rho0, **params)
    if kind == 'repetition':
        rho0 = None if initial_state is None else parse_initial_state(initial_state, 8)
        return build_repetition(rho0=rho0, **params)
    if kind == 'fluorescence':
        return build_fluorescence(initial=initial_state, **params)
    if kind == 'xp':
        return build_xp(initial=initial_state, **params)
    if kind == 'emission':
        rho0 = None if initial_state is None else parse_initial_state(initial_state, 4)
        return build_emission(rho0=rho0, **params)
    if kind == 'dispersive':
        return build_dispersive(qudit=initial_state, **params)
    dim = len(params['H']) if 'H' in params else 0
    rho0 = parse_initial_state(initial_state, dim) if initial_state is not None else None
    return build_custom(rho0=rho0, **params)


# ---------------------------------------------------------------- observables

def _reduced(rho: np.ndarray, dims: Sequence[int], keep: int) -> np.ndarray:
    dims = list(dims)
    t = np.asarray(rho).reshape(dims + dims)
    n = len(dims)
    axes = [i for i in range(n) if i != keep]
    for ax in sorted(axes, reverse=True):
        t = np.trace(t, axis1=ax, axis2=ax + t.ndim // 2)
    return t


def _populations(sc: BuiltScenario, rho: np.ndarray) -> Dict[str, Optional[float]]:
    r = sc.qnd.to_eigenbasis(rho) if sc.qnd is not None else rho
    return {f"pop_{i}": float(np.real(r[i, i])) for i in range(r.shape[0])}


def _coherences(sc: BuiltScenario, rho: np.ndarray) -> Dict[str, Optional[float]]:
    n = rho.shape[0]
    if n > 8:
        raise InvalidArgumentError("The 'coherences' observable is limited to dimension <= 8")
    return {f"coh_{a}_{b}": float(2 * np.real(rho[a, b])) for a in range(n) for b in range(a + 1, n)}


def _coherence_ratios(sc: BuiltScenario, rho: np.ndarray) -> Dict[str, Optional[float]]:
    """(rho_ab + rho_ba)^2 / (rho_aa rho_bb) and the QND invariants when a QND model is known."""
    n = rho.shape[0]
    out: Dict[str, Optional[float]] = {}
    for a in range(n):
        for b in range(a + 1, n):
            den = float(np.real(rho[a, a] * rho[b, b]))
            out[f"cr_{a}_{b}"] = None if den <= 0 else float((2 * np.real(rho[a, b])) ** 2 / den)
    if sc.qnd is not None:
        out.update(invariants_of(sc.qnd, rho).flat())
    return out


def _subspaces(sc: BuiltScenario, rho: np.ndarray) -> Dict[str, Optional[float]]:
    d = np.real(np.diag(rho))
    out: Dict[str, Optional[float]] = {}
    for j, (first, second) in REPETITION_SUBSPACES.items():
        i1, i2 = int(first, 2), int(second, 2)
        out[f"p_V{j}"] = float(d[i1] + d[i2])
    for j, (first, second) in REPETITION_SUBSPACES.items():
        i1, i2 = int(first, 2), int(second, 2)
        out[f"ratio_V{j}"] = float(d[i1] / d[i2]) if d[i2] > 1e-12 and d[i1] > 1e-12 else None
    out['coh_V0'] = float(2 * np.real(rho[0b000, 0b111]))
    return out


def _pauli(sc: BuiltScenario, rho: np.ndarray) -> Dict[str, Optional[float]]:
    coords = pauli_coords(rho)
    coords.pop('II')
    return coords


def _emission(sc: BuiltScenario, rho: np.ndarray) -> Dict[str, Optional[float]]:
    coords = emission_coords(rho)
    ratios = coords.ratios()
    names = [f"B{i}" for i in range(9)] + [f"R{i}" for i in range(1, 7)]
    out: Dict[str, Optional[float]] = {n: (None if ratios is None else ratios[n]) for n in names}
    det = emission_deterministic_vars(coords)
    for i, name in enumerate(DETERMINISTIC_NAMES):
        out[name] = None if det is None else float(det[i])
    return out


def _oscillator_ops(sc: BuiltScenario) -> Dict[str, np.ndarray]:
    cache = sc._cache
    if not cache:
        dims = sc.model.factor_dims
        k = sc.oscillator_factor
        n_max = dims[k] - 1
        X, P = quadratures(n_max)
        for name, op in (('x', X), ('p', P), ('n', number_op(n_max)), ('parity', parity(n_max))):
            cache[name] = embed(op, k, dims)
    return cache


def _oscillator(sc: BuiltScenario, rho: np.ndarray) -> Dict[str, Optional[float]]:
    if sc.oscillator_factor is None:
        raise InvalidArgumentError(f"Scenario '{sc.kind}' has no oscillator factor")
    ops = _oscillator_ops(sc)
    return {name: float(np.real(np.sum(op.T * rho))) for name, op in ops.items()}


def _qudit(sc: BuiltScenario, rho: np.ndarray) -> Dict[str, Optional[float]]:
    if sc.oscillator_factor is None or len(sc.model.factor_dims) < 2:
        raise InvalidArgumentError(f"Scenario '{sc.kind}' has no qudit factor")
    q = _reduced(rho, sc.model.factor_dims, 0)
    out = {f"q_pop_{i}": float(np.real(q[i, i])) for i in range(q.shape[0])}
    for a in range(q.shape[0]):
        for b in range(a + 1, q.shape[0]):
            out[f"q_coh_{a}_{b}"] = float(2 * np.real(q[a, b]))
    return out


def _purity(sc: BuiltScenario, rho: np.ndarray) -> Dict[str, Optional[float]]:
    return {'purity': purity(rho)}


OBSERVABLES: Dict[str, ObservableMap] = {
    'populations': _populations,
    'coherences': _coherences,
    'coherence_ratios': _coherence_ratios,
    'subspaces': _subspaces,
    'pauli': _pauli,
    'emission': _emission,
    'oscillator': _oscillator,
    'qudit': _qudit,
    'purity': _purity,
}


# ---------------------------------------------------------------- figure panels

def figure_panels() -> Dict[str, Dict[str, Any]]:
    """Configuration blocks of the figure scenarios, keyed by panel name."""
    fig1 = {'T': 0.3, 'dt': 1e-4, 'n_traj': 500, 'snapshot_times': [0.2, 0.3]}
    fig2 = {'T': 0.1, 'dt': 1e-4, 'n_traj': 500, 'snapshot_times': [0.025, 0.1]}
    fig3 = {'T': 1.0, 'dt': 1e-3, 'n_traj': 500, 'snapshot_times': [0.2, 0.5, 1.0]}
    return {
        'fig1-single': dict(fig1, scenario='qutrit-qnd', params={'variant': 'single'}),
        'fig1-two': dict(fig1, scenario='qutrit-qnd', params={'variant': 'two'}),
        'fig1-rabi': dict(fig1, scenario='qutrit-qnd', params={'variant': 'rabi', 'omega': 1.35}),
        'fig2-two-syndromes': dict(fig2, scenario='repetition', params={'syndromes': [1, 2]}),
        'fig2-three-syndromes': dict(fig2, scenario='repetition', params={'syndromes': [1, 2, 3]}),
        'fig2-bit-flips': dict(fig2, scenario='repetition',
                               params={'syndromes': [1, 2], 'gamma_flip': 0.3}),
        'fig3-fluorescence': dict(fig3, scenario='fluorescence',
                                  params={'eta': 0.8, 'u': 0.5}, initial_state='cat:2'),
        'fig3-thermal': dict(fig3, scenario='fluorescence',
                             params={'eta': 0.8, 'n_th': 2.3, 'u': 0.5}, initial_state='cat:2'),
        'fig3-kerr': dict(fig3, scenario='fluorescence',
                          params={'eta': 0.8, 'kerr': 0.1}, initial_state='cat:2'),
    }


# Panels whose ensemble should spread in at least three displayed directions
DIFFUSION_PANELS = ('fig1-rabi', 'fig2-three-syndromes', 'fig2-bit-flips', 'fig3-kerr')
