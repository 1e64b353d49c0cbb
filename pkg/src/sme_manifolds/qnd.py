"""
QND Module
Deterministic invariants and explicit filters for commuting (QND) measurements.
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .exceptions import InvalidArgumentError
from .models.scenario import MeasurementChannel, ScenarioModel, TrajectoryRecord, compensated_cumsum
from .ops import dag, pauli_string

logger = logging.getLogger(__name__)

POPULATION_FLOOR = 1e-12


@dataclass
class QndModel:
    """
    Commuting measurement operators L_k = sum_n lam[k, n] |d_n><d_n|.

    With ``heterodyne=True`` every channel k gets a partner i L_k at
    efficiency ``partner_eta[k]`` (defaults to eta[k]), appended after the
    base channels.
    """
    lam: np.ndarray
    eta: np.ndarray
    basis: Optional[np.ndarray] = None
    heterodyne: bool = False
    partner_eta: Optional[np.ndarray] = None
    name: str = "qnd"

    def __post_init__(self):
        self.lam = np.atleast_2d(np.asarray(self.lam, dtype=complex))
        self.eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        if self.eta.shape[0] != self.lam.shape[0]:
            raise InvalidArgumentError(
                f"{self.lam.shape[0]} channels but {self.eta.shape[0]} efficiencies"
            )
        if np.any(self.eta < 0) or np.any(self.eta > 1):
            raise InvalidArgumentError(f"Efficiencies must lie in [0, 1], got {self.eta}")
        if self.basis is None:
            self.basis = np.eye(self.n_levels, dtype=complex)
        self.basis = np.asarray(self.basis, dtype=complex)
        if self.basis.shape != (self.n_levels, self.n_levels):
            raise InvalidArgumentError(f"Basis shape {self.basis.shape} does not match N={self.n_levels}")
        if not np.allclose(dag(self.basis) @ self.basis, np.eye(self.n_levels), atol=1e-10):
            raise InvalidArgumentError("QND eigenbasis must be orthonormal")
        if self.heterodyne:
            pe = self.eta if self.partner_eta is None else np.atleast_1d(np.asarray(self.partner_eta, float))
            if pe.shape != self.eta.shape:
                raise InvalidArgumentError("partner_eta must have one entry per base channel")
            self.partner_eta = pe

    @property
    def n_levels(self) -> int:
        return self.lam.shape[1]

    @property
    def n_base(self) -> int:
        return self.lam.shape[0]

    def channel_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of all channels, partners (i * lam) appended."""
        if self.heterodyne:
            return np.vstack([self.lam, 1j * self.lam])
        return self.lam

    def channel_etas(self) -> np.ndarray:
        if self.heterodyne:
            return np.concatenate([self.eta, self.partner_eta])
        return self.eta

    def operators(self) -> List[np.ndarray]:
        u = self.basis
        return [u @ np.diag(row) @ dag(u) for row in self.channel_eigenvalues()]

    def to_scenario(self, H: Optional[np.ndarray] = None) -> ScenarioModel:
        channels = []
        for k, (L, e) in enumerate(zip(self.operators(), self.channel_etas())):
            label = f"L{k + 1}" if k < self.n_base else f"iL{k - self.n_base + 1}"
            channels.append(MeasurementChannel(L=L, eta=float(e), label=label))
        H = np.zeros((self.n_levels, self.n_levels), dtype=complex) if H is None else H
        return ScenarioModel(H=H, channels=channels, name=self.name)

    def to_eigenbasis(self, rho: np.ndarray) -> np.ndarray:
        return dag(self.basis) @ rho @ self.basis


# ---------------------------------------------------------------- exponents

def alpha_sigma2(qnd: QndModel, alpha: np.ndarray) -> float:
    """sigma^2_alpha = sum_b sum_k alpha_b lam_k(b)^2 eta_k (base channels; Re lam)."""
    lam = np.real(qnd.lam)
    return float(np.sum(np.asarray(alpha)[None, :] * lam ** 2 * qnd.eta[:, None]))


def _constraint_matrix(qnd: QndModel) -> np.ndarray:
    rows = [np.ones(qnd.n_levels)]
    lam = np.real(qnd.lam)
    for k in range(qnd.n_base):
        if qnd.eta[k] > 0:
            rows.append(lam[k])
    return np.array(rows)


def _canonical_null_space(matrix: np.ndarray) -> np.ndarray:
    """Orthonormal null-space basis in a reproducible (pivoted echelon) order."""
    ns = linalg.null_space(matrix, rcond=1e-10)
    r = ns.shape[1]
    if r == 0:
        return ns
    _, _, piv = linalg.qr(ns.T, pivoting=True)
    pivots = np.sort(piv[:r])
    echelon = ns @ np.linalg.inv(ns[pivots, :])
    q, _ = np.linalg.qr(echelon)
    for j in range(r):
        lead = q[np.argmax(np.abs(q[:, j]) > 1e-12), j]
        if lead < 0:
            q[:, j] = -q[:, j]
    return q


def z_alpha_basis(qnd: QndModel) -> List[Tuple[np.ndarray, float]]:
    """
    Exponent vectors alpha of the deterministic population products z^(alpha).

    Returns:
        List of (alpha, sigma^2_alpha) with sigma^2_alpha >= 0; the list has
        N - 1 - rank(active eigenvalue rows) entries
    """
    if qnd.n_levels < 2:
        raise InvalidArgumentError("z_alpha_basis needs at least two levels")
    basis = _canonical_null_space(_constraint_matrix(qnd))
    out = []
    for j in range(basis.shape[1]):
        alpha = basis[:, j]
        s2 = alpha_sigma2(qnd, alpha)
        if s2 < 0:
            alpha, s2 = -alpha, -s2
        out.append((alpha, max(s2, 0.0)))
    return out


def number_quadruple_alpha(levels: Sequence[int], n_levels: int) -> np.ndarray:
    """
    Exponents of z = (rho44/rho11)^(n3-n2) (rho22/rho33)^(n4-n1) for levels n1..n4.

    Constant in time (sigma^2 = 0) when n2 - n1 = n4 - n3.
    """
    n1, n2, n3, n4 = levels
    alpha = np.zeros(n_levels)
    alpha[n4] += n3 - n2
    alpha[n1] -= n3 - n2
    alpha[n2] += n4 - n1
    alpha[n3] -= n4 - n1
    return alpha


def divided_difference_alpha(levels: Sequence[int], n_levels: int) -> np.ndarray:
    """Exponents alpha_i = 1 / prod_{j != i}(n_j - n_i): a conserved product for any four levels."""
    levels = list(levels)
    if len(set(levels)) != len(levels):
        raise InvalidArgumentError(f"Levels must be distinct, got {levels}")
    alpha = np.zeros(n_levels)
    for i, ni in enumerate(levels):
        alpha[ni] = 1.0 / np.prod([nj - ni for j, nj in enumerate(levels) if j != i])
    return alpha


def coherence_decay_rate(qnd: QndModel, a: int, b: int) -> float:
    """sum_k (1 - eta_k) |lam_k(a) - lam_k(b)|^2 over all channels, partners included."""
    lam = qnd.channel_eigenvalues()
    etas = qnd.channel_etas()
    return float(np.sum((1 - etas) * np.abs(lam[:, a] - lam[:, b]) ** 2))


def mixed_ratio_rate(qnd: QndModel, a: int, b: int, alpha: np.ndarray, weight: float) -> float:
    """Decay rate of log c^(a,b) + weight * log z^(alpha), a combination also deterministic."""
    return coherence_decay_rate(qnd, a, b) + 2.0 * weight * alpha_sigma2(qnd, alpha)


# ---------------------------------------------------------------- invariant values

@dataclass
class QndInvariantSet:
    """Invariant coordinates of one state; absent entries are None."""
    phases: Dict[Tuple[int, int], Optional[float]] = field(default_factory=dict)
    coherence_ratios: Dict[Tuple[int, int], Optional[float]] = field(default_factory=dict)
    log_z: List[Optional[float]] = field(default_factory=list)
    populations: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def flat(self) -> Dict[str, Optional[float]]:
        out: Dict[str, Optional[float]] = {}
        for (a, b), v in self.phases.items():
            out[f"phase_{a}_{b}"] = v
        for (a, b), v in self.coherence_ratios.items():
            out[f"c_{a}_{b}"] = v
        for i, v in enumerate(self.log_z):
            out[f"logz_{i}"] = v
        return out


def _unwrap(value: float, previous: Optional[float]) -> float:
    if previous is None:
        return value
    return value + 2 * np.pi * round((previous - value) / (2 * np.pi))


def invariants_of(qnd: QndModel, rho: np.ndarray, alphas: Optional[Sequence[np.ndarray]] = None,
                  previous: Optional[QndInvariantSet] = None,
                  floor: float = POPULATION_FLOOR) -> QndInvariantSet:
    """
    Phases, coherence ratios and log z^(alpha) of a state.

    Args:
        qnd: QND model (rho is rotated into its eigenbasis)
        rho: Density operator
        alphas: Exponent vectors (default: z_alpha_basis)
        previous: Values at the previous time, for phase continuation
        floor: Populations below this make dependent entries absent

    Returns:
        QndInvariantSet
    """
    r = qnd.to_eigenbasis(np.asarray(rho))
    pops = np.real(np.diag(r))
    if alphas is None:
        alphas = [a for a, _ in z_alpha_basis(qnd)]
    out = QndInvariantSet(populations=pops.copy())
    for a, b in combinations(range(qnd.n_levels), 2):
        if pops[a] < floor or pops[b] < floor:
            out.phases[(a, b)] = None
            out.coherence_ratios[(a, b)] = None
            continue
        z = r[a, b]
        prev = previous.phases.get((a, b)) if previous is not None else None
        out.phases[(a, b)] = _unwrap(float(np.angle(z)), prev) if abs(z) > 0 else None
        out.coherence_ratios[(a, b)] = float(abs(z) ** 2 / (pops[a] * pops[b]))
    for alpha in alphas:
        active = np.abs(alpha) > 1e-14
        if np.any(pops[active] < floor):
            out.log_z.append(None)
            continue
        terms = alpha[active] * np.log(pops[active])
        out.log_z.append(math.fsum(terms))
    return out


def populations_explicit(qnd: QndModel, pops0: np.ndarray, y: np.ndarray, t: float) -> np.ndarray:
    """
    Populations from the integrated homodyne signals.

    rho_t(b,b) ~ rho_0(b,b) exp(2 sum_k (lam_k(b) sqrt(eta_k) y_k - lam_k(b)^2 eta_k t)),
    normalized; only Re lam enters (heterodyne partners carry no population
    information).

    Args:
        qnd: QND model
        pops0: Initial populations (or a diagonal density matrix)
        y: Integrated signals of the base channels (extra partner entries ignored)
        t: Elapsed time

    Raises:
        InvalidArgumentError: If t < 0 or all initial populations vanish
    """
    if t < 0:
        raise InvalidArgumentError(f"t must be >= 0, got {t}")
    pops0 = np.asarray(pops0)
    if pops0.ndim == 2:
        pops0 = np.real(np.diag(pops0))
    pops0 = np.real(pops0).astype(float)
    if not np.any(pops0 > 0):
        raise InvalidArgumentError("Initial populations are all zero")
    y = np.asarray(y, dtype=float).reshape(-1)[:qnd.n_base]
    lam = np.real(qnd.lam)
    sq = np.sqrt(qnd.eta)
    exponent = 2 * (np.sum(lam * (sq * y)[:, None], axis=0)
                    - np.sum(lam ** 2 * qnd.eta[:, None], axis=0) * t)
    with np.errstate(divide='ignore'):
        logp = np.where(pops0 > 0, np.log(np.where(pops0 > 0, pops0, 1.0)) + exponent, -np.inf)
    return np.exp(logp - logsumexp(logp))


def level_pairs(n_levels: int) -> List[Tuple[int, int]]:
    return list(combinations(range(n_levels), 2))


def beta_basis(qnd: QndModel) -> np.ndarray:
    """
    Conserved phase combinations under heterodyne detection.

    Rows index level pairs (a < b); columns are the basis vectors beta with
    sum_ab beta_ab (lam_k(a) - lam_k(b)) = 0 for every partner with eta > 0.
    """
    pairs = level_pairs(qnd.n_levels)
    lam = np.real(qnd.lam)
    rows = []
    etas = qnd.partner_eta if qnd.heterodyne else np.zeros(qnd.n_base)
    for k in range(qnd.n_base):
        if etas[k] > 0:
            rows.append([lam[k, a] - lam[k, b] for a, b in pairs])
    if not rows:
        return np.eye(len(pairs))
    return _canonical_null_space(np.array(rows))


@dataclass
class HeterodynePhaseReport:
    """Phase walks read from the partner records and their residuals."""
    times: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    residuals: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals))) if self.residuals.size else 0.0


def heterodyne_phase_state(qnd: QndModel, record: TrajectoryRecord) -> HeterodynePhaseReport:
    """
    Stochastic phases gamma_t = sqrt(eta') y'_t of the partner channels and phase-law residuals.

    The predicted phase of rho(a,b) moves by sum_k (lam_k(a) - lam_k(b)) gamma_k;
    residuals compare it with the recorded snapshots (wrapped to (-pi, pi]).

    Raises:
        InvalidArgumentError: If the model has no heterodyne partners
    """
    if not qnd.heterodyne:
        raise InvalidArgumentError("heterodyne_phase_state needs a heterodyne QND model")
    if record.dy.shape[1] != 2 * qnd.n_base:
        raise InvalidArgumentError("Record channels do not match the heterodyne model")
    y = compensated_cumsum(record.dy)[record.snapshot_steps]
    gamma = y[:, qnd.n_base:] * np.sqrt(qnd.partner_eta)[None, :]
    lam = np.real(qnd.lam)
    pairs = level_pairs(qnd.n_levels)
    rho0 = qnd.to_eigenbasis(record.rho0)
    residuals = np.zeros((len(record.times), len(pairs)))
    for i, snap in enumerate(record.snapshots):
        r = qnd.to_eigenbasis(snap)
        for j, (a, b) in enumerate(pairs):
            if abs(rho0[a, b]) < POPULATION_FLOOR or abs(r[a, b]) < POPULATION_FLOOR:
                continue
            predicted = np.angle(rho0[a, b]) + np.sum((lam[:, a] - lam[:, b]) * gamma[i])
            diff = np.angle(r[a, b]) - predicted
            residuals[i, j] = (diff + np.pi) % (2 * np.pi) - np.pi
    return HeterodynePhaseReport(times=record.times, gamma=gamma, beta=beta_basis(qnd),
                                 residuals=residuals)


# ---------------------------------------------------------------- position measurement

def posterior_width(t: float, eta: float) -> float:
    """Width sigma_t = 1/(2 sqrt(eta t)) of the position likelihood."""
    return 1.0 / (2.0 * math.sqrt(eta * t))


def posterior_center(y: float, t: float, eta: float) -> float:
    return y / (2.0 * math.sqrt(eta) * t)


def position_posterior(p0: np.ndarray, x: np.ndarray, y: float, t: float, eta: float) -> np.ndarray:
    """
    Position distribution after monitoring L = X for a time t with integrated signal y.

    p_t(x) ~ p0(x) exp(-(x - gamma_t)^2 / (2 sigma_t^2)), the grid form of the
    explicit QND population law with lam(x) = x.

    Args:
        p0: Prior probabilities on the grid
        x: Uniform grid
        y: Integrated signal
        t: Elapsed time (t = 0 returns p0)
        eta: Detection efficiency

    Raises:
        InvalidArgumentError: For a non-uniform grid or invalid inputs
    """
    p0 = np.asarray(p0, dtype=float)
    x = np.asarray(x, dtype=float)
    if p0.shape != x.shape:
        raise InvalidArgumentError("p0 and grid must have the same shape")
    if len(x) > 2:
        steps = np.diff(x)
        if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
            raise InvalidArgumentError("Grid must be uniform")
    if t < 0:
        raise InvalidArgumentError(f"t must be >= 0, got {t}")
    if t == 0:
        return p0.copy()
    if eta <= 0:
        return p0 / p0.sum()
    sigma = posterior_width(t, eta)
    gamma = posterior_center(y, t, eta)
    with np.errstate(divide='ignore'):
        logp = np.where(p0 > 0, np.log(np.where(p0 > 0, p0, 1.0)), -np.inf)
    logp = logp - (x - gamma) ** 2 / (2 * sigma ** 2)
    return np.exp(logp - logsumexp(logp))


# ---------------------------------------------------------------- repetition code

# Subspace membership (bit strings, qubit 1 leftmost)
REPETITION_SUBSPACES = {
    0: ('000', '111'),
    1: ('100', '011'),
    2: ('010', '101'),
    3: ('001', '110'),
}

SYNDROME_LABELS = {1: {2: 'Z', 3: 'Z'}, 2: {1: 'Z', 3: 'Z'}, 3: {1: 'Z', 2: 'Z'}}


@dataclass
class RepetitionCode:
    """Repetition-code scenario with its syndrome subspaces."""
    model: ScenarioModel
    syndromes: Tuple[int, ...]
    projectors: Dict[int, np.ndarray]

    def signature(self, subspace: int) -> Tuple[int, ...]:
        """Syndrome eigenvalues (lam_1, lam_2, lam_3) on V_subspace."""
        ket = int(REPETITION_SUBSPACES[subspace][0], 2)
        return tuple(int(round(np.real(pauli_string(SYNDROME_LABELS[s], 3)[ket, ket])))
                     for s in (1, 2, 3))

    def qnd(self) -> QndModel:
        lam = np.array([np.real(np.diag(pauli_string(SYNDROME_LABELS[s], 3))) for s in self.syndromes])
        etas = [ch.eta for ch in self.model.channels[:len(self.syndromes)]]
        return QndModel(lam=lam, eta=np.array(etas), name="repetition")


def repetition_model(eta: float, gamma_flip: float = 0.0, syndromes: Sequence[int] = (1, 2, 3),
                     flip_qubits: Sequence[int] = (1, 2, 3)) -> RepetitionCode:
    """
    Three-qubit repetition code with syndrome measurements and optional bit flips.

    Syndrome L1 = Z2 Z3, L2 = Z1 Z3, L3 = Z1 Z2 at efficiency eta; each
    flipped qubit q adds an unmonitored channel sqrt(gamma_flip) X_q.

    Raises:
        InvalidArgumentError: If eta is outside [0, 1] or gamma_flip < 0
    """
    if not 0 <= eta <= 1:
        raise InvalidArgumentError(f"eta must lie in [0, 1], got {eta}")
    if gamma_flip < 0:
        raise InvalidArgumentError(f"gamma_flip must be >= 0, got {gamma_flip}")
    channels = [MeasurementChannel(L=pauli_string(SYNDROME_LABELS[s], 3), eta=eta, label=f"L{s}")
                for s in syndromes]
    if gamma_flip > 0:
        for q in flip_qubits:
            channels.append(MeasurementChannel(L=math.sqrt(gamma_flip) * pauli_string({q: 'X'}, 3),
                                               eta=0.0, label=f"flip{q}"))
    projectors = {}
    for j, kets in REPETITION_SUBSPACES.items():
        p = np.zeros((8, 8), dtype=complex)
        for bits in kets:
            i = int(bits, 2)
            p[i, i] = 1.0
        projectors[j] = p
    model = ScenarioModel(H=np.zeros((8, 8), dtype=complex), channels=channels,
                          factor_dims=[2, 2, 2], name="repetition")
    return RepetitionCode(model=model, syndromes=tuple(syndromes), projectors=projectors)


def repetition_conserved_z(rho: np.ndarray) -> Optional[float]:
    """z = rho(000)rho(010) / (rho(001)rho(100)), conserved with syndromes L1 and L3 only."""
    d = np.real(np.diag(rho))
    den = d[0b001] * d[0b100]
    if abs(den) < POPULATION_FLOOR ** 2:
        return None
    return float(d[0b000] * d[0b010] / den)
