"""
Dispersive Readout Module
A qudit read out through a dispersively coupled, heterodyne-monitored oscillator.

Each qudit level k shifts the oscillator frequency by omega_k. Without
drives, the oscillator block conditioned on level k follows a fluorescence
kernel that rotates at omega_k, and the reduced qudit state is a
deterministic function of the 2d kernel means (xi_k, pi_k).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from ..exceptions import IntegrationFailure, InvalidArgumentError
from ..gauss import Signal, TRUNCATION_TAIL, _signal, fluorescence_params
from ..models.scenario import Drive, MeasurementChannel, ScenarioModel
from ..ops import annihilation, creation, number_op, quadratures, tail_population
from ..qnd import QndModel

logger = logging.getLogger(__name__)

SINGULAR_TOL = 1e-10
MAX_LEVELS = 4
MAX_FOCK = 20


def level_frequencies(chi: float, shifts: Sequence[float]) -> np.ndarray:
    """omega_k = chi * (Q_A)_kk."""
    return chi * np.asarray(shifts, dtype=float)


def _rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def dispersive_model(shifts: Sequence[float], chi: float = 1.0, eta: float = 1.0, n_max: int = 15,
                     u: Signal = 0.0, v: Signal = 0.0,
                     rho0: Optional[np.ndarray] = None) -> ScenarioModel:
    """
    Qudit (x) truncated oscillator with H = chi Q_A (x) N and drives on the oscillator.

    The oscillator is monitored through I (x) b and I (x) i b at efficiency eta.

    Args:
        shifts: Diagonal of Q_A (one entry per qudit level, d >= 2)
        chi: Dispersive coupling
        eta: Detection efficiency
        n_max: Fock truncation
        u, v: Drive amplitudes on 2X and 2P
        rho0: Optional initial state for the truncation check

    Raises:
        InvalidArgumentError: On d < 2 or a truncation that leaves more than
            1e-8 population in the top two Fock levels
    """
    d = len(shifts)
    if d < 2:
        raise InvalidArgumentError(f"Dispersive readout needs d >= 2 levels, got {d}")
    if d > MAX_LEVELS or n_max > MAX_FOCK:
        logger.warning(f"Large dispersive model (d={d}, n_max={n_max}); runs will be slow")
    dims = [d, n_max + 1]
    if rho0 is not None:
        tail = tail_population(rho0, levels=2, dims=dims, factor=1)
        if tail > TRUNCATION_TAIL:
            raise InvalidArgumentError(
                f"Truncation n_max={n_max} leaves {tail:.2g} population in the top two levels; "
                f"increase n_max"
            )
    eye_q = np.eye(d, dtype=complex)
    b = annihilation(n_max)
    X, P = quadratures(n_max)
    H = chi * np.kron(np.diag(np.asarray(shifts, dtype=complex)), number_op(n_max))
    channels = [
        MeasurementChannel(L=np.kron(eye_q, b), eta=eta, label="b"),
        MeasurementChannel(L=np.kron(eye_q, 1j * b), eta=eta, label="ib"),
    ]
    drives = [
        Drive(coupling=np.kron(eye_q, 2 * X), amplitude=u, label="u"),
        Drive(coupling=np.kron(eye_q, 2 * P), amplitude=v, label="v"),
    ]
    return ScenarioModel(H=H, channels=channels, drives=drives, factor_dims=dims, name="dispersive")


# ---------------------------------------------------------------- off-diagonal kernel parameters

def offdiagonal_params(omega: float, eta: float, t: Union[float, np.ndarray]) -> Tuple[Any, Any, Any]:
    """
    Complex kernel parameters (a, s, d) of an off-diagonal block with frequency difference omega.

    omega = 0 reproduces the diagonal fluorescence parameters.
    """
    t = np.asarray(t, dtype=float)
    w = 1 + 0.5j * omega
    decay = np.exp(-w * t)
    a = (2 + 1j * omega) * decay / ((2 - eta + 0.5j * omega) + (eta + 0.5j * omega) * np.exp(-(2 + 1j * omega) * t))
    s = 0.5 * (1 - a * decay)
    d = a * (2 * eta + 1j * omega) / (2 + 1j * omega) * (decay - np.exp(w * t))
    if t.ndim == 0:
        return complex(a), complex(s), complex(d)
    return a, s, d


def offdiagonal_riccati_residual(omega: float, eta: float, t: np.ndarray, h: float = 1e-5) -> float:
    """Max residual of ds/dt = 1 - 2s - 2 eta (s-1/2)^2 - i omega (s^2 - 1/4) for the closed form."""
    t = np.asarray(t, dtype=float)
    _, s, _ = offdiagonal_params(omega, eta, t)
    _, sp, _ = offdiagonal_params(omega, eta, t + h)
    _, sm, _ = offdiagonal_params(omega, eta, np.maximum(t - h, 0.0))
    ds = (sp - sm) / ((t + h) - np.maximum(t - h, 0.0))
    rhs = 1 - 2 * s - 2 * eta * (s - 0.5) ** 2 - 1j * omega * (s ** 2 - 0.25)
    return float(np.max(np.abs(ds - rhs)))


# ---------------------------------------------------------------- drive-free filter

@dataclass
class DispersiveBlockState:
    """
    Drive-free dispersive filter state at time t.

    ``mu`` is the unnormalized reduced qudit matrix (traces of the blocks up
    to a common factor); None when the kernel is singular.
    """
    t: float
    a: float
    s: float
    d: float
    xi: np.ndarray
    pi: np.ndarray
    omegas: np.ndarray
    mu: Optional[np.ndarray] = None
    singular: bool = False

    @property
    def qudit_state(self) -> Optional[np.ndarray]:
        if self.mu is None:
            return None
        return self.mu / np.trace(self.mu).real

    @property
    def populations(self) -> Optional[np.ndarray]:
        q = self.qudit_state
        return None if q is None else np.real(np.diag(q))

    def to_dict(self) -> Dict[str, Any]:
        pops = self.populations
        return {
            't': self.t, 'a': self.a, 's': self.s, 'd': self.d,
            'xi': self.xi.tolist(), 'pi': self.pi.tolist(),
            'singular': self.singular,
            'populations': None if pops is None else pops.tolist(),
        }


def _record_amplitudes(state: DispersiveBlockState) -> np.ndarray:
    """
    ell_k = sqrt(eta) int e^{-(1 + i omega_k)s} (dy1 - i dyP) recovered from (xi_k, pi_k).

    The frame-rotated means obey u_k = -(a sqrt(eta)/2) int e^{-s} R(omega_k s) dy.
    """
    ell = np.zeros(len(state.omegas), dtype=complex)
    for k, om in enumerate(state.omegas):
        u = _rotation(om * state.t) @ np.array([state.xi[k], state.pi[k]])
        ell[k] = -(2.0 / state.a) * (u[0] - 1j * u[1])
    return ell


def _bargmann_weight(om_jk: float, eta: float, t: float) -> complex:
    """B_jk = (2 - 2 eta) int_0^t e^{-(2 + i om)s} ds + e^{-(2 + i om)t}."""
    rate = 2 + 1j * om_jk
    decay = np.exp(-rate * t)
    return complex((2 - 2 * eta) * (1 - decay) / rate + decay)


def reduced_qudit(state: DispersiveBlockState, rho0: np.ndarray, eta: float, n_max: int) -> np.ndarray:
    """
    Unnormalized reduced qudit matrix.

    mu_jk = Tr(rho0_jk e^{conj(ell_k) b^dag} B_jk^N e^{ell_j b}), with rho0_jk
    the oscillator block <j|rho0|k>; exact on the truncation.
    """
    d = len(state.omegas)
    dim = n_max + 1
    blocks = np.asarray(rho0).reshape(d, dim, d, dim)
    ell = _record_amplitudes(state)
    b = annihilation(n_max)
    bd = creation(n_max)
    levels = np.arange(dim)
    lower = [linalg.expm(ell[k] * b) for k in range(d)]
    raise_ = [linalg.expm(np.conj(ell[k]) * bd) for k in range(d)]
    mu = np.zeros((d, d), dtype=complex)
    for j in range(d):
        for k in range(d):
            block = blocks[j, :, k, :]
            if not np.any(block):
                continue
            weight = _bargmann_weight(state.omegas[j] - state.omegas[k], eta, state.t)
            Y = raise_[k] @ np.diag(weight ** levels) @ lower[j]
            mu[j, k] = np.trace(block @ Y)
    return mu


def dispersive_filter_nodrive(omegas: Sequence[float], eta: float, rho0: np.ndarray, dy: np.ndarray,
                              dt: float, n_max: int,
                              snapshot_steps: Optional[Sequence[int]] = None) -> List[DispersiveBlockState]:
    """
    Drive-free dispersive filter.

    Integrates the per-level kernel means with Euler-Maruyama (lab frame, the
    rotation at omega_k included in the drift) and reconstructs the reduced
    qudit state at each requested step.

    Args:
        omegas: Level frequencies omega_k
        eta: Efficiency in (0, 1]
        rho0: Joint initial state, dimension d (n_max + 1)
        dy: Record increments (columns: b, i b channels)
        dt: Step size
        n_max: Fock truncation of rho0
        snapshot_steps: Steps to report (default: final only)

    Raises:
        InvalidArgumentError: On shape mismatches or eta outside (0, 1]
        IntegrationFailure: On non-finite means
    """
    omegas = np.asarray(omegas, dtype=float)
    d = len(omegas)
    if np.asarray(rho0).shape != (d * (n_max + 1),) * 2:
        raise InvalidArgumentError(f"rho0 shape {np.asarray(rho0).shape} does not match d={d}, n_max={n_max}")
    if not 0 < eta <= 1:
        raise InvalidArgumentError(f"eta must lie in (0, 1], got {eta}")
    dy = np.asarray(dy, dtype=float)
    n_steps = dy.shape[0]
    wanted = set([n_steps] if snapshot_steps is None else [int(s) for s in snapshot_steps])
    se = math.sqrt(eta)
    xi = np.zeros(d)
    pi = np.zeros(d)
    out: List[DispersiveBlockState] = []

    def snapshot(step: int) -> DispersiveBlockState:
        t = step * dt
        a, s, dd = fluorescence_params(eta, 0.0, t)
        state = DispersiveBlockState(t=t, a=a, s=s, d=dd, xi=xi.copy(), pi=pi.copy(), omegas=omegas)
        if abs(s - 0.5) < SINGULAR_TOL:
            logger.warning(f"Dispersive kernel singular at t={t:.4g} (s - 1/2 = {s - 0.5:.2e})")
            state.singular = True
            return state
        state.mu = reduced_qudit(state, rho0, eta, n_max)
        return state

    if 0 in wanted:
        out.append(snapshot(0))
    for n in range(n_steps):
        t = n * dt
        _, s, _ = fluorescence_params(eta, 0.0, t)
        gain = se * (s - 0.5)
        dy1, dyp = dy[n, 0], -dy[n, 1]
        new_xi = xi + gain * (dy1 - 2 * se * xi * dt) + (-xi + omegas * pi) * dt
        new_pi = pi + gain * (dyp - 2 * se * pi * dt) + (-pi - omegas * xi) * dt
        xi, pi = new_xi, new_pi
        if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(pi))):
            raise IntegrationFailure("Non-finite dispersive kernel means", step=n, time=t)
        if n + 1 in wanted:
            out.append(snapshot(n + 1))
    return out


# ---------------------------------------------------------------- effective QND limit

@dataclass
class EffectiveQnd:
    """Level-conditioned coherent amplitudes alpha_k(t) and the QND channel pair they define."""
    times: np.ndarray
    amplitudes: np.ndarray
    eta: float
    omegas: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def model_at(self, index: int) -> QndModel:
        """Heterodyne QND model with L = diag(alpha(t)) and partner i L."""
        return QndModel(lam=[self.amplitudes[index]], eta=[self.eta], heterodyne=True,
                        name="effective-qnd")

    def operators_at(self, index: int) -> Tuple[np.ndarray, np.ndarray]:
        lam = self.amplitudes[index]
        return np.diag(lam), np.diag(1j * lam)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'times': self.times.tolist(),
            'amplitudes': [[[z.real, z.imag] for z in row] for row in self.amplitudes],
            'eta': self.eta,
        }


def stationary_amplitudes(omegas: Sequence[float], u: float = 0.0, v: float = 0.0) -> np.ndarray:
    """Fixed point of d alpha/dt = (v - i u) - i omega alpha - alpha."""
    return (v - 1j * u) / (1 + 1j * np.asarray(omegas, dtype=float))


def effective_qnd(omegas: Sequence[float], eta: float, T: float, dt: float, u: Signal = 0.0,
                  v: Signal = 0.0, alpha0: Optional[Sequence[complex]] = None) -> EffectiveQnd:
    """
    Integrate the level-conditioned amplitudes (RK4) of the asymptotic regime.

    d alpha_k/dt = (v - i u) - i omega_k alpha_k - alpha_k, alpha = <X> + i <P>.

    Raises:
        InvalidArgumentError: On non-positive dt or negative T
    """
    if dt <= 0 or T < 0:
        raise InvalidArgumentError(f"Need dt > 0 and T >= 0, got dt={dt}, T={T}")
    omegas = np.asarray(omegas, dtype=float)
    n = int(round(T / dt))
    alpha = np.zeros(len(omegas), dtype=complex) if alpha0 is None else np.asarray(alpha0, dtype=complex)
    if not np.all(np.isfinite(alpha)):
        raise InvalidArgumentError("Initial amplitudes must be finite")

    def rhs(t, x):
        return (_signal(v, t) - 1j * _signal(u, t)) - 1j * omegas * x - x

    amps = [alpha.copy()]
    for k in range(n):
        t = k * dt
        k1 = rhs(t, alpha)
        k2 = rhs(t + dt / 2, alpha + dt / 2 * k1)
        k3 = rhs(t + dt / 2, alpha + dt / 2 * k2)
        k4 = rhs(t + dt, alpha + dt * k3)
        alpha = alpha + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        amps.append(alpha.copy())
    return EffectiveQnd(times=np.arange(n + 1) * dt, amplitudes=np.array(amps), eta=eta, omegas=omegas)
