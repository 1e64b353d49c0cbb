"""
Gaussian Kernel Module
Reduced Wigner-kernel filters for a monitored harmonic oscillator.

Fluorescence (a and i a monitored at unit rate) and simultaneous X/P
measurement keep the Wigner function of the conditioned state equal to a
Gaussian kernel integrated against the initial Wigner function. The kernel
has a few deterministic parameters (closed forms or Riccati ODEs) and a few
record-driven ones.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

from .exceptions import IntegrationFailure, InvalidArgumentError
from .models.scenario import Drive, MeasurementChannel, ScenarioModel
from .ops import (
    annihilation, cat_ket, coherent_ket, creation, fock_ket, number_op, projector,
    quadratures, tail_population, thermal_density,
)

logger = logging.getLogger(__name__)

Signal = Union[float, Callable[[float], float]]

TRUNCATION_TAIL = 1e-8
DEFAULT_GRID = 201
WINDOW_SIGMAS = 6.0


def _signal(value: Signal, t: float) -> float:
    return float(value(t)) if callable(value) else float(value)


# ---------------------------------------------------------------- fluorescence

def fluorescence_params(eta: float, n_th: float, t: Union[float, np.ndarray]) -> Tuple[Any, Any, Any]:
    """
    Deterministic kernel parameters (a_t, s_t, d_t) for fluorescence measurement.

    Args:
        eta: Detection efficiency, 0 < eta <= 1
        n_th: Thermal occupation >= 0
        t: Time or array of times

    Returns:
        (a_t, s_t, d_t), scalars or arrays like t

    Raises:
        InvalidArgumentError: If eta is not in (0, 1] or n_th < 0
    """
    if not 0 < eta <= 1:
        raise InvalidArgumentError(f"Fluorescence kernel needs 0 < eta <= 1, got {eta}")
    if n_th < 0:
        raise InvalidArgumentError(f"n_th must be >= 0, got {n_th}")
    kappa = math.sqrt(1 + 4 * eta * n_th)
    plus, minus = kappa + 1 - eta, kappa - 1 + eta
    e2 = np.exp(-2 * kappa * np.asarray(t, dtype=float))
    den = plus + minus * e2
    a = 2 * kappa * np.exp(-kappa * np.asarray(t, dtype=float)) / den
    ratio = minus / plus
    s = -(1 - eta) / (2 * eta) + kappa / (2 * eta) * (1 - ratio * e2) / (1 + ratio * e2)
    d = 2 * eta * (e2 - 1) / den
    if np.ndim(t) == 0:
        return float(a), float(s), float(d)
    return a, s, d


def fluorescence_riccati_residual(eta: float, n_th: float, t: np.ndarray, h: float = 1e-5) -> float:
    """
    Max residual of the closed forms in their ODEs.

    ds/dt = (1+2n) - 2s - 2 eta (s-1/2)^2, da/dt = -(1 + 2 eta (s-1/2)) a,
    dd/dt = -2 eta a^2; derivatives by central differences of step h.
    """
    t = np.asarray(t, dtype=float)
    a, s, d = fluorescence_params(eta, n_th, t)
    ap, sp, dp = fluorescence_params(eta, n_th, t + h)
    am, sm, dm = fluorescence_params(eta, n_th, np.maximum(t - h, 0.0))
    width = (t + h) - np.maximum(t - h, 0.0)
    ds = (sp - sm) / width
    da = (ap - am) / width
    dd = (dp - dm) / width
    r_s = ds - ((1 + 2 * n_th) - 2 * s - 2 * eta * (s - 0.5) ** 2)
    r_a = da + (1 + 2 * eta * (s - 0.5)) * a
    r_d = dd + 2 * eta * a ** 2
    return float(max(np.max(np.abs(r_s)), np.max(np.abs(r_a)), np.max(np.abs(r_d))))


@dataclass
class FluorescenceKernelState:
    """Kernel parameters of the fluorescence filter at time t."""
    t: float
    a: float
    s: float
    d: float
    xi: float
    theta: float
    pi: float
    phi: float
    eta: float
    n_th: float

    @classmethod
    def initial(cls, eta: float, n_th: float = 0.0) -> 'FluorescenceKernelState':
        a, s, d = fluorescence_params(eta, n_th, 0.0)
        return cls(t=0.0, a=a, s=s, d=d, xi=0.0, theta=0.0, pi=0.0, phi=0.0, eta=eta, n_th=n_th)

    def to_dict(self) -> Dict[str, float]:
        return {
            't': self.t, 'a': self.a, 's': self.s, 'd': self.d,
            'xi': self.xi, 'theta': self.theta, 'pi': self.pi, 'phi': self.phi,
        }


def fluorescence_step(state: FluorescenceKernelState, dy1: float, dy2: float,
                      u: float, v: float, dt: float) -> FluorescenceKernelState:
    """
    Euler-Maruyama update of (xi, theta, pi, phi); (a, s, d) refreshed from closed forms.

    ``dy2`` is the output of the i a channel, whose mean is -2 sqrt(eta) <P> dt;
    the p block is driven by -dy2 so that both blocks share one form.

    Raises:
        InvalidArgumentError: If dt <= 0
        IntegrationFailure: If the update is not finite
    """
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    eta, a, s = state.eta, state.a, state.s
    se = math.sqrt(eta)
    gain = s - 0.5
    dyp = -dy2
    xi = state.xi + se * gain * dy1 + (v - state.xi - 2 * eta * gain * state.xi) * dt
    theta = state.theta + 2 * se * a * dy1 - 4 * eta * a * state.xi * dt
    pi = state.pi + se * gain * dyp + (-u - state.pi - 2 * eta * gain * state.pi) * dt
    phi = state.phi + 2 * se * a * dyp - 4 * eta * a * state.pi * dt
    if not all(math.isfinite(x) for x in (xi, theta, pi, phi)):
        logger.error(f"Fluorescence kernel diverged at t={state.t:.4g} (eta={eta}, n_th={state.n_th})")
        raise IntegrationFailure("Non-finite fluorescence kernel update", time=state.t)
    t = state.t + dt
    a_new, s_new, d_new = fluorescence_params(eta, state.n_th, t)
    return replace(state, t=t, a=a_new, s=s_new, d=d_new, xi=xi, theta=theta, pi=pi, phi=phi)


def fluorescence_filter(dy: np.ndarray, dt: float, eta: float, n_th: float = 0.0,
                        u: Signal = 0.0, v: Signal = 0.0,
                        snapshot_steps: Optional[Sequence[int]] = None) -> List[FluorescenceKernelState]:
    """
    Run the fluorescence filter over a record.

    Args:
        dy: Record increments, shape (n_steps, >=2); columns 0 and 1 are the
            a and i a channels
        dt: Step size
        eta: Efficiency
        n_th: Thermal occupation
        u, v: Drive amplitudes (constants or functions of t)
        snapshot_steps: Step indices to return (default: final only)

    Returns:
        Kernel states at the requested steps
    """
    dy = np.asarray(dy, dtype=float)
    n_steps = dy.shape[0]
    wanted = set([n_steps] if snapshot_steps is None else [int(s) for s in snapshot_steps])
    logger.debug(f"Fluorescence filter over {n_steps} steps (dt={dt}, eta={eta}, n_th={n_th})")
    state = FluorescenceKernelState.initial(eta, n_th)
    out = {0: state} if 0 in wanted else {}
    for n in range(n_steps):
        t = n * dt
        state = fluorescence_step(state, dy[n, 0], dy[n, 1], _signal(u, t), _signal(v, t), dt)
        if n + 1 in wanted:
            out[n + 1] = state
    return [out[s] for s in sorted(out)]


def fluorescence_reduced(state: FluorescenceKernelState) -> Tuple[float, float]:
    """Deterministic combinations z = xi + e^{-t} theta/4 and h = pi + e^{-t} phi/4 (n_th = 0)."""
    decay = math.exp(-state.t) / 4
    return state.xi + decay * state.theta, state.pi + decay * state.phi


def reduced_reference(t: float, dt: float, u: Signal = 0.0, v: Signal = 0.0) -> Tuple[float, float]:
    """Solve dz/dt = v - z, dh/dt = -u - h from zero with RK4."""
    n = int(round(t / dt))
    z = h = 0.0
    for k in range(n):
        s = k * dt

        def fz(tt, zz):
            return _signal(v, tt) - zz

        def fh(tt, hh):
            return -_signal(u, tt) - hh

        z = _rk4_scalar(fz, s, z, dt)
        h = _rk4_scalar(fh, s, h, dt)
    return z, h


def _rk4_scalar(f, t, y, dt):
    k1 = f(t, y)
    k2 = f(t + dt / 2, y + dt / 2 * k1)
    k3 = f(t + dt / 2, y + dt / 2 * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


# ---------------------------------------------------------------- X/P measurement

@dataclass(frozen=True)
class XpParameters:
    """Rates of the simultaneous X/P measurement model."""
    gamma_x: float
    gamma_p: float
    gamma_l: float = 0.0
    eta_x: float = 1.0
    eta_p: float = 1.0
    delta: float = 0.0
    n_th: float = 0.0

    def __post_init__(self):
        for name in ('gamma_x', 'gamma_p', 'gamma_l', 'n_th'):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ('eta_x', 'eta_p'):
            if not 0 <= getattr(self, name) <= 1:
                raise InvalidArgumentError(f"{name} must lie in [0, 1], got {getattr(self, name)}")

    def m_matrix(self, t: float) -> np.ndarray:
        c, s = math.cos(self.delta * t), math.sin(self.delta * t)
        gx, gp = self.eta_x * self.gamma_x, self.eta_p * self.gamma_p
        return np.array([[gx * c * c + gp * s * s, (gx - gp) * s * c],
                         [(gx - gp) * s * c, gp * c * c + gx * s * s]])

    def n_matrix(self, t: float) -> np.ndarray:
        c, s = math.cos(self.delta * t), math.sin(self.delta * t)
        gx, gp = self.gamma_x, self.gamma_p
        return np.array([[gp * c * c + gx * s * s, (gp - gx) * s * c],
                         [(gp - gx) * s * c, gx * c * c + gp * s * s]])

    def record_gain(self, t: float, dy1: float, dy2: float) -> np.ndarray:
        c, s = math.cos(self.delta * t), math.sin(self.delta * t)
        kx = math.sqrt(self.eta_x * self.gamma_x)
        kp = math.sqrt(self.eta_p * self.gamma_p)
        return np.array([kx * c * dy1 - kp * s * dy2, kx * s * dy1 + kp * c * dy2])


@dataclass
class XpKernelState:
    """Kernel parameters of the X/P filter: S, Z symmetric; B = (A, R) columns; Theta, Lambda."""
    t: float
    S: np.ndarray
    Z: np.ndarray
    B: np.ndarray
    Theta: np.ndarray
    Lam: np.ndarray
    params: XpParameters

    @classmethod
    def initial(cls, params: XpParameters) -> 'XpKernelState':
        return cls(t=0.0, S=np.zeros((2, 2)), Z=np.zeros((2, 2)), B=np.eye(2),
                   Theta=np.zeros(2), Lam=np.zeros(2), params=params)

    @property
    def A(self) -> np.ndarray:
        return self.B[:, 0]

    @property
    def R(self) -> np.ndarray:
        return self.B[:, 1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            't': self.t, 'S': self.S.tolist(), 'Z': self.Z.tolist(), 'A': self.A.tolist(),
            'R': self.R.tolist(), 'Theta': self.Theta.tolist(), 'Lambda': self.Lam.tolist(),
        }


def _xp_deterministic_rhs(p: XpParameters, t: float, S: np.ndarray, Z: np.ndarray,
                          B: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    M = p.m_matrix(t)
    N = p.n_matrix(t)
    dS = -p.gamma_l * S + (1 + 2 * p.n_th) * p.gamma_l / 2 * np.eye(2) - 2 * S @ M @ S + 0.5 * N
    dZ = -2 * B.T @ M @ B
    dB = -p.gamma_l / 2 * B - 2 * S @ M @ B
    return dS, dZ, dB


def xp_step(state: XpKernelState, dy1: float, dy2: float, u: float, v: float,
            dt: float) -> XpKernelState:
    """
    One step of the X/P filter: RK4 on (S, Z, A, R), Euler-Maruyama on (Theta, Lambda).

    Raises:
        InvalidArgumentError: If dt <= 0
        IntegrationFailure: If the update is not finite
    """
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    p, t = state.params, state.t
    S, Z, B = state.S, state.Z, state.B

    # stochastic block uses left-endpoint coefficients
    M = p.m_matrix(t)
    gain = p.record_gain(t, dy1, dy2)
    drive = np.array([v, -u])
    theta = state.Theta + (-p.gamma_l / 2 * state.Theta + drive - 2 * S @ M @ state.Theta) * dt + S @ gain
    lam = state.Lam + (p.gamma_l / 2 * state.Lam + 2 * M @ S @ state.Lam - 4 * M @ state.Theta) * dt \
        + 2 * gain

    k1 = _xp_deterministic_rhs(p, t, S, Z, B)
    k2 = _xp_deterministic_rhs(p, t + dt / 2, *(x + dt / 2 * k for x, k in zip((S, Z, B), k1)))
    k3 = _xp_deterministic_rhs(p, t + dt / 2, *(x + dt / 2 * k for x, k in zip((S, Z, B), k2)))
    k4 = _xp_deterministic_rhs(p, t + dt, *(x + dt * k for x, k in zip((S, Z, B), k3)))
    new = [x + dt / 6 * (a + 2 * b + 2 * c + d) for x, a, b, c, d in zip((S, Z, B), k1, k2, k3, k4)]
    S_new = 0.5 * (new[0] + new[0].T)
    Z_new = 0.5 * (new[1] + new[1].T)
    if not (np.all(np.isfinite(S_new)) and np.all(np.isfinite(theta)) and np.all(np.isfinite(lam))):
        logger.error(f"X/P kernel diverged at t={t:.4g}")
        raise IntegrationFailure("Non-finite X/P kernel update", time=t)
    return XpKernelState(t=t + dt, S=S_new, Z=Z_new, B=new[2], Theta=theta, Lam=lam, params=p)


def xp_filter(dy: np.ndarray, dt: float, params: XpParameters, u: Signal = 0.0, v: Signal = 0.0,
              snapshot_steps: Optional[Sequence[int]] = None) -> List[XpKernelState]:
    """Run the X/P filter over a record whose first two columns are the X and P channels."""
    dy = np.asarray(dy, dtype=float)
    n_steps = dy.shape[0]
    wanted = set([n_steps] if snapshot_steps is None else [int(s) for s in snapshot_steps])
    logger.debug(f"X/P filter over {n_steps} steps (dt={dt})")
    state = XpKernelState.initial(params)
    out = {0: state} if 0 in wanted else {}
    for n in range(n_steps):
        t = n * dt
        state = xp_step(state, dy[n, 0], dy[n, 1], _signal(u, t), _signal(v, t), dt)
        if n + 1 in wanted:
            out[n + 1] = state
    return [out[s] for s in sorted(out)]


def _decoupled_block(g: float, c1: float, gamma_l: float, t: float) -> Tuple[float, float, float]:
    """
    Closed form of ds/dt = c1 - gamma_l s - 2 g s^2, da/dt = -(gamma_l/2 + 2 g s) a, dz/dt = -2 g a^2.

    Starts from s=0, a=1, z=0. Returns (s, a, z).
    """
    if g == 0:
        if gamma_l == 0:
            return c1 * t, 1.0, 0.0
        return c1 / gamma_l * (1 - math.exp(-gamma_l * t)), math.exp(-gamma_l * t / 2), 0.0
    kappa = math.sqrt(gamma_l ** 2 / 4 + 2 * g * c1)
    if kappa == 0:
        return 0.0, 1.0, -2 * g * t
    half = gamma_l / 2
    e1 = math.exp(-kappa * t)
    e2 = e1 * e1
    den = (kappa + half) + (kappa - half) * e2
    s = c1 * (1 - e2) / den
    a = 2 * kappa * e1 / den
    z = 2 * g * (e2 - 1) / den
    return s, a, z


def xp_closed_form(params: XpParameters, t: float) -> Dict[str, np.ndarray]:
    """
    Deterministic X/P kernel parameters when the x and p blocks decouple.

    Valid for delta = 0, or equal (gamma, eta) on both quadratures.

    Raises:
        InvalidArgumentError: Outside the decoupled cases
    """
    p = params
    equal = p.gamma_x == p.gamma_p and p.eta_x == p.eta_p
    if p.delta != 0 and not equal:
        raise InvalidArgumentError("Closed form needs delta = 0 or identical quadrature rates")
    base = (1 + 2 * p.n_th) * p.gamma_l
    s1, a1, z1 = _decoupled_block(p.eta_x * p.gamma_x, (base + p.gamma_p) / 2, p.gamma_l, t)
    s2, r2, z2 = _decoupled_block(p.eta_p * p.gamma_p, (base + p.gamma_x) / 2, p.gamma_l, t)
    return {
        'S': np.diag([s1, s2]),
        'Z': np.diag([z1, z2]),
        'A': np.array([a1, 0.0]),
        'R': np.array([0.0, r2]),
    }


# ---------------------------------------------------------------- initial Wigner functions

InitialKind = Literal["coherent", "thermal", "cat", "fock", "grid"]


@dataclass
class InitialWignerHandle:
    """
    Initial Wigner function W0(x0, p0), X = (a + a^dag)/2 convention.

    For kind "grid", ``values`` holds W0 sampled on ``grid_x`` x ``grid_p``.
    """
    kind: InitialKind
    alpha: complex = 0.0
    n_bar: float = 0.0
    n: int = 0
    grid_x: Optional[np.ndarray] = None
    grid_p: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("coherent", "thermal", "cat", "fock", "grid"):
            raise InvalidArgumentError(f"Unknown initial state kind '{self.kind}'")
        if self.kind == "grid" and (self.grid_x is None or self.grid_p is None or self.values is None):
            raise InvalidArgumentError("Grid initial state needs grid_x, grid_p and values")
        if self.kind == "cat" and self.alpha == 0:
            raise InvalidArgumentError("Cat state needs alpha != 0")

    def wigner(self, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        """W0 at the points (x, p) (broadcast)."""
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        al = complex(self.alpha)
        if self.kind == "coherent":
            return 2 / np.pi * np.exp(-2 * ((x - al.real) ** 2 + (p - al.imag) ** 2))
        if self.kind == "thermal":
            w = self.n_bar + 0.5
            return np.exp(-(x ** 2 + p ** 2) / w) / (np.pi * w)
        if self.kind == "fock":
            r2 = x ** 2 + p ** 2
            return 2 / np.pi * (-1) ** self.n * np.exp(-2 * r2) * special.eval_laguerre(self.n, 4 * r2)
        if self.kind == "cat":
            norm = 1 / (2 * (1 + np.exp(-2 * abs(al) ** 2)))
            g_plus = np.exp(-2 * ((x - al.real) ** 2 + (p - al.imag) ** 2))
            g_minus = np.exp(-2 * ((x + al.real) ** 2 + (p + al.imag) ** 2))
            cross = 2 * np.exp(-2 * (x ** 2 + p ** 2)) * np.cos(4 * (p * al.real - x * al.imag))
            return 2 * norm / np.pi * (g_plus + g_minus + cross)
        # grid: nearest-node lookup
        ix = np.clip(np.searchsorted(self.grid_x, x), 0, len(self.grid_x) - 1)
        ip = np.clip(np.searchsorted(self.grid_p, p), 0, len(self.grid_p) - 1)
        return np.asarray(self.values)[ix, ip]

    def window(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        """Quadrature window: mean +- 6 std per axis (cat: both lobes covered)."""
        al = complex(self.alpha)
        if self.kind == "grid":
            return (float(self.grid_x[0]), float(self.grid_x[-1])), (float(self.grid_p[0]), float(self.grid_p[-1]))
        if self.kind == "coherent":
            cx, cp, hx, hp = al.real, al.imag, WINDOW_SIGMAS * 0.5, WINDOW_SIGMAS * 0.5
        elif self.kind == "thermal":
            sd = math.sqrt((2 * self.n_bar + 1) / 4)
            cx = cp = 0.0
            hx = hp = WINDOW_SIGMAS * sd
        elif self.kind == "fock":
            sd = math.sqrt((2 * self.n + 1) / 4)
            cx = cp = 0.0
            hx = hp = WINDOW_SIGMAS * sd
        else:
            cx = cp = 0.0
            hx = abs(al.real) + WINDOW_SIGMAS * 0.5
            hp = abs(al.imag) + WINDOW_SIGMAS * 0.5
        return (cx - hx, cx + hx), (cp - hp, cp + hp)

    def quadrature_grid(self, n: int = DEFAULT_GRID) -> Tuple[np.ndarray, np.ndarray, float]:
        """Uniform grid over the window; returns (X0, P0, cell area) with X0 varying along axis 0."""
        if self.kind == "grid":
            xs, ps = np.asarray(self.grid_x), np.asarray(self.grid_p)
        else:
            (x_lo, x_hi), (p_lo, p_hi) = self.window()
            xs = np.linspace(x_lo, x_hi, n)
            ps = np.linspace(p_lo, p_hi, n)
        X0, P0 = np.meshgrid(xs, ps, indexing='ij')
        return X0, P0, float((xs[1] - xs[0]) * (ps[1] - ps[0]))

    def density(self, n_max: int) -> np.ndarray:
        """The same state as a truncated Fock density matrix."""
        if self.kind == "coherent":
            return projector(coherent_ket(self.alpha, n_max))
        if self.kind == "cat":
            return projector(cat_ket(self.alpha, n_max))
        if self.kind == "thermal":
            return thermal_density(self.n_bar, n_max)
        if self.kind == "fock":
            return projector(fock_ket(self.n, n_max))
        raise InvalidArgumentError("A grid Wigner function has no Fock representation here")

    def to_dict(self) -> Dict[str, Any]:
        al = complex(self.alpha)
        return {'kind': self.kind, 'alpha': [al.real, al.imag], 'n_bar': self.n_bar, 'n': self.n}


@dataclass
class KernelMoments:
    mean_x: float
    mean_p: float
    var_x: float
    var_p: float
    cov_xp: float
    weight: float

    def to_dict(self) -> Dict[str, float]:
        return {'mean_x': self.mean_x, 'mean_p': self.mean_p, 'var_x': self.var_x,
                'var_p': self.var_p, 'cov_xp': self.cov_xp, 'weight': self.weight}


def _weighted_q0_moments(log_k: np.ndarray, W0: np.ndarray, X0: np.ndarray, P0: np.ndarray,
                         cell: float) -> Tuple[np.ndarray, np.ndarray, float]:
    """Mean vector and covariance of q0 under weight W0 exp(log_k), in log-space rescaled form."""
    shift = np.max(log_k)
    w = W0 * np.exp(log_k - shift)
    total = float(np.sum(w))
    if not math.isfinite(total) or total <= 0:
        logger.warning(f"Kernel weight not finite after max rescaling (shift={shift:.4g}); retrying")
        # second attempt: rescale by the weighted mode instead of the max
        shift = np.max(log_k[W0 > 0]) if np.any(W0 > 0) else shift
        w = W0 * np.exp(np.clip(log_k - shift, -700, 700))
        total = float(np.sum(w))
        if not math.isfinite(total) or total <= 0:
            logger.error(f"Kernel weight still not finite after mode rescaling (total={total})")
            raise IntegrationFailure("Kernel weight is not normalizable on the quadrature grid")
    mx = float(np.sum(w * X0) / total)
    mp = float(np.sum(w * P0) / total)
    cxx = float(np.sum(w * (X0 - mx) ** 2) / total)
    cpp = float(np.sum(w * (P0 - mp) ** 2) / total)
    cxp = float(np.sum(w * (X0 - mx) * (P0 - mp)) / total)
    return np.array([mx, mp]), np.array([[cxx, cxp], [cxp, cpp]]), total * cell * math.exp(min(shift, 700))


def moments(state: Union[FluorescenceKernelState, XpKernelState], w0: InitialWignerHandle,
            grid: int = DEFAULT_GRID) -> KernelMoments:
    """
    Quadrature means and covariance of the filtered state.

    The kernel is Gaussian in q given q0: integrating q analytically leaves a
    q0 quadrature with weight W0(q0) exp(log K(q0)). For the X/P kernel the
    moments refer to the frame rotating at delta (identical to the lab frame
    when delta = 0).

    Raises:
        IntegrationFailure: If the weight cannot be normalized
    """
    X0, P0, cell = w0.quadrature_grid(grid)
    W0 = w0.wigner(X0, P0)
    if isinstance(state, FluorescenceKernelState):
        log_k = state.d * (X0 ** 2 + P0 ** 2) + state.theta * X0 + state.phi * P0
        mean_q0, cov_q0, weight = _weighted_q0_moments(log_k, W0, X0, P0, cell)
        mean = state.a * mean_q0 + np.array([state.xi, state.pi])
        cov = state.s / 2 * np.eye(2) + state.a ** 2 * cov_q0
    else:
        Z, B = state.Z, state.B
        lin = B.T @ state.Lam
        log_k = Z[0, 0] * X0 ** 2 + 2 * Z[0, 1] * X0 * P0 + Z[1, 1] * P0 ** 2 + lin[0] * X0 + lin[1] * P0
        mean_q0, cov_q0, weight = _weighted_q0_moments(log_k, W0, X0, P0, cell)
        mean = B @ mean_q0 + state.Theta
        cov = state.S / 2 + B @ cov_q0 @ B.T
    return KernelMoments(mean_x=float(mean[0]), mean_p=float(mean[1]), var_x=float(cov[0, 0]),
                         var_p=float(cov[1, 1]), cov_xp=float(cov[0, 1]), weight=weight)


# ---------------------------------------------------------------- full models

OscillatorKind = Literal["fluorescence", "xp"]


def sme_oscillator_model(kind: OscillatorKind, params: Dict[str, Any], n_max: int,
                         rho0: Optional[np.ndarray] = None,
                         initial: Optional[InitialWignerHandle] = None) -> ScenarioModel:
    """
    Truncated-Fock model matching a kernel filter.

    fluorescence params: eta, n_th, u, v (channels a and i a at unit rate,
    thermal channels sqrt(2 n_th) a and sqrt(2 n_th) a^dag unmonitored).
    xp params: gamma_x, gamma_p, gamma_l, eta_x, eta_p, delta, n_th, u, v
    (channels sqrt(gamma_x) X, sqrt(gamma_p) P, relaxation unmonitored, H
    includes delta N).

    Raises:
        InvalidArgumentError: On an unknown kind or a truncation that leaves
            more than 1e-8 population in the top two levels
    """
    if initial is not None and rho0 is None:
        rho0 = initial.density(n_max)
    if rho0 is not None:
        tail = tail_population(rho0, levels=2)
        if tail > TRUNCATION_TAIL:
            suggestion = suggest_truncation(initial, n_max) if initial is not None else None
            hint = f"; try n_max >= {suggestion}" if suggestion else ""
            logger.warning(f"Fock truncation n_max={n_max} too small: top-level population {tail:.2g}")
            raise InvalidArgumentError(
                f"Truncation n_max={n_max} leaves {tail:.2g} population in the top two levels{hint}"
            )

    a = annihilation(n_max)
    ad = creation(n_max)
    X, P = quadratures(n_max)
    dim = n_max + 1
    u = params.get('u', 0.0)
    v = params.get('v', 0.0)
    drives = [Drive(coupling=2 * X, amplitude=u, label="u"), Drive(coupling=2 * P, amplitude=v, label="v")]
    n_th = float(params.get('n_th', 0.0))

    if kind == "fluorescence":
        eta = float(params.get('eta', 1.0))
        channels = [MeasurementChannel(L=a, eta=eta, label="a"),
                    MeasurementChannel(L=1j * a, eta=eta, label="ia")]
        if n_th > 0:
            channels.append(MeasurementChannel(L=math.sqrt(2 * n_th) * a, eta=0.0, label="bath-"))
            channels.append(MeasurementChannel(L=math.sqrt(2 * n_th) * ad, eta=0.0, label="bath+"))
        H = np.zeros((dim, dim), dtype=complex)
    elif kind == "xp":
        p = XpParameters(**{k: float(params[k]) for k in
                            ('gamma_x', 'gamma_p', 'gamma_l', 'eta_x', 'eta_p', 'delta', 'n_th')
                            if k in params})
        channels = [MeasurementChannel(L=math.sqrt(p.gamma_x) * X, eta=p.eta_x, label="X"),
                    MeasurementChannel(L=math.sqrt(p.gamma_p) * P, eta=p.eta_p, label="P")]
        if p.gamma_l > 0:
            channels.append(MeasurementChannel(L=math.sqrt(p.gamma_l * (1 + p.n_th)) * a, eta=0.0,
                                               label="loss"))
            if p.n_th > 0:
                channels.append(MeasurementChannel(L=math.sqrt(p.gamma_l * p.n_th) * ad, eta=0.0,
                                                   label="gain"))
        H = p.delta * number_op(n_max)
    else:
        raise InvalidArgumentError(f"Unknown oscillator model kind '{kind}'")
    return ScenarioModel(H=H, channels=channels, drives=drives, factor_dims=[dim], name=kind)


def suggest_truncation(initial: InitialWignerHandle, start: int, limit: int = 200) -> Optional[int]:
    """Smallest n_max >= start whose top two levels hold at most 1e-8 of the initial state."""
    for n_max in range(max(start, 2), limit + 1):
        if tail_population(initial.density(n_max), levels=2) <= TRUNCATION_TAIL:
            return n_max
    return None
