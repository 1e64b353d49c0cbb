"""
Emission Module
Two qubits whose decay channels interfere on a balanced beamsplitter.

The monitored channels are the symmetric and antisymmetric combinations of
the two lowering operators. With equal rates the 15 Pauli coordinates
reduce to two record-driven ratios (B1, B2) and 13 combinations that evolve
deterministically.

Coordinate conventions: |0> is the ground state, Y' = -sigma_y and
Z* = Z - I (so the ground state sits at the origin of every Z* coordinate).
Ratios are taken with respect to r(Z*Z*) = 1 + r(ZZ) - r(ZI) - r(IZ), four
times the doubly excited population.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from ..exceptions import InvalidArgumentError
from ..models.scenario import MeasurementChannel, ScenarioModel
from ..ops import PAULI, embed, from_pauli_coords, sigma_minus, tensor

logger = logging.getLogger(__name__)

DENOMINATOR_FLOOR = 1e-12
DEFAULT_RATE = 2.0

DETERMINISTIC_NAMES = (
    'B3~', 'B4~', 'B5~', 'B6~', 'B7~', 'B8~', 'B0~',
    'R1', 'R2', 'R3~', 'R4~', 'R5~', 'R6~',
)

_SINGLE = {
    'I': PAULI['I'],
    'X': PAULI['X'],
    'Y': -PAULI['Y'],
    'Z': PAULI['Z'] - PAULI['I'],
}


def emission_model(rate: float = DEFAULT_RATE, eta1: float = 1.0, eta2: float = 1.0,
                   rate2: Optional[float] = None) -> ScenarioModel:
    """
    Indistinguishable-emission model on two qubits, no Hamiltonian.

    L1 = sqrt(rate) (s_A + s_B)/sqrt(2), L2 = i sqrt(rate2) (s_A - s_B)/sqrt(2).
    ``rate2`` defaults to ``rate``; unequal rates break the confinement and are
    only meant as a negative control.

    Raises:
        InvalidArgumentError: If a rate is not positive
    """
    rate2 = rate if rate2 is None else rate2
    if rate <= 0 or rate2 <= 0:
        raise InvalidArgumentError(f"Emission rates must be positive, got {rate}, {rate2}")
    if rate2 != rate:
        logger.warning(f"Unequal emission rates ({rate}, {rate2}): no low-dimensional manifold expected")
    s_a = embed(sigma_minus(), 0, [2, 2])
    s_b = embed(sigma_minus(), 1, [2, 2])
    channels = [
        MeasurementChannel(L=math.sqrt(rate / 2) * (s_a + s_b), eta=eta1, label="sym"),
        MeasurementChannel(L=1j * math.sqrt(rate2 / 2) * (s_a - s_b), eta=eta2, label="antisym"),
    ]
    return ScenarioModel(H=np.zeros((4, 4), dtype=complex), channels=channels, factor_dims=[2, 2],
                         name="emission")


def _r(rho: np.ndarray, label: str) -> float:
    op = tensor(_SINGLE[label[0]], _SINGLE[label[1]])
    return float(np.real(np.trace(op @ rho)))


@dataclass
class EmissionCoords:
    """Grouped Pauli coordinates (sums _s and differences _d over the two qubits)."""
    x_s: float
    x_d: float
    y_s: float
    y_d: float
    z_s: float
    z_d: float
    xy_s: float
    xy_d: float
    xz_s: float
    xz_d: float
    yz_s: float
    yz_d: float
    xx: float
    yy: float
    zz_star: float

    @property
    def denominator(self) -> float:
        """r(Z*Z*) = 1 + zz_star."""
        return 1.0 + self.zz_star

    @property
    def present(self) -> bool:
        return abs(self.denominator) >= DENOMINATOR_FLOOR

    def ratios(self) -> Optional[Dict[str, float]]:
        """B0..B8 and R1..R6, or None when the denominator vanishes."""
        if not self.present:
            return None
        den = self.denominator
        return {
            'B0': 1.0 / den,
            'B1': self.yz_d / den,
            'B2': self.xz_s / den,
            'B3': self.yy / den,
            'B4': self.xx / den,
            'B5': self.xy_d / den,
            'B6': self.z_s / den,
            'B7': self.x_s / den,
            'B8': self.y_d / den,
            'R1': self.xz_d / den,
            'R2': self.yz_s / den,
            'R3': self.z_d / den,
            'R4': self.xy_s / den,
            'R5': self.x_d / den,
            'R6': self.y_s / den,
        }

    def to_density(self) -> np.ndarray:
        """Rebuild rho from the coordinates."""
        def split(s, d):
            return (s + d) / 2, (s - d) / 2

        r = {}
        r['XI'], r['IX'] = split(self.x_s, self.x_d)
        r['YI'], r['IY'] = split(self.y_s, self.y_d)
        r['ZI'], r['IZ'] = split(self.z_s, self.z_d)
        r['XY'], r['YX'] = split(self.xy_s, self.xy_d)
        r['XZ'], r['ZX'] = split(self.xz_s, self.xz_d)
        r['YZ'], r['ZY'] = split(self.yz_s, self.yz_d)
        r['XX'], r['YY'], r['ZZ'] = self.xx, self.yy, self.zz_star + 1.0

        # undo Z* = Z - I and Y' = -Y
        std = {'II': 1.0, 'XX': r['XX'], 'YY': r['YY']}
        std['ZI'] = r['ZI'] + 1.0
        std['IZ'] = r['IZ'] + 1.0
        std['XI'], std['IX'] = r['XI'], r['IX']
        std['YI'], std['IY'] = -r['YI'], -r['IY']
        std['XY'], std['YX'] = -r['XY'], -r['YX']
        std['XZ'] = r['XZ'] + r['XI']
        std['ZX'] = r['ZX'] + r['IX']
        std['YZ'] = -(r['YZ'] + r['YI'])
        std['ZY'] = -(r['ZY'] + r['IY'])
        std['ZZ'] = r['ZZ'] + std['ZI'] + std['IZ'] - 1.0
        return from_pauli_coords(std)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def emission_coords(rho: np.ndarray) -> EmissionCoords:
    """
    Grouped coordinates of a two-qubit state.

    Raises:
        InvalidArgumentError: If rho is not 4x4
    """
    rho = np.asarray(rho)
    if rho.shape != (4, 4):
        raise InvalidArgumentError(f"Emission coordinates need a 4x4 state, got {rho.shape}")
    r = {a + b: _r(rho, a + b) for a in 'IXYZ' for b in 'IXYZ'}
    return EmissionCoords(
        x_s=r['XI'] + r['IX'], x_d=r['XI'] - r['IX'],
        y_s=r['YI'] + r['IY'], y_d=r['YI'] - r['IY'],
        z_s=r['ZI'] + r['IZ'], z_d=r['ZI'] - r['IZ'],
        xy_s=r['XY'] + r['YX'], xy_d=r['XY'] - r['YX'],
        xz_s=r['XZ'] + r['ZX'], xz_d=r['XZ'] - r['ZX'],
        yz_s=r['YZ'] + r['ZY'], yz_d=r['YZ'] - r['ZY'],
        xx=r['XX'], yy=r['YY'],
        zz_star=r['ZZ'] - 1.0,
    )


def emission_deterministic_vars(coords: EmissionCoords) -> Optional[np.ndarray]:
    """
    The 13 record-independent combinations, in DETERMINISTIC_NAMES order.

    B0~ is built as B0 + P(B1, B2), where P is the potential whose partial
    derivatives in B2 and B1 are B7/2 and B8/2 once B3..B8 are expressed
    through their deterministic combinations; this cancels the noise of B0
    exactly.

    Returns:
        13-vector, or None when the ratios are absent
    """
    b = coords.ratios()
    if b is None:
        return None
    b1, b2 = b['B1'], b['B2']
    t3 = b1 ** 2 / 4 + b['B3']
    t4 = b2 ** 2 / 4 - b['B4']
    t5 = b1 * b2 / 2 + b['B5']
    t6 = (b1 ** 2 + b2 ** 2) / 4 + b['B6']
    t7 = (b['B4'] * b2 - b['B6'] * b2 / 2 - b['B5'] * b1 / 2
          - b1 ** 2 * b2 / 4 - b2 ** 3 / 4 + b['B7'])
    t8 = (-b['B3'] * b1 - b['B5'] * b2 / 2 - b['B6'] * b1 / 2
          - b2 ** 2 * b1 / 4 - b1 ** 3 / 4 + b['B8'])
    potential = 0.5 * (
        t7 * b2 + t8 * b1
        + (t4 + t6 / 2) * b2 ** 2 / 2
        + (t3 + t6 / 2) * b1 ** 2 / 2
        + t5 * b1 * b2 / 2
        - (b1 ** 2 + b2 ** 2) ** 2 / 32
    )
    t0 = b['B0'] + potential
    r1, r2, r3, r4 = b['R1'], b['R2'], b['R3'], b['R4']
    s3 = -r1 * b2 / 2 - r2 * b1 / 2 + r3
    s4 = r1 * b1 / 2 - r2 * b2 / 2 + r4
    s5 = (-r3 * b2 / 2 - r4 * b1 / 2 + r2 * b1 * b2 / 4
          + r1 * b2 ** 2 / 8 - r1 * b1 ** 2 / 8 + b['R5'])
    s6 = (-r3 * b1 / 2 + r4 * b2 / 2 + r1 * b1 * b2 / 4
          + r2 * b1 ** 2 / 8 - r2 * b2 ** 2 / 8 + b['R6'])
    return np.array([t3, t4, t5, t6, t7, t8, t0, r1, r2, s3, s4, s5, s6])


def emission_closed_form(initial: np.ndarray, eta1: float, eta2: float, t: float,
                         rate: float = DEFAULT_RATE) -> np.ndarray:
    """
    Propagate the 13 deterministic combinations to time t.

    Time is rescaled by rate/2, so ``rate`` = 2 is the natural unit.

    Args:
        initial: 13-vector at t=0 (DETERMINISTIC_NAMES order)
        eta1, eta2: Channel efficiencies
        t: Time >= 0

    Raises:
        InvalidArgumentError: On a negative time or a wrong-length vector
    """
    v = np.asarray(initial, dtype=float)
    if v.shape != (13,):
        raise InvalidArgumentError(f"Expected 13 deterministic values, got shape {v.shape}")
    if t < 0:
        raise InvalidArgumentError(f"t must be >= 0, got {t}")
    tau = rate * t / 2
    e1, e2, e3, e4 = (math.exp(k * tau) for k in (1, 2, 3, 4))
    t3, t4, t5, t6, t7, t8, t0, r1, r2, s3, s4, s5, s6 = v
    out = np.empty(13)
    out[0] = t3 * e2 + eta2 / 2 * (e2 - 1)
    out[1] = t4 * e2 + eta1 / 2 * (e2 - 1)
    out[2] = t5 * e2
    out[3] = t6 * e2 + (eta1 + eta2) / 2 * (e2 - 1)
    out[4] = t7 * e3
    out[5] = t8 * e3
    # d/dt B0~ = 4 B0~ + eta2 B3~ + eta1 B4~ + (eta1+eta2) B6~ / 2
    const = eta1 ** 2 / 2 + eta2 ** 2 / 2 + (eta1 + eta2) ** 2 / 4
    growth = eta2 * t3 + eta1 * t4 + (eta1 + eta2) * t6 / 2 + const
    out[6] = t0 * e4 + growth * (e4 - e2) / 2 - const * (e4 - 1) / 4
    out[7] = r1 * e1
    out[8] = r2 * e1
    out[9] = s3 * e2
    out[10] = s4 * e2
    out[11] = (s5 + (eta2 - eta1) / 4 * r1) * e3 - (eta2 - eta1) / 4 * r1 * e1
    out[12] = (s6 + (eta1 - eta2) / 4 * r2) * e3 - (eta1 - eta2) / 4 * r2 * e1
    return out


def emission_record_vars(b1_0: float, b2_0: float, dy: np.ndarray, dt: float,
                         eta1: float, eta2: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    B1 and B2 along a record (natural rate units).

    B1(t) = e^t (B1(0) - 2 sqrt(eta2) int e^{-s} dy2), B2 likewise with dy1.

    Returns:
        (B1, B2), each of length n_steps + 1
    """
    dy = np.asarray(dy, dtype=float)
    n = dy.shape[0]
    times = np.arange(n + 1) * dt
    weights = np.exp(-times[:-1])
    s1 = np.concatenate([[0.0], np.cumsum(weights * dy[:, 0])])
    s2 = np.concatenate([[0.0], np.cumsum(weights * dy[:, 1])])
    growth = np.exp(times)
    b1 = growth * (b1_0 - 2 * math.sqrt(eta2) * s2)
    b2 = growth * (b2_0 - 2 * math.sqrt(eta1) * s1)
    return b1, b2
