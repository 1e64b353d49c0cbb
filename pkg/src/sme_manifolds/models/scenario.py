"""
Scenario Models
Measurement channels, drives, monitored-system models and trajectory records.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from ..exceptions import InvalidArgumentError
from ..ops import check_operator, dag, HERMITIAN_TOL

Amplitude = Union[float, Callable[[float], float]]


def matrix_to_list(op: np.ndarray) -> List[List[List[float]]]:
    """Serialize a complex matrix as nested [re, im] pairs."""
    op = np.asarray(op, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in op]


def matrix_from_list(data: Sequence) -> np.ndarray:
    """Inverse of matrix_to_list; plain real nested lists are accepted too."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(complex)
    raise InvalidArgumentError(f"Cannot read a matrix from data of shape {arr.shape}")


@dataclass
class MeasurementChannel:
    """A monitored (or lost) channel L with detection efficiency eta."""
    L: np.ndarray
    eta: float = 1.0
    label: str = ""

    def __post_init__(self):
        self.L = check_operator(self.L, f"channel {self.label or 'L'}")
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidArgumentError(f"Efficiency eta must lie in [0, 1], got {self.eta}")

    @property
    def sqrt_eta(self) -> float:
        return math.sqrt(self.eta)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'label': self.label,
            'eta': self.eta,
            'L': matrix_to_list(self.L),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MeasurementChannel':
        return cls(L=matrix_from_list(data['L']), eta=float(data.get('eta', 1.0)),
                   label=data.get('label', ''))


@dataclass
class Drive:
    """A control term amplitude(t) * coupling added to the Hamiltonian."""
    coupling: np.ndarray
    amplitude: Amplitude = 0.0
    label: str = ""

    def __post_init__(self):
        self.coupling = check_operator(self.coupling, f"drive {self.label or 'coupling'}")
        if np.max(np.abs(self.coupling - dag(self.coupling))) > HERMITIAN_TOL:
            raise InvalidArgumentError(f"Drive coupling {self.label!r} must be Hermitian")

    def value(self, t: float) -> float:
        if callable(self.amplitude):
            return float(self.amplitude(t))
        return float(self.amplitude)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'label': self.label,
            'amplitude': None if callable(self.amplitude) else self.amplitude,
            'coupling': matrix_to_list(self.coupling),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Drive':
        return cls(coupling=matrix_from_list(data['coupling']),
                   amplitude=float(data.get('amplitude') or 0.0),
                   label=data.get('label', ''))


@dataclass
class ScenarioModel:
    """
    A continuously monitored system: Hamiltonian, channels, drives and factor structure.

    Instances are treated as immutable once built; derived operator products
    are cached at construction for the integrators.
    """
    H: np.ndarray
    channels: List[MeasurementChannel] = field(default_factory=list)
    drives: List[Drive] = field(default_factory=list)
    factor_dims: Optional[List[int]] = None
    name: str = "custom"

    def __post_init__(self):
        self.H = check_operator(self.H, "Hamiltonian")
        dim = self.H.shape[0]
        herm_err = np.max(np.abs(self.H - dag(self.H)))
        if herm_err > HERMITIAN_TOL:
            raise InvalidArgumentError(f"Hamiltonian is not Hermitian (deviation {herm_err:.3g})")
        for ch in self.channels:
            if ch.L.shape != (dim, dim):
                raise InvalidArgumentError(
                    f"Channel {ch.label!r} has shape {ch.L.shape}, expected {(dim, dim)}"
                )
        for drv in self.drives:
            if drv.coupling.shape != (dim, dim):
                raise InvalidArgumentError(
                    f"Drive {drv.label!r} has shape {drv.coupling.shape}, expected {(dim, dim)}"
                )
        if self.factor_dims is None:
            self.factor_dims = [dim]
        if int(np.prod(self.factor_dims)) != dim:
            raise InvalidArgumentError(
                f"factor_dims {self.factor_dims} do not multiply to dimension {dim}"
            )
        self._LdL = [dag(ch.L) @ ch.L for ch in self.channels]
        self._Ld = [dag(ch.L) for ch in self.channels]

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def etas(self) -> np.ndarray:
        return np.array([ch.eta for ch in self.channels], dtype=float)

    def hamiltonian(self, t: float = 0.0) -> np.ndarray:
        """Total Hamiltonian H + sum_i u_i(t) K_i at time t."""
        if not self.drives:
            return self.H
        total = self.H.copy()
        for drv in self.drives:
            total = total + drv.value(t) * drv.coupling
        return total

    def conjugated(self, unitary: np.ndarray) -> 'ScenarioModel':
        """Same model in a rotated basis: every operator X becomes U X U^dag."""
        u, ud = unitary, dag(unitary)
        channels = [replace(ch, L=u @ ch.L @ ud) for ch in self.channels]
        drives = [replace(d, coupling=u @ d.coupling @ ud) for d in self.drives]
        return ScenarioModel(H=u @ self.H @ ud, channels=channels, drives=drives,
                             factor_dims=[self.dim], name=self.name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'dim': self.dim,
            'factor_dims': list(self.factor_dims),
            'H': matrix_to_list(self.H),
            'channels': [ch.to_dict() for ch in self.channels],
            'drives': [d.to_dict() for d in self.drives],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ScenarioModel':
        return cls(
            H=matrix_from_list(data['H']),
            channels=[MeasurementChannel.from_dict(c) for c in data.get('channels', [])],
            drives=[Drive.from_dict(d) for d in data.get('drives', [])],
            factor_dims=data.get('factor_dims'),
            name=data.get('name', 'custom'),
        )


@dataclass
class TrajectoryRecord:
    """
    One realization of the monitored evolution.

    ``dw`` and ``dy`` have shape (n_steps, n_channels); ``snapshots`` has
    shape (len(times), dim, dim) and holds the state at ``times``, which
    sit on the step grid at indices ``snapshot_steps``.
    """
    seed: Optional[int]
    index: int
    dt: float
    times: np.ndarray
    snapshot_steps: np.ndarray
    dw: np.ndarray
    dy: np.ndarray
    snapshots: np.ndarray
    rho0: np.ndarray
    max_clip: float = 0.0
    error: Optional[str] = None

    @property
    def n_steps(self) -> int:
        return self.dy.shape[0]

    @property
    def failed(self) -> bool:
        return self.error is not None

    def integrated_output(self) -> np.ndarray:
        """
        Running integrals y_t of every channel, one row per grid point.

        Row 0 is t=0; Kahan-compensated so long sums of O(sqrt(dt)) terms
        keep full precision.
        """
        return compensated_cumsum(self.dy)

    def output_at(self, step: int) -> np.ndarray:
        """Integrated output y at grid index ``step``."""
        if not 0 <= step <= self.n_steps:
            raise InvalidArgumentError(f"Step {step} outside 0..{self.n_steps}")
        return compensated_cumsum(self.dy[:step])[-1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'seed': self.seed,
            'index': self.index,
            'dt': self.dt,
            'times': [float(t) for t in self.times],
            'n_steps': self.n_steps,
            'max_clip': self.max_clip,
            'error': self.error,
        }


def compensated_cumsum(increments: np.ndarray) -> np.ndarray:
    """
    Kahan-compensated cumulative sum along axis 0, with a leading zero row.

    Args:
        increments: Array of shape (n, ...) of increments

    Returns:
        Array of shape (n+1, ...) of partial sums
    """
    increments = np.asarray(increments, dtype=float)
    out = np.zeros((increments.shape[0] + 1,) + increments.shape[1:])
    total = np.zeros(increments.shape[1:])
    comp = np.zeros(increments.shape[1:])
    for i, inc in enumerate(increments):
        y = inc - comp
        t = total + y
        comp = (t - total) - y
        total = t
        out[i + 1] = total
    return out
