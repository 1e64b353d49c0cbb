"""
Run Configuration Models
Data structures describing one scenario run and its rank/check settings.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional

ScenarioKind = Literal["qutrit-qnd", "repetition", "fluorescence", "xp", "emission", "dispersive", "custom"]
CheckKind = Literal["qnd", "gauss", "emission", "dispersive"]

SCENARIO_KINDS = ("qutrit-qnd", "repetition", "fluorescence", "xp", "emission", "dispersive", "custom")
CHECK_KINDS = ("qnd", "gauss", "emission", "dispersive")


@dataclass
class RankSettings:
    """Settings of a Lie-rank analysis."""
    n_points: int = 5
    max_depth: int = 6
    sv_threshold: float = 1e-7
    gap: float = 10.0
    seed: Optional[int] = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n_points': self.n_points,
            'max_depth': self.max_depth,
            'sv_threshold': self.sv_threshold,
            'gap': self.gap,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RankSettings':
        return cls(
            n_points=int(data.get('n_points', 5)),
            max_depth=int(data.get('max_depth', 6)),
            sv_threshold=float(data.get('sv_threshold', 1e-7)),
            gap=float(data.get('gap', 10.0)),
            seed=data.get('seed', 0),
        )


@dataclass
class CheckSettings:
    """
    Settings of an invariant check.

    ``tolerances`` overrides the per-invariant defaults of the checker by
    invariant name.
    """
    n_seeds: int = 10
    refine: bool = False
    grid: int = 201
    tolerances: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n_seeds': self.n_seeds,
            'refine': self.refine,
            'grid': self.grid,
            'tolerances': dict(self.tolerances),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CheckSettings':
        return cls(
            n_seeds=int(data.get('n_seeds', 10)),
            refine=bool(data.get('refine', False)),
            grid=int(data.get('grid', 201)),
            tolerances={k: float(v) for k, v in (data.get('tolerances') or {}).items()},
        )


@dataclass
class ScenarioConfig:
    """A fully parsed run: scenario, initial state, time grid and outputs."""
    scenario: ScenarioKind
    params: Dict[str, Any] = field(default_factory=dict)
    initial_state: Any = None
    T: float = 1.0
    dt: float = 1e-3
    n_traj: int = 100
    seed: Optional[int] = 0
    snapshot_times: Optional[List[float]] = None
    observables: Optional[List[str]] = None
    output_directory: str = "output"
    name: Optional[str] = None
    threads: int = 1
    rank: RankSettings = field(default_factory=RankSettings)
    check: CheckSettings = field(default_factory=CheckSettings)

    @property
    def label(self) -> str:
        return self.name or self.scenario

    def to_dict(self) -> Dict[str, Any]:
        """Config subset in the same shape the configuration loader accepts."""
        data = {
            'scenario': self.scenario,
            'params': dict(self.params),
            'T': self.T,
            'dt': self.dt,
            'n_traj': self.n_traj,
            'seed': self.seed,
            'output_directory': self.output_directory,
            'threads': self.threads,
            'rank': self.rank.to_dict(),
            'check': self.check.to_dict(),
        }
        if self.name:
            data['name'] = self.name
        if self.initial_state is not None:
            data['initial_state'] = self.initial_state
        if self.snapshot_times is not None:
            data['snapshot_times'] = list(self.snapshot_times)
        if self.observables is not None:
            data['observables'] = list(self.observables)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ScenarioConfig':
        snaps = data.get('snapshot_times')
        obs = data.get('observables')
        return cls(
            scenario=data['scenario'],
            params=dict(data.get('params') or {}),
            initial_state=data.get('initial_state'),
            T=float(data.get('T', 1.0)),
            dt=float(data.get('dt', 1e-3)),
            n_traj=int(data.get('n_traj', 100)),
            seed=data.get('seed', 0),
            snapshot_times=[float(t) for t in snaps] if snaps is not None else None,
            observables=list(obs) if obs is not None else None,
            output_directory=data.get('output_directory', 'output'),
            name=data.get('name'),
            threads=int(data.get('threads', 1)),
            rank=RankSettings.from_dict(data.get('rank') or {}),
            check=CheckSettings.from_dict(data.get('check') or {}),
        )
