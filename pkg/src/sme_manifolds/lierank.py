"""
Lie Rank Module
Confining-manifold dimension from the rank of the measurement Lie algebra.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import InvalidArgumentError
from .fields import (
    Bracket, VectorFieldExpr, control_fields, drift_field, evaluate, noise_fields,
)
from .models.scenario import ScenarioModel
from .ops import random_density, to_vec

logger = logging.getLogger(__name__)

DEFAULT_SV_THRESHOLD = 1e-7
# Required ratio between the last kept and first dropped singular value
DEFAULT_GAP = 10.0
# Below this many snapshots spread statistics are unreliable
MIN_DIAGNOSTIC_SAMPLES = 50


@dataclass
class LieAlgebraReport:
    """Outcome of the rank analysis of a scenario."""
    M: int
    converged: bool
    depth_reached: int
    generators: List[str] = field(default_factory=list)
    ranks: List[int] = field(default_factory=list)
    singular_values: List[List[float]] = field(default_factory=list)
    ambiguous: List[bool] = field(default_factory=list)
    sample_points: List[np.ndarray] = field(default_factory=list)
    heuristic: bool = False
    sv_threshold: float = DEFAULT_SV_THRESHOLD

    @property
    def lower_bound(self) -> bool:
        """True when M is only a lower bound (closure not reached)."""
        return not self.converged

    def to_dict(self) -> Dict[str, Any]:
        return {
            'M': self.M,
            'converged': self.converged,
            'lower_bound': self.lower_bound,
            'depth_reached': self.depth_reached,
            'heuristic': self.heuristic,
            'sv_threshold': self.sv_threshold,
            'ranks': list(self.ranks),
            'ambiguous': list(self.ambiguous),
            'singular_values': [list(map(float, s)) for s in self.singular_values],
            'generators': list(self.generators),
        }


def _column_rank(columns: np.ndarray, sv_threshold: float, gap: float) -> Tuple[int, np.ndarray, bool]:
    """
    Rank of a matrix of (unnormalized) columns.

    Columns are scaled to unit norm first; zero columns are dropped. A point
    is ambiguous when the kept/dropped singular values are not separated by
    ``gap``.
    """
    if columns.size == 0:
        return 0, np.zeros(0), False
    norms = np.linalg.norm(columns, axis=0)
    keep = norms > 1e-12
    if not np.any(keep):
        return 0, np.zeros(0), False
    scaled = columns[:, keep] / norms[keep]
    svals = np.linalg.svd(scaled, compute_uv=False)
    rank = int(np.sum(svals > sv_threshold * svals[0]))
    ambiguous = False
    if rank < len(svals):
        dropped = svals[rank]
        if dropped > 0 and svals[rank - 1] / dropped < gap:
            ambiguous = True
    return rank, svals, ambiguous


def rank_at(fields: Sequence[Any], rho: np.ndarray, sv_threshold: float = DEFAULT_SV_THRESHOLD,
            gap: float = DEFAULT_GAP) -> Tuple[int, np.ndarray]:
    """
    Rank of the vectorized evaluations of ``fields`` at rho.

    Args:
        fields: Field expressions (or already evaluated operators)
        rho: Evaluation point
        sv_threshold: Relative singular-value threshold

    Returns:
        (rank, singular values)
    """
    if not fields:
        raise InvalidArgumentError("rank_at needs at least one field")
    cols = []
    for f in fields:
        op = evaluate(f, rho).op if isinstance(f, VectorFieldExpr) else np.asarray(f)
        cols.append(to_vec(op))
    rank, svals, _ = _column_rank(np.array(cols).T, sv_threshold, gap)
    return rank, svals


def _sample_points(model: ScenarioModel, n_points: int, rng: np.random.Generator,
                   support: Optional[Sequence[int]]) -> List[np.ndarray]:
    return [random_density(model.dim, rng, support=support) for _ in range(n_points)]


def oscillator_support(factor_dims: Sequence[int], oscillator_factor: int, margin: int = 2) -> List[int]:
    """Basis indices whose level on the oscillator factor avoids the top ``margin`` levels."""
    dims = list(factor_dims)
    n = dims[oscillator_factor]
    indices = np.arange(int(np.prod(dims))).reshape(dims)
    sl = [slice(None)] * len(dims)
    sl[oscillator_factor] = slice(0, n - margin)
    return sorted(int(i) for i in indices[tuple(sl)].ravel())


def manifold_dimension(model: ScenarioModel, n_points: int = 5, max_depth: int = 6,
                       sv_threshold: float = DEFAULT_SV_THRESHOLD, seed: Optional[int] = 0,
                       gap: float = DEFAULT_GAP, max_resample: int = 3,
                       support: Optional[Sequence[int]] = None) -> LieAlgebraReport:
    """
    Dimension of the Lie algebra generated by the measurement fields.

    Worklist closure: start from G_{L_k} (eta_k > 0); at each level bracket
    every newly admitted member with the Stratonovich drift, each drive field
    and each generator; a candidate is admitted when it raises the rank of
    the stacked evaluations at some sample point.

    Args:
        model: Scenario model
        n_points: Number of random interior sample points
        max_depth: Maximum number of bracket levels
        sv_threshold: Relative singular-value threshold
        seed: Seed for the sample points
        gap: Required spectral gap for a non-ambiguous rank
        max_resample: Attempts to replace an ambiguous sample point
        support: Restrict sample states to these basis indices (oscillators)

    Returns:
        LieAlgebraReport; ``converged`` is False when the last level still
        added directions
    """
    if n_points < 3:
        raise InvalidArgumentError(f"n_points must be >= 3, got {n_points}")
    if max_depth < 1:
        raise InvalidArgumentError(f"max_depth must be >= 1, got {max_depth}")

    rng = np.random.default_rng(seed)
    points = _sample_points(model, n_points, rng, support)
    generators = noise_fields(model)
    partners: List[VectorFieldExpr] = [drift_field(model)] + control_fields(model) + list(generators)
    max_rank = model.dim ** 2 - 1

    members: List[VectorFieldExpr] = []
    columns: List[List[np.ndarray]] = [[] for _ in points]
    ranks = [0 for _ in points]

    def try_admit(candidate: VectorFieldExpr) -> bool:
        values = [to_vec(evaluate(candidate, p, max_depth=max_depth + 1).op) for p in points]
        raised = False
        for i, v in enumerate(values):
            if ranks[i] >= max_rank:
                continue
            r, _, _ = _column_rank(np.array(columns[i] + [v]).T, sv_threshold, gap)
            if r > ranks[i]:
                raised = True
        if raised:
            members.append(candidate)
            for i, v in enumerate(values):
                columns[i].append(v)
                ranks[i], _, _ = _column_rank(np.array(columns[i]).T, sv_threshold, gap)
        return raised

    frontier = [g for g in generators if try_admit(g)]
    depth = 0
    converged = not frontier
    logger.debug(f"Generators admitted: {[g.label for g in frontier]}")
    while frontier and not converged:
        if depth >= max_depth:
            break
        depth += 1
        added = []
        for member in frontier:
            for partner in partners:
                if max(ranks) >= max_rank:
                    break
                if try_admit(Bracket(partner, member)):
                    added.append(members[-1])
        logger.debug(f"Bracket level {depth}: {len(added)} new directions, ranks {ranks}")
        if not added:
            converged = True
        frontier = added
    if max(ranks, default=0) >= max_rank:
        converged = True

    # final rank with gap checks; resample ambiguous points
    final_ranks, final_svals, ambiguous = [], [], []
    for i, p in enumerate(points):
        r, s, amb = _column_rank(np.array(columns[i]).T if columns[i] else np.zeros((0, 0)),
                                 sv_threshold, gap)
        attempts = 0
        while amb and attempts < max_resample:
            attempts += 1
            logger.warning(f"Ambiguous rank at sample point {i}; resampling ({attempts}/{max_resample})")
            p = _sample_points(model, 1, rng, support)[0]
            cols = np.array([to_vec(evaluate(m, p, max_depth=max_depth + 1).op) for m in members]).T
            r, s, amb = _column_rank(cols, sv_threshold, gap)
            points[i] = p
        final_ranks.append(r)
        final_svals.append(list(s))
        ambiguous.append(amb)

    M = max(final_ranks, default=0)
    logger.info(f"Lie rank of '{model.name}': M={M} (converged={converged}, depth={depth})")
    return LieAlgebraReport(
        M=M, converged=converged, depth_reached=depth,
        generators=[m.label for m in members], ranks=final_ranks,
        singular_values=final_svals, ambiguous=ambiguous, sample_points=points,
        heuristic=support is not None, sv_threshold=sv_threshold,
    )


def confinement_diagnostic(snapshots: Sequence[np.ndarray],
                           invariant_map: Callable[[np.ndarray], Sequence[Optional[float]]],
                           names: Optional[Sequence[str]] = None) -> Dict[str, Dict[str, float]]:
    """
    Ensemble spread of coordinates evaluated on snapshots taken at one time.

    Absent coordinates (None) are ignored per coordinate.

    Returns:
        {name: {"mean", "std", "count"}}
    """
    values = []
    for rho in snapshots:
        row = [np.nan if v is None else float(v) for v in invariant_map(rho)]
        values.append(row)
    if len(values) < MIN_DIAGNOSTIC_SAMPLES:
        logger.warning(f"Confinement diagnostic on only {len(values)} snapshots")
    arr = np.array(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(len(values), -1)
    if names is None:
        names = [f"c{i}" for i in range(arr.shape[1])]
    stats = {}
    for j, name in enumerate(names):
        col = arr[:, j]
        col = col[np.isfinite(col)]
        stats[name] = {
            'mean': float(col.mean()) if col.size else float('nan'),
            'std': float(col.std()) if col.size else float('nan'),
            'count': int(col.size),
        }
    return stats
