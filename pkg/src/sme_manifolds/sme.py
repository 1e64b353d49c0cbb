"""
Stochastic Master Equation Module
Ito integration of diffusive quantum trajectories, ensembles, Lindblad reference and record replay.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .exceptions import IntegrationFailure, InvalidArgumentError
from .models.scenario import MeasurementChannel, ScenarioModel, TrajectoryRecord
from .ops import TangentVector, check_same_dim, dag, hermitize

logger = logging.getLogger(__name__)

# Eigenvalues below this are clipped after each step
CLIP_THRESHOLD = 1e-10
# Clipping larger than this is worth a warning
CLIP_WARN = 1e-8
# Tolerance for snapshot times lying on the step grid
GRID_TOL = 1e-9


def _check_state(model: ScenarioModel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (model.dim, model.dim):
        raise InvalidArgumentError(
            f"State shape {rho.shape} does not match model dimension {model.dim}"
        )
    return rho


def _drift_op(model: ScenarioModel, rho: np.ndarray, H: np.ndarray) -> np.ndarray:
    out = -1j * (H @ rho - rho @ H)
    for ch, ldl, ld in zip(model.channels, model._LdL, model._Ld):
        out += ch.L @ rho @ ld - 0.5 * (ldl @ rho + rho @ ldl)
    return out


def _g_op(L: np.ndarray, Ld: np.ndarray, rho: np.ndarray) -> Tuple[np.ndarray, float]:
    lr = L @ rho
    m = lr + rho @ Ld
    mean = float(np.real(np.trace(m)))
    return m - mean * rho, mean


def drift(model: ScenarioModel, rho: np.ndarray, t: float = 0.0) -> TangentVector:
    """
    Ito drift -i[H,rho] + sum_k (L rho L^dag - {L^dag L, rho}/2).

    Args:
        model: Scenario model
        rho: Density operator
        t: Time at which drives are evaluated

    Returns:
        Hermitian traceless drift direction
    """
    rho = _check_state(model, rho)
    return TangentVector(_drift_op(model, rho, model.hamiltonian(t)))


def diffusion(channel: MeasurementChannel, rho: np.ndarray) -> TangentVector:
    """Measurement backaction G_L(rho) = L rho + rho L^dag - Tr(L rho + rho L^dag) rho."""
    rho = np.asarray(rho, dtype=complex)
    check_same_dim(channel.L, rho, "channel and state")
    g, _ = _g_op(channel.L, dag(channel.L), rho)
    return TangentVector(g)


def measurement_means(model: ScenarioModel, rho: np.ndarray) -> np.ndarray:
    """Per-channel Tr(L rho + rho L^dag)."""
    rho = _check_state(model, rho)
    return np.array([np.real(np.trace(ch.L @ rho + rho @ ld))
                     for ch, ld in zip(model.channels, model._Ld)])


def _repair(rho: np.ndarray) -> Tuple[np.ndarray, float]:
    """Hermitize, renormalize and clip eigenvalues below -CLIP_THRESHOLD."""
    rho = hermitize(rho)
    rho /= np.trace(rho).real
    evals = np.linalg.eigvalsh(rho)
    if evals[0] >= -CLIP_THRESHOLD:
        return rho, 0.0
    evals, vecs = np.linalg.eigh(rho)
    clipped = float(-evals[0])
    evals = np.clip(evals, 0.0, None)
    rho = (vecs * evals) @ dag(vecs)
    rho = hermitize(rho)
    rho /= np.trace(rho).real
    return rho, clipped


def _advance(model: ScenarioModel, rho: np.ndarray, t: float, dt: float,
             dw: Optional[np.ndarray] = None, dy: Optional[np.ndarray] = None,
             step: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    One Euler-Maruyama step driven either by noise ``dw`` or by a record ``dy``.

    The noise actually applied is always dy - sqrt(eta) m dt, so a record
    replayed from the same initial state follows the identical arithmetic path.
    """
    H = model.hamiltonian(t + dt / 2)
    update = _drift_op(model, rho, H) * dt
    dy_out = np.empty(model.n_channels)
    for k, ch in enumerate(model.channels):
        g, mean = _g_op(ch.L, model._Ld[k], rho)
        signal = ch.sqrt_eta * mean * dt
        dy_k = signal + dw[k] if dy is None else dy[k]
        dy_out[k] = dy_k
        if ch.eta > 0:
            update += ch.sqrt_eta * (dy_k - signal) * g

    new = rho + update
    if not np.all(np.isfinite(new)):
        raise IntegrationFailure("Non-finite state in Ito step", step=step, time=t)
    new, clipped = _repair(new)
    if not np.all(np.isfinite(new)):
        raise IntegrationFailure("Non-finite state after positivity repair", step=step, time=t)
    return new, dy_out, clipped


def step_ito(model: ScenarioModel, rho: np.ndarray, t: float, dt: float,
             dw: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Single Euler-Maruyama step of the stochastic master equation.

    Args:
        model: Scenario model
        rho: Current density operator
        t: Current time
        dt: Step size
        dw: Per-channel Wiener increments

    Returns:
        (next state, per-channel output increments dy)

    Raises:
        InvalidArgumentError: If dt <= 0 or shapes mismatch
        IntegrationFailure: If the update is not finite
    """
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    rho = _check_state(model, rho)
    dw = np.asarray(dw, dtype=float).reshape(-1)
    if dw.shape[0] != model.n_channels:
        raise InvalidArgumentError(f"Expected {model.n_channels} noise increments, got {dw.shape[0]}")
    new, dy, _ = _advance(model, rho, t, dt, dw=dw)
    return new, dy


def trajectory_rng(seed: Optional[int], index: int) -> np.random.Generator:
    """PCG64 substream for trajectory ``index`` of a seeded ensemble."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def sample_noise(rng: np.random.Generator, n_steps: int, n_channels: int, dt: float) -> np.ndarray:
    return rng.standard_normal((n_steps, n_channels)) * np.sqrt(dt)


def coarsen_noise(dw: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive blocks of ``factor`` increments (same Brownian path, coarser grid)."""
    n = dw.shape[0]
    if factor < 1 or n % factor:
        raise InvalidArgumentError(f"Cannot coarsen {n} steps by a factor {factor}")
    return dw.reshape(n // factor, factor, *dw.shape[1:]).sum(axis=1)


def snapshot_grid(T: float, dt: float, snapshot_times: Optional[Sequence[float]]) -> Tuple[int, np.ndarray, np.ndarray]:
    """
    Validate the time grid.

    Returns:
        (n_steps, snapshot times, snapshot step indices)

    Raises:
        InvalidArgumentError: If T < 0, dt <= 0 or a snapshot time is off-grid
    """
    if T < 0:
        raise InvalidArgumentError(f"T must be >= 0, got {T}")
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > GRID_TOL * max(1.0, T):
        raise InvalidArgumentError(f"dt={dt} does not divide T={T}")
    if snapshot_times is None:
        snapshot_times = [T]
    times = np.asarray(sorted(float(t) for t in snapshot_times))
    steps = np.rint(times / dt).astype(int)
    bad = [float(t) for t, s in zip(times, steps) if abs(s * dt - t) > GRID_TOL * max(1.0, t)]
    if bad:
        raise InvalidArgumentError(f"Snapshot times {bad} are not on the dt={dt} grid")
    if len(times) and (times[0] < 0 or steps[-1] > n_steps):
        raise InvalidArgumentError(f"Snapshot times must lie in [0, {T}]")
    return n_steps, times, steps


def _integrate(model: ScenarioModel, rho0: np.ndarray, dt: float, n_steps: int,
               snapshot_steps: np.ndarray, dw: Optional[np.ndarray] = None,
               dy: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, float]:
    """Run n_steps updates, collecting snapshots at the given step indices."""
    snapshots = np.empty((len(snapshot_steps), model.dim, model.dim), dtype=complex)
    dy_out = np.empty((n_steps, model.n_channels))
    wanted = {}
    for i, s in enumerate(snapshot_steps):
        wanted.setdefault(int(s), []).append(i)

    rho = rho0.copy()
    max_clip = 0.0
    for idx in wanted.get(0, []):
        snapshots[idx] = rho
    for n in range(n_steps):
        t = n * dt
        rho, dy_out[n], clipped = _advance(
            model, rho, t, dt,
            dw=None if dw is None else dw[n],
            dy=None if dy is None else dy[n],
            step=n,
        )
        if clipped > max_clip:
            max_clip = clipped
        for idx in wanted.get(n + 1, []):
            snapshots[idx] = rho
    if max_clip > CLIP_WARN:
        logger.warning(f"Eigenvalue clipping reached {max_clip:.3g} (dt={dt})")
    return snapshots, dy_out, max_clip


def run_trajectory(model: ScenarioModel, rho0: np.ndarray, T: float, dt: float,
                   dw: np.ndarray, snapshot_times: Optional[Sequence[float]] = None,
                   seed: Optional[int] = None, index: int = 0) -> TrajectoryRecord:
    """
    Integrate one trajectory driven by explicit noise increments.

    Useful for strong-convergence studies where the same Brownian path is
    replayed at several step sizes.
    """
    rho0 = _check_state(model, rho0)
    n_steps, times, steps = snapshot_grid(T, dt, snapshot_times)
    dw = np.asarray(dw, dtype=float).reshape(n_steps, model.n_channels)
    try:
        snapshots, dy, max_clip = _integrate(model, rho0, dt, n_steps, steps, dw=dw)
    except IntegrationFailure as e:
        e.trajectory = index
        raise
    return TrajectoryRecord(seed=seed, index=index, dt=dt, times=times, snapshot_steps=steps,
                            dw=dw, dy=dy, snapshots=snapshots, rho0=rho0.copy(),
                            max_clip=max_clip)


def simulate(model: ScenarioModel, rho0: np.ndarray, T: float, dt: float,
             seed: Optional[int], n_traj: int,
             snapshot_times: Optional[Sequence[float]] = None,
             progress: bool = False, n_workers: int = 1,
             keep_failures: bool = False) -> List[TrajectoryRecord]:
    """
    Simulate an ensemble of independent trajectories.

    Trajectory i draws its noise from the PCG64 substream spawned from
    (seed, i), so results do not depend on worker count or order.

    Args:
        model: Scenario model
        rho0: Initial density operator
        T: Final time
        dt: Step size
        seed: Ensemble seed
        n_traj: Number of trajectories
        snapshot_times: Times at which states are stored (default: [T])
        progress: Show a tqdm progress bar
        n_workers: Worker threads
        keep_failures: Return a failed trajectory as a record with ``error``
            set and no snapshots instead of raising

    Returns:
        List of trajectory records, ordered by index

    Raises:
        InvalidArgumentError: On invalid grid or arguments
        IntegrationFailure: With ``trajectory`` set, when a trajectory fails
            and keep_failures is False
    """
    if n_traj < 0:
        raise InvalidArgumentError(f"n_traj must be >= 0, got {n_traj}")
    rho0 = _check_state(model, rho0)
    n_steps, times, steps = snapshot_grid(T, dt, snapshot_times)
    logger.info(f"Simulating {n_traj} trajectories of '{model.name}' (dim={model.dim}, "
                f"steps={n_steps}, dt={dt})")

    def job(i: int) -> TrajectoryRecord:
        rng = trajectory_rng(seed, i)
        dw = sample_noise(rng, n_steps, model.n_channels, dt)
        logger.debug(f"Trajectory {i} started")
        try:
            return run_trajectory(model, rho0, T, dt, dw, snapshot_times, seed=seed, index=i)
        except IntegrationFailure as e:
            if not keep_failures:
                raise
            logger.error(f"Trajectory {i} failed: {e}")
            return TrajectoryRecord(seed=seed, index=i, dt=dt, times=times, snapshot_steps=steps,
                                    dw=dw, dy=np.zeros_like(dw),
                                    snapshots=np.zeros((0, model.dim, model.dim), dtype=complex),
                                    rho0=rho0.copy(), error=str(e))

    indices = range(n_traj)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(tqdm(pool.map(job, indices), total=n_traj, disable=not progress,
                                desc="trajectories"))
    else:
        results = [job(i) for i in tqdm(indices, disable=not progress, desc="trajectories")]
    return results


def lindblad_trajectory(model: ScenarioModel, rho0: np.ndarray, T: float, dt: float,
                        snapshot_times: Optional[Sequence[float]] = None) -> np.ndarray:
    """
    RK4 integration of the unconditioned (Lindblad) evolution.

    Returns:
        States at the snapshot times, shape (n_times, dim, dim)
    """
    rho = _check_state(model, rho0).copy()
    n_steps, times, steps = snapshot_grid(T, dt, snapshot_times)
    out = np.empty((len(times), model.dim, model.dim), dtype=complex)
    wanted = {}
    for i, s in enumerate(steps):
        wanted.setdefault(int(s), []).append(i)
    for idx in wanted.get(0, []):
        out[idx] = rho

    for n in range(n_steps):
        t = n * dt
        h0 = model.hamiltonian(t)
        hm = model.hamiltonian(t + dt / 2)
        h1 = model.hamiltonian(t + dt)
        k1 = _drift_op(model, rho, h0)
        k2 = _drift_op(model, rho + 0.5 * dt * k1, hm)
        k3 = _drift_op(model, rho + 0.5 * dt * k2, hm)
        k4 = _drift_op(model, rho + dt * k3, h1)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = hermitize(rho)
        rho /= np.trace(rho).real
        if not np.all(np.isfinite(rho)):
            raise IntegrationFailure("Non-finite state in Lindblad step", step=n, time=t)
        for idx in wanted.get(n + 1, []):
            out[idx] = rho
    return out


def lindblad_propagate(model: ScenarioModel, rho0: np.ndarray, T: float, dt: float) -> np.ndarray:
    """Lindblad solution at time T (RK4)."""
    return lindblad_trajectory(model, rho0, T, dt, [T])[-1]


def filter_apply(model: ScenarioModel, rho0: np.ndarray, record: TrajectoryRecord) -> np.ndarray:
    """
    Replay a measurement record through the quantum filter.

    The noise is reconstructed as dy - sqrt(eta) Tr(L rho + rho L^dag) dt from
    the filter's own state. Starting from the record's initial state gives
    snapshots bit-identical to the recorded ones.

    Returns:
        Filtered states at ``record.times``

    Raises:
        InvalidArgumentError: If the record does not fit the model
    """
    rho0 = _check_state(model, rho0)
    if record.dy.ndim != 2 or record.dy.shape[1] != model.n_channels:
        raise InvalidArgumentError(
            f"Record has {record.dy.shape[-1] if record.dy.ndim == 2 else '?'} channels, "
            f"model has {model.n_channels}"
        )
    if len(record.snapshot_steps) and record.snapshot_steps.max() > record.n_steps:
        raise InvalidArgumentError("Record snapshot indices exceed its length")
    snapshots, _, _ = _integrate(model, rho0, record.dt, record.n_steps,
                                 record.snapshot_steps, dy=record.dy)
    return snapshots


def ensemble_mean(records: Sequence[TrajectoryRecord]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Mean and standard error of the snapshots over successful trajectories.

    Returns:
        (mean, sem) arrays of shape (n_times, dim, dim); the sem is taken
        separately on real and imaginary parts
    """
    stack = np.array([r.snapshots for r in records if not r.failed])
    if stack.size == 0:
        raise InvalidArgumentError("No successful trajectories to average")
    mean = stack.mean(axis=0)
    n = stack.shape[0]
    sem = (stack.real.std(axis=0, ddof=1) + 1j * stack.imag.std(axis=0, ddof=1)) / np.sqrt(max(n, 1)) \
        if n > 1 else np.zeros_like(mean)
    return mean, sem
