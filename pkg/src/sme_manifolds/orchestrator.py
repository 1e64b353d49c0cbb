"""
Run Orchestrator Module
Coordinates simulation, rank, check and figure runs and writes their data files.
"""

import csv
import json
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .checks import InvariantChecker
from .config import ConfigManager
from .lierank import confinement_diagnostic, manifold_dimension
from .models.run_config import ScenarioConfig
from .models.scenario import TrajectoryRecord
from .report import ReportGenerator
from .scenarios import DIFFUSION_PANELS, BuiltScenario, build_scenario, figure_panels
from .sme import simulate

logger = logging.getLogger(__name__)

# Figure certificates
DETERMINISTIC_STD = 1e-2
STOCHASTIC_STD = 0.05
DIFFUSION_DIRECTIONS = 3


def _fmt(value: Optional[float]) -> str:
    if value is None or not np.isfinite(value):
        return ''
    return '%.17g' % value


def write_trajectory_csv(path: Path, scenario: BuiltScenario, records: Sequence[TrajectoryRecord],
                         observables: Optional[Sequence[str]] = None) -> List[str]:
    """
    Write one row per (trajectory, snapshot time).

    Failed trajectories produce a single row with the error text and empty
    observables. Floats carry 17 significant digits, so identical inputs give
    byte-identical files.

    Returns:
        Observable column names
    """
    columns = scenario.columns(observables)
    fieldnames = ['traj_id', 't'] + columns + ['error']
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator='\n')
        writer.writeheader()
        for rec in records:
            if rec.failed:
                writer.writerow({'traj_id': rec.index, 'error': rec.error})
                continue
            for t, rho in zip(rec.times, rec.snapshots):
                row: Dict[str, Any] = {'traj_id': rec.index, 't': _fmt(float(t)), 'error': ''}
                for name, value in scenario.observe(rho, observables).items():
                    row[name] = _fmt(value)
                writer.writerow(row)
    return columns


def spread_statistics(scenario: BuiltScenario,
                      records: Sequence[TrajectoryRecord]) -> Dict[str, Dict[str, Dict[str, float]]]:
    """
    Ensemble spread of the scenario's deterministic and stochastic coordinates per snapshot time.

    Returns:
        {"<t>": {name: {"mean", "std", "count"}}}
    """
    ok = [r for r in records if not r.failed]
    if not ok:
        return {}
    names = list(scenario.deterministic) + list(scenario.stochastic) or scenario.columns()

    def coords(rho: np.ndarray) -> List[Optional[float]]:
        row = scenario.observe(rho)
        return [row.get(name) for name in names]

    stats = {}
    for i, t in enumerate(ok[0].times):
        stats[_fmt(float(t))] = confinement_diagnostic([r.snapshots[i] for r in ok], coords, names)
    return stats


def spread_directions(scenario: BuiltScenario, snapshots: Sequence[np.ndarray],
                      threshold: float = STOCHASTIC_STD) -> int:
    """Number of principal directions of the observed coordinates with standard deviation >= threshold."""
    rows = [[np.nan if v is None else float(v) for v in scenario.observe(rho).values()] for rho in snapshots]
    arr = np.array(rows, dtype=float)
    arr = arr[:, np.all(np.isfinite(arr), axis=0)]
    if arr.shape[0] < 2 or arr.shape[1] == 0:
        return 0
    eig = np.linalg.eigvalsh(np.cov(arr, rowvar=False).reshape(arr.shape[1], arr.shape[1]))
    return int(np.sum(np.sqrt(np.clip(eig, 0.0, None)) >= threshold))


class RunOrchestrator:
    """Orchestrates simulation, analysis and reporting runs."""

    def __init__(self, report_generator: Optional[ReportGenerator] = None, progress: bool = False):
        """
        Initialize the orchestrator.

        Args:
            report_generator: Renderer for plot specs and summaries (default templates if None)
            progress: Show trajectory progress bars
        """
        self.reports = report_generator or ReportGenerator()
        self.progress = progress
        logger.info("RunOrchestrator initialized")

    def _output_dir(self, config: ScenarioConfig, output_dir: Optional[str]) -> Path:
        out = Path(output_dir or config.output_directory)
        out.mkdir(parents=True, exist_ok=True)
        return out

    def _write_json(self, path: Path, data: Dict[str, Any]) -> str:
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            json.dump(data, f, indent=2, allow_nan=True)
            f.write('\n')
        logger.info(f"Saved {path}")
        return str(path)

    def run_simulate(self, config: ScenarioConfig, output_dir: Optional[str] = None) -> Dict[str, Any]:
        """
        Simulate an ensemble and write its trajectory CSV and summary JSON.

        Args:
            config: Parsed run configuration
            output_dir: Output directory (default: config.output_directory)

        Returns:
            Dictionary with file paths, failure count and the summary

        Raises:
            RuntimeError: If the run cannot be completed
        """
        logger.info(f"Starting simulation run: {config.label}")
        result: Dict[str, Any] = {"scenario": config.label, "action": "simulate", "status": "started"}
        try:
            scenario = build_scenario(config.scenario, config.params, config.initial_state)
            out = self._output_dir(config, output_dir)
            start = time.perf_counter()
            records = simulate(scenario.model, scenario.rho0, config.T, config.dt, config.seed,
                               config.n_traj, snapshot_times=config.snapshot_times,
                               progress=self.progress, n_workers=config.threads, keep_failures=True)
            wall = time.perf_counter() - start

            csv_path = out / f"{config.label}_trajectories.csv"
            columns = write_trajectory_csv(csv_path, scenario, records, config.observables)
            failed = [r.index for r in records if r.failed]
            summary = {
                'scenario': config.label,
                'seed': config.seed,
                'dt': config.dt,
                'n_traj': config.n_traj,
                'n_failed': len(failed),
                'failed_trajectories': failed,
                'wall_time': wall,
                'max_clip': max((r.max_clip for r in records), default=0.0),
                'columns': columns,
                'spread': spread_statistics(scenario, records),
                'config': config.to_dict(),
            }
            result["csv"] = str(csv_path)
            result["summary_file"] = self._write_json(out / f"{config.label}_summary.json", summary)
            result["summary"] = summary
            result["status"] = "success"
            if failed:
                logger.warning(f"{len(failed)} of {config.n_traj} trajectories failed")
            logger.info(f"Simulation completed in {wall:.2f}s: {csv_path}")

        except Exception as e:
            error_msg = f"Simulation failed: {e}"
            logger.error(error_msg)
            result["status"] = "failed"
            result["error"] = str(e)
            raise RuntimeError(error_msg) from e

        return result

    def run_rank(self, config: ScenarioConfig, output_dir: Optional[str] = None) -> Dict[str, Any]:
        """
        Compute the Lie-algebra dimension of the configured scenario and write it as JSON.

        Raises:
            RuntimeError: If the analysis cannot be completed
        """
        logger.info(f"Starting rank analysis: {config.label}")
        result: Dict[str, Any] = {"scenario": config.label, "action": "rank", "status": "started"}
        try:
            scenario = build_scenario(config.scenario, config.params, config.initial_state)
            r = config.rank
            start = time.perf_counter()
            report = manifold_dimension(scenario.model, n_points=r.n_points, max_depth=r.max_depth,
                                        sv_threshold=r.sv_threshold, seed=r.seed, gap=r.gap,
                                        support=scenario.rank_support)
            data = dict(report.to_dict(), scenario=config.label, wall_time=time.perf_counter() - start,
                        config=config.to_dict())
            out = self._output_dir(config, output_dir)
            result["report_file"] = self._write_json(out / f"{config.label}_rank.json", data)
            result["report"] = data
            result["status"] = "success"
            bound = "" if report.converged else " (lower bound)"
            logger.info(f"Rank analysis completed: M = {report.M}{bound}")

        except Exception as e:
            error_msg = f"Rank analysis failed: {e}"
            logger.error(error_msg)
            result["status"] = "failed"
            result["error"] = str(e)
            raise RuntimeError(error_msg) from e

        return result

    def run_check(self, config: ScenarioConfig, kind: str, output_dir: Optional[str] = None) -> Dict[str, Any]:
        """
        Run an invariant check and write its residual table as JSON.

        The result's ``passed`` is True only if every row passes.

        Raises:
            RuntimeError: If the check cannot be run
        """
        logger.info(f"Starting {kind} check: {config.label}")
        result: Dict[str, Any] = {"scenario": config.label, "action": f"{kind}-check", "status": "started"}
        try:
            checker = InvariantChecker(config)
            start = time.perf_counter()
            report = checker.run(kind)
            data = dict(report.to_dict(), wall_time=time.perf_counter() - start, config=config.to_dict())
            out = self._output_dir(config, output_dir)
            result["report_file"] = self._write_json(out / f"{config.label}_{kind}_check.json", data)
            result["report"] = data
            result["passed"] = report.passed
            result["status"] = "success"
            logger.info(f"Check {kind} completed: {'passed' if report.passed else 'FAILED'}")

        except Exception as e:
            error_msg = f"Check {kind} failed to run: {e}"
            logger.error(error_msg)
            result["status"] = "failed"
            result["error"] = str(e)
            raise RuntimeError(error_msg) from e

        return result

    def certify_panel(self, name: str, scenario: BuiltScenario,
                      records: Sequence[TrajectoryRecord]) -> List[Dict[str, Any]]:
        """
        Confinement certificates of one figure panel at each snapshot time.

        Confined panels: deterministic coordinates collapse, stochastic ones
        spread. Diffusion panels: at least three spread directions.
        """
        ok = [r for r in records if not r.failed]
        certificates = []
        if not ok:
            return certificates
        stats = spread_statistics(scenario, ok)
        for i, t in enumerate(ok[0].times):
            key = _fmt(float(t))
            if name in DIFFUSION_PANELS:
                n_dir = spread_directions(scenario, [r.snapshots[i] for r in ok])
                certificates.append({'name': 'spread directions', 't': float(t), 'kind': 'count',
                                     'value': float(n_dir), 'comparison': '>=',
                                     'threshold': DIFFUSION_DIRECTIONS,
                                     'passed': n_dir >= DIFFUSION_DIRECTIONS})
                continue
            for coord in scenario.deterministic:
                std = stats[key][coord]['std']
                certificates.append({'name': coord, 't': float(t), 'kind': 'std', 'value': std,
                                     'comparison': '<=', 'threshold': DETERMINISTIC_STD,
                                     'passed': bool(np.isfinite(std) and std <= DETERMINISTIC_STD)})
            for coord in scenario.stochastic:
                std = stats[key][coord]['std']
                certificates.append({'name': coord, 't': float(t), 'kind': 'std', 'value': std,
                                     'comparison': '>=', 'threshold': STOCHASTIC_STD,
                                     'passed': bool(np.isfinite(std) and std >= STOCHASTIC_STD)})
        return certificates

    def run_figures(self, output_dir: str, overrides: Optional[Dict[str, Any]] = None,
                    panels: Optional[Sequence[str]] = None) -> Dict[str, Any]:
        """
        Run the figure panels: CSVs, plot specs, certificates and a markdown summary.

        Args:
            output_dir: Root output directory (one subdirectory per panel)
            overrides: Values replacing panel defaults (seed, dt, n_traj, threads)
            panels: Panel names to run (default: all)

        Returns:
            Dictionary with per-panel results and the summary path
        """
        all_panels = figure_panels()
        names = list(panels) if panels else list(all_panels)
        unknown = [n for n in names if n not in all_panels]
        if unknown:
            raise ValueError(f"Unknown figure panels {unknown}; choose from {sorted(all_panels)}")

        logger.info(f"Starting figures run of {len(names)} panels")
        root = Path(output_dir)
        root.mkdir(parents=True, exist_ok=True)
        config_manager = ConfigManager()
        overrides = {k: v for k, v in (overrides or {}).items() if k != 'output_directory'}
        results = {"total": len(names), "certified": 0, "failed": 0, "panels": []}

        for name in names:
            block = dict(all_panels[name], name=name, output_directory=str(root / name))
            entry: Dict[str, Any] = {"name": name, "status": "started"}
            try:
                config = config_manager.parse_config_for_run(block, overrides)
                scenario = build_scenario(config.scenario, config.params, config.initial_state)
                out = self._output_dir(config, None)
                start = time.perf_counter()
                records = simulate(scenario.model, scenario.rho0, config.T, config.dt, config.seed,
                                   config.n_traj, snapshot_times=config.snapshot_times,
                                   progress=self.progress, n_workers=config.threads, keep_failures=True)
                wall = time.perf_counter() - start
                csv_path = out / f"{name}_trajectories.csv"
                write_trajectory_csv(csv_path, scenario, records, config.observables)
                axes = (list(scenario.stochastic) + list(scenario.deterministic))[:3]
                spec_path = self.reports.save_plot_spec(
                    str(out / f"{name}_plot.json"), panel=name, csv_name=csv_path.name,
                    axes=axes, snapshot_times=config.snapshot_times or [config.T])
                certificates = self.certify_panel(name, scenario, records)
                entry.update({
                    "status": "success", "n_traj": config.n_traj, "wall_time": wall,
                    "csv": str(csv_path), "plot_spec": spec_path, "certificates": certificates,
                    "certified": bool(certificates) and all(c['passed'] for c in certificates),
                    "config": config.to_dict(),
                })
                self._write_json(out / f"{name}_summary.json", dict(entry, spread=spread_statistics(scenario, records)))
                if entry["certified"]:
                    results["certified"] += 1
                else:
                    logger.warning(f"Panel {name} not certified")

            except Exception as e:
                logger.error(f"Panel {name} failed: {e}")
                entry.update({"status": "failed", "error": str(e), "certified": False})
                results["failed"] += 1
            results["panels"].append(entry)

        results["summary_file"] = self.reports.save_summary(str(root / "SUMMARY.md"), "Figure statistics",
                                                            results["panels"])
        self._write_json(root / "figures.json", results)
        logger.info(f"Figures run completed: {results['certified']} of {results['total']} certified, "
                     f"{results['failed']} failed")
        return results

    def batch(self, runs: List[ScenarioConfig], action: str, check_kind: Optional[str] = None,
              output_dir: Optional[str] = None, stop_on_error: bool = False) -> Dict[str, Any]:
        """
        Run one action over several configured runs.

        Args:
            runs: Parsed run configurations
            action: 'simulate', 'rank' or 'check'
            check_kind: Check kind when action is 'check'
            output_dir: Output directory for every run (default: each run's own)
            stop_on_error: Whether to stop processing on first error

        Returns:
            Dictionary with batch results
        """
        if action not in ('simulate', 'rank', 'check'):
            raise ValueError(f"Unknown batch action: {action}")
        logger.info(f"Starting batch {action} of {len(runs)} runs")

        results = {
            "total": len(runs),
            "successful": 0,
            "failed": 0,
            "runs": []
        }

        for i, config in enumerate(runs, 1):
            logger.info(f"Processing run {i}/{len(runs)}: {config.label}")
            try:
                if action == 'simulate':
                    result = self.run_simulate(config, output_dir)
                elif action == 'rank':
                    result = self.run_rank(config, output_dir)
                else:
                    result = self.run_check(config, check_kind, output_dir)
                result["index"] = i
                results["runs"].append(result)
                if result.get("passed", True):
                    results["successful"] += 1
                else:
                    results["failed"] += 1

            except Exception as e:
                logger.error(f"Run {i} failed: {e}")
                results["runs"].append({
                    "index": i,
                    "scenario": config.label,
                    "status": "failed",
                    "error": str(e)
                })
                results["failed"] += 1

                if stop_on_error:
                    logger.error("Stopping batch processing due to error")
                    break

        logger.info(f"Batch {action} completed: {results['successful']} successful, {results['failed']} failed")
        return results
