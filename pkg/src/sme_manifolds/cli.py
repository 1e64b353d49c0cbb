"""
CLI Module
Command-line interface for simulations, rank analyses, invariant checks and figure data.
"""

import sys
import logging
from typing import Any, Dict, List, Optional

import click
from colorama import init, Fore, Style

from . import __version__
from .config import ConfigManager
from .models.run_config import ScenarioConfig
from .orchestrator import RunOrchestrator

# Initialize colorama for cross-platform colored output
init(autoreset=True)

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def print_success(message: str):
    """Print success message in green."""
    click.echo(f"{Fore.GREEN}✓ {message}{Style.RESET_ALL}")


def print_error(message: str):
    """Print error message in red."""
    click.echo(f"{Fore.RED}✗ {message}{Style.RESET_ALL}", err=True)


def print_warning(message: str):
    """Print warning message in yellow."""
    click.echo(f"{Fore.YELLOW}⚠ {message}{Style.RESET_ALL}")


def print_info(message: str):
    """Print info message in blue."""
    click.echo(f"{Fore.BLUE}ℹ {message}{Style.RESET_ALL}")


def run_options(func):
    """Options shared by every command that reads a configuration file."""
    options = [
        click.option('--config', '-c', 'config_file', required=True, type=click.Path(exists=True),
                     help='Path to configuration file (YAML or JSON)'),
        click.option('--seed', type=int, help='Ensemble seed (overrides config)'),
        click.option('--out', 'out_dir', type=click.Path(), help='Output directory (overrides config)'),
        click.option('--threads', type=click.IntRange(min=1), help='Worker threads (overrides config)'),
        click.option('--dt', type=float, help='Step size (overrides config)'),
        click.option('--traj', type=click.IntRange(min=0), help='Number of trajectories (overrides config)'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _overrides(seed: Optional[int], out_dir: Optional[str], threads: Optional[int],
               dt: Optional[float], traj: Optional[int]) -> Dict[str, Any]:
    return {'seed': seed, 'output_directory': out_dir, 'threads': threads, 'dt': dt, 'n_traj': traj}


def _load_runs(config_file: str, overrides: Dict[str, Any]) -> Dict[str, Any]:
    print_info(f"Loading configuration from {config_file}...")
    config_manager = ConfigManager()
    raw_config = config_manager.load_config(config_file)
    parsed = config_manager.parse_config_for_batch(raw_config, overrides)
    print_success(f"Configuration loaded: {len(parsed['runs'])} run(s)")
    return parsed


def _report_batch(results: Dict[str, Any]) -> None:
    print_info(f"\nBatch processing completed:")
    print_success(f"  Successful: {results['successful']}")
    if results['failed'] > 0:
        print_error(f"  Failed: {results['failed']}")

    failed_runs = [run for run in results['runs'] if run.get('status') != 'success' or not run.get('passed', True)]
    if failed_runs:
        print_warning("\nFailed runs:")
        for run in failed_runs:
            idx = run.get('index', '?')
            error = run.get('error', 'check did not pass')
            print_error(f"  {idx}. {run.get('scenario')}: {error}")


@click.group()
@click.version_option(version=__version__)
@click.option('--verbose', '-v', is_flag=True, help='Enable verbose output')
@click.pass_context
def cli(ctx, verbose):
    """
    SME Manifolds - trajectory simulation, Lie-rank analysis and invariant checks
    for continuously monitored quantum systems.
    """
    ctx.ensure_object(dict)
    ctx.obj['verbose'] = verbose

    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)
        logger.debug("Verbose mode enabled")


@cli.command()
@run_options
@click.option('--no-progress', is_flag=True, help='Hide the trajectory progress bar')
@click.pass_context
def simulate(ctx, config_file, seed, out_dir, threads, dt, traj, no_progress):
    """
    Simulate trajectory ensembles and write CSV data plus summary JSON.

    Example:
        sme-manifolds simulate -c config.yml
        sme-manifolds simulate -c config.yml --seed 7 --traj 100 --out ./runs
    """
    try:
        parsed = _load_runs(config_file, _overrides(seed, out_dir, threads, dt, traj))
        orchestrator = RunOrchestrator(progress=not no_progress)
        results = orchestrator.batch(parsed['runs'], 'simulate', stop_on_error=parsed['stop_on_error'])

        for run in results['runs']:
            if run.get('status') == 'success':
                print_success(f"{run['scenario']}: {run['csv']}")
                n_failed = run['summary']['n_failed']
                if n_failed:
                    print_warning(f"  {n_failed} trajectories failed (error rows in the CSV)")
        _report_batch(results)

        if results['failed'] > 0:
            sys.exit(1)

    except Exception as e:
        print_error(f"Error: {e}")
        if ctx.obj.get('verbose'):
            logger.exception("Detailed error information:")
        sys.exit(1)


@cli.command()
@run_options
@click.pass_context
def rank(ctx, config_file, seed, out_dir, threads, dt, traj):
    """
    Compute the dimension M of the Lie algebra generated by the measurement fields.

    Example:
        sme-manifolds rank -c qutrit.yml
    """
    try:
        parsed = _load_runs(config_file, _overrides(seed, out_dir, threads, dt, traj))
        orchestrator = RunOrchestrator()
        results = orchestrator.batch(parsed['runs'], 'rank', stop_on_error=parsed['stop_on_error'])

        for run in results['runs']:
            if run.get('status') == 'success':
                report = run['report']
                if report['converged']:
                    print_success(f"{run['scenario']}: M = {report['M']}")
                else:
                    print_warning(f"{run['scenario']}: M >= {report['M']} (not converged at depth "
                                  f"{report['depth_reached']})")
                if any(report['ambiguous']):
                    print_warning("  Rank ambiguous at some sample points")
        _report_batch(results)

        if results['failed'] > 0:
            sys.exit(1)

    except Exception as e:
        print_error(f"Error: {e}")
        if ctx.obj.get('verbose'):
            logger.exception("Detailed error information:")
        sys.exit(1)


def _run_check(ctx, kind: str, config_file: str, overrides: Dict[str, Any], refine: bool) -> None:
    try:
        parsed = _load_runs(config_file, overrides)
        runs: List[ScenarioConfig] = parsed['runs']
        if refine:
            for run in runs:
                run.check.refine = True
        orchestrator = RunOrchestrator()
        results = orchestrator.batch(runs, 'check', check_kind=kind, stop_on_error=parsed['stop_on_error'])

        for run in results['runs']:
            if run.get('status') != 'success':
                continue
            click.echo(f"\n{run['scenario']} ({kind}):")
            for row in run['report']['rows']:
                symbol = '<=' if row['comparison'] == 'le' else '>='
                line = f"  {row['name']}: {row['residual']:.3e} {symbol} {row['tolerance']:.1e}"
                if row['passed']:
                    print_success(line)
                else:
                    print_error(line)
            print_info(f"  Report: {run['report_file']}")
        _report_batch(results)

        if results['failed'] > 0:
            sys.exit(1)
        print_success("All checks passed")

    except Exception as e:
        print_error(f"Error: {e}")
        if ctx.obj.get('verbose'):
            logger.exception("Detailed error information:")
        sys.exit(1)


@cli.command('qnd-check')
@run_options
@click.option('--refine', is_flag=True, help='Also require residuals to shrink when dt is divided by 4')
@click.pass_context
def qnd_check(ctx, config_file, seed, out_dir, threads, dt, traj, refine):
    """
    Check phase, coherence-ratio, z and explicit-population laws of a QND scenario.

    Example:
        sme-manifolds qnd-check -c qutrit.yml --dt 1e-5
    """
    _run_check(ctx, 'qnd', config_file, _overrides(seed, out_dir, threads, dt, traj), refine)


@cli.command('gauss-check')
@run_options
@click.pass_context
def gauss_check(ctx, config_file, seed, out_dir, threads, dt, traj):
    """
    Check the Gaussian-kernel filters against closed forms and the truncated Fock simulation.

    Example:
        sme-manifolds gauss-check -c coherent.yml
    """
    _run_check(ctx, 'gauss', config_file, _overrides(seed, out_dir, threads, dt, traj), False)


@cli.command('emission-check')
@run_options
@click.option('--refine', is_flag=True, help='Also require residuals to shrink when dt is divided by 4')
@click.pass_context
def emission_check(ctx, config_file, seed, out_dir, threads, dt, traj, refine):
    """
    Check the deterministic emission combinations against their closed forms.

    Example:
        sme-manifolds emission-check -c emission.yml
    """
    _run_check(ctx, 'emission', config_file, _overrides(seed, out_dir, threads, dt, traj), refine)


@cli.command('dispersive-check')
@run_options
@click.pass_context
def dispersive_check(ctx, config_file, seed, out_dir, threads, dt, traj):
    """
    Check the drive-free dispersive filter against the joint qudit-oscillator simulation.

    Example:
        sme-manifolds dispersive-check -c dispersive.yml
    """
    _run_check(ctx, 'dispersive', config_file, _overrides(seed, out_dir, threads, dt, traj), False)


@cli.command()
@click.option('--out', 'out_dir', default='figures', type=click.Path(), help='Output directory')
@click.option('--seed', type=int, help='Ensemble seed')
@click.option('--threads', type=click.IntRange(min=1), help='Worker threads')
@click.option('--dt', type=float, help='Step size (must divide the snapshot times)')
@click.option('--traj', type=click.IntRange(min=0), help='Trajectories per panel')
@click.option('--panel', 'panels', multiple=True, help='Run only these panels (repeatable)')
@click.option('--no-progress', is_flag=True, help='Hide the trajectory progress bars')
@click.pass_context
def figures(ctx, out_dir, seed, threads, dt, traj, panels, no_progress):
    """
    Run the figure scenarios and certify their confinement statistics.

    Example:
        sme-manifolds figures --out ./figures
        sme-manifolds figures --panel fig1-single --panel fig1-rabi --traj 200
    """
    try:
        print_info("Running figure panels...")
        orchestrator = RunOrchestrator(progress=not no_progress)
        results = orchestrator.run_figures(out_dir, overrides=_overrides(seed, None, threads, dt, traj),
                                           panels=list(panels) or None)

        for panel in results['panels']:
            if panel.get('status') != 'success':
                print_error(f"{panel['name']}: {panel.get('error')}")
            elif panel['certified']:
                print_success(f"{panel['name']}: certified")
            else:
                print_warning(f"{panel['name']}: not certified")
        print_info(f"Summary: {results['summary_file']}")

        if results['failed'] > 0 or results['certified'] < results['total']:
            sys.exit(1)

    except Exception as e:
        print_error(f"Error: {e}")
        if ctx.obj.get('verbose'):
            logger.exception("Detailed error information:")
        sys.exit(1)


@cli.command()
@click.option('--output', '-o', 'output_file', required=True, type=click.Path(),
              help='Output file path for template configuration')
@click.option('--format', '-f', type=click.Choice(['yaml', 'json']), default='yaml',
              help='Output format')
@click.pass_context
def init_config(ctx, output_file, format):
    """
    Generate a template configuration file.

    Example:
        sme-manifolds init-config -o config.yml
        sme-manifolds init-config -o config.json -f json
    """
    try:
        print_info(f"Generating template configuration...")

        config_manager = ConfigManager()
        template = config_manager.create_template_config(format=format)

        with open(output_file, 'w', encoding='utf-8') as f:
            f.write(template)

        print_success(f"Template configuration saved to {output_file}")
        print_info("Edit the file to choose scenarios, parameters and run sizes")

    except Exception as e:
        print_error(f"Error: {e}")
        if ctx.obj.get('verbose'):
            logger.exception("Detailed error information:")
        sys.exit(1)


def main():
    """Main entry point for the CLI."""
    try:
        cli(obj={})
    except KeyboardInterrupt:
        print_warning("\n\nOperation cancelled by user")
        sys.exit(130)
    except Exception as e:
        print_error(f"Unexpected error: {e}")
        logger.exception("Unexpected error occurred:")
        sys.exit(1)


if __name__ == '__main__':
    main()
