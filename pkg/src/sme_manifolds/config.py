"""
Configuration Manager Module
Handles loading, validating and parsing YAML/JSON scenario run configurations.
"""

import os
import json
import logging
from typing import Any, Dict, List, Optional
from pathlib import Path

try:
    import yaml
    YAML_AVAILABLE = True
except ImportError:
    YAML_AVAILABLE = False
    logging.warning("PyYAML not available. YAML configuration files cannot be loaded.")

from .models.run_config import SCENARIO_KINDS, ScenarioConfig
from .scenarios import OBSERVABLES, SCENARIO_PARAMS

logger = logging.getLogger(__name__)

GRID_TOL = 1e-9

RUN_KEYS = (
    'scenario', 'name', 'params', 'initial_state', 'T', 'dt', 'n_traj', 'seed',
    'snapshot_times', 'observables', 'output_directory', 'threads', 'rank', 'check',
)
TOP_LEVEL_KEYS = RUN_KEYS + ('runs', 'stop_on_error')
RANK_KEYS = ('n_points', 'max_depth', 'sv_threshold', 'gap', 'seed')
CHECK_KEYS = ('n_seeds', 'refine', 'grid', 'tolerances')
EFFICIENCY_KEYS = ('eta', 'eta1', 'eta2', 'eta_x', 'eta_p')
NON_NEGATIVE_KEYS = ('n_th', 'gamma_flip', 'gamma_x', 'gamma_p', 'gamma_l', 'kerr')
POSITIVE_KEYS = ('rate', 'rate2')


class ConfigManager:
    """Manages configuration loading and validation for scenario runs."""

    SCENARIO_PARAMS = SCENARIO_PARAMS

    def __init__(self):
        """Initialize the configuration manager."""
        self.yaml_available = YAML_AVAILABLE

    def load_config(self, config_path: str) -> Dict:
        """
        Load configuration from a YAML or JSON file.

        Args:
            config_path: Path to the configuration file

        Returns:
            Dictionary with configuration data

        Raises:
            FileNotFoundError: If config file doesn't exist
            ValueError: If config file format is unsupported or invalid
        """
        if not os.path.exists(config_path):
            raise FileNotFoundError(f"Configuration file not found: {config_path}")

        file_ext = Path(config_path).suffix.lower()

        logger.info(f"Loading configuration from {config_path}")

        if file_ext in ['.yml', '.yaml']:
            return self._load_yaml(config_path)
        elif file_ext == '.json':
            return self._load_json(config_path)
        else:
            raise ValueError(f"Unsupported configuration file format: {file_ext}")

    def _load_yaml(self, config_path: str) -> Dict:
        """Load YAML configuration file."""
        if not self.yaml_available:
            raise ValueError("PyYAML library is not available. Cannot load YAML files.")

        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                config = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ValueError(f"Invalid YAML format: {e}") from e
        if not isinstance(config, dict):
            raise ValueError("Configuration file must contain a dictionary/object")
        return config

    def _load_json(self, config_path: str) -> Dict:
        """Load JSON configuration file."""
        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                config = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"Invalid JSON format: {e}") from e
        if not isinstance(config, dict):
            raise ValueError("Configuration file must contain a dictionary/object")
        return config

    def _run_blocks(self, config: Dict) -> List[Dict]:
        """Run blocks with the top-level values applied as defaults."""
        defaults = {k: v for k, v in config.items() if k in RUN_KEYS}
        if 'runs' not in config:
            return [defaults]
        blocks = []
        for run in config['runs']:
            merged = dict(defaults)
            if isinstance(run, dict):
                merged.update(run)
            blocks.append(merged)
        return blocks

    def _validate_run(self, run: Dict, prefix: str) -> List[str]:
        errors = []
        unknown = sorted(set(run) - set(RUN_KEYS))
        if unknown:
            errors.append(f"{prefix}unknown keys {unknown}")

        kind = run.get('scenario')
        if kind is None:
            errors.append(f"{prefix}'scenario' is required")
        elif kind not in SCENARIO_KINDS:
            errors.append(f"{prefix}unknown scenario '{kind}' (choose from {', '.join(SCENARIO_KINDS)})")

        params = run.get('params', {}) or {}
        if not isinstance(params, dict):
            errors.append(f"{prefix}'params' must be a mapping")
            params = {}
        if kind in SCENARIO_PARAMS:
            bad = sorted(set(params) - set(SCENARIO_PARAMS[kind]))
            if bad:
                errors.append(f"{prefix}unknown params for '{kind}': {bad}")
        for key in EFFICIENCY_KEYS:
            if key in params and not self._in_range(params[key], 0.0, 1.0):
                errors.append(f"{prefix}'{key}' must lie in [0, 1], got {params[key]}")
        for key in NON_NEGATIVE_KEYS:
            if key in params and not self._in_range(params[key], 0.0, None):
                errors.append(f"{prefix}'{key}' must be >= 0, got {params[key]}")
        for key in POSITIVE_KEYS:
            if params.get(key) is not None and not self._in_range(params[key], 1e-300, None):
                errors.append(f"{prefix}'{key}' must be > 0, got {params[key]}")
        if 'n_max' in params and not (isinstance(params['n_max'], int) and params['n_max'] >= 1):
            errors.append(f"{prefix}'n_max' must be a positive integer")
        if kind == 'dispersive' and len(params.get('shifts', [0, 1])) < 2:
            errors.append(f"{prefix}'shifts' needs at least two levels")
        if kind == 'custom':
            errors.extend(self._validate_custom(params, prefix))

        errors.extend(self._validate_grid(run, prefix))

        n_traj = run.get('n_traj', 100)
        if not isinstance(n_traj, int) or n_traj < 0:
            errors.append(f"{prefix}'n_traj' must be a non-negative integer")
        threads = run.get('threads', 1)
        if not isinstance(threads, int) or threads < 1:
            errors.append(f"{prefix}'threads' must be a positive integer")
        seed = run.get('seed', 0)
        if seed is not None and (not isinstance(seed, int) or seed < 0):
            errors.append(f"{prefix}'seed' must be a non-negative integer or null")

        for name in run.get('observables') or []:
            if name not in OBSERVABLES:
                errors.append(f"{prefix}unknown observable '{name}'")
        for block, keys in (('rank', RANK_KEYS), ('check', CHECK_KEYS)):
            value = run.get(block) or {}
            if not isinstance(value, dict):
                errors.append(f"{prefix}'{block}' must be a mapping")
            elif set(value) - set(keys):
                errors.append(f"{prefix}unknown {block} keys {sorted(set(value) - set(keys))}")
        return errors

    def _validate_grid(self, run: Dict, prefix: str) -> List[str]:
        errors = []
        T = run.get('T', 1.0)
        dt = run.get('dt', 1e-3)
        if not self._in_range(T, 0.0, None):
            errors.append(f"{prefix}'T' must be >= 0, got {T}")
            return errors
        if not self._in_range(dt, 1e-300, None):
            errors.append(f"{prefix}'dt' must be positive, got {dt}")
            return errors
        n_steps = round(T / dt)
        if abs(n_steps * dt - T) > GRID_TOL * max(1.0, T):
            errors.append(f"{prefix}dt={dt} does not divide T={T}")
        for t in run.get('snapshot_times') or []:
            if not self._in_range(t, 0.0, T):
                errors.append(f"{prefix}snapshot time {t} outside [0, {T}]")
            elif abs(round(t / dt) * dt - t) > GRID_TOL * max(1.0, t):
                errors.append(f"{prefix}snapshot time {t} is not on the dt={dt} grid")
        return errors

    def _validate_custom(self, params: Dict, prefix: str) -> List[str]:
        errors = []
        H = params.get('H')
        if H is None:
            return [f"{prefix}custom scenario needs 'H'"]
        dim = len(H)
        if any(len(row) != dim for row in H):
            errors.append(f"{prefix}'H' must be square")
        for i, ch in enumerate(params.get('channels') or [], 1):
            L = ch.get('L') if isinstance(ch, dict) else None
            if L is None or len(L) != dim or any(len(row) != dim for row in L):
                errors.append(f"{prefix}channel {i}: 'L' must be a {dim}x{dim} matrix")
            if isinstance(ch, dict) and not self._in_range(ch.get('eta', 1.0), 0.0, 1.0):
                errors.append(f"{prefix}channel {i}: 'eta' must lie in [0, 1]")
        return errors

    @staticmethod
    def _in_range(value: Any, lo: Optional[float], hi: Optional[float]) -> bool:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return False
        if lo is not None and value < lo:
            return False
        if hi is not None and value > hi:
            return False
        return True

    def validate_config(self, config: Dict) -> tuple[bool, List[str]]:
        """
        Validate configuration structure and content.

        Physical constraints (efficiencies, rates, time grid, dimensions) are
        checked here, before any run starts.

        Args:
            config: Configuration dictionary to validate

        Returns:
            Tuple of (is_valid, list_of_errors)
        """
        errors = []

        unknown = sorted(set(config) - set(TOP_LEVEL_KEYS))
        if unknown:
            errors.append(f"Unknown top-level keys: {unknown}")

        if 'runs' in config:
            if not isinstance(config['runs'], list):
                errors.append("'runs' must be a list")
                return False, errors
            if len(config['runs']) == 0:
                errors.append("'runs' list is empty")
                return False, errors
            for i, run in enumerate(config['runs'], 1):
                if not isinstance(run, dict):
                    errors.append(f"Run {i}: must be a dictionary")
        elif 'scenario' not in config:
            errors.append("Configuration must contain 'scenario' or 'runs'")
            return False, errors

        blocks = self._run_blocks(config)
        for i, run in enumerate(blocks, 1):
            prefix = f"Run {i}: " if len(blocks) > 1 or 'runs' in config else ""
            errors.extend(self._validate_run(run, prefix))

        is_valid = len(errors) == 0
        return is_valid, errors

    def apply_overrides(self, config: Dict, overrides: Optional[Dict[str, Any]] = None) -> Dict:
        """
        Command-line overrides applied to the top level and to every run block.

        Keys with a None value are ignored.
        """
        overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        if not overrides:
            return config
        merged = dict(config)
        merged.update(overrides)
        if 'runs' in merged and isinstance(merged['runs'], list):
            merged['runs'] = [dict(run, **overrides) if isinstance(run, dict) else run
                              for run in merged['runs']]
        logger.debug(f"Applied overrides {overrides}")
        return merged

    def _check(self, config: Dict) -> None:
        is_valid, errors = self.validate_config(config)
        if not is_valid:
            error_msg = "Configuration validation failed:\n" + "\n".join(f"  - {e}" for e in errors)
            raise ValueError(error_msg)

    def parse_config_for_run(self, config: Dict, overrides: Optional[Dict[str, Any]] = None) -> ScenarioConfig:
        """
        Parse a single-run configuration with defaults applied.

        Args:
            config: Raw configuration dictionary
            overrides: Command-line values (seed, dt, n_traj, output_directory, threads)

        Returns:
            ScenarioConfig

        Raises:
            ValueError: If configuration is invalid or describes several runs
        """
        config = self.apply_overrides(config, overrides)
        self._check(config)
        blocks = self._run_blocks(config)
        if len(blocks) != 1:
            raise ValueError(f"Expected a single run, configuration has {len(blocks)}")
        return ScenarioConfig.from_dict(blocks[0])

    def parse_config_for_batch(self, config: Dict, overrides: Optional[Dict[str, Any]] = None) -> Dict:
        """
        Parse and prepare configuration for batch processing.

        Returns:
            {"stop_on_error": bool, "runs": [ScenarioConfig, ...]}

        Raises:
            ValueError: If configuration is invalid
        """
        config = self.apply_overrides(config, overrides)
        self._check(config)
        return {
            'stop_on_error': bool(config.get('stop_on_error', False)),
            'runs': [ScenarioConfig.from_dict(block) for block in self._run_blocks(config)],
        }

    def save_config(self, config: Dict, output_path: str, format: str = 'yaml') -> None:
        """
        Save configuration to a file.

        Args:
            config: Configuration dictionary to save
            output_path: Path where to save the configuration
            format: Output format - 'yaml' or 'json'

        Raises:
            ValueError: If format is unsupported or YAML is not available
        """
        if format == 'yaml':
            if not self.yaml_available:
                raise ValueError("PyYAML library is not available. Cannot save YAML files.")

            with open(output_path, 'w', encoding='utf-8') as f:
                yaml.dump(config, f, default_flow_style=False, sort_keys=False)

        elif format == 'json':
            with open(output_path, 'w', encoding='utf-8') as f:
                json.dump(config, f, indent=2)

        else:
            raise ValueError(f"Unsupported format: {format}")

        logger.info(f"Configuration saved to {output_path}")

    def create_template_config(self, format: str = 'yaml') -> str:
        """
        Create a runnable template configuration string.

        Args:
            format: Output format - 'yaml' or 'json'

        Returns:
            Template configuration as a string
        """
        template = {
            'output_directory': 'output',
            'seed': 1234,
            'stop_on_error': False,
            'runs': [
                {
                    'name': 'qutrit-single',
                    'scenario': 'qutrit-qnd',
                    'params': {'variant': 'single', 'lam': [0.0, 1.0, 1.8], 'eta': 0.8},
                    'initial_state': {'amplitudes': [0.5477225575051661, 0.7416198487095663,
                                                     0.3872983346207417]},
                    'T': 0.3,
                    'dt': 0.0001,
                    'n_traj': 500,
                    'snapshot_times': [0.2, 0.3],
                    'observables': ['populations', 'coherences', 'coherence_ratios'],
                    'rank': {'n_points': 5, 'max_depth': 6},
                },
                {
                    'name': 'emission-equal-rates',
                    'scenario': 'emission',
                    'params': {'rate': 2.0, 'eta1': 0.9, 'eta2': 0.7},
                    'T': 0.2,
                    'dt': 0.0001,
                    'n_traj': 10,
                    'check': {'n_seeds': 10},
                },
            ],
        }

        if format == 'yaml':
            if not self.yaml_available:
                raise ValueError("PyYAML library is not available.")
            return yaml.dump(template, default_flow_style=False, sort_keys=False)
        elif format == 'json':
            return json.dumps(template, indent=2)
        else:
            raise ValueError(f"Unsupported format: {format}")
