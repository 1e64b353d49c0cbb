"""
Report Generator Module
Renders declarative plot specifications and markdown run summaries from templates.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from jinja2 import Environment, FileSystemLoader

logger = logging.getLogger(__name__)


class ReportGenerator:
    """Generates plot-spec JSON and markdown summaries using jinja2 templates."""

    def __init__(self, templates_dir: Optional[str] = None):
        """
        Initialize the report generator.

        Args:
            templates_dir: Path to templates directory. If None, uses the package templates.
        """
        if templates_dir is None:
            templates_dir = Path(__file__).parent / "templates"

        self.templates_dir = Path(templates_dir)

        if not self.templates_dir.exists():
            raise FileNotFoundError(f"Templates directory not found: {self.templates_dir}")

        self.env = Environment(
            loader=FileSystemLoader(str(self.templates_dir)),
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True
        )

        logger.info(f"ReportGenerator initialized with templates from: {self.templates_dir}")

    def render_plot_spec(self, panel: str, csv_name: str, axes: Sequence[str],
                         snapshot_times: Sequence[float], title: Optional[str] = None) -> str:
        """
        Render a scatter-plot specification for one panel.

        One facet per snapshot time; the first two axes are x and y, an
        optional third axis colours the points.

        Args:
            panel: Panel name
            csv_name: Trajectory CSV file name, relative to the spec file
            axes: Observable columns to plot (2 or 3)
            snapshot_times: Times to facet on
            title: Plot title (default: the panel name)

        Returns:
            JSON document text

        Raises:
            ValueError: If fewer than two axes are given
        """
        if len(axes) < 2:
            raise ValueError(f"Panel '{panel}' needs at least two plot axes, got {list(axes)}")
        template = self.env.get_template("plot_spec.json.j2")
        spec = template.render(
            title=title or panel,
            csv_name=csv_name,
            x=axes[0],
            y=axes[1],
            color=axes[2] if len(axes) > 2 else None,
            times=[float(t) for t in snapshot_times],
        )
        # Round-trip through json to fail here rather than in the consumer
        json.loads(spec)
        logger.debug(f"Plot spec rendered for {panel} ({len(spec)} characters)")
        return spec

    def render_summary(self, title: str, panels: List[Dict[str, Any]]) -> str:
        """
        Render the markdown summary of a figures run.

        Args:
            title: Heading of the document
            panels: Per-panel result dictionaries (name, status, n_traj, wall_time,
                certificates, csv, plot_spec, error)

        Returns:
            Markdown text
        """
        template = self.env.get_template("summary.md.j2")
        text = template.render(title=title, panels=panels,
                               passed=sum(1 for p in panels if p.get('certified')),
                               total=len(panels))
        logger.info(f"Summary rendered for {len(panels)} panels")
        return text

    def save_plot_spec(self, path: str, **kwargs) -> str:
        """Render a plot spec and write it to ``path``; returns the path."""
        spec = self.render_plot_spec(**kwargs)
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, 'w', encoding='utf-8', newline='\n') as f:
            f.write(spec)
        logger.info(f"Saved plot spec to {out}")
        return str(out)

    def save_summary(self, path: str, title: str, panels: List[Dict[str, Any]]) -> str:
        """Render the markdown summary and write it to ``path``; returns the path."""
        text = self.render_summary(title, panels)
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
        logger.info(f"Saved summary to {out}")
        return str(out)
