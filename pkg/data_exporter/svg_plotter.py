import logging
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from data_exporter.data_exporter_base import DataExporterBase  # noqa: E402
from domain_models import ForwardTrace  # noqa: E402

logger = logging.getLogger(__name__)


class SVGPlotter(DataExporterBase):
    """Single-file SVG line plots of solutions and recovered profiles."""

    FILE_EXTENSION = "svg"

    def write(self, payload: plt.Figure, stem: str) -> Path:
        full_path = self._generate_path(stem)
        try:
            payload.savefig(full_path, format="svg", bbox_inches="tight")
        finally:
            plt.close(payload)
        logger.info(f"Saved plot to {full_path}")
        return full_path

    def plot_solution(self, trace: ForwardTrace, stem: str) -> Path:
        figure, axes = plt.subplots(figsize=(6, 4))
        axes.plot(trace.mesh.nodes * trace.params.zF, trace.end_profile, marker=".", linewidth=1)
        axes.set_xlabel("depth z (m)")
        axes.set_ylabel("rho (mol/m^3)")
        axes.set_title(f"End-time concentration, zF={trace.params.zF:g}, Te={trace.params.Te:g}")
        axes.grid(True, alpha=0.3)
        return self.write(figure, stem)

    def plot_profiles(
        self, nodes: np.ndarray, d: np.ndarray, d_true: Optional[np.ndarray], stem: str, label: str
    ) -> Path:
        figure, axes = plt.subplots(figsize=(6, 4))
        axes.plot(nodes, d, marker="o", markersize=3, linewidth=1, label=label)
        if d_true is not None:
            axes.plot(nodes, d_true, linestyle="--", linewidth=1, label="d_true")
        axes.set_xlabel("rescaled depth")
        axes.set_ylabel("d (m^2/yr)")
        axes.legend()
        axes.grid(True, alpha=0.3)
        return self.write(figure, stem)
