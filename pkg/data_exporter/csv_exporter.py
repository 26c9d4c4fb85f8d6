import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from data_exporter.data_exporter_base import DataExporterBase
from data_exporter.json_exporter import JSONExporter
from discretization.mesh import build_time_grid, mesh_from_nodes
from domain_models import FirnParams, ForwardTrace, GasObservation, InverseData
from exceptions import ConfigurationError

logger = logging.getLogger(__name__)

# Enough digits for every float64 to survive a write/read cycle
FLOAT_FORMAT = "%.17g"


class CSVExporter(DataExporterBase):
    """Writes solutions, datasets, recovered profiles and result tables as CSV."""

    FILE_EXTENSION = "csv"
    SOLUTION_COLUMNS = ["z", "rho"]
    PROFILE_COLUMNS = ["z", "d", "d_true"]

    def write(self, payload: pd.DataFrame, stem: str) -> Path:
        full_path = self._generate_path(stem)
        try:
            payload.to_csv(
                full_path,
                index=False,
                float_format=FLOAT_FORMAT,
                quoting=csv.QUOTE_MINIMAL,
                encoding="utf-8",
            )
        except Exception as e:
            logger.error(f"Error exporting to CSV: {str(e)}")
            raise

        logger.info(f"Exported {len(payload)} rows to {full_path}")
        return full_path

    def export_solution(self, trace: ForwardTrace, stem: str, full_trace: bool = False) -> List[Path]:
        """End-time profile as `z,rho`; with full_trace also every time level as columns."""
        frame = pd.DataFrame({"z": trace.mesh.nodes, "rho": trace.end_profile})
        paths = [self.write(frame.reindex(columns=self.SOLUTION_COLUMNS), stem)]

        if full_trace:
            columns = {"z": trace.mesh.nodes}
            for i, t in enumerate(trace.grid.times):
                columns[f"t={t:.17g}"] = trace.lam[:, i]
            paths.append(self.write(pd.DataFrame(columns), f"{stem}_trace"))
        return paths

    def export_dataset(self, data: InverseData, stem: str) -> Tuple[Path, Path]:
        """`z,g_alpha1,...` plus a JSON sidecar holding params and provenance."""
        columns = {"z": data.mesh.nodes}
        for index, gas in enumerate(data.gases, start=1):
            columns[f"g_alpha{index}"] = gas.g
        csv_path = self.write(pd.DataFrame(columns), stem)

        sidecar = {
            "params": data.params.model_dump(),
            "r_alphas": [gas.r_alpha for gas in data.gases],
            "dt": data.grid.dt,
            "h": data.mesh.h,
            "d_true": None if data.d_true is None else np.asarray(data.d_true).tolist(),
            "provenance": data.provenance,
        }
        sidecar_path = JSONExporter(self.output_directory).write(sidecar, stem)

        self._log_export_summary(
            "Dataset",
            {
                "Nodes": data.mesh.size,
                "Gases": len(data.gases),
                "r_alpha": ", ".join(f"{gas.r_alpha:g}" for gas in data.gases),
                "Files": f"{csv_path}, {sidecar_path}",
            },
        )
        return csv_path, sidecar_path

    def export_profile(
        self, nodes: np.ndarray, d: np.ndarray, d_true: Optional[np.ndarray], stem: str
    ) -> Path:
        frame = pd.DataFrame(
            {"z": nodes, "d": d, "d_true": d_true if d_true is not None else np.nan}
        )
        return self.write(frame.reindex(columns=self.PROFILE_COLUMNS), stem)

    def export_table(
        self, rows: Sequence[Dict[str, Any]], columns: Sequence[str], stem: str, title: str
    ) -> Path:
        """Write a result table and print it as text."""
        frame = pd.DataFrame(list(rows)).reindex(columns=list(columns))
        path = self.write(frame, stem)

        print("\n\n--------------------------------")
        print(title)
        print(frame.to_string(index=False))
        print(f"Saved to: {path}")
        print("--------------------------------\n\n")
        return path

    def _log_export_summary(self, title: str, entries: Dict[str, Any]):
        print("\n\n--------------------------------")
        print(f"{title} export summary:")
        for key, value in entries.items():
            print(f"- {key}: {value}")
        print("--------------------------------\n\n")


def load_solution(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = set(CSVExporter.SOLUTION_COLUMNS) - set(frame.columns)
    if missing:
        raise ConfigurationError(f"Solution file {path} lacks columns {sorted(missing)}")
    return frame["z"].to_numpy(), frame["rho"].to_numpy()


def load_dataset(path: Union[str, Path]) -> InverseData:
    """Read a dataset CSV and its JSON sidecar back into InverseData."""
    path = Path(path)
    sidecar_path = path.with_suffix(".json")
    if not path.is_file():
        raise ConfigurationError(f"Dataset file not found: {path}")
    if not sidecar_path.is_file():
        raise ConfigurationError(f"Dataset sidecar not found: {sidecar_path}")

    frame = pd.read_csv(path, float_precision="round_trip")
    with open(sidecar_path, encoding="utf-8") as handle:
        sidecar = json.load(handle)

    gas_columns = [column for column in frame.columns if column.startswith("g_alpha")]
    r_alphas = sidecar.get("r_alphas", [])
    if "z" not in frame.columns or not gas_columns or len(gas_columns) != len(r_alphas):
        raise ConfigurationError(
            f"Dataset {path} must have a z column and one g_alpha column per r_alpha"
        )

    try:
        mesh = mesh_from_nodes(frame["z"].to_numpy(), h=sidecar.get("h"))
        params = FirnParams(**sidecar["params"])
        gases = tuple(
            GasObservation(r_alpha=r_alpha, g=frame[column].to_numpy())
            for r_alpha, column in zip(r_alphas, gas_columns)
        )
        d_true = sidecar.get("d_true")
        data = InverseData(
            mesh=mesh,
            grid=build_time_grid(sidecar["dt"]),
            params=params,
            gases=gases,
            d_true=None if d_true is None else np.array(d_true, dtype=float),
            provenance=sidecar.get("provenance", {}),
        )
    except (KeyError, ValueError) as e:
        raise ConfigurationError(f"Invalid dataset {path}: {e}") from e

    logger.info(f"Loaded dataset {path}: {mesh.size} nodes, {len(gases)} gases")
    return data
