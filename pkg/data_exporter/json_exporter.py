import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import BaseModel

from data_exporter.data_exporter_base import DataExporterBase

logger = logging.getLogger(__name__)


class JSONExporter(DataExporterBase):
    """Writes pydantic reports and plain summaries as indented JSON."""

    FILE_EXTENSION = "json"

    def write(self, payload: Dict[str, Any], stem: str) -> Path:
        full_path = self._generate_path(stem)
        try:
            with open(full_path, "w", encoding="utf-8") as handle:
                json.dump(payload, handle, indent=2, default=str)
        except (OSError, TypeError) as e:
            logger.error(f"Error exporting to JSON: {str(e)}")
            raise

        logger.info(f"Exported report to {full_path}")
        return full_path

    def export_report(
        self, report: BaseModel, stem: str, extra: Optional[Dict[str, Any]] = None
    ) -> Path:
        payload = report.model_dump(mode="json")
        if extra:
            payload.update(extra)
        return self.write(payload, stem)
