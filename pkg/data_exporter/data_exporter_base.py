import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Union

logger = logging.getLogger(__name__)


class DataExporterBase(ABC):
    """Base class for exporters writing run artifacts into one output directory."""

    DEFAULT_OUTPUT_DIRECTORY = "firn_reports"
    FILE_EXTENSION = ""

    def __init__(self, output_directory: Union[str, Path, None] = None):
        self.output_directory = Path(output_directory or self.DEFAULT_OUTPUT_DIRECTORY)

    @abstractmethod
    def write(self, payload: Any, stem: str) -> Path:
        """Write one payload to `<output_directory>/<stem>.<ext>` and return the path."""
        pass

    def _generate_path(self, stem: str, extension: str = None) -> Path:
        self.output_directory.mkdir(parents=True, exist_ok=True)
        suffix = extension if extension is not None else self.FILE_EXTENSION
        # Fractions like 1/16 must not turn into directories
        safe_stem = stem.replace("/", "-").replace(" ", "_")
        return self.output_directory / f"{safe_stem}.{suffix}"
