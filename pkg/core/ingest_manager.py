"""
Ingest manager - register the datasets of a data manifest as catalog roots

Manifest format::

    {"datasets": [{"name": "parks", "path": "parks.csv", "modality": "TABULAR",
                   "crs": "wgs84", "temporal_extent": {"start": ..., "end": ...},
                   "column_types": {"lon": "Longitude"}, "key_property": "park_id"}]}

Paths are relative to the manifest file.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from config.settings import AppSettings, app_settings
from core.catalog import Catalog
from core.errors import IngestError, ParkLensError
from models.data_structures import (
    ColumnType,
    Crs,
    Modality,
    ParseOptions,
    TimeInterval,
    parse_crs,
)
from utils.file_utils import ConfigManager, FileUtils

logger = logging.getLogger(__name__)


@dataclass
class DatasetEntry:
    """One manifest entry with its declared metadata"""

    name: str
    path: str
    modality: Modality
    crs: Optional[Crs] = None
    temporal_extent: Optional[TimeInterval] = None
    column_types: Dict[str, ColumnType] = field(default_factory=dict)
    key_property: Optional[str] = None

    @classmethod
    def from_dict(cls, data: Any, position: int, settings: AppSettings = app_settings) -> "DatasetEntry":
        """
        Raises:
            IngestError: a field is missing or malformed
        """
        where = f"dataset {position}"
        if not isinstance(data, dict):
            raise IngestError(f"{where}: entry must be an object")
        name, path = data.get("name"), data.get("path")
        if not isinstance(name, str) or not name:
            raise IngestError(f"{where}: missing name")
        if not isinstance(path, str) or not path:
            raise IngestError(f"{where} ({name}): missing path")
        try:
            modality = data.get("modality") or settings.modality_for_path(Path(path))
            if modality is None:
                raise IngestError(f"{where} ({name}): no modality given and none implied by '{path}'")
            column_types = data.get("column_types") or {}
            if not isinstance(column_types, dict):
                raise IngestError(f"{where} ({name}): column_types must be an object")
            return cls(
                name=name,
                path=path,
                modality=Modality.parse(modality),
                crs=parse_crs(data["crs"]) if data.get("crs") else None,
                temporal_extent=TimeInterval.from_dict(data["temporal_extent"]) if data.get("temporal_extent") else None,
                column_types={column: ColumnType.parse(kind) for column, kind in column_types.items()},
                key_property=data.get("key_property"),
            )
        except IngestError:
            raise
        except ParkLensError as e:
            raise IngestError(f"{where} ({name}): {e.message}")

    def source(self) -> Dict[str, Any]:
        return {"name": self.name, "uri": self.path}

    def options(self) -> ParseOptions:
        return ParseOptions(column_types=dict(self.column_types), key_property=self.key_property)


@dataclass
class IngestResult:
    """Outcome of ingesting a manifest"""

    success: bool
    message: str
    data: Dict[str, str] = field(default_factory=dict)
    error_code: Optional[str] = None


class IngestManager:
    """Registers manifest datasets; re-ingesting unchanged files is a no-op"""

    def __init__(self, catalog: Catalog, settings: AppSettings = app_settings):
        self.catalog = catalog
        self.settings = settings

    def load_manifest(self, manifest_path: Union[str, Path]) -> List[DatasetEntry]:
        """
        Raises:
            IngestError: unreadable or malformed manifest
        """
        path = Path(manifest_path)
        try:
            document = ConfigManager.load_json(path)
        except OSError as e:
            raise IngestError(f"cannot read manifest {path}: {e}")
        except json.JSONDecodeError as e:
            raise IngestError(f"manifest {path} is not valid JSON: {e}")
        datasets = document.get("datasets") if isinstance(document, dict) else None
        if not isinstance(datasets, list) or not datasets:
            raise IngestError(f"manifest {path} lists no datasets")
        entries = [DatasetEntry.from_dict(d, i, self.settings) for i, d in enumerate(datasets, start=1)]
        names = [e.name for e in entries]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise IngestError(f"manifest {path} repeats dataset name(s): {', '.join(duplicates)}")
        return entries

    def ingest_dataset(self, entry: DatasetEntry, base_dir: Path) -> str:
        """
        Raises:
            IngestError: missing file or payload that does not parse
            InvalidArgumentError: modality/schema mismatch
        """
        file_path = base_dir / entry.path
        try:
            payload = FileUtils.read_bytes(file_path)
        except OSError as e:
            raise IngestError(f"{entry.name}: cannot read {file_path}: {e.strerror or e}")
        return self.catalog.register_root(
            entry.source(),
            entry.modality,
            payload,
            crs=entry.crs,
            temporal_extent=entry.temporal_extent,
            options=entry.options(),
        )

    def ingest_manifest(self, manifest_path: Union[str, Path]) -> Dict[str, str]:
        """Register every dataset of a manifest; returns dataset name -> element id"""
        path = Path(manifest_path)
        entries = self.load_manifest(path)
        ids = {entry.name: self.ingest_dataset(entry, path.parent) for entry in entries}
        logger.info("Ingested %d dataset(s) from %s", len(ids), path)
        return ids

    def try_ingest(self, manifest_path: Union[str, Path]) -> IngestResult:
        try:
            ids = self.ingest_manifest(manifest_path)
        except ParkLensError as e:
            return IngestResult(False, e.message, error_code=e.code)
        return IngestResult(True, f"{len(ids)} dataset(s) registered", ids)
