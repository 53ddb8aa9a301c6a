"""
Content-addressed catalog of data elements and their lineage graph
"""

import heapq
import json
import logging
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Union

from config.settings import AppSettings, app_settings
from core.errors import (
    DataError,
    IngestError,
    InvalidArgumentError,
    LineageError,
    NotFoundError,
    ParkLensError,
    ParseError,
    UnsupportedFormatError,
)
from models.data_structures import (
    Crs,
    DataElement,
    Modality,
    OperationDescriptor,
    ParseOptions,
    TimeInterval,
)
from utils.file_utils import CanonicalJson, FileUtils

logger = logging.getLogger(__name__)

ID_PATTERN = re.compile(r"^[0-9a-f]{64}$")
PREFIX_PATTERN = re.compile(r"^[0-9a-f]+$")


def _canonical(value: Any, what: str) -> str:
    try:
        return CanonicalJson.dumps(value)
    except (TypeError, ValueError) as e:
        raise InvalidArgumentError(f"cannot canonicalize {what}: {e}")


def compute_id(
    modality: Modality,
    schema: Dict[str, Any],
    crs: Optional[Crs],
    temporal_extent: Optional[TimeInterval],
    payload_digest: str,
    source: Optional[Dict[str, Any]] = None,
    parents: Optional[Sequence[str]] = None,
    op_name: Optional[str] = None,
    params: Optional[Dict[str, Any]] = None,
) -> str:
    """Digest of the length-prefixed canonical fields of an element.

    Field order: modality, schema, crs, temporal extent, source (roots) or
    op + parents (derived), payload digest. Each field is UTF-8 text framed
    as ``<byte length>:<bytes>``.

    Raises:
        InvalidArgumentError: a field cannot be canonicalized
    """
    if (source is None) == (op_name is None):
        raise InvalidArgumentError("an element has either a source or an operation, not both")
    if source is not None:
        lineage = _canonical({"source": source}, "source descriptor")
    else:
        lineage = _canonical(
            {"op": {"name": op_name, "params": params or {}}, "parents": list(parents or [])},
            f"parameters of {op_name}",
        )
    fields = [
        modality.value,
        _canonical(schema, "schema"),
        _canonical(crs.name if crs else None, "crs"),
        _canonical(temporal_extent.to_dict() if temporal_extent else None, "temporal extent"),
        lineage,
        payload_digest,
    ]
    framed = b"".join(f"{len(b)}:".encode("ascii") + b for b in (f.encode("utf-8") for f in fields))
    return FileUtils.sha256_hex(framed)


@dataclass
class IntegrityReport:
    """Result of a lineage graph check"""

    success: bool
    message: str
    problems: List[str] = field(default_factory=list)


def _registered_tool_names() -> List[str]:
    from modules.tools.registry import tool_registry

    return tool_registry.names()


class Catalog:
    """Append-only element store rooted in a workspace directory.

    Layout: ``catalog/manifest`` holds one canonical record per line and
    ``catalog/blobs/<id>`` holds payload bytes. Reads are lock-free over
    immutable elements; writes go through a single lock.
    """

    def __init__(
        self,
        workspace: Union[str, Path],
        settings: AppSettings = app_settings,
        op_names: Optional[Callable[[], Iterable[str]]] = None,
    ):
        self.workspace = Path(workspace)
        self.settings = settings
        self.root = self.workspace / "catalog"
        self.manifest_path = self.root / "manifest"
        self.blob_dir = self.root / "blobs"
        self._op_names = op_names or _registered_tool_names
        self._lock = threading.RLock()
        self._nodes: Dict[str, DataElement] = {}
        self._objects: Dict[str, Any] = {}
        self.blob_dir.mkdir(parents=True, exist_ok=True)
        self._load_manifest()

    # ------------------------------------------------------------------
    # persistence
    # ------------------------------------------------------------------

    def _load_manifest(self) -> None:
        if not self.manifest_path.exists():
            return
        try:
            text = FileUtils.read_text(self.manifest_path)
        except UnicodeDecodeError as e:
            raise LineageError(f"catalog manifest is not {AppSettings.DEFAULT_ENCODING} text: {e}")
        for number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                element = DataElement.from_record(json.loads(line))
            except (ValueError, KeyError, ParkLensError) as e:
                raise LineageError(f"corrupt catalog manifest line {number}: {e}")
            self._nodes[element.id] = element
        logger.debug("Loaded %d catalog elements from %s", len(self._nodes), self.manifest_path)

    def _store(self, element: DataElement, payload: bytes) -> None:
        FileUtils.write_atomic(self.blob_dir / element.id, payload)
        FileUtils.append_line(self.manifest_path, CanonicalJson.dumps(element.to_record()))
        self._nodes[element.id] = element

    # ------------------------------------------------------------------
    # registration
    # ------------------------------------------------------------------

    def register_root(
        self,
        source: Dict[str, Any],
        modality: Modality,
        payload: bytes,
        schema: Optional[Dict[str, Any]] = None,
        crs: Optional[Crs] = None,
        temporal_extent: Optional[TimeInterval] = None,
        options: Optional[ParseOptions] = None,
    ) -> str:
        """Register source data after parsing it under the declared modality.

        Re-registering identical content returns the existing id.

        Raises:
            IngestError: payload does not parse (carries the parser diagnostic)
            InvalidArgumentError: modality or schema does not match the payload
        """
        from modules.parsers import parser_registry

        if not isinstance(source, dict) or not source.get("name"):
            raise InvalidArgumentError("root source descriptor needs a 'name'")
        if modality == Modality.SCALAR_RESULT:
            raise InvalidArgumentError("scalar results are derived, never registered as roots")
        options = options or ParseOptions()
        options.crs = crs
        options.temporal_extent = temporal_extent
        try:
            obj = parser_registry.parse(modality, payload, options)
        except (ParseError, UnsupportedFormatError, DataError) as e:
            raise IngestError(f"{source.get('uri') or source['name']}: {e}", detail=e.to_dict())
        computed = obj.schema()
        if schema is not None and schema != computed:
            raise InvalidArgumentError(
                f"declared schema does not match {modality.value} payload of {source['name']}"
            )
        digest = FileUtils.sha256_hex(payload)
        element_id = compute_id(modality, computed, crs, temporal_extent, digest, source=source)
        with self._lock:
            existing = self._nodes.get(element_id)
            if existing is not None:
                logger.debug("Root %s already registered", existing.short_id)
                return element_id
            element = DataElement(
                id=element_id,
                modality=modality,
                schema=computed,
                crs=crs,
                temporal_extent=temporal_extent,
                source=dict(source),
                payload_digest=digest,
                stats=obj.stats(),
            )
            self._store(element, payload)
            self._objects[element_id] = obj
        logger.info("Registered root %s (%s, %s)", element.short_id, source["name"], modality.value)
        return element_id

    def derive(
        self,
        parents: Sequence[str],
        op_name: str,
        params: Dict[str, Any],
        payload: bytes,
        modality: Modality,
        schema: Dict[str, Any],
        crs: Optional[Crs] = None,
        temporal_extent: Optional[TimeInterval] = None,
        stats: Optional[Dict[str, Any]] = None,
    ) -> str:
        """Record a processing result with its parents and operation.

        Raises:
            LineageError: a parent is not registered
            InvalidArgumentError: op_name is not a registered tool
        """
        if not parents:
            raise LineageError("a derived element needs at least one parent")
        for parent in parents:
            if parent not in self._nodes:
                raise LineageError(f"unknown parent element {parent}")
        if op_name not in set(self._op_names()):
            raise InvalidArgumentError(f"operation '{op_name}' is not a registered tool")
        digest = FileUtils.sha256_hex(payload)
        element_id = compute_id(
            modality, schema, crs, temporal_extent, digest, parents=list(parents), op_name=op_name, params=params
        )
        with self._lock:
            if element_id in self._nodes:
                return element_id
            element = DataElement(
                id=element_id,
                modality=modality,
                schema=schema,
                crs=crs,
                temporal_extent=temporal_extent,
                parents=tuple(parents),
                op=OperationDescriptor(op_name, params),
                payload_digest=digest,
                stats=stats or {},
            )
            self._store(element, payload)
        logger.debug("Derived %s via %s from %s", element.short_id, op_name, [p[:12] for p in parents])
        return element_id

    # ------------------------------------------------------------------
    # lookup
    # ------------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._nodes)

    def __contains__(self, element_id: str) -> bool:
        return element_id in self._nodes

    def resolve(self, element_id: str) -> DataElement:
        element = self._nodes.get(element_id)
        if element is None:
            raise NotFoundError(f"no element with id {element_id}")
        return element

    def elements(self) -> List[DataElement]:
        """Roots ordered by name, then derived elements ordered by id"""
        nodes = list(self._nodes.values())
        roots = sorted((e for e in nodes if e.is_root), key=lambda e: (e.name or "", e.id))
        derived = sorted((e for e in nodes if not e.is_root), key=lambda e: e.id)
        return roots + derived

    def find(self, reference: str) -> DataElement:
        """Look up an element by dataset name, full id, or unique id prefix.

        Raises:
            NotFoundError: nothing matches
            InvalidArgumentError: the prefix is too short or ambiguous
        """
        if not isinstance(reference, str) or not reference:
            raise InvalidArgumentError("element reference must be non-empty text")
        named = [e for e in self._nodes.values() if e.is_root and e.name == reference]
        if named:
            # Same name, different content: the most recently registered wins.
            return named[-1]
        if ID_PATTERN.match(reference):
            return self.resolve(reference)
        if PREFIX_PATTERN.match(reference):
            if len(reference) < self.settings.MIN_ID_PREFIX:
                raise InvalidArgumentError(
                    f"id prefix '{reference}' is shorter than {self.settings.MIN_ID_PREFIX} characters"
                )
            matches = [i for i in self._nodes if i.startswith(reference)]
            if len(matches) > 1:
                raise InvalidArgumentError(f"id prefix '{reference}' is ambiguous ({len(matches)} matches)")
            if matches:
                return self._nodes[matches[0]]
        raise NotFoundError(f"no element named or identified by '{reference}'")

    def payload(self, element_id: str) -> bytes:
        self.resolve(element_id)
        return FileUtils.read_bytes(self.blob_dir / element_id)

    def load_object(self, element_id: str) -> Any:
        """Typed object (Table, PointCloud, Raster, VectorLayer, ScalarResult) for an element"""
        from modules.parsers import parser_registry

        cached = self._objects.get(element_id)
        if cached is not None:
            return cached
        element = self.resolve(element_id)
        options = ParseOptions(crs=element.crs, temporal_extent=element.temporal_extent)
        obj = parser_registry.load(element, self.payload(element_id), options)
        with self._lock:
            self._objects.setdefault(element_id, obj)
        return self._objects[element_id]

    # ------------------------------------------------------------------
    # lineage
    # ------------------------------------------------------------------

    def lineage_of(self, element_id: str) -> List[DataElement]:
        """Ancestor subgraph in topological order, roots first, ties by id"""
        self.resolve(element_id)
        members: Dict[str, DataElement] = {}
        stack = [element_id]
        while stack:
            current = stack.pop()
            if current in members:
                continue
            element = self._nodes.get(current)
            if element is None:
                raise LineageError(f"lineage of {element_id[:12]} references missing element {current}")
            members[current] = element
            stack.extend(element.parents)
        return self._topological(members)

    @staticmethod
    def _topological(members: Dict[str, DataElement]) -> List[DataElement]:
        pending = {i: len(set(e.parents)) for i, e in members.items()}
        children: Dict[str, List[str]] = {i: [] for i in members}
        for i, element in members.items():
            for parent in set(element.parents):
                children[parent].append(i)
        ready = [i for i, count in pending.items() if count == 0]
        heapq.heapify(ready)
        ordered: List[DataElement] = []
        while ready:
            current = heapq.heappop(ready)
            ordered.append(members[current])
            for child in children[current]:
                pending[child] -= 1
                if pending[child] == 0:
                    heapq.heappush(ready, child)
        if len(ordered) != len(members):
            raise LineageError("lineage graph contains a cycle")
        return ordered

    def export_lineage(self, element_ids: Optional[Sequence[str]] = None) -> str:
        """Deterministic JSON document of the graph (or of the given ids' lineages)"""
        if element_ids:
            members: Dict[str, DataElement] = {}
            for element_id in element_ids:
                for element in self.lineage_of(element_id):
                    members[element.id] = element
        else:
            members = dict(self._nodes)
        nodes = [
            {
                "id": e.id,
                "modality": e.modality.value,
                "op": e.op.name if e.op else None,
                "parents": list(e.parents),
            }
            for e in self._topological(members)
        ]
        return CanonicalJson.dump_pretty({"nodes": nodes})

    def check_integrity(self, verify_payloads: bool = False) -> IntegrityReport:
        """Check closure, acyclicity, root termination and the root/derived shape"""
        problems: List[str] = []
        for element in self._nodes.values():
            if element.is_root and (element.parents or element.source is None):
                problems.append(f"{element.short_id}: root must have a source and no parents")
            if not element.is_root and (not element.parents or element.source is not None):
                problems.append(f"{element.short_id}: derived element must have parents and no source")
            for parent in element.parents:
                if parent not in self._nodes:
                    problems.append(f"{element.short_id}: parent {parent[:12]} is not registered")
            if verify_payloads:
                blob = self.blob_dir / element.id
                if not blob.exists():
                    problems.append(f"{element.short_id}: payload missing")
                elif FileUtils.sha256_hex(FileUtils.read_bytes(blob)) != element.payload_digest:
                    problems.append(f"{element.short_id}: payload digest mismatch")
        if not problems:
            try:
                ordered = self._topological(dict(self._nodes))
            except LineageError as e:
                problems.append(str(e))
            else:
                # Topological order exists, so every ancestor chain ends at a parentless node.
                for element in ordered:
                    if not element.parents and not element.is_root:
                        problems.append(f"{element.short_id}: chain ends at a non-root element")
        if problems:
            return IntegrityReport(False, f"{len(problems)} lineage problem(s)", problems)
        return IntegrityReport(True, f"{len(self._nodes)} elements, lineage graph intact")
