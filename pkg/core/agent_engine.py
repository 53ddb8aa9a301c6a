"""
Agent engine - catalog summaries, step validation, plan execution and the ask pipeline

Summaries handed to planners and recorded in traces describe schema and
counts only; they never contain cell, point or pixel values.
"""

import logging
import time
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, TypedDict

from langgraph.graph import END, StateGraph

from config.settings import AppSettings, app_settings
from core.catalog import Catalog
from core.errors import ParkLensError
from models.api_models import (
    Diagnostic,
    ExecutionTrace,
    Plan,
    PlannerBackend,
    Step,
    StepRecord,
    TraceStatus,
)
from models.data_structures import Crs, DataElement, Modality
from models.report_models import Report
from modules.tools import ToolContext, ToolRegistry, tool_registry

logger = logging.getLogger(__name__)

EMPTY_CATALOG = "no elements registered"


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------


def _schema_lines(element: DataElement) -> List[str]:
    schema = element.schema
    if element.modality == Modality.TABULAR:
        columns = ", ".join(f"{c['name']} ({c['type']})" for c in schema.get("columns", []))
        return [f"columns: {columns or '-'}"]
    if element.modality == Modality.VECTOR:
        properties = ", ".join(schema.get("properties", [])) or "-"
        return [f"geometry: {schema.get('geometry')}; key: {schema.get('key_property')}; properties: {properties}"]
    if element.modality == Modality.POINT_CLOUD:
        attributes = ", ".join(schema.get("attributes", []))
        return [f"attributes: {attributes}; LAS {schema.get('version')} format {schema.get('point_format')}"]
    if element.modality == Modality.RASTER:
        return [
            f"band: {schema.get('band')} ({schema.get('dtype')}); grid {schema.get('width')}x{schema.get('height')} "
            f"cells of {schema.get('cell_size'):g} m"
        ]
    return [f"result kind: {schema.get('kind')}"]


def _counts(element: DataElement) -> str:
    stats = element.stats
    if element.modality == Modality.TABULAR:
        return f"{stats.get('rows', '?')} rows x {stats.get('columns', '?')} columns"
    if element.modality == Modality.VECTOR:
        return f"{stats.get('features', '?')} features"
    if element.modality == Modality.POINT_CLOUD:
        return f"{stats.get('points', '?')} points"
    if element.modality == Modality.RASTER:
        return f"{stats.get('cells', '?')} cells, {stats.get('nodata_cells', '?')} nodata"
    return f"{stats.get('entries', '?')} entries"


def describe_element(element: DataElement, full_ids: bool = False, settings: AppSettings = app_settings) -> str:
    """Schema-and-counts summary of one element"""
    shown = element.id if full_ids else element.id[: settings.SHORT_ID_LENGTH]
    if element.is_root:
        origin = f"dataset '{element.name}'"
    else:
        parents = ", ".join(p if full_ids else p[: settings.SHORT_ID_LENGTH] for p in element.parents)
        origin = f"{element.op.name}({parents})"
    lines = [f"{shown}  {element.modality.value}  {origin}  {_counts(element)}"]
    lines.extend(f"    {line}" for line in _schema_lines(element))
    crs = element.crs.name if element.crs else "-"
    extent = str(element.temporal_extent) if element.temporal_extent else "-"
    lines.append(f"    crs: {crs}; time: {extent}")
    return "\n".join(lines)


def describe_catalog(
    catalog: Catalog, full_ids: bool = False, include_derived: bool = True, settings: AppSettings = app_settings
) -> str:
    """Summary of every element; its size depends on schema width, not data volume"""
    elements = [e for e in catalog.elements() if include_derived or e.is_root]
    if not elements:
        return EMPTY_CATALOG
    return "\n".join(describe_element(e, full_ids, settings) for e in elements) + "\n"


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def resolve_reference(reference: Any, catalog: Catalog, bindings: Mapping[str, str]) -> str:
    """Element id for a binding name, dataset name, full id or unique id prefix"""
    if isinstance(reference, str) and reference in bindings:
        return bindings[reference]
    return catalog.find(reference).id


def validate_step(
    step: Step,
    catalog: Catalog,
    bindings: Mapping[str, Modality],
    registry: ToolRegistry = tool_registry,
    later_bindings: Optional[Mapping[str, int]] = None,
    settings: AppSettings = app_settings,
) -> Diagnostic:
    """Check a step against the registry and the catalog without running it

    ``bindings`` maps names produced by earlier steps to their result
    modality; ``later_bindings`` maps names produced by later steps to their
    step number, for ordering diagnostics.
    """
    if registry.get(step.tool) is None:
        return Diagnostic.fail(f"unknown tool '{step.tool}'; available tools: {', '.join(registry.names())}")
    try:
        params, references = registry.prepare(step.tool, step.args, settings)
    except ParkLensError as e:
        return Diagnostic.fail(e.message, e.code)

    spec = registry.spec(step.tool)
    modalities: Dict[str, str] = {}
    for param_name, reference in references:
        if not isinstance(reference, str):
            return Diagnostic.fail(f"{step.tool}: '{param_name}' must name an element", "invalid-argument")
        if reference in bindings:
            modality = bindings[reference]
        elif later_bindings and reference in later_bindings:
            return Diagnostic.fail(
                f"{step.tool}: '{param_name}' uses binding '{reference}' before step {later_bindings[reference]} "
                "produces it",
                "plan-invalid",
            )
        else:
            try:
                modality = catalog.find(reference).modality
            except ParkLensError as e:
                return Diagnostic.fail(f"{step.tool}: '{param_name}': {e.message}", e.code)
        expected = spec.param(param_name).modality
        if expected is not None and modality != expected:
            return Diagnostic.fail(
                f"{step.tool}: '{param_name}' expects {expected.value}, '{reference}' is {modality.value}",
                "invalid-argument",
            )
        modalities[param_name] = modality.value
    return Diagnostic.ok({"params": params, "elements": modalities})


def validate_plan(
    plan: Plan, catalog: Catalog, registry: ToolRegistry = tool_registry, settings: AppSettings = app_settings
) -> Diagnostic:
    """Validate every step in order; the first failure is reported with its step number"""
    producers: Dict[str, int] = {}
    for index, step in enumerate(plan.steps, start=1):
        if step.result_binding in producers:
            return Diagnostic.fail(
                f"step {index}: binding '{step.result_binding}' already produced by step {producers[step.result_binding]}"
            )
        producers[step.result_binding] = index

    bindings: Dict[str, Modality] = {}
    for index, step in enumerate(plan.steps, start=1):
        later = {name: number for name, number in producers.items() if number >= index}
        diagnostic = validate_step(step, catalog, bindings, registry, later, settings)
        if not diagnostic.success:
            return Diagnostic(False, f"step {index}: {diagnostic.message}", {"step": index}, diagnostic.error_code)
        bindings[step.result_binding] = registry.spec(step.tool).result_modality
    return Diagnostic.ok({"steps": len(plan.steps)})


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def run_step(
    step: Step,
    catalog: Catalog,
    bindings: Mapping[str, str],
    registry: ToolRegistry = tool_registry,
    context: Optional[ToolContext] = None,
) -> StepRecord:
    """Run one step and register its result; raises whatever the tool raises"""
    context = context or ToolContext()
    started = time.perf_counter()
    params, references = registry.prepare(step.tool, step.args, context.settings, context.analysis_crs)
    element_ids = [(name, resolve_reference(ref, catalog, bindings)) for name, ref in references]
    result_id = registry.invoke(catalog, step.tool, params, element_ids, context)

    spec = registry.spec(step.tool)
    resolved = dict(params)
    resolved.update(dict(element_ids))
    ordered = {p.name: resolved[p.name] for p in spec.params if p.name in resolved}
    return StepRecord(
        index=0,
        tool=step.tool,
        result_binding=step.result_binding,
        resolved_args=ordered,
        parents=[element_id for _, element_id in element_ids],
        result_id=result_id,
        summary=describe_element(catalog.resolve(result_id), settings=context.settings),
        duration=time.perf_counter() - started,
    )


def execute_plan(
    plan: Plan, catalog: Catalog, registry: ToolRegistry = tool_registry, context: Optional[ToolContext] = None
) -> ExecutionTrace:
    """Run steps in order, stopping at the first failure; never raises for tool errors"""
    trace = ExecutionTrace(plan=plan)
    bindings: Dict[str, str] = {}
    for index, step in enumerate(plan.steps, start=1):
        try:
            record = run_step(step, catalog, bindings, registry, context)
        except ParkLensError as e:
            error = e.to_dict()
        except Exception as e:  # a tool bug must still end as a failed trace
            logger.exception("Step %d (%s) crashed", index, step.tool)
            error = {"code": "error", "message": f"{e.__class__.__name__}: {e}"}
        else:
            record.index = index
            bindings[step.result_binding] = record.result_id
            trace.records.append(record)
            logger.info("Step %d %s -> %s (%.3fs)", index, step.tool, record.result_id[:12], record.duration)
            continue
        trace.status = TraceStatus.FAILED
        trace.failed_step = index
        trace.error = error
        logger.warning("Step %d %s failed: %s: %s", index, step.tool, error["code"], error["message"])
        break
    return trace


# ---------------------------------------------------------------------------
# Ask pipeline
# ---------------------------------------------------------------------------


class AskState(TypedDict, total=False):
    question: str
    format: str
    plan: Plan
    trace: ExecutionTrace
    report: Report
    rendered: bytes


@dataclass
class AskOutcome:
    plan: Plan
    trace: ExecutionTrace
    report: Report
    rendered: bytes


class AgentEngine:
    """Question answering over a catalog: plan, execute, fuse, render"""

    def __init__(
        self,
        catalog: Catalog,
        backend: PlannerBackend,
        settings: AppSettings = app_settings,
        registry: ToolRegistry = tool_registry,
        analysis_crs: Optional[Crs] = None,
    ):
        from core.planner import create_planner

        self.catalog = catalog
        self.settings = settings
        self.registry = registry
        self.context = ToolContext(settings=settings, analysis_crs=analysis_crs)
        self.planner = create_planner(backend, settings, registry, self.context)
        self.graph = self._build_graph()

    def _build_graph(self):
        workflow = StateGraph(AskState)
        workflow.add_node("plan", self._plan_node)
        workflow.add_node("execute", self._execute_node)
        workflow.add_node("fuse", self._fuse_node)
        workflow.add_node("render", self._render_node)
        workflow.set_entry_point("plan")
        workflow.add_edge("plan", "execute")
        workflow.add_edge("execute", "fuse")
        workflow.add_edge("fuse", "render")
        workflow.add_edge("render", END)
        return workflow.compile()

    def _plan_node(self, state: AskState) -> Dict[str, Any]:
        return {"plan": self.plan(state["question"])}

    def _execute_node(self, state: AskState) -> Dict[str, Any]:
        return {"trace": self.execute(state["plan"])}

    def _fuse_node(self, state: AskState) -> Dict[str, Any]:
        from core.report_builder import fuse

        return {"report": fuse(state["trace"], self.catalog, state["question"])}

    def _render_node(self, state: AskState) -> Dict[str, Any]:
        from core.report_builder import render

        return {"rendered": render(state["report"], state.get("format", "text"), self.settings)}

    def plan(self, question: str) -> Plan:
        """
        Raises:
            PlanInvalidError, PlanIncompleteError, BackendError, ProtocolError
        """
        return self.planner.plan(question, self.catalog)

    def execute(self, plan: Plan) -> ExecutionTrace:
        return execute_plan(plan, self.catalog, self.registry, self.context)

    def ask(self, question: str, format: str = "text") -> AskOutcome:
        """
        Raises:
            ParkLensError: planning failed, or FusionError for a failed trace
        """
        logger.info("Question: %s", question)
        state = self.graph.invoke({"question": question, "format": format})
        return AskOutcome(state["plan"], state["trace"], state["report"], state["rendered"])
