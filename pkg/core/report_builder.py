"""
Report builder - decision-level fusion of step results into cited claims, and rendering
"""

import json
import logging
from typing import Any, Dict, List, Optional, Union

from config.settings import AppSettings, app_settings
from core.catalog import Catalog
from core.errors import FusionError, InvalidArgumentError, LoadError
from models.api_models import ExecutionTrace, StepRecord
from models.data_structures import LulcClass, Modality, ScalarResult, Table
from models.report_models import Claim, ClaimKind, Report

logger = logging.getLogger(__name__)

FORMATS = ("text", "structured")


def _table_claim(table: Table) -> Optional[Claim]:
    if len(table.columns) == 1:
        names = sorted({str(v).strip() for (v,) in table.rows if v is not None})
        return Claim(ClaimKind.NAME_SET, names, [])
    return Claim(ClaimKind.FIELD_RECORD, table.records(), [])


def _scalar_claim(result: ScalarResult) -> Optional[Claim]:
    if result.kind == "lulc_proportions":
        values = {
            f"{entry['label']}:{cls.label}": entry["proportions"][cls.label]
            for entry in result.entries()
            for cls in LulcClass
        }
        return Claim(ClaimKind.NUMERIC_MAP, values, [])
    if result.kind == "lulc_change":
        values = {
            f"{entry['label']}:{cls.label}": entry["change"][cls.label]
            for entry in result.entries()
            for cls in LulcClass
        }
        return Claim(ClaimKind.NUMERIC_MAP, values, [])
    if result.kind == "point_counts":
        counts = {entry["label"]: entry["count"] for entry in result.entries()}
        locations = {entry["label"]: entry["locations"] for entry in result.entries()}
        return Claim(ClaimKind.COUNT, {"counts": counts, "locations": locations}, [])
    return None


def claim_for(record: StepRecord, catalog: Catalog) -> Optional[Claim]:
    """Claim typed by the modality of a step result, or None if it is not reportable"""
    element = catalog.resolve(record.result_id)
    if element.modality == Modality.TABULAR:
        claim = _table_claim(catalog.load_object(record.result_id))
    elif element.modality == Modality.SCALAR_RESULT:
        claim = _scalar_claim(catalog.load_object(record.result_id))
    else:
        claim = None
    if claim is not None:
        claim.evidence = [record.result_id]
    return claim


def _lineage_nodes(catalog: Catalog, element_id: str) -> List[Dict[str, Any]]:
    return [
        {
            "id": e.id,
            "modality": e.modality.value,
            "op": e.op.name if e.op else None,
            "source": e.name if e.is_root else None,
            "parents": list(e.parents),
        }
        for e in catalog.lineage_of(element_id)
    ]


def fuse(trace: ExecutionTrace, catalog: Catalog, question: Optional[str] = None) -> Report:
    """Turn the terminal results of a completed trace into claims, in step order

    Raises:
        FusionError: the trace failed, or nothing in it can be reported
    """
    question = question if question is not None else trace.plan.question
    if not trace.completed:
        error = trace.error or {}
        step = trace.plan.steps[trace.failed_step - 1] if trace.failed_step else None
        tool = f" ({step.tool})" if step else ""
        raise FusionError(
            f"step {trace.failed_step}{tool} failed: {error.get('code')}: {error.get('message')}",
            detail={"failed_step": trace.failed_step, "error": error},
        )

    claims: List[Claim] = []
    for record in trace.terminal_records():
        claim = claim_for(record, catalog)
        if claim is None:
            logger.debug("Step %d result %s has no claim form", record.index, record.result_id[:12])
            continue
        claims.append(claim)
    if not claims:
        raise FusionError("the plan produced no reportable result")

    if trace.plan.narrative:
        evidence = sorted({e for c in claims for e in c.evidence})
        claims.append(Claim(ClaimKind.NARRATIVE, trace.plan.narrative, evidence))

    evidence_ids = []
    for claim in claims:
        for element_id in claim.evidence:
            if element_id not in evidence_ids:
                evidence_ids.append(element_id)
    return Report(
        question=question,
        claims=claims,
        steps=[r.to_dict() for r in trace.records],
        lineage={element_id: _lineage_nodes(catalog, element_id) for element_id in evidence_ids},
        status=trace.status.value,
        trace=trace,
    )


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _format_number(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _value_lines(claim: Claim) -> List[str]:
    if claim.kind == ClaimKind.NAME_SET:
        return list(claim.value) or ["(none)"]
    if claim.kind == ClaimKind.FIELD_RECORD:
        if not claim.value:
            return ["(no rows)"]
        return ["; ".join(f"{k}: {'' if v is None else v}" for k, v in row.items()) for row in claim.value]
    if claim.kind == ClaimKind.NUMERIC_MAP:
        width = max((len(k) for k in claim.value), default=0)
        return [f"{key:<{width}}  {_format_number(value)}" for key, value in claim.value.items()]
    if claim.kind == ClaimKind.COUNT:
        lines = []
        for label, count in claim.value["counts"].items():
            lines.append(f"{label}: {count}")
            for location in claim.value["locations"].get(label, []):
                lines.append("    " + ", ".join(f"{k}={v}" for k, v in location.items()))
        return lines or ["(none)"]
    return str(claim.value).splitlines() or [""]


def render_text(report: Report, settings: AppSettings = app_settings) -> str:
    short = settings.SHORT_ID_LENGTH
    lines = [f"Question: {report.question}", "", "Answer"]
    for number, claim in enumerate(report.claims, start=1):
        evidence = ", ".join(e[:short] for e in claim.evidence)
        lines.append(f"  {number}. {claim.kind.value} [evidence {evidence}]")
        lines.extend(f"     {line}" for line in _value_lines(claim))
    lines.extend(["", "Lineage"])
    for element_id, nodes in report.lineage.items():
        lines.append(f"  {element_id[:short]}")
        for node in nodes:
            if node["op"] is None:
                origin = f"dataset '{node.get('source')}'"
            else:
                origin = f"{node['op']}({', '.join(p[:short] for p in node['parents'])})"
            lines.append(f"    {node['id'][:short]}  {node['modality']:<13}  {origin}")
    return "\n".join(lines) + "\n"


def render(report: Report, format: str = "text", settings: AppSettings = app_settings) -> bytes:
    """Deterministic bytes for a report; the structured form is the grader input"""
    if format not in FORMATS:
        raise InvalidArgumentError(f"unknown report format {format!r}")
    if format == "structured":
        return (json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    return render_text(report, settings).encode("utf-8")


def load_report(data: Union[bytes, str]) -> Report:
    """Parse a structured render

    Raises:
        LoadError: not a structured report
    """
    try:
        text = data.decode("utf-8") if isinstance(data, bytes) else data
        document = json.loads(text)
        return Report.from_dict(document)
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as e:
        raise LoadError(f"not a structured report: {e}")
