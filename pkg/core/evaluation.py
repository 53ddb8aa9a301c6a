"""
Evaluation harness - question dataset, graders and the score table

Expected answers are only read here, after a report has been rendered.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from config.settings import AppSettings, app_settings
from core.agent_engine import AgentEngine
from core.catalog import Catalog
from core.errors import EvalError, LoadError, ParkLensError
from core.report_builder import load_report
from models.api_models import PlannerBackend, ScriptedBackend
from models.data_structures import Crs
from models.report_models import (
    ClaimKind,
    Expected,
    ExpectedKind,
    Grade,
    Question,
    QuestionLevel,
    Report,
    ScoreRow,
    ScoreTable,
)
from utils.file_utils import FileUtils

logger = logging.getLogger(__name__)


def load_questions(file_path: Union[str, Path]) -> List[Question]:
    """Read and validate a questions file, keeping file order

    Raises:
        LoadError: unreadable file, duplicate id, unknown level or malformed expected answer
    """
    path = Path(file_path)
    try:
        text = FileUtils.read_text(path)
    except (OSError, UnicodeDecodeError) as e:
        raise LoadError(f"cannot read questions file {path}: {e}")
    if not text.strip():
        raise LoadError(f"questions file {path} is empty")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise LoadError(f"questions file {path} is not valid JSON: {e}")

    items = document.get("questions") if isinstance(document, dict) else document
    if not isinstance(items, list) or not items:
        raise LoadError(f"questions file {path} lists no questions")

    questions: List[Question] = []
    seen: Dict[str, int] = {}
    for position, item in enumerate(items, start=1):
        where = f"question {position}"
        if not isinstance(item, dict):
            raise LoadError(f"{where}: must be an object")
        question_id = item.get("id")
        if not isinstance(question_id, str) or not question_id:
            raise LoadError(f"{where}: missing id")
        if question_id in seen:
            raise LoadError(f"{where}: duplicate id {question_id} (first at question {seen[question_id]})")
        seen[question_id] = position
        where = f"{where} ({question_id})"
        try:
            level = QuestionLevel(item.get("level"))
        except ValueError:
            raise LoadError(f"{where}: unknown level {item.get('level')!r}")
        text_value = item.get("text")
        if not isinstance(text_value, str) or not text_value.strip():
            raise LoadError(f"{where}: missing question text")
        raw_expected = item.get("expected")
        if isinstance(raw_expected, dict):
            raw_expected = [raw_expected]
        if not isinstance(raw_expected, list) or not raw_expected:
            raise LoadError(f"{where}: missing expected answer")
        expected = [Expected.from_dict(e, where) for e in raw_expected]
        questions.append(Question(question_id, level, text_value, expected))
    return questions


# ---------------------------------------------------------------------------
# Grading
# ---------------------------------------------------------------------------


def _kind_mismatch(report: Report, wanted: str) -> List[str]:
    kinds = sorted({c.kind.value for c in report.claims if c.kind != ClaimKind.NARRATIVE}) or ["none"]
    return [f"kind mismatch: expected {wanted}, report has {', '.join(kinds)}"]


def _grade_name_set(report: Report, expected: Expected) -> List[str]:
    claims = report.claims_of(ClaimKind.NAME_SET)
    if not claims:
        return _kind_mismatch(report, "name_set")
    actual = {str(name).strip() for name in claims[-1].value}
    wanted = {name.strip() for name in expected.names}
    detail = []
    missing = sorted(wanted - actual)
    extra = sorted(actual - wanted)
    if missing:
        detail.append(f"missing names: {', '.join(missing)}")
    if extra:
        detail.append(f"unexpected names: {', '.join(extra)}")
    return detail


def _grade_checklist(report: Report, expected: Expected) -> List[str]:
    column = expected.entity_column
    records = [
        c for c in report.claims_of(ClaimKind.FIELD_RECORD) if any(column in row for row in c.value)
    ]
    if not records:
        return _kind_mismatch(report, f"checklist over '{column}'")
    rows = records[-1].value
    detail = []
    for entity in expected.entities:
        row = next((r for r in rows if str(r.get(column) or "").strip() == entity.strip()), None)
        if row is None:
            detail.append(f"missing entity '{entity}'")
            continue
        for name in expected.fields:
            if name not in row:
                detail.append(f"'{entity}': field '{name}' missing")
            elif row[name] is None:
                detail.append(f"'{entity}': field '{name}' is null")
    return detail


def _grade_numeric_map(report: Report, expected: Expected) -> List[str]:
    maps = report.claims_of(ClaimKind.NUMERIC_MAP)
    counts = report.claims_of(ClaimKind.COUNT)
    if not maps and not counts:
        return _kind_mismatch(report, "numeric_map")
    actual: Dict[str, Any] = {}
    for claim in maps:
        actual.update(claim.value)
    for claim in counts:
        actual.update(claim.value["counts"])
    detail = []
    for key, value in expected.values.items():
        if key not in actual:
            detail.append(f"missing key '{key}'")
            continue
        got = actual[key]
        if isinstance(got, bool) or not isinstance(got, (int, float)):
            detail.append(f"'{key}': {got!r} is not a number")
        elif abs(float(got) - value) > expected.tolerance:
            detail.append(f"'{key}': {float(got):.6f} differs from {value:.6f} by more than {expected.tolerance:g}")
    return detail


_GRADERS = {
    ExpectedKind.NAME_SET: _grade_name_set,
    ExpectedKind.CHECKLIST: _grade_checklist,
    ExpectedKind.NUMERIC_MAP: _grade_numeric_map,
}


def grade(report: Report, expected: Union[Expected, Sequence[Expected]]) -> Grade:
    """✓ iff every expected part is satisfied by the report's claims; never raises on shape"""
    parts = [expected] if isinstance(expected, Expected) else list(expected)
    if report.status != "completed":
        return Grade(False, [f"report status is {report.status}"])
    detail: List[str] = []
    for part in parts:
        detail.extend(_GRADERS[part.kind](report, part))
    return Grade(not detail, detail)


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------


def evaluate_question(
    question: Question,
    catalog: Catalog,
    backend: PlannerBackend,
    settings: AppSettings = app_settings,
    analysis_crs: Optional[Crs] = None,
) -> ScoreRow:
    """Plan, execute, fuse, render and grade one question

    Agent-side failures become ✗ grades; infrastructure failures raise.

    Raises:
        EvalError: the backend could not be reached
    """
    engine = AgentEngine(catalog, backend, settings, analysis_crs=analysis_crs)
    try:
        outcome = engine.ask(question.text, format="structured")
    except ParkLensError as e:
        if e.infrastructure:
            raise EvalError(f"{question.id}: {e.message}", detail=e.to_dict()) from e
        logger.info("%s answered with an error: %s", question.id, e)
        return ScoreRow(question.id, question.level, Grade(False, [str(e)]))
    result = grade(load_report(outcome.rendered), question.expected)
    logger.info("%s %s", question.id, result.mark)
    return ScoreRow(question.id, question.level, result)


def run_eval(
    questions: Sequence[Question],
    backend: PlannerBackend,
    catalog: Catalog,
    settings: AppSettings = app_settings,
    workers: Optional[int] = None,
    analysis_crs: Optional[Crs] = None,
) -> ScoreTable:
    """Grade every question against the catalog; rows come back in question order

    Raises:
        EvalError: missing plan directory, empty workspace or unreachable backend
    """
    if isinstance(backend, ScriptedBackend) and not Path(backend.plan_dir).is_dir():
        raise EvalError(f"plan directory {backend.plan_dir} does not exist")
    if len(catalog) == 0:
        raise EvalError(f"workspace {catalog.workspace} has no ingested data")
    workers = max(1, workers or settings.EVAL_WORKERS)

    def evaluate(question: Question) -> ScoreRow:
        return evaluate_question(question, catalog, backend, settings, analysis_crs)

    if workers == 1:
        rows = [evaluate(q) for q in questions]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(evaluate, questions))
    table = ScoreTable(rows=rows, backend=backend.label)
    tally = table.tallies()["total"]
    logger.info("Evaluation finished: %d/%d correct", tally["passed"], tally["total"])
    return table
