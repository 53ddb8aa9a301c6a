"""
Report and evaluation models - claims, fused reports, questions, grades and score tables
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

from core.errors import LoadError
from models.api_models import ExecutionTrace

CHECK = "✓"
CROSS = "✗"


class ClaimKind(Enum):
    NAME_SET = "name_set"
    FIELD_RECORD = "field_record"
    NUMERIC_MAP = "numeric_map"
    COUNT = "count"
    NARRATIVE = "narrative"


@dataclass
class Claim:
    """One fused statement with the elements it is drawn from"""

    kind: ClaimKind
    value: Any
    evidence: List[str]

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "value": self.value, "evidence": list(self.evidence)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Claim":
        return cls(kind=ClaimKind(data["kind"]), value=data["value"], evidence=list(data.get("evidence") or []))


@dataclass
class Report:
    """Fused answer to a question

    ``lineage`` maps each evidence id to its ancestor chain, roots first.
    """

    question: str
    claims: List[Claim] = field(default_factory=list)
    steps: List[Dict[str, Any]] = field(default_factory=list)
    lineage: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    status: str = "completed"
    trace: Optional[ExecutionTrace] = field(default=None, compare=False, repr=False)

    def claims_of(self, kind: ClaimKind) -> List[Claim]:
        return [c for c in self.claims if c.kind == kind]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "question": self.question,
            "status": self.status,
            "claims": [c.to_dict() for c in self.claims],
            "steps": self.steps,
            "lineage": self.lineage,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Report":
        return cls(
            question=data["question"],
            claims=[Claim.from_dict(c) for c in data.get("claims", [])],
            steps=list(data.get("steps") or []),
            lineage=dict(data.get("lineage") or {}),
            status=data.get("status", "completed"),
        )


# ---------------------------------------------------------------------------
# Questions and expected answers
# ---------------------------------------------------------------------------


class QuestionLevel(Enum):
    BASIC = "basic"
    QUALITATIVE = "qualitative"
    QUANTITATIVE = "quantitative"


class ExpectedKind(Enum):
    NAME_SET = "name_set"
    CHECKLIST = "checklist"
    NUMERIC_MAP = "numeric_map"


def _text_list(data: Dict[str, Any], key: str, where: str) -> List[str]:
    value = data.get(key)
    if not isinstance(value, list) or not value or not all(isinstance(v, str) for v in value):
        raise LoadError(f"{where}: '{key}' must be a non-empty list of text")
    return list(value)


@dataclass
class Expected:
    """Ground truth for one part of an answer"""

    kind: ExpectedKind
    names: List[str] = field(default_factory=list)
    entity_column: Optional[str] = None
    entities: List[str] = field(default_factory=list)
    fields: List[str] = field(default_factory=list)
    values: Dict[str, float] = field(default_factory=dict)
    tolerance: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == ExpectedKind.NAME_SET:
            return {"kind": self.kind.value, "names": self.names}
        if self.kind == ExpectedKind.CHECKLIST:
            return {
                "kind": self.kind.value,
                "entity_column": self.entity_column,
                "entities": self.entities,
                "fields": self.fields,
            }
        return {"kind": self.kind.value, "values": self.values, "tolerance": self.tolerance}

    @classmethod
    def from_dict(cls, data: Any, where: str) -> "Expected":
        """
        Raises:
            LoadError: malformed expected answer
        """
        if not isinstance(data, dict):
            raise LoadError(f"{where}: expected answer must be an object")
        try:
            kind = ExpectedKind(data.get("kind"))
        except ValueError:
            raise LoadError(f"{where}: unknown expected kind {data.get('kind')!r}")

        if kind == ExpectedKind.NAME_SET:
            return cls(kind, names=_text_list(data, "names", where))
        if kind == ExpectedKind.CHECKLIST:
            entity_column = data.get("entity_column")
            if not isinstance(entity_column, str) or not entity_column:
                raise LoadError(f"{where}: checklist needs an 'entity_column'")
            return cls(
                kind,
                entity_column=entity_column,
                entities=_text_list(data, "entities", where),
                fields=_text_list(data, "fields", where),
            )

        values = data.get("values")
        if not isinstance(values, dict) or not values:
            raise LoadError(f"{where}: numeric_map needs a non-empty 'values' object")
        for key, value in values.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise LoadError(f"{where}: value of '{key}' is not a number")
        tolerance = data.get("tolerance")
        if isinstance(tolerance, bool) or not isinstance(tolerance, (int, float)) or tolerance <= 0:
            raise LoadError(f"{where}: numeric_map needs a positive 'tolerance'")
        return cls(kind, values={k: float(v) for k, v in values.items()}, tolerance=float(tolerance))


@dataclass
class Question:
    id: str
    level: QuestionLevel
    text: str
    expected: List[Expected]

    def to_dict(self) -> Dict[str, Any]:
        expected = [e.to_dict() for e in self.expected]
        return {
            "id": self.id,
            "level": self.level.value,
            "text": self.text,
            "expected": expected[0] if len(expected) == 1 else expected,
        }


# ---------------------------------------------------------------------------
# Grades and score tables
# ---------------------------------------------------------------------------


@dataclass
class Grade:
    """✓ iff every check passed; detail lists the failing checks"""

    passed: bool
    detail: List[str] = field(default_factory=list)

    @property
    def mark(self) -> str:
        return CHECK if self.passed else CROSS

    def to_dict(self) -> Dict[str, Any]:
        return {"grade": self.mark, "detail": list(self.detail)}


@dataclass
class ScoreRow:
    question_id: str
    level: QuestionLevel
    grade: Grade

    def to_dict(self) -> Dict[str, Any]:
        return {"id": self.question_id, "level": self.level.value, **self.grade.to_dict()}


@dataclass
class ScoreTable:
    """Per-question grades in question order plus tallies"""

    rows: List[ScoreRow]
    backend: str = ""

    @property
    def all_passed(self) -> bool:
        return all(row.grade.passed for row in self.rows)

    def tallies(self) -> Dict[str, Dict[str, int]]:
        tallies: Dict[str, Dict[str, int]] = {}
        for level in QuestionLevel:
            rows = [r for r in self.rows if r.level == level]
            tallies[level.value] = {"passed": sum(r.grade.passed for r in rows), "total": len(rows)}
        tallies["total"] = {"passed": sum(r.grade.passed for r in self.rows), "total": len(self.rows)}
        return tallies

    def to_dict(self) -> Dict[str, Any]:
        return {"backend": self.backend, "rows": [r.to_dict() for r in self.rows], "tallies": self.tallies()}

    def render_text(self) -> str:
        id_width = max([len("id")] + [len(r.question_id) for r in self.rows])
        level_width = max(len(level.value) for level in QuestionLevel)
        lines = [f"{'id':<{id_width}}  {'level':<{level_width}}  grade  detail"]
        for row in self.rows:
            detail = "; ".join(row.grade.detail)
            line = f"{row.question_id:<{id_width}}  {row.level.value:<{level_width}}  {row.grade.mark:<5}  {detail}"
            lines.append(line.rstrip())
        lines.append("")
        for name, tally in self.tallies().items():
            lines.append(f"{name:<{level_width}}  {tally['passed']}/{tally['total']}")
        return "\n".join(lines) + "\n"

    def render(self, format: str = "text") -> str:
        if format == "structured":
            return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"
        return self.render_text()
