"""
Agent models - tool specifications, plans, execution traces and planner backends
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from config.settings import AppSettings, app_settings
from core.errors import InvalidArgumentError, PlanInvalidError
from models.data_structures import Modality


class ParamKind(Enum):
    """Kinds of tool argument"""

    ELEMENT_ID = "element_id"
    TEXT = "text"
    NUMBER = "number"
    DATE_INTERVAL = "date_interval"
    COLUMN_LIST = "column_list"
    PREDICATE = "predicate"
    CRS = "crs"


@dataclass(frozen=True)
class ToolParam:
    """One declared tool parameter

    ``modality`` constrains element arguments; ``default_setting`` names the
    AppSettings attribute that supplies the default for an omitted argument.
    """

    name: str
    kind: ParamKind
    required: bool = True
    description: str = ""
    modality: Optional[Modality] = None
    choices: Tuple[str, ...] = ()
    default: Any = None
    default_setting: Optional[str] = None

    def json_schema(self) -> Dict[str, Any]:
        if self.kind == ParamKind.ELEMENT_ID:
            expected = self.modality.value if self.modality else "any"
            schema: Dict[str, Any] = {
                "type": "string",
                "description": f"{self.description} (catalog element: dataset name, result binding or id; {expected})",
            }
            return schema
        if self.kind == ParamKind.NUMBER:
            schema = {"type": "number"}
        elif self.kind == ParamKind.COLUMN_LIST:
            schema = {"type": "array", "items": {"type": "string"}, "minItems": 1}
        elif self.kind == ParamKind.DATE_INTERVAL:
            schema = {
                "type": "object",
                "properties": {"start": {"type": "string"}, "end": {"type": "string"}},
                "required": ["start", "end"],
            }
        elif self.kind == ParamKind.PREDICATE:
            schema = {"type": "object"}
        else:
            schema = {"type": "string"}
        if self.choices:
            schema["enum"] = list(self.choices)
        schema["description"] = self.description
        return schema

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"name": self.name, "kind": self.kind.value, "required": self.required}
        if self.modality is not None:
            data["modality"] = self.modality.value
        if self.choices:
            data["choices"] = list(self.choices)
        return data


@dataclass(frozen=True)
class ToolSpec:
    """Declared interface of a registered tool"""

    name: str
    description: str
    params: Tuple[ToolParam, ...]
    result_modality: Modality

    def param(self, name: str) -> Optional[ToolParam]:
        for param in self.params:
            if param.name == name:
                return param
        return None

    def element_params(self) -> List[ToolParam]:
        return [p for p in self.params if p.kind == ParamKind.ELEMENT_ID]

    def function_schema(self) -> Dict[str, Any]:
        """OpenAI-compatible tool definition; every call also names its result binding"""
        properties = {p.name: p.json_schema() for p in self.params}
        properties["result_binding"] = {"type": "string", "description": "local name for this step's result"}
        properties["rationale"] = {"type": "string", "description": "why this step is needed"}
        required = [p.name for p in self.params if p.required] + ["result_binding"]
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": f"{self.description} Returns {self.result_modality.value}.",
                "parameters": {"type": "object", "properties": properties, "required": required},
            },
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "params": [p.to_dict() for p in self.params],
            "result_modality": self.result_modality.value,
        }


@dataclass
class Step:
    """One tool invocation of a plan"""

    tool: str
    args: Dict[str, Any]
    result_binding: str
    rationale: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tool": self.tool,
            "args": self.args,
            "result_binding": self.result_binding,
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, data: Any, position: Optional[int] = None) -> "Step":
        where = f"step {position}: " if position is not None else ""
        if not isinstance(data, dict):
            raise PlanInvalidError(f"{where}a step must be an object")
        tool = data.get("tool")
        binding = data.get("result_binding")
        args = data.get("args", {})
        if not isinstance(tool, str) or not tool:
            raise PlanInvalidError(f"{where}missing tool name")
        if not isinstance(binding, str) or not binding:
            raise PlanInvalidError(f"{where}missing result_binding")
        if not isinstance(args, dict):
            raise PlanInvalidError(f"{where}args must be an object")
        return cls(tool=tool, args=dict(args), result_binding=binding, rationale=str(data.get("rationale") or ""))


@dataclass
class Plan:
    """A question decomposed into ordered steps"""

    question: str
    steps: List[Step] = field(default_factory=list)
    narrative: Optional[str] = field(default=None, compare=False)

    def to_dict(self) -> Dict[str, Any]:
        return {"question": self.question, "steps": [s.to_dict() for s in self.steps]}

    @classmethod
    def from_dict(cls, data: Any) -> "Plan":
        if not isinstance(data, dict) or not isinstance(data.get("question"), str):
            raise PlanInvalidError("plan document needs a 'question' text")
        steps = data.get("steps", [])
        if not isinstance(steps, list):
            raise PlanInvalidError("plan 'steps' must be a list")
        return cls(
            question=data["question"],
            steps=[Step.from_dict(s, i) for i, s in enumerate(steps, start=1)],
        )


@dataclass
class Diagnostic:
    """Outcome of validating one step"""

    success: bool
    message: str
    data: Optional[Dict[str, Any]] = None
    error_code: Optional[str] = None

    @classmethod
    def ok(cls, data: Optional[Dict[str, Any]] = None) -> "Diagnostic":
        return cls(True, "ok", data)

    @classmethod
    def fail(cls, message: str, error_code: str = "plan-invalid") -> "Diagnostic":
        return cls(False, message, None, error_code)


class TraceStatus(Enum):
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class StepRecord:
    """Executed step: resolved arguments, result element and its summary"""

    index: int
    tool: str
    result_binding: str
    resolved_args: Dict[str, Any]
    parents: List[str]
    result_id: str
    summary: str
    duration: float = field(default=0.0, compare=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "tool": self.tool,
            "result_binding": self.result_binding,
            "resolved_args": self.resolved_args,
            "parents": self.parents,
            "result_id": self.result_id,
            "summary": self.summary,
        }


@dataclass
class ExecutionTrace:
    """Record of a plan run; stops at the first failing step"""

    plan: Plan
    records: List[StepRecord] = field(default_factory=list)
    status: TraceStatus = TraceStatus.COMPLETED
    failed_step: Optional[int] = None
    error: Optional[Dict[str, str]] = None

    @property
    def completed(self) -> bool:
        return self.status == TraceStatus.COMPLETED

    def result_ids(self) -> List[str]:
        return [r.result_id for r in self.records]

    def terminal_records(self) -> List[StepRecord]:
        """Records whose results no later step consumes, in step order"""
        consumed = {p for r in self.records for p in r.parents}
        return [r for r in self.records if r.result_id not in consumed]

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "status": self.status.value,
            "steps": [r.to_dict() for r in self.records],
        }
        if not self.completed:
            data["failed_step"] = self.failed_step
            data["error"] = self.error
        return data


@dataclass(frozen=True)
class ScriptedBackend:
    """Replays stored plan documents from a directory"""

    plan_dir: Path

    @property
    def label(self) -> str:
        return f"scripted:{self.plan_dir}"


@dataclass(frozen=True)
class LlmBackend:
    """OpenAI-compatible chat-completions endpoint; the key is read from an env var"""

    base_url: str
    model: str
    api_key_env: str = AppSettings.LLM_API_KEY_ENV
    max_steps: int = AppSettings.MAX_STEPS
    temperature: float = AppSettings.LLM_TEMPERATURE

    @property
    def label(self) -> str:
        return f"llm:{self.base_url},{self.model}"


PlannerBackend = Union[ScriptedBackend, LlmBackend]


def parse_backend(text: str, settings: AppSettings = app_settings) -> PlannerBackend:
    """Parse ``scripted:<plan-dir>`` or ``llm:<base_url>,<model>``"""
    if not isinstance(text, str) or ":" not in text:
        raise InvalidArgumentError(f"backend must be scripted:<plan-dir> or llm:<base_url>,<model>, got {text!r}")
    kind, _, rest = text.partition(":")
    if kind == "scripted":
        if not rest:
            raise InvalidArgumentError("scripted backend needs a plan directory")
        return ScriptedBackend(Path(rest))
    if kind == "llm":
        base_url, sep, model = rest.rpartition(",")
        if not sep or not base_url or not model:
            raise InvalidArgumentError("llm backend needs <base_url>,<model>")
        return LlmBackend(
            base_url=base_url.rstrip("/"),
            model=model,
            api_key_env=settings.LLM_API_KEY_ENV,
            max_steps=settings.MAX_STEPS,
            temperature=settings.LLM_TEMPERATURE,
        )
    raise InvalidArgumentError(f"unknown backend kind '{kind}' (expected scripted or llm)")
