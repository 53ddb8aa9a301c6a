"""
Planners - turn a question into a validated Plan

ScriptedPlanner replays stored plan documents. LlmPlanner converses with an
OpenAI-compatible model one tool call round at a time; each proposed step is
validated, run, and answered with a schema-only summary of its result.
"""

import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional, TypedDict

from langgraph.graph import END, StateGraph

from config.settings import AppSettings, app_settings
from core.agent_engine import describe_catalog, run_step, validate_plan, validate_step
from core.catalog import Catalog
from core.errors import ParkLensError, PlanIncompleteError, PlanInvalidError
from core.llm_client import AssistantMessage, LlmClient
from models.api_models import LlmBackend, Plan, PlannerBackend, ScriptedBackend, Step
from models.data_structures import Modality
from modules.tools import ToolContext, ToolRegistry, tool_registry
from utils.file_utils import ConfigManager

logger = logging.getLogger(__name__)


def normalize_question(text: str) -> str:
    return " ".join(str(text).split())


class BasePlanner(ABC):
    def __init__(self, settings: AppSettings = app_settings, registry: ToolRegistry = tool_registry):
        self.settings = settings
        self.registry = registry

    @abstractmethod
    def plan(self, question: str, catalog: Catalog) -> Plan:
        """Produce a validated plan for the question"""

    def _checked(self, plan: Plan, catalog: Catalog) -> Plan:
        diagnostic = validate_plan(plan, catalog, self.registry, self.settings)
        if not diagnostic.success:
            raise PlanInvalidError(diagnostic.message, detail={"diagnostic": diagnostic.message})
        return plan


class ScriptedPlanner(BasePlanner):
    """Looks plans up by question text in a directory of plan documents"""

    def __init__(
        self, backend: ScriptedBackend, settings: AppSettings = app_settings, registry: ToolRegistry = tool_registry
    ):
        super().__init__(settings, registry)
        self.plan_dir = Path(backend.plan_dir)
        self._plans: Optional[Dict[str, Plan]] = None

    def _load(self) -> Dict[str, Plan]:
        if self._plans is not None:
            return self._plans
        if not self.plan_dir.is_dir():
            raise PlanInvalidError(f"plan directory {self.plan_dir} does not exist")
        plans: Dict[str, Plan] = {}
        for path in sorted(self.plan_dir.glob("*.json")):
            try:
                plan = Plan.from_dict(ConfigManager.load_json(path))
            except ValueError as e:
                raise PlanInvalidError(f"{path.name}: not valid JSON: {e}")
            except PlanInvalidError as e:
                raise PlanInvalidError(f"{path.name}: {e.message}")
            key = normalize_question(plan.question)
            if key in plans:
                raise PlanInvalidError(f"{path.name}: a plan for this question already exists")
            plans[key] = plan
        logger.debug("Loaded %d scripted plans from %s", len(plans), self.plan_dir)
        self._plans = plans
        return plans

    def plan(self, question: str, catalog: Catalog) -> Plan:
        stored = self._load().get(normalize_question(question))
        if stored is None:
            raise PlanInvalidError(f"no scripted plan for question: {question!r}")
        return self._checked(Plan(question=stored.question, steps=list(stored.steps)), catalog)


SYSTEM_PROMPT = """You answer questions about urban parks by calling analysis tools over a data catalog.

Rules:
- Call one or more tools per turn. Every call must set result_binding to a new local name.
- Element arguments take a dataset name, an earlier result_binding, or an element id from the catalog.
- After each call you receive a summary of the result's schema and size, never its values.
- Arrange the steps so the final results answer the question directly: a single-column table of names
  for lists of parks, a table of the requested fields for records, and land cover or count results for
  quantities.
- When the results answer the question, reply with a short plain-text description of the answer plan
  and make no further tool calls.

Catalog:
{catalog}"""


class PlanningState(TypedDict, total=False):
    messages: List[Dict[str, Any]]
    steps: List[Step]
    modalities: Dict[str, Modality]
    bindings: Dict[str, str]
    rounds: int
    reply: Optional[AssistantMessage]
    narrative: Optional[str]


class LlmPlanner(BasePlanner):
    """Tool-calling conversation with an LLM, bounded by max_steps rounds"""

    def __init__(
        self,
        backend: LlmBackend,
        settings: AppSettings = app_settings,
        registry: ToolRegistry = tool_registry,
        context: Optional[ToolContext] = None,
        client: Optional[LlmClient] = None,
    ):
        super().__init__(settings, registry)
        self.backend = backend
        self.context = context or ToolContext(settings=settings)
        self.client = client or LlmClient(backend, settings)
        self.catalog: Optional[Catalog] = None
        self.graph = self._build_graph()

    def _build_graph(self):
        workflow = StateGraph(PlanningState)
        workflow.add_node("call_model", self._call_model)
        workflow.add_node("run_tools", self._run_tools)
        workflow.set_entry_point("call_model")
        workflow.add_conditional_edges(
            "call_model", self._route_reply, {"tools": "run_tools", "done": END}
        )
        workflow.add_edge("run_tools", "call_model")
        return workflow.compile()

    def tool_definitions(self) -> List[Dict[str, Any]]:
        return [spec.function_schema() for spec in self.registry.specs()]

    def _call_model(self, state: PlanningState) -> Dict[str, Any]:
        rounds = state.get("rounds", 0)
        if rounds >= self.backend.max_steps:
            raise PlanIncompleteError(f"no final answer after {self.backend.max_steps} rounds")
        reply = self.client.complete(state["messages"], self.tool_definitions())
        update: Dict[str, Any] = {
            "messages": state["messages"] + [reply.to_message()],
            "rounds": rounds + 1,
            "reply": reply,
        }
        if reply.is_final:
            update["narrative"] = (reply.content or "").strip() or None
        return update

    @staticmethod
    def _route_reply(state: PlanningState) -> str:
        return "done" if state["reply"].is_final else "tools"

    def _run_tools(self, state: PlanningState) -> Dict[str, Any]:
        messages = list(state["messages"])
        steps = list(state.get("steps", []))
        modalities = dict(state.get("modalities", {}))
        bindings = dict(state.get("bindings", {}))

        for call in state["reply"].tool_calls:
            args = dict(call.arguments)
            binding = args.pop("result_binding", None)
            rationale = args.pop("rationale", "")
            try:
                step = Step.from_dict(
                    {"tool": call.name, "args": args, "result_binding": binding, "rationale": rationale},
                    len(steps) + 1,
                )
            except PlanInvalidError as e:
                raise PlanInvalidError(f"model proposed an invalid step: {e.message}")
            if step.result_binding in bindings:
                raise PlanInvalidError(f"step {len(steps) + 1}: binding '{step.result_binding}' is already used")
            diagnostic = validate_step(step, self.catalog, modalities, self.registry, settings=self.settings)
            if not diagnostic.success:
                raise PlanInvalidError(
                    f"step {len(steps) + 1}: {diagnostic.message}", detail={"diagnostic": diagnostic.message}
                )

            try:
                record = run_step(step, self.catalog, bindings, self.registry, self.context)
            except ParkLensError as e:
                # The model sees the failure and may try another step; this one is dropped.
                logger.info("Proposed step %s failed: %s", step.tool, e)
                content = f"error: {e.code}: {e.message}"
            else:
                steps.append(step)
                bindings[step.result_binding] = record.result_id
                modalities[step.result_binding] = self.registry.spec(step.tool).result_modality
                content = f"{step.result_binding} =\n{record.summary}"
            messages.append({"role": "tool", "tool_call_id": call.id, "content": content})

        return {"messages": messages, "steps": steps, "modalities": modalities, "bindings": bindings}

    def initial_messages(self, question: str, catalog: Catalog) -> List[Dict[str, Any]]:
        summary = describe_catalog(catalog, include_derived=False, settings=self.settings)
        return [
            {"role": "system", "content": SYSTEM_PROMPT.format(catalog=summary)},
            {"role": "user", "content": question},
        ]

    def plan(self, question: str, catalog: Catalog) -> Plan:
        """
        Raises:
            BackendError: transport or auth failure
            ProtocolError: malformed model output
            PlanInvalidError: a proposed step failed validation
            PlanIncompleteError: max_steps rounds without a final answer
        """
        self.catalog = catalog
        state = self.graph.invoke(
            {"messages": self.initial_messages(question, catalog), "rounds": 0},
            {"recursion_limit": 2 * self.backend.max_steps + 5},
        )
        plan = Plan(question=question, steps=state.get("steps", []), narrative=state.get("narrative"))
        logger.info("LLM planned %d step(s) in %d round(s)", len(plan.steps), state.get("rounds", 0))
        return self._checked(plan, catalog)


def create_planner(
    backend: PlannerBackend,
    settings: AppSettings = app_settings,
    registry: ToolRegistry = tool_registry,
    context: Optional[ToolContext] = None,
) -> BasePlanner:
    if isinstance(backend, ScriptedBackend):
        return ScriptedPlanner(backend, settings, registry)
    return LlmPlanner(backend, settings, registry, context)
