import json

import pytest

from core.agent_engine import execute_plan
from core.errors import BackendError, PlanIncompleteError, PlanInvalidError
from core.llm_client import AssistantMessage, ToolCall
from core.planner import LlmPlanner, ScriptedPlanner, create_planner, normalize_question
from models.api_models import LlmBackend, Plan, ScriptedBackend
from tests.conftest import PLAN_DIR
from utils.file_utils import ConfigManager


def stored(name):
    return Plan.from_dict(ConfigManager.load_json(PLAN_DIR / f"{name}.json"))


def all_plans():
    return sorted(PLAN_DIR.glob("*.json"), key=lambda p: int(p.stem[1:]))


class ReplayClient:
    """Hands out canned assistant replies in order"""

    def __init__(self, replies):
        self.replies = list(replies)
        self.sent = []

    def complete(self, messages, tools):
        self.sent.append(messages)
        return self.replies.pop(0)


def call(tool, binding, **args):
    return AssistantMessage(tool_calls=[ToolCall(f"call_{binding}", tool, dict(args, result_binding=binding))])


def test_normalize_question_collapses_whitespace():
    assert normalize_question("  Which parks\n are   there? ") == "Which parks are there?"


def test_scripted_planner_replays_every_stored_plan(catalog, settings):
    planner = ScriptedPlanner(ScriptedBackend(PLAN_DIR), settings)
    for path in all_plans():
        expected = stored(path.stem)
        assert planner.plan(expected.question, catalog) == expected


def test_scripted_lookup_ignores_whitespace(catalog, settings):
    planner = ScriptedPlanner(ScriptedBackend(PLAN_DIR), settings)
    question = stored("Q2").question
    assert planner.plan("  " + question.replace(" ", "\n ") + " ", catalog).steps == stored("Q2").steps


def test_scripted_planner_errors(tmp_path, catalog, settings):
    with pytest.raises(PlanInvalidError, match="does not exist"):
        ScriptedPlanner(ScriptedBackend(tmp_path / "missing"), settings).plan("q", catalog)

    with pytest.raises(PlanInvalidError, match="no scripted plan"):
        ScriptedPlanner(ScriptedBackend(PLAN_DIR), settings).plan("What is the tallest tree?", catalog)

    (tmp_path / "broken.json").write_text("{not json", encoding="utf-8")
    with pytest.raises(PlanInvalidError, match="broken.json"):
        ScriptedPlanner(ScriptedBackend(tmp_path), settings).plan("q", catalog)


def test_scripted_plans_must_be_unique_and_valid(tmp_path, catalog, settings):
    document = {"question": "q", "steps": [{"tool": "teleport", "args": {}, "result_binding": "x"}]}
    (tmp_path / "a.json").write_text(json.dumps(document), encoding="utf-8")
    with pytest.raises(PlanInvalidError, match="unknown tool 'teleport'"):
        ScriptedPlanner(ScriptedBackend(tmp_path), settings).plan("q", catalog)

    (tmp_path / "b.json").write_text(json.dumps(document), encoding="utf-8")
    with pytest.raises(PlanInvalidError, match="already exists"):
        ScriptedPlanner(ScriptedBackend(tmp_path), settings).plan("q", catalog)


def test_create_planner_picks_by_backend(settings):
    assert isinstance(create_planner(ScriptedBackend(PLAN_DIR), settings), ScriptedPlanner)
    assert isinstance(create_planner(LlmBackend("http://x/v1", "m"), settings), LlmPlanner)


@pytest.mark.parametrize("path", all_plans(), ids=lambda p: p.stem)
def test_llm_planner_against_mock_reproduces_stored_plans(catalog, llm_backend, settings, path):
    expected = stored(path.stem)
    plan = LlmPlanner(llm_backend, settings).plan(expected.question, catalog)
    assert plan == expected
    assert plan.narrative


def test_planning_prompt_lists_roots_only(catalog, settings):
    planner = LlmPlanner(LlmBackend("http://x/v1", "m"), settings, client=ReplayClient([]))
    execute_plan(stored("Q1"), catalog)
    system = planner.initial_messages("q", catalog)[0]["content"]
    assert "dataset 'parks'" in system
    assert "row_filter(" not in system


def test_failed_tool_call_is_reported_back_and_dropped(catalog, settings):
    client = ReplayClient(
        [
            call("column_select", "bad", table="parks", columns=["size"]),
            call("column_select", "names", table="parks", columns=["name"]),
            AssistantMessage(content="Listed the park names."),
        ]
    )
    planner = LlmPlanner(LlmBackend("http://x/v1", "m"), settings, client=client)
    plan = planner.plan("List every park", catalog)
    assert [s.result_binding for s in plan.steps] == ["names"]
    assert plan.narrative == "Listed the park names."
    tool_reply = client.sent[1][-1]
    assert tool_reply["role"] == "tool"
    assert tool_reply["content"].startswith("error: schema-error")
    assert client.sent[2][-1]["content"].startswith("names =\n")


def test_invalid_proposals_abort_planning(catalog, settings):
    client = ReplayClient([call("teleport", "x")])
    planner = LlmPlanner(LlmBackend("http://x/v1", "m"), settings, client=client)
    with pytest.raises(PlanInvalidError, match="unknown tool"):
        planner.plan("q", catalog)

    client = ReplayClient([call("column_select", "a", table="parks", columns=["name"]),
                           call("column_select", "a", table="parks", columns=["acres"])])
    planner = LlmPlanner(LlmBackend("http://x/v1", "m"), settings, client=client)
    with pytest.raises(PlanInvalidError, match="already used"):
        planner.plan("q", catalog)

    missing_binding = AssistantMessage(tool_calls=[ToolCall("c", "column_select", {"table": "parks"})])
    planner = LlmPlanner(LlmBackend("http://x/v1", "m"), settings, client=ReplayClient([missing_binding]))
    with pytest.raises(PlanInvalidError, match="missing result_binding"):
        planner.plan("q", catalog)


def test_planning_stops_after_max_steps(catalog, settings):
    replies = [call("column_select", f"s{i}", table="parks", columns=["name"]) for i in range(3)]
    planner = LlmPlanner(LlmBackend("http://x/v1", "m", max_steps=3), settings, client=ReplayClient(replies))
    with pytest.raises(PlanIncompleteError, match="after 3 rounds"):
        planner.plan("q", catalog)


def test_llm_planner_surfaces_backend_errors(catalog, mock_llm, monkeypatch, settings):
    monkeypatch.delenv(settings.LLM_API_KEY_ENV, raising=False)
    planner = LlmPlanner(LlmBackend(mock_llm.url, "m"), settings)
    with pytest.raises(BackendError, match="credential missing"):
        planner.plan(stored("Q1").question, catalog)
