import json

import pytest

from core.agent_engine import execute_plan
from core.catalog import Catalog
from core.errors import FusionError, InvalidArgumentError, LoadError
from core.ingest_manager import IngestManager
from core.report_builder import fuse, load_report, render
from models.api_models import Plan, Step
from models.report_models import ClaimKind
from tests.conftest import MANIFEST, PLAN_DIR
from utils.file_utils import ConfigManager


def stored(name):
    return Plan.from_dict(ConfigManager.load_json(PLAN_DIR / f"{name}.json"))


def report_for(catalog, name, narrative=None):
    plan = stored(name)
    plan.narrative = narrative
    return fuse(execute_plan(plan, catalog), catalog)


def test_name_set_claim_cites_the_terminal_result(ingested):
    catalog, ids = ingested
    report = report_for(catalog, "Q1")
    assert [c.kind for c in report.claims] == [ClaimKind.NAME_SET]
    claim = report.claims[0]
    assert claim.value == ["Cedar Commons", "Willow Green"]
    answer_id = report.trace.records[-1].result_id
    assert claim.evidence == [answer_id]
    chain = report.lineage[answer_id]
    assert chain[0] == {"id": ids["parks"], "modality": "TABULAR", "op": None, "source": "parks", "parents": []}
    assert [n["op"] for n in chain[1:]] == ["row_filter", "row_filter", "column_select"]


def test_mixed_results_become_claims_in_step_order(catalog):
    report = report_for(catalog, "Q5")
    assert [c.kind for c in report.claims] == [ClaimKind.COUNT, ClaimKind.FIELD_RECORD]
    counts = report.claims[0].value["counts"]
    assert counts == {"Willow Green": 2, "Harbor View Park": 3, "Cedar Commons": 0}
    assert [loc["fountain_id"] for loc in report.claims[0].value["locations"]["Harbor View Park"]] == [
        "F003",
        "F004",
        "F005",
    ]
    assert report.claims[1].value[1] == {
        "name": "Harbor View Park",
        "address": "Pier 4, Harbor Road",
        "borough": "Queens",
    }
    assert len(report.lineage) == 2


def test_land_cover_claims_are_keyed_by_label_and_class(catalog):
    report = report_for(catalog, "Q10")
    values = report.claims_of(ClaimKind.NUMERIC_MAP)[-1].value
    assert "Riverbend Park:Vegetation" in values
    assert sum(v for k, v in values.items() if k.startswith("Riverbend Park:")) == pytest.approx(0.0, abs=1e-12)


def test_narrative_is_appended_with_all_evidence(catalog):
    report = report_for(catalog, "Q5", narrative="Counted fountains, then listed parks.")
    narrative = report.claims[-1]
    assert narrative.kind == ClaimKind.NARRATIVE
    assert narrative.value == "Counted fountains, then listed parks."
    assert narrative.evidence == sorted({e for c in report.claims[:-1] for e in c.evidence})


def test_failed_trace_cannot_be_fused(catalog):
    plan = Plan(
        question="q",
        steps=[
            Step("column_select", {"table": "parks", "columns": ["name"]}, "names"),
            Step("column_select", {"table": "names", "columns": ["acres"]}, "broken"),
        ],
    )
    with pytest.raises(FusionError, match=r"step 2 \(column_select\) failed: schema-error") as info:
        fuse(execute_plan(plan, catalog), catalog)
    assert info.value.detail["failed_step"] == 2


def test_results_without_a_claim_form_are_not_reportable(catalog):
    plan = Plan(question="q", steps=[Step("rasterize", {"cloud": "site_2010", "reducer": "count"}, "grid")])
    with pytest.raises(FusionError, match="no reportable result"):
        fuse(execute_plan(plan, catalog), catalog)


def test_text_render(catalog, settings):
    report = report_for(catalog, "Q1")
    text = render(report, "text", settings).decode("utf-8")
    answer_id = report.claims[0].evidence[0]
    assert text.startswith(f"Question: {report.question}\n")
    assert f"1. name_set [evidence {answer_id[:settings.SHORT_ID_LENGTH]}]" in text
    assert "     Cedar Commons\n     Willow Green\n" in text
    assert "dataset 'parks'" in text
    assert answer_id not in text


def test_structured_render_round_trips(catalog):
    report = report_for(catalog, "Q5")
    data = render(report, "structured")
    again = load_report(data)
    assert again == report
    assert render(again, "structured") == data
    assert json.loads(data)["status"] == "completed"


def test_render_is_byte_identical_across_workspaces(tmp_path, settings):
    outputs = []
    for name in ("first", "second"):
        catalog = Catalog(tmp_path / name, settings)
        IngestManager(catalog, settings).ingest_manifest(MANIFEST)
        report = report_for(catalog, "Q7")
        outputs.append((render(report, "text", settings), render(report, "structured", settings)))
    assert outputs[0] == outputs[1]


def test_render_and_load_errors(catalog):
    report = report_for(catalog, "Q1")
    with pytest.raises(InvalidArgumentError, match="unknown report format"):
        render(report, "html")
    with pytest.raises(LoadError):
        load_report(b"Question: which parks?")
    with pytest.raises(LoadError):
        load_report("{}")
