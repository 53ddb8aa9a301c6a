"""
Shared fixtures: the bundled park dataset, an ingested workspace and planner backends
"""

import json
import sys
from pathlib import Path

import pytest

PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from config.settings import AppSettings  # noqa: E402
from core.catalog import Catalog  # noqa: E402
from core.ingest_manager import IngestManager  # noqa: E402
from models.api_models import LlmBackend, ScriptedBackend  # noqa: E402

DATA_DIR = PROJECT_ROOT / "data"
FIXTURES = DATA_DIR / "fixtures"
PLAN_DIR = DATA_DIR / "plans"
QUESTIONS = DATA_DIR / "questions.json"
MANIFEST = FIXTURES / "manifest.json"


@pytest.fixture(scope="session")
def oracle():
    return json.loads((FIXTURES / "oracle.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def questions_document():
    return json.loads(QUESTIONS.read_text(encoding="utf-8"))


@pytest.fixture
def settings(tmp_path):
    return AppSettings().override(DEFAULT_WORKSPACE=str(tmp_path / "workspace"))


@pytest.fixture
def empty_catalog(settings):
    return Catalog(settings.DEFAULT_WORKSPACE, settings)


@pytest.fixture
def ingested(settings):
    """(catalog, dataset name -> root id) for the bundled fixtures"""
    catalog = Catalog(settings.DEFAULT_WORKSPACE, settings)
    ids = IngestManager(catalog, settings).ingest_manifest(MANIFEST)
    return catalog, ids


@pytest.fixture
def catalog(ingested):
    return ingested[0]


@pytest.fixture
def scripted_backend():
    return ScriptedBackend(PLAN_DIR)


@pytest.fixture
def mock_llm():
    from utils.mock_llm_server import TranscriptServer

    with TranscriptServer(PLAN_DIR) as server:
        yield server


@pytest.fixture
def llm_backend(mock_llm, monkeypatch, settings):
    monkeypatch.setenv(settings.LLM_API_KEY_ENV, "test-key")
    return LlmBackend(base_url=mock_llm.url, model="mock-planner")
