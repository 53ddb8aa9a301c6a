"""
ParkLens - Main Entry Point

Answers questions about urban parks over tabular, vector and LiDAR data
with a planning agent, and reports every claim with its lineage.

Usage:
    python main.py ingest data/fixtures/manifest.json
    python main.py ask "Which parks are located in Brooklyn?"
    python main.py eval run data/questions.json
"""

import logging
import sys
from pathlib import Path

from dotenv import load_dotenv

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

# PARKLENS_* settings and the LLM API key may come from a .env file
load_dotenv(project_root / ".env")

from config.settings import app_settings  # noqa: E402
from ui.cli import run_cli  # noqa: E402


def setup_logging():
    """Diagnostics go to stderr so stdout carries only results"""
    logging.basicConfig(
        level=getattr(logging, str(app_settings.LOG_LEVEL).upper(), logging.INFO),
        format=app_settings.LOG_FORMAT,
        stream=sys.stderr,
    )


def main():
    setup_logging()
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
