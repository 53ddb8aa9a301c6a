"""
Command-line surface

Results go to stdout, diagnostics to stderr. Exit status: 0 success,
1 user error (or any ✗ in an evaluation), 2 infrastructure error.
"""

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, TextIO

from config.settings import AppSettings, app_settings
from core.agent_engine import AgentEngine, describe_catalog, describe_element
from core.catalog import Catalog
from core.errors import ERRORS_BY_CODE, ParkLensError
from core.evaluation import load_questions, run_eval
from core.ingest_manager import IngestManager
from models.api_models import PlannerBackend, parse_backend
from models.data_structures import Crs, parse_crs
from modules.tools import tool_registry

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USER = 1
EXIT_INFRASTRUCTURE = 2
FORMATS = ("text", "structured")


class UsageError(Exception):
    """Bad command line; argparse has already printed the usage text"""


class CliArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit status 1 instead of 2"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


@dataclass
class CliConfig:
    workspace: Path
    backend: PlannerBackend
    analysis_crs: Optional[Crs]
    format: str
    settings: AppSettings

    @classmethod
    def from_args(cls, args: argparse.Namespace, settings: AppSettings) -> "CliConfig":
        settings = settings.override(
            DEFAULT_WORKSPACE=args.workspace,
            DEFAULT_CELL_SIZE=args.cell_size,
            EVAL_WORKERS=getattr(args, "workers", None),
        )
        return cls(
            workspace=Path(settings.DEFAULT_WORKSPACE),
            backend=parse_backend(args.backend or settings.DEFAULT_BACKEND, settings),
            analysis_crs=parse_crs(args.crs) if args.crs else None,
            format=args.format,
            settings=settings,
        )

    def catalog(self) -> Catalog:
        return Catalog(self.workspace, self.settings)


def build_parser() -> CliArgumentParser:
    common = CliArgumentParser(add_help=False)
    common.add_argument("--workspace", help="workspace directory (default: %(default)s from settings)")
    common.add_argument("--backend", help="scripted:<plan-dir> or llm:<base_url>,<model>")
    common.add_argument("--format", choices=FORMATS, default="text", help="output format")
    common.add_argument("--crs", help="analysis CRS override, e.g. utm:18N")
    common.add_argument("--cell-size", type=float, help="default rasterization cell size in meters")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = CliArgumentParser(prog="parklens", description="Multi-modal urban park analysis agent")
    commands = parser.add_subparsers(dest="command", metavar="command", parser_class=CliArgumentParser)
    commands.required = True

    ingest = commands.add_parser("ingest", parents=[common], help="register the datasets of a data manifest")
    ingest.add_argument("manifest")

    catalog = commands.add_parser("catalog", help="inspect the catalog")
    catalog_commands = catalog.add_subparsers(dest="action", metavar="action", parser_class=CliArgumentParser)
    catalog_commands.required = True
    ls = catalog_commands.add_parser("ls", parents=[common], help="list elements")
    ls.add_argument("--full-ids", action="store_true", help="print full 64-hex ids")

    lineage = commands.add_parser("lineage", help="inspect lineage")
    lineage_commands = lineage.add_subparsers(dest="action", metavar="action", parser_class=CliArgumentParser)
    lineage_commands.required = True
    show = lineage_commands.add_parser("show", parents=[common], help="print the lineage of an element")
    show.add_argument("id", help="element id, unique id prefix or dataset name")
    export = lineage_commands.add_parser("export", parents=[common], help="print the lineage graph document")
    export.add_argument("ids", nargs="*", help="restrict to the lineage of these elements")

    ask = commands.add_parser("ask", parents=[common], help="answer a question")
    ask.add_argument("question")

    evaluation = commands.add_parser("eval", help="evaluation harness")
    eval_commands = evaluation.add_subparsers(dest="action", metavar="action", parser_class=CliArgumentParser)
    eval_commands.required = True
    run = eval_commands.add_parser("run", parents=[common], help="grade the agent on a questions file")
    run.add_argument("questions")
    run.add_argument("--workers", type=int, help="questions evaluated in parallel")
    run.add_argument("--manifest", help="ingest this data manifest first")

    tools = commands.add_parser("tools", help="inspect the tool registry")
    tools_commands = tools.add_subparsers(dest="action", metavar="action", parser_class=CliArgumentParser)
    tools_commands.required = True
    tools_commands.add_parser("ls", parents=[common], help="list registered tools")
    return parser


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _ingest(config: CliConfig, args: argparse.Namespace, out: TextIO) -> int:
    result = IngestManager(config.catalog(), config.settings).try_ingest(args.manifest)
    if not result.success:
        error = ERRORS_BY_CODE.get(result.error_code, ParkLensError)(result.message)
        raise error
    short = config.settings.SHORT_ID_LENGTH
    for name, element_id in result.data.items():
        out.write(f"{element_id[:short]}  {name}\n")
    return EXIT_OK


def _catalog_ls(config: CliConfig, args: argparse.Namespace, out: TextIO) -> int:
    out.write(describe_catalog(config.catalog(), full_ids=args.full_ids, settings=config.settings).rstrip("\n") + "\n")
    return EXIT_OK


def _lineage_show(config: CliConfig, args: argparse.Namespace, out: TextIO) -> int:
    catalog = config.catalog()
    element = catalog.find(args.id)
    for ancestor in catalog.lineage_of(element.id):
        out.write(describe_element(ancestor, full_ids=True, settings=config.settings) + "\n")
    return EXIT_OK


def _lineage_export(config: CliConfig, args: argparse.Namespace, out: TextIO) -> int:
    catalog = config.catalog()
    ids = [catalog.find(reference).id for reference in args.ids]
    out.write(catalog.export_lineage(ids or None))
    return EXIT_OK


def _ask(config: CliConfig, args: argparse.Namespace, out: TextIO) -> int:
    if not args.question.strip():
        raise UsageError("ask needs a question")
    engine = AgentEngine(config.catalog(), config.backend, config.settings, analysis_crs=config.analysis_crs)
    outcome = engine.ask(args.question, format=config.format)
    out.write(outcome.rendered.decode("utf-8"))
    return EXIT_OK


def _eval_run(config: CliConfig, args: argparse.Namespace, out: TextIO) -> int:
    questions = load_questions(args.questions)
    catalog = config.catalog()
    if args.manifest:
        IngestManager(catalog, config.settings).ingest_manifest(args.manifest)
    table = run_eval(
        questions, config.backend, catalog, config.settings, config.settings.EVAL_WORKERS, config.analysis_crs
    )
    out.write(table.render(config.format))
    return EXIT_OK if table.all_passed else EXIT_USER


def _tools_ls(config: CliConfig, args: argparse.Namespace, out: TextIO) -> int:
    for spec in tool_registry.specs():
        params = ", ".join(
            f"{p.name}{'' if p.required else '?'}: {p.modality.value if p.modality else p.kind.value}"
            for p in spec.params
        )
        out.write(f"{spec.name}({params}) -> {spec.result_modality.value}\n    {spec.description}\n")
    return EXIT_OK


COMMANDS = {
    ("ingest", None): _ingest,
    ("catalog", "ls"): _catalog_ls,
    ("lineage", "show"): _lineage_show,
    ("lineage", "export"): _lineage_export,
    ("ask", None): _ask,
    ("eval", "run"): _eval_run,
    ("tools", "ls"): _tools_ls,
}


def run_cli(
    argv: Optional[List[str]] = None,
    stdout: Optional[TextIO] = None,
    stderr: Optional[TextIO] = None,
    settings: AppSettings = app_settings,
) -> int:
    """Run one command and return its exit status"""
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_USER
    except SystemExit as e:  # --help
        return int(e.code or 0)

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    handler = COMMANDS[(args.command, getattr(args, "action", None))]
    try:
        config = CliConfig.from_args(args, settings)
        return handler(config, args, out)
    except UsageError as e:
        parser.print_usage(err)
        err.write(f"parklens: error: {e}\n")
        return EXIT_USER
    except ParkLensError as e:
        err.write(f"parklens: {e}\n")
        return EXIT_INFRASTRUCTURE if e.infrastructure else EXIT_USER
    except OSError as e:
        err.write(f"parklens: {e}\n")
        return EXIT_INFRASTRUCTURE
