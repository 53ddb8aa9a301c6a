"""
Payload parsers, one per modality, registered in ``parser_registry`` on import
"""

from modules.parsers.base_parser import BaseParser, ParserRegistry, parser_registry
from modules.parsers import csv_parser, geojson_parser, las_parser, result_codecs  # noqa: F401

__all__ = ["BaseParser", "ParserRegistry", "parser_registry"]
