"""
Base Parser - abstract base class for payload parsers, one per modality
"""

from abc import ABC, abstractmethod
from typing import Any, Dict, Optional, Type

from core.errors import InvalidArgumentError
from models.data_structures import DataElement, Modality, ParseOptions


class BaseParser(ABC):
    """
    Abstract base class for payload parsers

    A parser turns stored bytes into a typed object for one modality and
    back. Every custom parser must inherit from this class.
    """

    modality: Modality
    handles: tuple = ()

    @abstractmethod
    def parse(self, payload: bytes, options: ParseOptions) -> Any:
        """
        Parse payload bytes

        Args:
            payload: Raw bytes as stored in the catalog
            options: Declared metadata (CRS, temporal extent, type hints)

        Returns:
            Typed object for this modality

        Raises:
            ParseError / UnsupportedFormatError with a diagnostic
        """

    @abstractmethod
    def serialize(self, obj: Any) -> bytes:
        """Canonical payload bytes for a typed object"""

    def load(self, element: DataElement, payload: bytes, options: ParseOptions) -> Any:
        """Rebuild the typed object for a stored element; schemas may carry parse hints"""
        return self.parse(payload, options)


class ParserRegistry:
    """
    Registry for managing payload parsers
    """

    def __init__(self):
        self.parsers: Dict[Modality, BaseParser] = {}

    def register(self, parser_class: Type[BaseParser]):
        """Register a parser class for its modality"""
        if not issubclass(parser_class, BaseParser):
            raise ValueError("Parser class must inherit from BaseParser")
        self.parsers[parser_class.modality] = parser_class()

    def get_parser(self, modality: Modality) -> BaseParser:
        parser = self.parsers.get(modality)
        if parser is None:
            raise InvalidArgumentError(f"no parser registered for {modality.value}")
        return parser

    def parse(self, modality: Modality, payload: bytes, options: Optional[ParseOptions] = None) -> Any:
        return self.get_parser(modality).parse(payload, options or ParseOptions())

    def load(self, element: DataElement, payload: bytes, options: Optional[ParseOptions] = None) -> Any:
        return self.get_parser(element.modality).load(element, payload, options or ParseOptions())

    def modality_of(self, obj: Any) -> Modality:
        for modality, parser in self.parsers.items():
            if isinstance(obj, parser.handles):
                return modality
        raise InvalidArgumentError(f"no parser handles {type(obj).__name__}")

    def serialize(self, obj: Any) -> bytes:
        return self.get_parser(self.modality_of(obj)).serialize(obj)


# Global parser registry
parser_registry = ParserRegistry()
