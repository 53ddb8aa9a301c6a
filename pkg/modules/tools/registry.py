"""
Tool registry - declared tool specs, argument normalization and lineage-recorded invocation
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

from config.settings import AppSettings, app_settings
from core.errors import InvalidArgumentError, ParkLensError
from models.api_models import ParamKind, ToolParam, ToolSpec
from models.data_structures import Crs, Modality, TimeInterval, parse_crs

logger = logging.getLogger(__name__)


@dataclass
class ToolContext:
    """Ambient inputs a tool may consult besides its arguments"""

    settings: AppSettings = app_settings
    analysis_crs: Optional[Crs] = None


@dataclass(frozen=True)
class RegisteredTool:
    spec: ToolSpec
    handler: Callable[..., Any]


def normalize_literal(param: ToolParam, value: Any) -> Any:
    """Canonical JSON form of a literal argument

    Raises:
        InvalidArgumentError: the value does not fit the parameter kind
    """
    kind = param.kind
    if kind == ParamKind.NUMBER:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidArgumentError(f"'{param.name}' must be a number, got {type(value).__name__}")
        return float(value)
    if kind == ParamKind.TEXT:
        if not isinstance(value, str) or not value:
            raise InvalidArgumentError(f"'{param.name}' must be non-empty text")
        if param.choices and value not in param.choices:
            raise InvalidArgumentError(f"'{param.name}' must be one of {', '.join(param.choices)}, got '{value}'")
        return value
    if kind == ParamKind.COLUMN_LIST:
        if not isinstance(value, list) or not value or not all(isinstance(v, str) and v for v in value):
            raise InvalidArgumentError(f"'{param.name}' must be a non-empty list of column names")
        return list(value)
    if kind == ParamKind.DATE_INTERVAL:
        return TimeInterval.from_dict(value).to_dict()
    if kind == ParamKind.CRS:
        return parse_crs(value).name
    if kind == ParamKind.PREDICATE:
        from modules.tools.predicates import parse_predicate

        return parse_predicate(value).to_dict()
    raise InvalidArgumentError(f"'{param.name}' is an element argument, not a literal")


def decode_literal(param: ToolParam, value: Any) -> Any:
    """Typed value handed to a tool handler"""
    if param.kind == ParamKind.DATE_INTERVAL:
        return TimeInterval.from_dict(value)
    if param.kind == ParamKind.CRS:
        return parse_crs(value)
    if param.kind == ParamKind.PREDICATE:
        from modules.tools.predicates import parse_predicate

        return parse_predicate(value)
    return value


class ToolRegistry:
    """
    Registry of analysis tools

    Tool modules register themselves at import time; the agent engine and
    the planner only ever see tools through this registry.
    """

    def __init__(self):
        self.tools: Dict[str, RegisteredTool] = {}

    def register(self, spec: ToolSpec, handler: Callable[..., Any]):
        if spec.name in self.tools:
            raise ValueError(f"tool '{spec.name}' is already registered")
        names = [p.name for p in spec.params]
        if len(set(names)) != len(names) or {"result_binding", "rationale"} & set(names):
            raise ValueError(f"tool '{spec.name}' declares clashing parameter names")
        self.tools[spec.name] = RegisteredTool(spec, handler)

    def get(self, name: str) -> Optional[RegisteredTool]:
        return self.tools.get(name)

    def spec(self, name: str) -> ToolSpec:
        entry = self.tools.get(name)
        if entry is None:
            raise InvalidArgumentError(f"unknown tool '{name}'; available tools: {', '.join(self.names())}")
        return entry.spec

    def names(self) -> List[str]:
        return sorted(self.tools)

    def specs(self) -> List[ToolSpec]:
        return [self.tools[name].spec for name in self.names()]

    # ------------------------------------------------------------------
    # invocation
    # ------------------------------------------------------------------

    def prepare(
        self, name: str, args: Dict[str, Any], settings: AppSettings = app_settings, context_crs: Optional[Crs] = None
    ) -> Tuple[Dict[str, Any], List[Tuple[str, Any]]]:
        """Split args into canonical params and element args, filling defaults

        Element args are returned in declared parameter order, which is the
        parent order of the derived element.

        Raises:
            InvalidArgumentError: unknown tool, unknown/missing argument, bad literal
        """
        spec = self.spec(name)
        unknown = sorted(set(args) - {p.name for p in spec.params})
        if unknown:
            raise InvalidArgumentError(f"{name}: unknown argument(s) {', '.join(unknown)}")
        params: Dict[str, Any] = {}
        elements: List[Tuple[str, Any]] = []
        for param in spec.params:
            value = args.get(param.name)
            if value is None:
                if param.kind == ParamKind.CRS and context_crs is not None:
                    value = context_crs.name
                elif param.default_setting:
                    value = getattr(settings, param.default_setting)
                elif param.default is not None:
                    value = param.default
                elif param.required:
                    raise InvalidArgumentError(f"{name}: missing required argument '{param.name}'")
                else:
                    continue
            if param.kind == ParamKind.ELEMENT_ID:
                elements.append((param.name, value))
            else:
                params[param.name] = normalize_literal(param, value)
        return params, elements

    def invoke(
        self,
        catalog,
        name: str,
        params: Dict[str, Any],
        element_ids: List[Tuple[str, str]],
        context: Optional[ToolContext] = None,
    ) -> str:
        """Run a tool on resolved element ids and record the result as a derived element

        Raises:
            ParkLensError: whatever the tool raises; nothing is recorded then
        """
        from modules.parsers import parser_registry

        entry = self.tools.get(name)
        if entry is None:
            raise InvalidArgumentError(f"unknown tool '{name}'")
        spec = entry.spec
        context = context or ToolContext()
        kwargs: Dict[str, Any] = {}
        for param_name, element_id in element_ids:
            param = spec.param(param_name)
            element = catalog.resolve(element_id)
            if param.modality is not None and element.modality != param.modality:
                raise InvalidArgumentError(
                    f"{name}: '{param_name}' expects {param.modality.value}, got {element.modality.value}"
                )
            kwargs[param_name] = catalog.load_object(element_id)
        for param_name, value in params.items():
            kwargs[param_name] = decode_literal(spec.param(param_name), value)

        result = entry.handler(context, **kwargs)
        modality = parser_registry.modality_of(result)
        if modality != spec.result_modality:
            raise ParkLensError(f"{name} produced {modality.value}, declared {spec.result_modality.value}")
        return catalog.derive(
            parents=[element_id for _, element_id in element_ids],
            op_name=name,
            params=params,
            payload=parser_registry.serialize(result),
            modality=modality,
            schema=result.schema(),
            crs=result.crs,
            temporal_extent=result.temporal_extent,
            stats=result.stats(),
        )


# Global tool registry
tool_registry = ToolRegistry()


def element(name: str, modality: Modality, description: str = "", required: bool = True) -> ToolParam:
    return ToolParam(name, ParamKind.ELEMENT_ID, required, description, modality=modality)


def literal(name: str, kind: ParamKind, description: str = "", required: bool = True, **extra: Any) -> ToolParam:
    return ToolParam(name, kind, required, description, **extra)
