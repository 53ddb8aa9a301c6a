"""
Analysis tools, registered in ``tool_registry`` on import
"""

from modules.tools.registry import ToolContext, ToolRegistry, tool_registry
from modules.tools import geospatial, tabular  # noqa: F401

__all__ = ["ToolContext", "ToolRegistry", "tool_registry"]
