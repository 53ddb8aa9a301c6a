"""
LLM client - one tool-calling chat round trip per call through langchain's ChatOpenAI

Any OpenAI-compatible endpoint works; the conversation is kept as plain
chat-completions message dicts and converted at this boundary.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional

import openai
from langchain_core.messages import AIMessage, BaseMessage, HumanMessage, SystemMessage, ToolMessage
from langchain_openai import ChatOpenAI

from config.settings import AppSettings, app_settings
from core.errors import BackendError, ProtocolError
from models.api_models import LlmBackend

logger = logging.getLogger(__name__)


@dataclass
class ToolCall:
    id: str
    name: str
    arguments: Dict[str, Any]

    def to_message(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "type": "function",
            "function": {"name": self.name, "arguments": json.dumps(self.arguments, ensure_ascii=False)},
        }


@dataclass
class AssistantMessage:
    """Parsed assistant turn: text, tool calls, or both"""

    content: Optional[str] = None
    tool_calls: List[ToolCall] = field(default_factory=list)

    @property
    def is_final(self) -> bool:
        return not self.tool_calls

    def to_message(self) -> Dict[str, Any]:
        message: Dict[str, Any] = {"role": "assistant", "content": self.content}
        if self.tool_calls:
            message["tool_calls"] = [call.to_message() for call in self.tool_calls]
        return message


def to_langchain_messages(messages: List[Dict[str, Any]]) -> List[BaseMessage]:
    """Chat-completions message dicts as langchain messages"""
    converted: List[BaseMessage] = []
    for message in messages:
        role, content = message.get("role"), message.get("content") or ""
        if role == "system":
            converted.append(SystemMessage(content=content))
        elif role == "user":
            converted.append(HumanMessage(content=content))
        elif role == "assistant":
            calls = [
                {"id": raw["id"], "name": raw["function"]["name"], "args": json.loads(raw["function"]["arguments"])}
                for raw in message.get("tool_calls") or []
            ]
            converted.append(AIMessage(content=content, tool_calls=calls))
        elif role == "tool":
            converted.append(ToolMessage(content=content, tool_call_id=message["tool_call_id"]))
        else:
            raise ValueError(f"unknown message role {role!r}")
    return converted


def from_ai_message(reply: Any) -> AssistantMessage:
    """Planner view of the model's reply

    Raises:
        ProtocolError: unparseable tool arguments, non-text content or an empty reply
    """
    if not isinstance(reply, AIMessage):
        raise ProtocolError(f"model returned {type(reply).__name__}, not an assistant message")
    for invalid in reply.invalid_tool_calls:
        raise ProtocolError(f"tool call {invalid.get('name')} has malformed arguments: {invalid.get('error')}")
    content = reply.content
    if not isinstance(content, str):
        raise ProtocolError("assistant content must be text")

    calls: List[ToolCall] = []
    for position, raw in enumerate(reply.tool_calls):
        if not isinstance(raw.get("args"), dict):
            raise ProtocolError(f"tool call {position} ({raw.get('name')}) arguments must be an object")
        calls.append(ToolCall(raw.get("id") or f"call_{position}", raw["name"], dict(raw["args"])))

    if not calls and not content:
        raise ProtocolError("assistant message has neither text nor tool calls")
    return AssistantMessage(content=content or None, tool_calls=calls)


class LlmClient:
    """
    Tool-calling chat client for a configured LLM backend

    The credential is read from the environment variable the backend names,
    never from configuration files. ChatOpenAI retries transport failures
    and 5xx responses LLM_RETRIES times; 4xx responses fail immediately.
    """

    def __init__(
        self,
        backend: LlmBackend,
        settings: AppSettings = app_settings,
        environ: Optional[Mapping[str, str]] = None,
    ):
        self.backend = backend
        self.settings = settings
        self.environ = os.environ if environ is None else environ

    @property
    def endpoint(self) -> str:
        return f"{self.backend.base_url.rstrip('/')}/chat/completions"

    @property
    def attempts(self) -> int:
        return self.settings.LLM_RETRIES + 1

    def _api_key(self) -> str:
        key = self.environ.get(self.backend.api_key_env)
        if not key:
            raise BackendError(f"credential missing: set the {self.backend.api_key_env} environment variable")
        return key

    def chat_model(self, tools: List[Dict[str, Any]]):
        model = ChatOpenAI(
            base_url=self.backend.base_url,
            api_key=self._api_key(),
            model=self.backend.model,
            temperature=self.backend.temperature,
            max_retries=self.settings.LLM_RETRIES,
            timeout=self.settings.LLM_TIMEOUT,
        )
        return model.bind_tools(tools, tool_choice="auto") if tools else model

    def complete(self, messages: List[Dict[str, Any]], tools: List[Dict[str, Any]]) -> AssistantMessage:
        """
        Send one chat-completions request

        Raises:
            BackendError: missing credential, non-2xx status or transport failure after retries
            ProtocolError: malformed response payload
        """
        model = self.chat_model(tools)
        try:
            reply = model.invoke(to_langchain_messages(messages))
        except openai.APIStatusError as e:
            status = e.status_code
            if status >= 500:
                text = f"HTTP {status} from {self.endpoint} after {self.attempts} attempts"
            else:
                text = f"HTTP {status} from {self.endpoint}: {str(e.message)[:200]}"
            raise BackendError(text, detail={"status": status})
        except openai.APIConnectionError as e:
            raise BackendError(
                f"transport error ({e.__class__.__name__}) from {self.endpoint} after {self.attempts} attempts"
            )
        except (openai.APIError, AttributeError, KeyError, TypeError, ValueError) as e:
            raise ProtocolError(f"response from {self.endpoint} is not a chat completion: {e}")
        message = from_ai_message(reply)
        logger.debug("LLM replied with %d tool call(s)", len(message.tool_calls))
        return message
