"""
Mock OpenAI-compatible chat-completions server replaying scripted plans

The question is the first user message. The reply in each round is the
next plan step as a tool call, where the round is the number of tool
messages seen so far; once all steps are answered the reply is plain text.

Run standalone with ``python -m utils.mock_llm_server <plan-dir> [--port N]``.
"""

import argparse
import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from utils.file_utils import ConfigManager

logger = logging.getLogger(__name__)

MALFORMED_ARGUMENTS = '{"table": "parks", '


def _normalize(text: str) -> str:
    return " ".join(str(text).split())


def load_transcripts(plan_dir: Union[str, Path]) -> Dict[str, Dict[str, Any]]:
    """Plan documents keyed by normalized question text"""
    plans = {}
    for path in sorted(Path(plan_dir).glob("*.json")):
        document = ConfigManager.load_json(path)
        plans[_normalize(document["question"])] = document
    return plans


class TranscriptServer:
    """
    Threaded HTTP server answering ``POST .../chat/completions``

    ``fail_times`` forces that many HTTP 500 replies first; ``malformed``
    returns tool calls whose arguments are not JSON. Every request body is
    kept in ``requests`` for inspection.
    """

    def __init__(
        self,
        plan_dir: Union[str, Path],
        host: str = "127.0.0.1",
        port: int = 0,
        fail_times: int = 0,
        malformed: bool = False,
        require_auth: bool = True,
    ):
        self.plans = load_transcripts(plan_dir)
        self.fail_times = fail_times
        self.malformed = malformed
        self.require_auth = require_auth
        self.requests: List[Dict[str, Any]] = []
        self.attempts = 0
        self._lock = threading.Lock()
        self._thread: Optional[threading.Thread] = None
        self.httpd = ThreadingHTTPServer((host, port), self._handler_class())
        self.httpd.daemon_threads = True

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}/v1"

    def _handler_class(self):
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, format: str, *args: Any) -> None:
                logger.debug("mock llm: " + format, *args)

            def _send(self, status: int, body: Dict[str, Any]) -> None:
                data = json.dumps(body).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                if status >= 500:
                    # openai clients wait this long before retrying
                    self.send_header("retry-after-ms", "1")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_POST(self) -> None:
                if not self.path.rstrip("/").endswith("/chat/completions"):
                    self._send(404, {"error": {"message": f"no route {self.path}"}})
                    return
                length = int(self.headers.get("Content-Length") or 0)
                try:
                    body = json.loads(self.rfile.read(length) or b"{}")
                except json.JSONDecodeError:
                    self._send(400, {"error": {"message": "request body is not JSON"}})
                    return
                status, reply = server.respond(body, self.headers.get("Authorization"))
                self._send(status, reply)

        return Handler

    def respond(self, body: Dict[str, Any], authorization: Optional[str]) -> Tuple[int, Dict[str, Any]]:
        with self._lock:
            self.attempts += 1
            if self.require_auth and not (authorization or "").startswith("Bearer "):
                return 401, {"error": {"message": "missing bearer token"}}
            if self.fail_times > 0:
                self.fail_times -= 1
                return 500, {"error": {"message": "forced failure"}}
            self.requests.append(body)

        messages = body.get("messages") or []
        question = next((m.get("content", "") for m in messages if m.get("role") == "user"), "")
        plan = self.plans.get(_normalize(question))
        round_number = sum(1 for m in messages if m.get("role") == "tool")
        model = body.get("model", "mock")

        if plan is None:
            return 200, self._completion(model, {"role": "assistant", "content": "No stored transcript matches."})
        steps = plan.get("steps", [])
        if round_number >= len(steps):
            text = f"Answered in {len(steps)} step(s): " + ", ".join(s["result_binding"] for s in steps) + "."
            return 200, self._completion(model, {"role": "assistant", "content": text})

        step = steps[round_number]
        arguments = dict(step.get("args", {}))
        arguments["result_binding"] = step["result_binding"]
        if step.get("rationale"):
            arguments["rationale"] = step["rationale"]
        encoded = MALFORMED_ARGUMENTS if self.malformed else json.dumps(arguments, ensure_ascii=False)
        message = {
            "role": "assistant",
            "content": None,
            "tool_calls": [
                {
                    "id": f"call_{round_number + 1}",
                    "type": "function",
                    "function": {"name": step["tool"], "arguments": encoded},
                }
            ],
        }
        return 200, self._completion(model, message, "tool_calls")

    @staticmethod
    def _completion(model: str, message: Dict[str, Any], finish_reason: str = "stop") -> Dict[str, Any]:
        return {
            "id": "chatcmpl-mock",
            "object": "chat.completion",
            "created": 0,
            "model": model,
            "choices": [{"index": 0, "message": message, "finish_reason": finish_reason, "logprobs": None}],
            "usage": {"prompt_tokens": 0, "completion_tokens": 0, "total_tokens": 0},
        }

    def start(self) -> "TranscriptServer":
        self._thread = threading.Thread(target=self.httpd.serve_forever, name="mock-llm", daemon=True)
        self._thread.start()
        logger.info("Mock LLM server listening on %s", self.url)
        return self

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "TranscriptServer":
        return self.start()

    def __exit__(self, *exc_info: Any) -> None:
        self.stop()


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="mock_llm_server", description=__doc__.splitlines()[1])
    parser.add_argument("plan_dir", help="directory of scripted plan documents")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--fail-times", type=int, default=0, help="answer the first N requests with HTTP 500")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO)
    server = TranscriptServer(args.plan_dir, args.host, args.port, fail_times=args.fail_times)
    logger.info("Serving %d transcript(s) at %s", len(server.plans), server.url)
    try:
        server.httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.httpd.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
