"""A local chat-completion endpoint that answers from golden reply files."""

from __future__ import annotations

import json
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable, Iterator

GOLDENS = Path(__file__).parent / "fixtures" / "goldens"

# prompt fragment -> golden reply file
ROUTES = (
    ("Give me five different abstract plans", "object_plans.txt"),
    ("generate detailed plans according to each abstract plan", "skill_plans.txt"),
    ("evaluate the reward of each step", "evaluation.txt"),
    ("calculate the 3D coordinates", "param.txt"),
    ("Replanning criteria", "advisor_yes.txt"),
)


def golden_reply(prompt: str, overrides: dict[str, str] | None = None) -> str:
    for fragment, name in ROUTES:
        if fragment in prompt:
            name = (overrides or {}).get(name, name)
            return (GOLDENS / name).read_text()
    return "I cannot help with that."


class Stub:
    """Counts requests; the first ``fail_first`` answers use ``fail_status``."""

    def __init__(self, fail_first: int = 0, fail_status: int = 429, overrides: dict[str, str] | None = None):
        self.fail_first = fail_first
        self.fail_status = fail_status
        self.overrides = overrides or {}
        self.requests: list[dict] = []
        self.url = ""

    def answer(self, body: dict) -> tuple[int, dict]:
        self.requests.append(body)
        if len(self.requests) <= self.fail_first:
            return self.fail_status, {"error": {"message": "slow down"}}
        prompt = body["messages"][-1]["content"]
        content = golden_reply(prompt, self.overrides)
        return 200, {"choices": [{"message": {"role": "assistant", "content": content}}]}


def _handler(stub: Stub) -> type[BaseHTTPRequestHandler]:
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self) -> None:  # noqa: N802
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length))
            if self.headers.get("Authorization", "") != "Bearer test-key":
                code, payload = 401, {"error": {"message": "bad key"}}
            else:
                code, payload = stub.answer(body)
            data = json.dumps(payload).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args) -> None:
            pass

    return Handler


@contextmanager
def serve(stub: Stub) -> Iterator[Stub]:
    server = ThreadingHTTPServer(("127.0.0.1", 0), _handler(stub))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    stub.url = f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions"
    try:
        yield stub
    finally:
        server.shutdown()
        server.server_close()
