from __future__ import annotations

import sys
from pathlib import Path

import pytest

from mctsops.gateway import LlmResponse, approx_tokens, parse_sections
from mctsops.sandbox import CachedExecutor, SandboxConfig

FIXTURES = Path(__file__).resolve().parent / "fixtures"
sys.path.insert(0, str(FIXTURES))


@pytest.fixture
def fast_executor():
    """Generated scripts only need the stdlib, so site-packages can be skipped."""
    return CachedExecutor(SandboxConfig(interpreter_cmd=[sys.executable, "-I", "-S"], timeout_s=20))


class ScriptedBackend:
    """Answers each role from a list of canned replies (the last one repeats)."""

    name = "scripted"

    def __init__(self, replies: dict[str, list[str]]) -> None:
        self.replies = {k: list(v) for k, v in replies.items()}
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        queue = self.replies[request.role_tag]
        text = queue.pop(0) if len(queue) > 1 else queue[0]
        return LlmResponse(text, approx_tokens(request.user_text), approx_tokens(text), self.name)

    def calls(self, role: str) -> int:
        return sum(r.role_tag == role for r in self.requests)

    def sections(self, role: str) -> list[dict[str, str]]:
        return [parse_sections(r.user_text) for r in self.requests if r.role_tag == role]


@pytest.fixture
def scripted():
    return ScriptedBackend


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("] ")[1].split(".")[0])):
            terminalreporter.write_line(line)
