"""Bounded feedback-and-revise loop for a low-scoring script."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

from .gateway import Gateway, GatewayError
from .reward import RewardReport
from .sandbox import ExecutionResult

log = logging.getLogger(__name__)

Evaluate = Callable[[str], "tuple[ExecutionResult, RewardReport]"]


@dataclass
class RefineConfig:
    max_retries: int = 3
    tau: float = 7.0
    enabled: bool = True

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if not 0 <= self.tau <= 10:
            raise ValueError("tau must be in [0, 10]")


@dataclass
class RefineOutcome:
    code: str
    report: RewardReport
    retries_used: int
    execution: Optional[ExecutionResult] = None
    history: list[float] = field(default_factory=list)

    @property
    def reward(self) -> float:
        return self.report.reward


def strip_code_fences(text: str) -> str:
    """Inner text of the first fenced block, or ``text`` unchanged when unfenced."""
    start = text.find("```")
    if start < 0:
        return text
    body_start = text.find("\n", start)
    if body_start < 0:
        return text
    end = text.find("```", body_start + 1)
    if end < 0:
        end = len(text)
    return text[body_start + 1 : end]


def refine_loop(
    code: str,
    report: RewardReport,
    problem_text: str,
    cfg: RefineConfig,
    gateway: Gateway,
    evaluate: Evaluate,
    execution: Optional[ExecutionResult] = None,
) -> RefineOutcome:
    """Revise ``code`` while its reward is below ``cfg.tau``; return the best script seen."""
    best = RefineOutcome(code, report, 0, execution, [report.reward])
    if not cfg.enabled:
        return best
    cur_code, cur_report, cur_exec = code, report, execution
    retries = 0
    while cur_report.reward < cfg.tau and retries < cfg.max_retries:
        sections = {
            "Problem": problem_text,
            "Code": cur_code,
            "Reward": f"{cur_report.reward:g}",
            "Stdout": (cur_exec.stdout if cur_exec else "") or "(empty)",
            "Stderr": (cur_exec.stderr if cur_exec else "") or "(empty)",
        }
        try:
            feedback = gateway.ask("feedback_writer", sections)
            revised = gateway.ask(
                "code_writer",
                {"Problem": problem_text, "Code": cur_code, "Feedback": feedback, "Attempt": retries + 1},
            )
        except GatewayError as exc:
            log.warning("refine stopped early: %s", exc)
            break
        retries += 1
        cur_code = strip_code_fences(revised)
        cur_exec, cur_report = evaluate(cur_code)
        best.history.append(cur_report.reward)
        if cur_report.reward > best.report.reward:
            best.code, best.report, best.execution = cur_code, cur_report, cur_exec
    best.retries_used = retries
    return best
