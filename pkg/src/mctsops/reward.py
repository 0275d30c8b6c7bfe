"""Scalar rewards for executed scripts.

Every reward lies in {-1} U [0, 10]; -1 is reserved for scripts that did not
run to completion.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

from .benchgen import GroundTruth, ProblemSpec, assess, solve_ground_truth
from .gateway import ParseFailure, parse_bounded_number

if TYPE_CHECKING:
    from .gateway import Gateway
    from .sandbox import ExecutionResult

FAILURE_REWARD = -1.0
OPTIMALITY_TOL = 0.01
GAP_FOR_FLOOR = 0.5


class OracleUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class RewardReport:
    reward: float
    executed_ok: bool
    feasible: Optional[bool] = None
    objective_value: Optional[float] = None
    optimal: Optional[bool] = None
    rationale: str = ""

    def __post_init__(self) -> None:
        if not (self.reward == FAILURE_REWARD or 0 <= self.reward <= 10):
            raise ValueError(f"reward {self.reward} outside {{-1}} U [0, 10]")
        if not self.executed_ok and self.reward != FAILURE_REWARD:
            raise ValueError("non-executed script must score -1")
        if self.optimal and not self.feasible:
            raise ValueError("optimal requires feasible")


def failure_report(reason: str) -> RewardReport:
    return RewardReport(FAILURE_REWARD, False, rationale=reason)


def llm_reward(result: ExecutionResult, problem_text: str, gateway: Gateway) -> RewardReport:
    if result.status != "ok":
        return failure_report(f"execution {result.status}")
    sections = {"Problem": problem_text, "Stdout": result.stdout or "(empty)", "Stderr": result.stderr or "(empty)"}
    text = ""
    for _ in range(2):
        text = gateway.ask("evaluator", sections)
        try:
            score = parse_bounded_number(text, 0, 10, integer=True)
        except ParseFailure:
            continue
        return RewardReport(float(score), True, rationale=text)
    return RewardReport(0.0, True, rationale=text)


# ------------------------------------------------------------------ oracle

_POWERS_LINE = re.compile(r"powers\s*=\s*\[([^\]]*)\]")
_LITERAL = re.compile(r"(?<![\w.])[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


def parse_powers(stdout: str, n_users: int) -> Optional[list[float]]:
    """Per-user powers from the last ``powers=[...]`` line, else the last n literals."""
    lines = _POWERS_LINE.findall(stdout)
    if lines:
        values = [float(v) for v in _LITERAL.findall(lines[-1])]
        return values if len(values) == n_users else None
    values = _LITERAL.findall(stdout)
    if len(values) < n_users:
        return None
    return [float(v) for v in values[-n_users:]]


def _round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def score_powers(spec: ProblemSpec, truth: GroundTruth, powers: Optional[list[float]]) -> RewardReport:
    """Grade a parsed allocation of an executed script against the exact optimum."""
    if powers is None:
        return RewardReport(0.0, True, rationale="could not parse per-user powers from stdout")
    verdict = assess(spec, powers)
    if not verdict.feasible:
        return RewardReport(0.0, True, False, verdict.objective, False,
                            rationale=f"infeasible: {verdict.violations}")
    gap = (verdict.objective - truth.objective) / max(truth.objective, 0.01)
    reward = _round_half_away(5 + 5 * max(0.0, 1 - gap / GAP_FOR_FLOOR))
    optimal = gap <= OPTIMALITY_TOL
    return RewardReport(float(min(reward, 10)), True, True, verdict.objective, optimal,
                        rationale=f"feasible, objective {verdict.objective:.6g} W, relative gap {gap:.4g}")


def oracle_reward(result: ExecutionResult, spec: ProblemSpec, truth: Optional[GroundTruth] = None) -> RewardReport:
    truth = truth or solve_ground_truth(spec)
    if not truth.feasible:
        raise OracleUnavailable(f"{spec.id} has no ground-truth solution")
    if result.status != "ok":
        return failure_report(f"execution {result.status}")
    return score_powers(spec, truth, parse_powers(result.stdout, spec.n_users))


class OracleGrader:
    def __init__(self, spec: ProblemSpec) -> None:
        self.spec = spec
        self.truth = solve_ground_truth(spec)
        if not self.truth.feasible:
            raise OracleUnavailable(f"{spec.id} has no ground-truth solution")

    def __call__(self, result: ExecutionResult) -> RewardReport:
        return oracle_reward(result, self.spec, self.truth)


class LlmGrader:
    """Evaluator-model grading; also fills the optimality verdict when a spec is known."""

    def __init__(self, problem_text: str, gateway: Gateway, spec: Optional[ProblemSpec] = None) -> None:
        self.problem_text = problem_text
        self.gateway = gateway
        self.spec = spec
        self.truth = solve_ground_truth(spec) if spec is not None else None

    def __call__(self, result: ExecutionResult) -> RewardReport:
        report = llm_reward(result, self.problem_text, self.gateway)
        if not report.executed_ok or self.spec is None or not self.truth.feasible:
            return report
        graded = score_powers(self.spec, self.truth, parse_powers(result.stdout, self.spec.n_users))
        return RewardReport(report.reward, True, graded.feasible, graded.objective_value, graded.optimal,
                            report.rationale)
