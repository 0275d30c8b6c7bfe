"""Trial runners: the search method, its ablations and the comparison pipelines.

Every method goes through the same executor and grader, so records differ
only in how the script was produced.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

from .benchgen import ProblemSpec
from .gateway import Backend, Gateway, GatewayError
from .pipeline import Executor, Grader, Pipeline
from .refine import RefineConfig, refine_loop, strip_code_fences
from .reward import LlmGrader, OracleGrader, RewardReport, failure_report
from .sandbox import SandboxConfig, execute
from .tree import SearchConfig

log = logging.getLogger(__name__)

METHODS = ("mcts_ops", "one_shot", "cot", "self_refine", "no_mcts", "no_refine")
COT_MODE = "Reasoning steps: list the logical steps needed before writing any code."


@dataclass
class TrialRecord:
    method: str
    problem_id: str
    difficulty: str
    executed_ok: bool
    reward: float
    optimal: bool
    prompt_tokens: int
    completion_tokens: int
    wall_time_s: float
    code: str = ""
    retries: int = 0

    def __post_init__(self) -> None:
        if not (self.reward == -1 or 0 <= self.reward <= 10):
            raise ValueError(f"reward {self.reward} outside {{-1}} U [0, 10]")
        if not self.executed_ok and self.reward != -1:
            raise ValueError("a script that did not run must score -1")
        if self.optimal and not self.executed_ok:
            raise ValueError("optimal requires executed_ok")

    @property
    def tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self) -> dict:
        return asdict(self)


def _record(method: str, spec: ProblemSpec, gateway: Gateway, start: float, code: str,
            report: RewardReport, retries: int = 0) -> TrialRecord:
    return TrialRecord(
        method=method,
        problem_id=spec.id,
        difficulty=spec.difficulty,
        executed_ok=report.executed_ok,
        reward=report.reward,
        optimal=bool(report.optimal) and report.executed_ok,
        prompt_tokens=gateway.usage.prompt_tokens,
        completion_tokens=gateway.usage.completion_tokens,
        wall_time_s=time.monotonic() - start,
        code=code,
        retries=retries,
    )


def _evaluate(executor: Executor, grader: Grader):
    def evaluate(code: str):
        result = executor(code)
        return result, grader(result)

    return evaluate


def one_shot(spec: ProblemSpec, gateway: Gateway, grader: Grader, executor: Executor = execute) -> TrialRecord:
    start, code = time.monotonic(), ""
    try:
        code = strip_code_fences(gateway.ask("code_writer", {"Problem": spec.description}))
        report = grader(executor(code))
    except GatewayError as exc:
        report = failure_report(f"gateway: {exc}")
    return _record("one_shot", spec, gateway, start, code, report)


def chain_of_thought(spec: ProblemSpec, gateway: Gateway, grader: Grader, executor: Executor = execute) -> TrialRecord:
    start, code = time.monotonic(), ""
    try:
        steps = gateway.ask("decomposer", {"Problem": spec.description, "Mode": COT_MODE})
        code = strip_code_fences(
            gateway.ask("code_writer", {"Problem": spec.description, "Reasoning steps": steps})
        )
        report = grader(executor(code))
    except GatewayError as exc:
        report = failure_report(f"gateway: {exc}")
    return _record("cot", spec, gateway, start, code, report)


def self_refine(spec: ProblemSpec, gateway: Gateway, grader: Grader, refine_cfg: RefineConfig,
                executor: Executor = execute) -> TrialRecord:
    start, code = time.monotonic(), ""
    try:
        code = strip_code_fences(gateway.ask("code_writer", {"Problem": spec.description}))
    except GatewayError as exc:
        return _record("self_refine", spec, gateway, start, code, failure_report(f"gateway: {exc}"))
    evaluate = _evaluate(executor, grader)
    result, report = evaluate(code)
    out = refine_loop(code, report, spec.description, refine_cfg, gateway, evaluate, result)
    return _record("self_refine", spec, gateway, start, out.code, out.report, out.retries_used)


def mcts_trial(spec: ProblemSpec, gateway: Gateway, grader: Grader, search_cfg: SearchConfig,
               refine_cfg: RefineConfig, executor: Executor = execute, method: str = "mcts_ops",
               redecompose: bool = False, run_log=None) -> TrialRecord:
    start = time.monotonic()
    pipe = Pipeline(spec.description, gateway, grader, executor, spec.id, run_log)
    outcome = pipe.run_search(search_cfg, refine_cfg, redecompose)
    retries = sum(r.refined for r in outcome.per_iteration)
    return _record(method, spec, gateway, start, outcome.best_code, outcome.best_report, retries)


def greedy_trial(spec: ProblemSpec, gateway: Gateway, grader: Grader, search_cfg: SearchConfig,
                 refine_cfg: RefineConfig, executor: Executor = execute, run_log=None) -> TrialRecord:
    start = time.monotonic()
    pipe = Pipeline(spec.description, gateway, grader, executor, spec.id, run_log)
    outcome = pipe.run_greedy(search_cfg.max_depth, refine_cfg)
    return _record("no_mcts", spec, gateway, start, outcome.best_code, outcome.best_report,
                   int(outcome.per_iteration[0].refined))


# ----------------------------------------------------------------- harness


@dataclass
class Harness:
    """Binds a backend, sandbox and grading mode; runs any method over problem sets."""

    backend: Backend
    executor: Executor = field(default_factory=lambda: execute)
    grading: str = "oracle"  # oracle | llm
    search: SearchConfig = field(default_factory=SearchConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    redecompose: bool = False
    run_log: Optional[str] = None
    temperature: float = 0.7

    def grader_for(self, spec: ProblemSpec, gateway: Gateway) -> Grader:
        if self.grading == "llm":
            return LlmGrader(spec.description, gateway, spec)
        if self.grading == "oracle":
            return OracleGrader(spec)
        raise ValueError(f"unknown grading mode {self.grading!r}")

    def run_trial(self, method: str, spec: ProblemSpec) -> TrialRecord:
        gateway = Gateway(self.backend, self.temperature)
        grader = self.grader_for(spec, gateway)
        if method == "one_shot":
            return one_shot(spec, gateway, grader, self.executor)
        if method == "cot":
            return chain_of_thought(spec, gateway, grader, self.executor)
        if method == "self_refine":
            return self_refine(spec, gateway, grader, self.refine, self.executor)
        if method == "mcts_ops":
            return mcts_trial(spec, gateway, grader, self.search, self.refine, self.executor,
                              redecompose=self.redecompose, run_log=self.run_log)
        if method == "no_refine":
            return mcts_trial(spec, gateway, grader, self.search, replace(self.refine, enabled=False),
                              self.executor, method="no_refine", redecompose=self.redecompose,
                              run_log=self.run_log)
        if method == "no_mcts":
            return greedy_trial(spec, gateway, grader, self.search, self.refine, self.executor, self.run_log)
        raise ValueError(f"unknown method {method!r}")

    def run(self, method: str, specs: list[ProblemSpec], jobs: int = 1,
            on_record: Optional[Callable[[TrialRecord], None]] = None) -> list[TrialRecord]:
        def one(spec: ProblemSpec) -> TrialRecord:
            rec = self.run_trial(method, spec)
            if on_record:
                on_record(rec)
            return rec

        if jobs <= 1:
            return [one(s) for s in specs]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, specs))


def make_executor(cfg: SandboxConfig, cache: bool = False) -> Executor:
    if cache:
        from .sandbox import CachedExecutor

        return CachedExecutor(cfg)
    return lambda code: execute(code, cfg)
