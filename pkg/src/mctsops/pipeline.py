"""Prompt-sequence search: decompose, prompt, score, generate, execute, grade, backpropagate."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

from .benchgen import ProblemSpec
from .gateway import Gateway, ParseFailure, kind_suffixes, parse_bounded_number
from .refine import RefineConfig, refine_loop, strip_code_fences
from .reward import RewardReport, failure_report
from .sandbox import ExecutionResult, execute
from .tree import SearchConfig, SearchTree

log = logging.getLogger(__name__)

Executor = Callable[[str], ExecutionResult]
Grader = Callable[[ExecutionResult], RewardReport]

DEFAULT_PROMPT_SCORE = 5
_OBJECTIVE_WORDS = ("minimize", "maximize", "minimise", "maximise")
_CONSTRAINT_WORDS = ("must", "constraint", "between")
_LIST_MARKER = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s+")


class DecomposeFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class Sentence:
    index: int
    text: str
    kind: str  # context | objective | constraint | other


def classify_sentence(text: str) -> str:
    lowered = text.lower()
    if any(w in lowered for w in _OBJECTIVE_WORDS):
        return "objective"
    if any(w in lowered for w in _CONSTRAINT_WORDS):
        return "constraint"
    return "context"


@dataclass
class IterationRecord:
    iteration: int
    path_scores: list[int]
    reward: float
    prompt_tokens: int
    completion_tokens: int
    refined: bool = False
    error: Optional[str] = None


@dataclass
class SearchOutcome:
    best_code: str
    best_reward: float
    iterations: int
    tree_snapshot: list[dict]
    per_iteration: list[IterationRecord] = field(default_factory=list)
    best_report: Optional[RewardReport] = None
    sentences: list[Sentence] = field(default_factory=list)


class Pipeline:
    """One problem's worth of LLM stages bound to a gateway, executor and grader."""

    def __init__(
        self,
        problem_text: str,
        gateway: Gateway,
        grader: Grader,
        executor: Executor = execute,
        problem_id: str = "problem",
        run_log: Optional[Union[str, Path]] = None,
    ) -> None:
        if not problem_text.strip():
            raise ValueError("problem_text is empty")
        self.problem_text = problem_text
        self.gateway = gateway
        self.grader = grader
        self.executor = executor
        self.problem_id = problem_id
        self.run_log = Path(run_log) if run_log else None
        self._suffixes = kind_suffixes()

    # -------------------------------------------------------------- stages

    def decompose(self, max_depth: int) -> list[Sentence]:
        reply = self.gateway.ask("decomposer", {"Problem": self.problem_text})
        lines = [_LIST_MARKER.sub("", ln).strip() for ln in reply.splitlines()]
        lines = [ln for ln in lines if ln]
        if not lines:
            raise DecomposeFailure("decomposer returned no sentences")
        if len(lines) > max_depth:
            lines = lines[: max_depth - 1] + [" ".join(lines[max_depth - 1 :])]
        return [Sentence(i, text, classify_sentence(text)) for i, text in enumerate(lines)]

    def make_prompt(self, sentence: Sentence, attempt: int = 0, reference: Optional[str] = None) -> str:
        sections = {"Problem": self.problem_text, "Sentence": sentence.text, "Kind": sentence.kind}
        if reference:
            sections["Reference instruction"] = reference
        sections["Attempt"] = attempt
        reply = self.gateway.ask("prompt_writer", sections)
        return f"{reply.strip()}\n{self._suffixes.get(sentence.kind, self._suffixes['other'])}"

    def score_prompt(self, prompt: str) -> int:
        if not prompt.strip():
            raise ValueError("prompt is empty")
        for _ in range(2):
            reply = self.gateway.ask("prompt_scorer", {"Prompt": prompt})
            try:
                return int(parse_bounded_number(reply, 0, 10, integer=True))
            except ParseFailure:
                continue
        return DEFAULT_PROMPT_SCORE

    def generate_segment(self, prompt: str, accumulated_code: str, attempt: int = 0) -> str:
        reply = self.gateway.ask(
            "code_writer",
            {
                "Problem": self.problem_text,
                "Prompt": prompt,
                "Existing code": accumulated_code or "(none)",
                "Attempt": attempt,
            },
        )
        return strip_code_fences(reply)

    def evaluate(self, code: str) -> tuple[ExecutionResult, RewardReport]:
        result = self.executor(code)
        return result, self.grader(result)

    # -------------------------------------------------------------- search

    def _finish(self, code: str, refine_cfg: RefineConfig) -> tuple[str, RewardReport, bool]:
        result, report = self.evaluate(code)
        if refine_cfg.enabled and report.reward < refine_cfg.tau:
            out = refine_loop(code, report, self.problem_text, refine_cfg, self.gateway, self.evaluate, result)
            return out.code, out.report, out.retries_used > 0
        return code, report, False

    def _log(self, rec: IterationRecord) -> None:
        if self.run_log is None:
            return
        self.run_log.parent.mkdir(parents=True, exist_ok=True)
        row = {
            "type": "iteration",
            "problem_id": self.problem_id,
            "iteration": rec.iteration,
            "path_scores": rec.path_scores,
            "reward": rec.reward,
            "prompt_tokens": rec.prompt_tokens,
            "completion_tokens": rec.completion_tokens,
            "refined": rec.refined,
        }
        with self.run_log.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(row) + "\n")

    def run_search(
        self,
        config: SearchConfig,
        refine_cfg: Optional[RefineConfig] = None,
        redecompose: bool = False,
    ) -> SearchOutcome:
        refine_cfg = refine_cfg or RefineConfig()
        tree = SearchTree(config)
        sentences: Optional[list[Sentence]] = None
        best_code, best_report = "", None
        records: list[IterationRecord] = []

        for it in range(config.simulations):
            before = (self.gateway.usage.prompt_tokens, self.gateway.usage.completion_tokens)
            leaf, path_scores, code, refined, error = 0, [], "", False, None
            try:
                if sentences is None or redecompose:
                    sentences = self.decompose(config.max_depth)
                node = 0
                for sentence in sentences:
                    reference = None
                    if tree[node].children:
                        # the UCT pick steers the fresh prompt; dedup decides where it lands
                        reference = tree[tree.select_child(node)].prompt_text
                    prompt = self.make_prompt(sentence, it, reference)
                    score = self.score_prompt(prompt)
                    node, _ = tree.expand_or_reuse(node, prompt, score)
                    leaf = node
                    path_scores.append(score)
                    segment = self.generate_segment(prompt, code, it)
                    if code and not code.endswith("\n"):
                        code += "\n"
                    code += segment
                code, report, refined = self._finish(code, refine_cfg)
            except Exception as exc:  # noqa: BLE001 - any stage failure costs this iteration only
                log.warning("iteration %d of %s failed: %s", it, self.problem_id, exc)
                report, error = failure_report(f"iteration error: {exc}"), repr(exc)
            tree.backpropagate(leaf, report.reward)
            if best_report is None or report.reward > best_report.reward:
                best_code, best_report = code, report
            rec = IterationRecord(
                iteration=it,
                path_scores=path_scores,
                reward=report.reward,
                prompt_tokens=self.gateway.usage.prompt_tokens - before[0],
                completion_tokens=self.gateway.usage.completion_tokens - before[1],
                refined=refined,
                error=error,
            )
            records.append(rec)
            self._log(rec)

        return SearchOutcome(
            best_code=best_code,
            best_reward=best_report.reward,
            iterations=config.simulations,
            tree_snapshot=tree.snapshot(),
            per_iteration=records,
            best_report=best_report,
            sentences=list(sentences or []),
        )

    def run_greedy(self, max_depth: int = 8, refine_cfg: Optional[RefineConfig] = None) -> SearchOutcome:
        """Single linear pass: one prompt per sentence, no alternatives explored."""
        refine_cfg = refine_cfg or RefineConfig()
        before = (self.gateway.usage.prompt_tokens, self.gateway.usage.completion_tokens)
        code, scores, sentences, refined, error = "", [], [], False, None
        try:
            sentences = self.decompose(max_depth)
            for sentence in sentences:
                prompt = self.make_prompt(sentence, 0)
                scores.append(self.score_prompt(prompt))
                segment = self.generate_segment(prompt, code, 0)
                if code and not code.endswith("\n"):
                    code += "\n"
                code += segment
            code, report, refined = self._finish(code, refine_cfg)
        except Exception as exc:  # noqa: BLE001
            log.warning("greedy pass of %s failed: %s", self.problem_id, exc)
            report, error = failure_report(f"pipeline error: {exc}"), repr(exc)
        rec = IterationRecord(
            0, scores, report.reward,
            self.gateway.usage.prompt_tokens - before[0],
            self.gateway.usage.completion_tokens - before[1],
            refined, error,
        )
        self._log(rec)
        return SearchOutcome(code, report.reward, 1, [], [rec], report, sentences)


def run_search(
    problem: ProblemSpec,
    config: SearchConfig,
    refine_config: Optional[RefineConfig],
    gateway: Gateway,
    grader: Grader,
    executor: Executor = execute,
    redecompose: bool = False,
    run_log: Optional[Union[str, Path]] = None,
) -> SearchOutcome:
    pipe = Pipeline(problem.description, gateway, grader, executor, problem.id, run_log)
    return pipe.run_search(config, refine_config, redecompose)
