"""Regenerate the checked-in replay fixtures.

    python3 tests/fixtures/make_fixtures.py

The search fixture is recorded from the seeded synthetic backend; the refine
fixture from a small scripted backend that repairs an injected syntax error
on its second attempt.  Both run offline.
"""

from __future__ import annotations

import sys
from pathlib import Path

from mctsops.baselines import Harness
from mctsops.benchgen import reference_easy_example, reference_hard_example
from mctsops.gateway import Gateway, LlmResponse, RecordingBackend, approx_tokens, parse_sections
from mctsops.refine import RefineConfig, refine_loop
from mctsops.reward import OracleGrader
from mctsops.sandbox import execute
from mctsops.synthetic import SyntheticBackend, _base_segment
from mctsops.benchgen import extract_parameters
from mctsops.tree import SearchConfig

HERE = Path(__file__).resolve().parent
SEARCH_FIXTURE = HERE / "search_replay.jsonl"
REFINE_FIXTURE = HERE / "refine_replay.jsonl"
ONE_SHOT_FIXTURE = HERE / "one_shot_replay.jsonl"

SEARCH_CONFIG = SearchConfig(simulations=5, rng_seed=0)
SYNTHETIC_SEED = 11


def broken_script(spec) -> tuple[str, str]:
    """A correct solver and the same solver with one character removed."""
    good = _base_segment(extract_parameters(spec.description), use_sinr=spec.difficulty == "hard")
    bad = good.replace("def solve():", "def solve()", 1)
    assert bad != good
    return good, bad


class ScriptedRepair:
    """Attempt 1 returns code that still crashes; attempt 2 returns the fix."""

    name = "scripted"

    def __init__(self, spec) -> None:
        self.good, _ = broken_script(spec)

    def complete(self, request):
        s = parse_sections(request.user_text)
        if request.role_tag == "feedback_writer":
            last = (s.get("Stderr") or "(empty)").strip().splitlines()[-1]
            text = f"The script fails with `{last}`. Repair that line and keep the powers output."
        elif request.role_tag == "code_writer" and s.get("Attempt") == "1":
            text = "```python\n" + self.good.replace("n = len(gains)", "n = len(gain)", 1) + "```\n"
        elif request.role_tag == "code_writer":
            text = "```python\n" + self.good + "```\n"
        else:
            raise RuntimeError(f"unexpected role {request.role_tag}")
        return LlmResponse(text, approx_tokens(request.user_text), approx_tokens(text), self.name)


def refine_fixture() -> None:
    spec = reference_hard_example()
    _, bad = broken_script(spec)
    gateway = Gateway(RecordingBackend(ScriptedRepair(spec), REFINE_FIXTURE))
    grader = OracleGrader(spec)

    def evaluate(code):
        res = execute(code)
        return res, grader(res)

    res, report = evaluate(bad)
    out = refine_loop(bad, report, spec.description, RefineConfig(), gateway, evaluate, res)
    print(f"refine: retries={out.retries_used} reward={out.reward}")


def search_fixture() -> None:
    harness = Harness(RecordingBackend(SyntheticBackend(seed=SYNTHETIC_SEED), SEARCH_FIXTURE),
                      search=SEARCH_CONFIG)
    for rec in harness.run("mcts_ops", [reference_easy_example(), reference_hard_example()]):
        print(f"search: {rec.problem_id} reward={rec.reward} tokens={rec.tokens}")


def one_shot_fixture() -> None:
    harness = Harness(RecordingBackend(SyntheticBackend(seed=SYNTHETIC_SEED), ONE_SHOT_FIXTURE))
    for rec in harness.run("one_shot", [reference_easy_example(), reference_hard_example()]):
        print(f"one_shot: {rec.problem_id} reward={rec.reward}")


if __name__ == "__main__":
    for path in (SEARCH_FIXTURE, REFINE_FIXTURE, ONE_SHOT_FIXTURE):
        path.unlink(missing_ok=True)
    search_fixture()
    refine_fixture()
    one_shot_fixture()
    sys.exit(0)
