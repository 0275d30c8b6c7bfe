"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line (with its runtime against the budget);
the lines are printed in the pytest terminal summary, or directly when this
file is run as a script.
"""

from __future__ import annotations

import functools
import math
import random
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import pytest

from make_fixtures import REFINE_FIXTURE, SEARCH_CONFIG, SEARCH_FIXTURE, broken_script
from mctsops.baselines import Harness, TrialRecord
from mctsops.benchgen import generate_set, reference_easy_example, reference_hard_example, solve_ground_truth
from mctsops.gateway import Gateway, ReplayBackend
from mctsops.metrics import CellStats, aggregate, emit_report, parse_report
from mctsops.refine import RefineConfig, refine_loop
from mctsops.reward import OracleGrader, RewardReport, llm_reward
from mctsops.sandbox import CachedExecutor, SandboxConfig, execute
from mctsops.synthetic import SyntheticBackend
from mctsops.tree import SearchConfig, SearchTree, uct_value
from oracles import grid_search_two_users
from test_sandbox import spawn_child_script, wait_gone
from test_tree import UCT_TABLE, check_invariants, random_interleaving, tree_with_children

RESULTS: list[str] = []


def criterion(number: int, title: str, budget_s: float):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            start = time.monotonic()
            detail, ok = "", False
            try:
                detail = fn(*args, **kwargs) or ""
                ok = True
            except AssertionError as exc:
                detail = f"assertion failed: {exc}"
                raise
            finally:
                elapsed = time.monotonic() - start
                within = elapsed < budget_s
                status = "PASS" if ok and within else "FAIL"
                timing = f"{elapsed:.2f}s / {budget_s:g}s budget"
                RESULTS.append(f"[{status}] {number}. {title} ({timing}) {detail}".rstrip())
            assert elapsed < budget_s, f"{title} took {elapsed:.2f}s, budget {budget_s}s"

        return run

    return wrap


@criterion(1, "UCT correctness", 1.0)
def test_1_uct_correctness():
    for q, n, parent, c, expected in UCT_TABLE:
        assert abs(uct_value(q, n, parent, c) - expected) <= 1e-6
    assert abs(uct_value(5.0, 1, 2, 1.4142) - 6.17747) <= 1e-4
    rng = random.Random(1)
    for _ in range(1000):
        k = rng.randint(2, 5)
        stats = [(rng.uniform(-5, 50), rng.randint(1, 10)) for _ in range(k)]
        parent = sum(n for _, n in stats)
        tree = tree_with_children(stats, parent, c=0.0)
        means = [q / n for q, n in stats]
        assert tree.select_child(0) == tree.root.children[means.index(max(means))]
        j = rng.randrange(k)
        stats[j] = (0.0, 0)
        tree = tree_with_children(stats, parent, c=rng.uniform(0, 3))
        assert tree.select_child(0) == tree.root.children[stats.index((0.0, 0))]
    return "10-case table, 1000 randomized trees"


@criterion(2, "Tree invariants", 5.0)
def test_2_tree_invariants():
    for seed in range(1000):
        check_invariants(*random_interleaving(seed, steps=20))
    return "1000 randomized expand/backprop interleavings"


@criterion(3, "Oracle exactness", 30.0)
def test_3_oracle_exactness():
    easy = solve_ground_truth(reference_easy_example())
    assert easy.powers == [0.0, 0.0] and easy.objective == 0.0
    hard = solve_ground_truth(reference_hard_example())
    assert abs(hard.powers[0] - 0.80801) <= 1e-3 and abs(hard.powers[1] - 1.21201) <= 1e-3
    assert abs(hard.objective - 2.02002) <= 1e-3
    assert abs(grid_search_two_users(reference_hard_example())[0] - hard.objective) <= 1e-3
    worst = 0.0
    for spec in generate_set("hard", 50, seed=2024):
        grid = grid_search_two_users(spec)
        worst = max(worst, abs(solve_ground_truth(spec).objective - grid[0]))
    assert worst <= 1e-3, worst
    return f"50 random hard specs, worst |oracle - grid| = {worst:.2e} W"


class _CountingEvaluator:
    name = "counting"

    def __init__(self):
        self.calls = 0

    def complete(self, request):
        self.calls += 1
        raise AssertionError("evaluator must not be called for failed executions")


@criterion(4, "Reward contract", 5.0)
def test_4_reward_contract():
    from mctsops.sandbox import ExecutionResult

    counter = _CountingEvaluator()
    for status in ("nonzero_exit", "timeout", "spawn_error"):
        assert llm_reward(ExecutionResult(status), "problem", Gateway(counter)).reward == -1
    assert counter.calls == 0
    rng = random.Random(5)
    specs = generate_set("hard", 5, seed=9) + generate_set("easy", 5, seed=9)
    graders = [OracleGrader(s) for s in specs]
    for _ in range(3000):
        status = rng.choice(["ok", "ok", "nonzero_exit", "timeout", "spawn_error"])
        vals = [rng.choice([rng.uniform(-1, 4), float("inf"), float("nan"), 0.0]) for _ in range(2)]
        out = rng.choice([f"powers=[{vals[0]}, {vals[1]}]", str(vals[0]), "", "junk"])
        r = rng.choice(graders)(ExecutionResult(status, stdout=out))
        assert r.reward == -1 or 0 <= r.reward <= 10
    for _ in range(2000):
        value = rng.uniform(-3, 13)
        try:
            r = RewardReport(value, rng.random() < 0.5)
        except ValueError:
            continue
        assert r.reward == -1 or 0 <= r.reward <= 10
    return "0 evaluator calls on failures, 5000 fuzzed reports in range"


def _replay_once(fast_executor):
    backend = ReplayBackend(SEARCH_FIXTURE)
    harness = Harness(backend, executor=fast_executor, search=SEARCH_CONFIG)
    records = harness.run("mcts_ops", [reference_easy_example(), reference_hard_example()])
    return backend.misses, [(r.code.encode(), r.reward, r.prompt_tokens, r.completion_tokens) for r in records]


@criterion(5, "Replay determinism", 10.0)
def test_5_replay_determinism():
    executor = CachedExecutor(SandboxConfig(interpreter_cmd=[sys.executable, "-I", "-S"]))
    runs = [_replay_once(executor), _replay_once(CachedExecutor(executor.config))]
    assert runs[0][0] == 0 and runs[1][0] == 0, "fixture misses"
    assert runs[0][1] == runs[1][1]
    assert all(code for code, *_ in runs[0][1])
    return "easy + hard, 5 iterations each, identical twice, 0 fixture misses"


@criterion(6, "Refine loop", 10.0)
def test_6_refine_loop():
    spec = reference_hard_example()
    _, bad = broken_script(spec)
    grader = OracleGrader(spec)

    def evaluate(code):
        res = execute(code)
        return res, grader(res)

    res, report = evaluate(bad)
    assert res.status == "nonzero_exit"
    cfg = RefineConfig(max_retries=3)
    out = refine_loop(bad, report, spec.description, cfg, Gateway(ReplayBackend(REFINE_FIXTURE)), evaluate, res)
    assert out.execution.status == "ok" and out.reward > -1
    assert out.retries_used <= cfg.max_retries
    return f"repaired after {out.retries_used} retries, final reward {out.reward:g}"


@criterion(7, "Ablation direction (synthetic)", 120.0)
def test_7_ablation_direction():
    specs = generate_set("hard", 50, seed=1000)
    harness = Harness(
        SyntheticBackend(seed=7),
        executor=CachedExecutor(SandboxConfig(interpreter_cmd=[sys.executable, "-I", "-S"])),
        search=SearchConfig(simulations=20),
    )
    rate = {}
    for method in ("mcts_ops", "no_mcts", "no_refine"):
        records = harness.run(method, specs)
        rate[method] = sum(r.executed_ok for r in records) / len(records)
    assert rate["mcts_ops"] >= rate["no_mcts"], rate
    assert rate["mcts_ops"] >= rate["no_refine"], rate
    return "success " + ", ".join(f"{m}={v:.0%}" for m, v in rate.items())


@criterion(8, "Metrics fidelity", 1.0)
def test_8_metrics_fidelity():
    def rec(method, reward, optimal=False):
        return TrialRecord(method, "p", "hard", reward != -1, float(reward), optimal, 50, 50, 0.0)

    table = aggregate([rec("one_shot", -1), rec("one_shot", -1), rec("cot", 10), rec("cot", 4),
                       rec("mcts_ops", 10, True), rec("mcts_ops", 10, True), rec("mcts_ops", 10, True)])
    assert table[("one_shot", "hard")] == CellStats(0.0, -1.0, 0.0, 0.0, 100.0, 2)
    assert (table[("cot", "hard")].reward_mean, table[("cot", "hard")].reward_sd) == (7.0, 3.0)
    top = table[("mcts_ops", "hard")]
    assert (top.success_rate, top.reward_mean, top.reward_sd, top.optimality_rate) == (1.0, 10.0, 0.0, 1.0)
    assert parse_report(emit_report(table, "json")) == table
    text = emit_report(table, "text").decode()
    assert "0.00%" in text and "-1.00" in text
    return "all-failure row, hand arithmetic, json round trip"


@criterion(9, "Sandbox", 30.0)
def test_9_sandbox(tmp_path):
    assert execute('print("total=0.0")\n').status == "ok"
    syntax = execute("def f(:\n")
    assert syntax.status == "nonzero_exit" and syntax.stderr
    loop = execute("while True:\n    pass\n", timeout_s=2)
    assert loop.status == "timeout" and loop.wall_time >= 2
    scripts = [
        f"import pathlib, time\npathlib.Path('s.txt').write_text('{k}')\ntime.sleep(0.2)\n"
        f"print('{k}', pathlib.Path('s.txt').read_text())\n"
        for k in range(16)
    ]
    with ThreadPoolExecutor(16) as pool:
        results = list(pool.map(execute, scripts))
    assert all(r.stdout.split() == [str(k), str(k)] for k, r in enumerate(results))
    pid_file = tmp_path / "child.pid"
    assert execute(spawn_child_script(pid_file, then_loop=True), timeout_s=1.5).status == "timeout"
    assert wait_gone(int(pid_file.read_text()))
    return "ok/nonzero/timeout, 16-way isolation, no orphan after timeout"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
