"""Command line entry point: ``mctsops <verb> ...``.

Exit status is 0 when the command completed, whatever the solution quality.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import threading
from dataclasses import asdict
from pathlib import Path
from typing import Optional

from .baselines import Harness, TrialRecord, make_executor
from .benchgen import (
    ProblemSpec,
    generate_set,
    reference_easy_example,
    reference_hard_example,
    solve_ground_truth,
)
from .config import Settings
from .gateway import Gateway, GatewayError, RecordingBackend, ReplayBackend
from .metrics import ABLATIONS, aggregate, emit_report
from .pipeline import Pipeline

log = logging.getLogger("mctsops")


# ----------------------------------------------------------------- problems


def load_problems(path: str) -> list[ProblemSpec]:
    specs = []
    for line in Path(path).read_text("utf-8").splitlines():
        if line.strip():
            specs.append(ProblemSpec.from_dict(json.loads(line)))
    return specs


def write_problems(specs: list[ProblemSpec], path: Optional[str]) -> None:
    lines = []
    for spec in specs:
        row = spec.to_dict()
        row["ground_truth"] = asdict(solve_ground_truth(spec))
        lines.append(json.dumps(row))
    text = "\n".join(lines) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _select_problems(args: argparse.Namespace, settings: Settings) -> list[ProblemSpec]:
    if args.problems:
        return load_problems(args.problems)
    if args.example:
        return [reference_easy_example() if args.example == "easy" else reference_hard_example()]
    return generate_set(args.difficulty, args.count, args.problem_seed, settings.bench.n_users)


# ----------------------------------------------------------------- helpers


def _settings(args: argparse.Namespace) -> Settings:
    settings = Settings.load(args.config)
    if args.backend:
        settings.gateway.backend = args.backend
    if args.seed is not None:
        settings.gateway.seed = args.seed
        settings.search.rng_seed = args.seed
    if getattr(args, "fixture", None):
        settings.gateway.fixture = args.fixture
    return settings


def _harness(settings: Settings, run_log: Optional[str]) -> Harness:
    return Harness(
        backend=settings.backend(),
        executor=make_executor(settings.sandbox_config(), settings.sandbox.cache),
        grading=settings.bench.grading,
        search=settings.search_config(),
        refine=settings.refine_config(),
        redecompose=settings.search.redecompose,
        run_log=run_log,
        temperature=settings.gateway.temperature,
    )


def _run_method(method: str, args: argparse.Namespace) -> int:
    settings = _settings(args)
    specs = _select_problems(args, settings)
    harness = _harness(settings, args.out)
    lock = threading.Lock()

    def append(rec: TrialRecord) -> None:
        log.info("%s %s reward=%g ok=%s", method, rec.problem_id, rec.reward, rec.executed_ok)
        if args.out:
            with lock, open(args.out, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"type": "trial", **rec.to_dict()}) + "\n")

    records = harness.run(method, specs, args.jobs, on_record=append)
    sys.stdout.write(emit_report(aggregate(records), args.format).decode("utf-8"))
    return 0


def read_records(path: str) -> list[TrialRecord]:
    out = []
    for line in Path(path).read_text("utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        if row.pop("type", "trial") != "trial":
            continue
        out.append(TrialRecord(**row))
    return out


# ------------------------------------------------------------------- verbs


def cmd_run(args: argparse.Namespace) -> int:
    if args.tree_out:
        return _run_with_trees(args)
    return _run_method("mcts_ops", args)


def _run_with_trees(args: argparse.Namespace) -> int:
    settings = _settings(args)
    specs = _select_problems(args, settings)
    harness = _harness(settings, args.out)
    outdir = Path(args.tree_out)
    outdir.mkdir(parents=True, exist_ok=True)
    records = []
    for spec in specs:
        gateway = Gateway(harness.backend, harness.temperature)
        pipe = Pipeline(spec.description, gateway, harness.grader_for(spec, gateway), harness.executor,
                        spec.id, args.out)
        outcome = pipe.run_search(harness.search, harness.refine, harness.redecompose)
        (outdir / f"{spec.id}.tree.json").write_text(
            json.dumps({"problem_id": spec.id, "nodes": outcome.tree_snapshot}, indent=2), encoding="utf-8"
        )
        rep = outcome.best_report
        rec = TrialRecord("mcts_ops", spec.id, spec.difficulty, rep.executed_ok, rep.reward,
                          bool(rep.optimal) and rep.executed_ok, gateway.usage.prompt_tokens,
                          gateway.usage.completion_tokens, 0.0, outcome.best_code)
        records.append(rec)
        if args.out:
            with open(args.out, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"type": "trial", **rec.to_dict()}) + "\n")
    sys.stdout.write(emit_report(aggregate(records), args.format).decode("utf-8"))
    return 0


def cmd_baseline(args: argparse.Namespace) -> int:
    return _run_method(args.method, args)


def cmd_ablate(args: argparse.Namespace) -> int:
    return _run_method(args.mode, args)


def cmd_bench(args: argparse.Namespace) -> int:
    specs = generate_set(args.difficulty, args.count, args.problem_seed, args.n_users)
    write_problems(specs, args.out)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    if args.tree:
        data = json.loads(Path(args.tree).read_text("utf-8"))
        sys.stdout.write(json.dumps(data, indent=2) + "\n")
        if not args.records:
            return 0
    if not args.records:
        raise SystemExit("report needs --records and/or --tree")
    table = aggregate(read_records(args.records))
    payload = emit_report(table, args.format)
    if args.out:
        Path(args.out).write_bytes(payload)
    else:
        sys.stdout.write(payload.decode("utf-8"))
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    settings = _settings(args)
    specs = _select_problems(args, settings)
    if args.action == "record":
        if not args.fixture:
            raise SystemExit("replay record needs --fixture")
        harness = _harness(settings, None)
        harness.backend = RecordingBackend(harness.backend, args.fixture)
        records = harness.run(args.method, specs)
        log.info("recorded %d trials into %s", len(records), args.fixture)
        return 0
    settings.gateway.backend = "replay"
    if not settings.gateway.fixture:
        raise SystemExit("replay verify needs --fixture")
    runs, misses = [], 0
    for _ in range(2):
        harness = _harness(settings, None)
        backend = ReplayBackend(settings.gateway.fixture)
        harness.backend = backend
        runs.append([(r.code, r.reward, r.prompt_tokens, r.completion_tokens)
                     for r in harness.run(args.method, specs)])
        misses += backend.misses
    same = runs[0] == runs[1]
    sys.stdout.write(
        f"replay {'identical' if same else 'DIVERGED'} over {len(specs)} problem(s), {misses} fixture miss(es)\n"
    )
    return 0 if same and not misses else 1


# ------------------------------------------------------------------ parser


def _add_problem_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problems", help="JSONL problem set from `bench generate`")
    p.add_argument("--example", choices=["easy", "hard"], help="use one of the two reference instances")
    p.add_argument("--difficulty", choices=["easy", "hard"], default="easy")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--problem-seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=["text", "csv", "json"], default="text")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON settings file")
    common.add_argument("--backend", choices=["http", "replay", "synthetic"])
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output path (run log JSONL for run/baseline/ablate)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mctsops", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", parents=[common], help="search prompt sequences on a problem set")
    _add_problem_args(p)
    p.add_argument("--tree-out", help="directory for per-problem tree exports")
    p.add_argument("--fixture")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("baseline", parents=[common], help="run a comparison method")
    p.add_argument("method", choices=["one_shot", "cot", "self_refine"])
    _add_problem_args(p)
    p.add_argument("--fixture")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("ablate", parents=[common], help="run the search with one component disabled")
    p.add_argument("mode", choices=list(ABLATIONS))
    _add_problem_args(p)
    p.add_argument("--fixture")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench", parents=[common], help="problem-set utilities")
    p.add_argument("action", choices=["generate"])
    p.add_argument("--difficulty", choices=["easy", "hard"], default="easy")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--problem-seed", "--bench-seed", dest="problem_seed", type=int, default=0)
    p.add_argument("--n-users", type=int, default=2)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", parents=[common], help="aggregate trial records")
    p.add_argument("--records", help="run log JSONL")
    p.add_argument("--tree", help="tree export JSON to print")
    p.add_argument("--format", choices=["text", "csv", "json"], default="text")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("replay", parents=[common], help="record or verify a replay fixture")
    p.add_argument("action", choices=["record", "verify"])
    p.add_argument("--method", default="mcts_ops",
                   choices=["mcts_ops", "one_shot", "cot", "self_refine", "no_mcts", "no_refine"])
    p.add_argument("--fixture", required=True)
    _add_problem_args(p)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (GatewayError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
