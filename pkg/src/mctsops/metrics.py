"""Per-method, per-difficulty statistics over trial records, and report rendering."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable

from .baselines import Harness, TrialRecord
from .benchgen import ProblemSpec

ABLATIONS = ("no_mcts", "no_refine")
METHOD_LABELS = {
    "mcts_ops": "MCTS-OPS",
    "self_refine": "Self-Refine",
    "cot": "Chain-of-Thought",
    "one_shot": "One-shot",
    "no_mcts": "w/o MCTS (greedy)",
    "no_refine": "w/o feedback loop",
}
DIFFICULTIES = ("easy", "hard")


@dataclass(frozen=True)
class CellStats:
    success_rate: float
    reward_mean: float
    reward_sd: float
    optimality_rate: float
    avg_tokens: float
    n_trials: int


@dataclass(frozen=True)
class MetricsTable:
    cells: dict[tuple[str, str], CellStats]

    def methods(self) -> list[str]:
        seen = {m for m, _ in self.cells}
        ordered = [m for m in METHOD_LABELS if m in seen]
        return ordered + sorted(seen - set(ordered))

    def __getitem__(self, key: tuple[str, str]) -> CellStats:
        return self.cells[key]

    def to_dict(self) -> dict:
        return {
            "cells": [
                {"method": m, "difficulty": d, **asdict(c)}
                for (m, d), c in sorted(self.cells.items())
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsTable":
        cells = {}
        for row in data["cells"]:
            row = dict(row)
            key = (row.pop("method"), row.pop("difficulty"))
            cells[key] = CellStats(**row)
        return cls(cells)


def _cell(records: list[TrialRecord]) -> CellStats:
    n = len(records)
    rewards = [r.reward for r in records]
    mean = math.fsum(rewards) / n
    var = math.fsum((x - mean) ** 2 for x in rewards) / n
    return CellStats(
        success_rate=sum(r.executed_ok for r in records) / n,
        reward_mean=mean,
        reward_sd=math.sqrt(var),
        optimality_rate=sum(r.optimal for r in records) / n,
        avg_tokens=math.fsum(r.tokens for r in records) / n,
        n_trials=n,
    )


def aggregate(records: Iterable[TrialRecord]) -> MetricsTable:
    """Failures (reward -1) count toward mean and SD; SD is the population SD."""
    groups: dict[tuple[str, str], list[TrialRecord]] = {}
    for rec in records:
        groups.setdefault((rec.method, rec.difficulty), []).append(rec)
    if not groups:
        raise ValueError("no records to aggregate")
    # sort each cell so float summation order does not depend on record order
    return MetricsTable({
        key: _cell(sorted(recs, key=lambda r: (r.reward, r.tokens, r.problem_id)))
        for key, recs in groups.items()
    })


def ablate(mode: str, problems: list[ProblemSpec], harness: Harness, jobs: int = 1) -> MetricsTable:
    if mode not in ABLATIONS:
        raise ValueError(f"unknown ablation {mode!r}")
    return aggregate(harness.run(mode, problems, jobs))


# ----------------------------------------------------------------- reports


def _pct(x: float) -> str:
    return f"{100 * x:.2f}%"


def emit_report(table: MetricsTable, fmt: str = "text") -> bytes:
    if fmt == "json":
        return json.dumps(table.to_dict(), indent=2, sort_keys=True).encode("utf-8")
    if fmt == "csv":
        buf = io.StringIO()
        fields = ["method", "difficulty", "success_rate", "reward_mean", "reward_sd",
                  "optimality_rate", "avg_tokens", "n_trials"]
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in table.to_dict()["cells"]:
            writer.writerow(row)
        return buf.getvalue().encode("utf-8")
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")

    cols = ["Success Rate", "Reward Avg", "SD", "Attaining Optimality", "Avg Tokens Used"]
    header1 = ["Method"] + [c for c in cols for _ in DIFFICULTIES]
    header2 = ["Problem Difficulty"] + [d.capitalize() for _ in cols for d in DIFFICULTIES]
    rows = []
    for m in table.methods():
        row = [METHOD_LABELS.get(m, m)]
        for getter in (
            lambda c: _pct(c.success_rate),
            lambda c: f"{c.reward_mean:.2f}",
            lambda c: f"{c.reward_sd:.2f}",
            lambda c: _pct(c.optimality_rate),
            lambda c: f"{c.avg_tokens:,.0f}",
        ):
            for d in DIFFICULTIES:
                cell = table.cells.get((m, d))
                row.append(getter(cell) if cell else "-")
        rows.append(row)
    widths = [max(len(r[i]) for r in [header1, header2, *rows]) for i in range(len(header1))]
    fmt_row = lambda r: "  ".join(v.rjust(w) if i else v.ljust(w) for i, (v, w) in enumerate(zip(r, widths)))
    rule = "-" * len(fmt_row(header1))
    lines = [fmt_row(header1), fmt_row(header2), rule, *map(fmt_row, rows)]
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_report(data: bytes) -> MetricsTable:
    return MetricsTable.from_dict(json.loads(data))
