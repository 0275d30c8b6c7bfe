"""Seeded stand-in for the LLM, for experiments that must run offline.

Each reply is a pure function of ``(seed, role_tag, canonical request hash)``.
Prompts carry a latent quality ``q`` in [0, 1] (a seeded hash of the prompt
text); the scorer reports ``floor(11 q)`` and the code writer produces a
correct segment with a probability that grows with ``q``.  Code is real
Python that solves the power-allocation problem, so the sandbox and graders
run unmodified against it.
"""

from __future__ import annotations

import hashlib
import math

from .benchgen import extract_parameters, spec_from_text, solve_ground_truth
from .gateway import LlmRequest, LlmResponse, approx_tokens, canonical_hash, kind_suffixes, parse_sections

_LEADS = (
    "Write Python code that implements the following requirement:",
    "Translate this statement into precise Python code:",
    "Add code to the script that captures this part of the problem:",
    "Implement the following in Python with clearly named variables:",
    "Extend the solver script so that it reflects this statement:",
    "Model this part of the optimization problem in Python:",
)
_CANDIDATES = 8
_STEER_PROB = 0.75


def _normalize(text: str) -> str:
    return " ".join(text.split())


class SyntheticBackend:
    name = "synthetic"

    def __init__(
        self,
        seed: int = 0,
        error_scale: float = 1.0,
        revise_fix: tuple[float, float] = (0.5, 0.2),
    ) -> None:
        if not 0 <= error_scale <= 1:
            raise ValueError("error_scale must be in [0, 1]")
        self.seed = seed
        self.error_scale = error_scale
        self.revise_fix = revise_fix
        self._suffixes = kind_suffixes()

    # --------------------------------------------------------------- basics

    def _u(self, *parts: object) -> float:
        raw = "|".join([str(self.seed), *map(str, parts)]).encode("utf-8")
        return int.from_bytes(hashlib.sha256(raw).digest()[:8], "big") / 2.0**64

    def quality(self, prompt: str) -> float:
        return self._u("quality", _normalize(prompt))

    def _good_prob(self, base: float) -> float:
        return 1.0 - self.error_scale * (1.0 - base)

    def complete(self, request: LlmRequest) -> LlmResponse:
        key = canonical_hash(request)
        sections = parse_sections(request.user_text)
        text = getattr(self, f"_{request.role_tag}")(sections, key)
        prompt_side = "".join(t for _, t in request.messages)
        return LlmResponse(text, approx_tokens(prompt_side), approx_tokens(text), self.name)

    # --------------------------------------------------------------- roles

    def _decomposer(self, s: dict[str, str], key: str) -> str:
        from .pipeline import classify_sentence

        parts = []
        for sent in _split_sentences(s.get("Problem", "")):
            head, sep, tail = sent.partition(", subject to the constraint that ")
            if sep:
                parts += [head + ".", "Constraint: " + tail]
            else:
                parts.append(sent)
        if "Mode" in s:
            return "\n".join(f"{i}. Encode in code: {p}" for i, p in enumerate(parts, 1))
        merged: list[str] = []
        for p in parts:
            if merged and classify_sentence(p) == "context" and classify_sentence(merged[-1]) == "context":
                merged[-1] += " " + p
            else:
                merged.append(p)
        return "\n".join(merged)

    def _prompt_writer(self, s: dict[str, str], key: str) -> str:
        sentence = s.get("Sentence", "")
        suffix = self._suffixes.get(s.get("Kind", "other"), self._suffixes["other"])

        def candidate(j: int) -> str:
            lead = _LEADS[int(self._u("lead", key, j) * len(_LEADS))]
            return f"{lead} {sentence} (variant {hashlib.sha256(f'{key}{j}'.encode()).hexdigest()[:6]})"

        ref = s.get("Reference instruction")
        if not ref or self._u("steer", key) >= _STEER_PROB:
            return candidate(0)
        target = self.quality(ref)
        return min(
            (candidate(j) for j in range(_CANDIDATES)),
            key=lambda c: abs(self.quality(f"{c}\n{suffix}") - target),
        )

    def _prompt_scorer(self, s: dict[str, str], key: str) -> str:
        score = min(10, math.floor(11 * self.quality(s.get("Prompt", ""))))
        verdict = "Clear and well targeted" if score >= 7 else "Usable but vague" if score >= 4 else "Confusing"
        return f"{verdict}. Rating: {score}"

    def _code_writer(self, s: dict[str, str], key: str) -> str:
        try:
            params = extract_parameters(s.get("Problem", ""))
        except ValueError:
            return 'print("powers=[]")\n'
        hard = params["difficulty"] == "hard"
        if "Feedback" in s:
            fix = self.revise_fix[1] if hard else self.revise_fix[0]
            if self._u("fix", key) < self._good_prob(fix):
                return _fenced(_base_segment(params, use_sinr=hard))
            return s.get("Code", "")
        if "Existing code" in s:
            return self._segment(s, key, params, hard)
        base = (0.3 if hard else 0.85) if "Reasoning steps" in s else (0.15 if hard else 0.75)
        if self._u("good", key) < self._good_prob(base):
            return _fenced(_base_segment(params, use_sinr=hard))
        return _fenced(_base_segment(params, use_sinr=False) + self._defect(key, sinr=hard))

    def _segment(self, s: dict[str, str], key: str, params: dict, hard: bool) -> str:
        prompt = s.get("Prompt", "")
        q = self.quality(prompt)
        base = 0.35 + 0.65 * q if hard else 0.75 + 0.25 * q
        good = self._u("good", key) < self._good_prob(base)
        about_sinr = hard and "sinr" in prompt.lower()
        if s.get("Existing code", "(none)") == "(none)":
            seg = _base_segment(params, use_sinr=False)
            return seg if good else seg + self._defect(key, sinr=False)
        if not good:
            return self._defect(key, sinr=about_sinr)
        body = "use_sinr = True\n" if about_sinr else "objective_value = sum(solve())\n"
        return body + _PRINT

    def _defect(self, key: str, sinr: bool) -> str:
        w = self._u("fail", key)
        if w < 0.45:
            return "if use_sinr\n    pass\n" + _PRINT
        if w < 0.7:
            return "total_power = sum(power_alloc)\n" + _PRINT
        return ("use_sinr = False\n" if sinr else "upper_only = True\n") + _PRINT

    def _evaluator(self, s: dict[str, str], key: str) -> str:
        from .reward import parse_powers, score_powers

        try:
            spec = spec_from_text(s.get("Problem", ""))
        except ValueError:
            return "The output could not be checked against the problem. Score: 5"
        truth = solve_ground_truth(spec)
        if not truth.feasible:
            return "The problem appears infeasible. Score: 5"
        report = score_powers(spec, truth, parse_powers(s.get("Stdout", ""), spec.n_users))
        feas = "satisfies every constraint" if report.feasible else "does not satisfy the constraints"
        return f"The script ran and its reported allocation {feas}. Score: {int(report.reward)}"

    def _feedback_writer(self, s: dict[str, str], key: str) -> str:
        stderr = s.get("Stderr", "(empty)").strip()
        if stderr and stderr != "(empty)":
            last = stderr.splitlines()[-1]
            return f"The script crashed with: {last}. Fix this error and keep the final powers line."
        return (
            f"The script runs but only scored {s.get('Reward', '?')}. Check that every SINR "
            "constraint is enforced and that total power is minimized, not clamped to the upper bound."
        )


def _split_sentences(text: str) -> list[str]:
    out, cur = [], []
    tokens = text.split()
    for i, tok in enumerate(tokens):
        cur.append(tok)
        nxt = tokens[i + 1] if i + 1 < len(tokens) else ""
        if tok.endswith((".", "!", "?")) and (not nxt or nxt[0].isupper()):
            out.append(" ".join(cur))
            cur = []
    if cur:
        out.append(" ".join(cur))
    return out


_PRINT = 'print(f"powers={solve()}")\n'


def _fenced(code: str) -> str:
    return f"```python\n{code}```\n"


def _base_segment(params: dict, use_sinr: bool) -> str:
    floor = params["sinr_floor_db"]
    return f'''import math

gains = {params["gains"]!r}
noise = {params["noise_w"]!r}
p_min, p_max = {params["p_min"]!r}, {params["p_max"]!r}
sinr_floor_db = {floor!r}
use_sinr = {use_sinr}
upper_only = False


def solve():
    n = len(gains)
    if upper_only:
        return [p_max] * n
    p = [p_min] * n
    if not use_sinr or sinr_floor_db is None:
        return p
    gamma = 10 ** (sinr_floor_db / 10)
    for _ in range(200000):
        received = [g * x for g, x in zip(gains, p)]
        total = sum(received)
        new = [max(p_min, gamma * (noise + total - r) / g) for g, r in zip(gains, received)]
        done = max(abs(a - b) for a, b in zip(new, p)) < 1e-13
        p = new
        if done or max(p) > 1e6:
            break
    return [min(x, p_max) for x in p]


{_PRINT}'''
