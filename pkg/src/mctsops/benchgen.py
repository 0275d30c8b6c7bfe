"""Power-allocation benchmark problems and their exact optima.

Two families are generated: ``easy`` (per-user box constraints only) and
``hard`` (box constraints plus a common SINR floor for every user).  The
objective is always total transmit power.
"""

from __future__ import annotations

import itertools
import math
import random
import re
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

MAX_USERS = 4
GEN_ATTEMPTS = 100
# scripts print rounded decimals; 4-5 significant digits must still grade feasible
GRADING_EPS = 1e-4

_NUMBER_WORDS = {2: "two", 3: "three", 4: "four"}


class GenerationExhausted(RuntimeError):
    pass


@dataclass
class ProblemSpec:
    id: str
    difficulty: str
    n_users: int
    gains: list[float]
    noise_w: float
    p_min: float
    p_max: float
    sinr_floor_db: Optional[float] = None
    description: str = ""

    def __post_init__(self) -> None:
        if self.difficulty not in ("easy", "hard"):
            raise ValueError(f"unknown difficulty {self.difficulty!r}")
        if not 2 <= self.n_users <= MAX_USERS:
            raise ValueError(f"n_users must be in [2, {MAX_USERS}]")
        if len(self.gains) != self.n_users:
            raise ValueError("len(gains) != n_users")
        if any(g <= 0 for g in self.gains):
            raise ValueError("gains must be positive")
        if self.noise_w <= 0:
            raise ValueError("noise_w must be positive")
        if not 0 <= self.p_min < self.p_max:
            raise ValueError("need 0 <= p_min < p_max")
        if (self.difficulty == "hard") != (self.sinr_floor_db is not None):
            raise ValueError("sinr_floor_db must be present iff difficulty is hard")
        if not self.description:
            self.description = render_description(self)

    @property
    def gamma(self) -> Optional[float]:
        if self.sinr_floor_db is None:
            return None
        return db_to_linear(self.sinr_floor_db)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        keys = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in keys})


@dataclass
class GroundTruth:
    powers: list[float]
    objective: float
    feasible: bool
    binding: Optional[str] = None  # lower_bounds | sinr_tight | mixed


@dataclass
class Assessment:
    feasible: bool
    objective: float
    violations: list[dict] = field(default_factory=list)
    sinr_values_db: Optional[list[float]] = None


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def sinr(gains, noise_w: float, powers) -> list[float]:
    """Per-user SINR g_i p_i / (noise + sum_{j != i} g_j p_j)."""
    received = [g * p for g, p in zip(gains, powers)]
    total = sum(received)
    return [r / (noise_w + total - r) for r in received]


# ---------------------------------------------------------------- generation


def generate_problem(difficulty: str, seed: int, n_users: int = 2) -> ProblemSpec:
    if n_users < 2:
        raise ValueError("n_users must be >= 2")
    if difficulty not in ("easy", "hard"):
        raise ValueError(f"unknown difficulty {difficulty!r}")
    for attempt in range(GEN_ATTEMPTS):
        s = seed + attempt
        rng = random.Random(f"{difficulty}:{n_users}:{s}")
        gains = [round(rng.uniform(0.5, 4.0), 1) for _ in range(n_users)]
        if difficulty == "easy":
            spec = ProblemSpec(
                id=f"easy-{s}",
                difficulty="easy",
                n_users=n_users,
                gains=gains,
                noise_w=1.0,
                p_min=0.0,
                p_max=rng.choice([1.0, 1.5, 2.0]),
            )
        else:
            floor_db = round(rng.uniform(-3.0, 0.0) * 2) / 2
            spec = ProblemSpec(
                id=f"hard-{s}",
                difficulty="hard",
                n_users=n_users,
                gains=gains,
                noise_w=1.0,
                p_min=0.0,
                p_max=rng.choice([2.0, 3.0]),
                sinr_floor_db=floor_db + 0.0,  # normalizes -0.0
            )
        if solve_ground_truth(spec).feasible:
            return spec
    raise GenerationExhausted(
        f"{GEN_ATTEMPTS} consecutive infeasible draws from seed {seed}"
    )


def generate_set(difficulty: str, count: int, seed: int, n_users: int = 2) -> list[ProblemSpec]:
    """``count`` distinct problems; each draw starts past the previous one's seed."""
    out: list[ProblemSpec] = []
    s = seed
    for _ in range(count):
        spec = generate_problem(difficulty, s, n_users)
        out.append(spec)
        s = int(spec.id.rsplit("-", 1)[1]) + 1
    return out


def reference_easy_example() -> ProblemSpec:
    return ProblemSpec(
        id="easy-example", difficulty="easy", n_users=2, gains=[1.5, 1.0],
        noise_w=1.0, p_min=0.0, p_max=1.0,
    )


def reference_hard_example() -> ProblemSpec:
    return ProblemSpec(
        id="hard-example", difficulty="hard", n_users=2, gains=[3.0, 2.0],
        noise_w=1.0, p_min=0.0, p_max=2.0, sinr_floor_db=-1.5,
    )


# ----------------------------------------------------------------- rendering


def _num(x: float) -> str:
    return f"{x:g}" if float(f"{x:g}") == x else repr(float(x))


def _gain(x: float) -> str:
    return f"{x:.1f}" if round(x, 1) == x else repr(float(x))


def _join(items: list[str]) -> str:
    return ", ".join(items[:-1]) + " and " + items[-1]


def render_description(spec: ProblemSpec) -> str:
    n = spec.n_users
    gains = [_gain(g) for g in spec.gains]
    if spec.difficulty == "easy":
        count = _NUMBER_WORDS.get(n, str(n)).capitalize()
        both = "both users" if n == 2 else f"all {n} users"
        return (
            f"{count} users transmit to a base station. Each user has a channel gain "
            f"to the base station ({_join(gains)}, respectively) and experiences "
            f"background noise of {_num(spec.noise_w)} Watt. The objective is to "
            f"minimize the total transmit power of {both}, subject to the constraint "
            f"that each user's transmit power must be between {_num(spec.p_min)} and "
            f"{_num(spec.p_max)} Watt."
        )
    both = "both users" if n == 2 else f"all {n} users"
    other = "the other user" if n == 2 else "the other users"
    gain_clauses = [f"from user 1 to the base station is {gains[0]}"]
    gain_clauses += [f"from user {i + 1} to the base station is {g}" for i, g in enumerate(gains[1:], 1)]
    if n == 2:
        gain_text = f"The channel gain {gain_clauses[0]}, and {gain_clauses[1]}."
    else:
        gain_text = "The channel gain " + ", ".join(gain_clauses[:-1]) + f", and {gain_clauses[-1]}."
    return (
        f"A wireless communication network includes {n} mobile users and 1 base "
        f"station. The objective is to minimize the total transmit power used by "
        f"{both}, while ensuring quality of service. Each user transmits to the base "
        f"station and must achieve a minimum Signal-to-Interference-plus-Noise Ratio "
        f"(SINR) of {_num(spec.sinr_floor_db)} dB. The SINR for each user depends on "
        f"their respective channel gain to the base station, interference from {other}, "
        f"and a background noise power of {_num(spec.noise_w)} Watt. {gain_text} "
        f"Each user’s transmit power must lie between {_num(spec.p_min)} and "
        f"{_num(spec.p_max)} Watt."
    )


_FLOAT = r"-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?"


def extract_parameters(text: str) -> dict:
    """Recover the numeric fields of a rendered description.

    Returns a dict with ``difficulty``, ``n_users``, ``gains``, ``noise_w``,
    ``p_min``, ``p_max`` and ``sinr_floor_db``.  Raises ValueError when the
    text does not follow either template.
    """
    m_sinr = re.search(rf"\(SINR\) of ({_FLOAT}) dB", text)
    m_noise = re.search(rf"noise(?: power)? of ({_FLOAT}) Watt", text)
    m_box = re.search(rf"between ({_FLOAT}) and ({_FLOAT}) Watt", text)
    if not (m_noise and m_box):
        raise ValueError("text does not look like a power-allocation problem")
    if m_sinr:
        gains = [float(g) for g in re.findall(rf"from user \d+ to the base station is ({_FLOAT})", text)]
        difficulty = "hard"
        floor_db: Optional[float] = float(m_sinr.group(1))
    else:
        m_gains = re.search(r"channel gain to the base station \(([^)]*), respectively\)", text)
        if not m_gains:
            raise ValueError("gains not found")
        gains = [float(g) for g in re.findall(_FLOAT, m_gains.group(1))]
        difficulty = "easy"
        floor_db = None
    return {
        "difficulty": difficulty,
        "n_users": len(gains),
        "gains": gains,
        "noise_w": float(m_noise.group(1)),
        "p_min": float(m_box.group(1)),
        "p_max": float(m_box.group(2)),
        "sinr_floor_db": floor_db,
    }


def spec_from_text(text: str, problem_id: str = "parsed") -> ProblemSpec:
    return ProblemSpec(id=problem_id, description=text, **extract_parameters(text))


# ------------------------------------------------------------------- oracle


def assess(spec: ProblemSpec, powers, eps: float = GRADING_EPS) -> Assessment:
    """Check box bounds (absolute ``eps``) and SINR floors (relative ``eps``)."""
    if len(powers) != spec.n_users:
        raise ValueError(f"expected {spec.n_users} powers, got {len(powers)}")
    powers = [float(p) for p in powers]
    violations = []
    for i, p in enumerate(powers):
        if not math.isfinite(p):
            violations.append({"user": i, "constraint": "finite", "amount": math.inf})
            continue
        if p < spec.p_min - eps:
            violations.append({"user": i, "constraint": "p_min", "amount": spec.p_min - p})
        if p > spec.p_max + eps:
            violations.append({"user": i, "constraint": "p_max", "amount": p - spec.p_max})
    sinr_db = None
    if spec.gamma is not None and all(math.isfinite(p) for p in powers):
        values = sinr(spec.gains, spec.noise_w, powers)
        sinr_db = [10 * math.log10(v) if v > 0 else -math.inf for v in values]
        for i, v in enumerate(values):
            if v < spec.gamma * (1 - eps):
                violations.append({"user": i, "constraint": "sinr", "amount": spec.gamma - v})
    return Assessment(
        feasible=not violations,
        objective=sum(powers),
        violations=violations,
        sinr_values_db=sinr_db,
    )


def _constraint_rows(spec: ProblemSpec):
    """All constraints as (a, b, kind, user) meaning a . p >= b."""
    n = spec.n_users
    rows = []
    for i in range(n):
        lo = np.zeros(n)
        lo[i] = 1.0
        rows.append((lo, spec.p_min, "p_min", i))
        rows.append((-lo, -spec.p_max, "p_max", i))
    if spec.gamma is not None:
        g = np.asarray(spec.gains, dtype=float)
        for i in range(n):
            a = -spec.gamma * g
            a[i] = g[i]
            rows.append((a, spec.gamma * spec.noise_w, "sinr", i))
    return rows


def _feasible(rows, p, tol=1e-9) -> bool:
    return all(float(a @ p) >= b - tol * max(1.0, abs(b)) for a, b, _, _ in rows)


def _binding(rows, p, tol=1e-9) -> str:
    tight = {kind for a, b, kind, _ in rows if abs(float(a @ p) - b) <= tol * max(1.0, abs(b))}
    if tight <= {"p_min"}:
        return "lower_bounds"
    if tight <= {"sinr"}:
        return "sinr_tight"
    return "mixed"


def _tight_sinr_system(spec: ProblemSpec):
    g = np.asarray(spec.gains, dtype=float)
    gamma = spec.gamma
    A = -gamma * np.tile(g, (spec.n_users, 1))
    np.fill_diagonal(A, g)
    b = np.full(spec.n_users, gamma * spec.noise_w)
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return None


def _enumerate_vertices(spec: ProblemSpec, rows):
    n = spec.n_users
    best = None
    for subset in itertools.combinations(range(len(rows)), n):
        A = np.array([rows[k][0] for k in subset])
        b = np.array([rows[k][1] for k in subset])
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        p = np.linalg.solve(A, b)
        if not _feasible(rows, p):
            continue
        if best is None or p.sum() < best.sum() - 1e-12:
            best = p
    return best


def solve_ground_truth(spec: ProblemSpec) -> GroundTruth:
    """Exact minimum-total-power allocation.

    Easy problems sit at the lower box corner.  Hard problems first try the
    all-SINR-tight linear system; when that solution leaves the box (or the
    system is singular) every vertex of the feasible polytope is enumerated.
    """
    rows = _constraint_rows(spec)
    if spec.gamma is None:
        p = np.full(spec.n_users, spec.p_min)
        return GroundTruth(p.tolist(), float(p.sum()), True, "lower_bounds")
    p = _tight_sinr_system(spec)
    if p is None or not _feasible(rows, p):
        p = _enumerate_vertices(spec, rows)
    if p is None:
        return GroundTruth([], math.inf, False, None)
    return GroundTruth(p.tolist(), float(p.sum()), True, _binding(rows, p))
