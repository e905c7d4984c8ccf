"""Elo ratings for pairwise model comparison.

Expected score and update follow the classic logistic form:

    E_A = 1 / (1 + 10 ** ((R_B - R_A) / 400))
    R'_A = R_A + K * (S_A - E_A)

with a shared K for both sides, so every update moves equal and
opposite amounts and the total rating mass is conserved exactly.
Bootstrap confidence comes from resampling whole match records with
replacement and replaying each resample from the initial ratings.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import ConfigError, DataError

K_FACTOR = 32.0
INITIAL_RATING = 1000.0

#: The nine judged dimensions (problem and solution fluency consolidated).
JUDGE_DIMENSIONS = (
    "Requirement",
    "Correctness-P",
    "Correctness-S",
    "Fluency",
    "Optimization",
    "Coverage",
    "Innovation",
    "Computability",
    "Discrimination",
)

VALID_OUTCOMES = (1.0, 0.5, 0.0)


def check_judge_scores(scores: Mapping[str, float]) -> dict[str, float]:
    """Validate a nine-dimension judge score map."""
    missing = [d for d in JUDGE_DIMENSIONS if d not in scores]
    if missing:
        raise DataError(f"judge scores missing dimensions {missing}")
    extra = [d for d in scores if d not in JUDGE_DIMENSIONS]
    if extra:
        raise DataError(f"judge scores have unknown dimensions {extra}")
    for dim, value in scores.items():
        if not 0 <= value <= 10:
            raise DataError(f"judge score {dim}={value} is outside [0, 10]")
    return dict(scores)


@dataclass(frozen=True)
class MatchRecord:
    """One judged pairing: A's score is 1 (win), 0.5 (draw) or 0 (loss)."""

    model_a: str
    model_b: str
    outcome: float
    dimension: str = "Overall"
    swap_consistent: bool = True
    match_id: int = 0

    def __post_init__(self) -> None:
        if self.outcome not in VALID_OUTCOMES:
            raise DataError(f"outcome must be one of {VALID_OUTCOMES}, got {self.outcome}")
        if self.model_a == self.model_b:
            raise DataError(f"a model cannot play itself ({self.model_a!r})")


@dataclass(frozen=True)
class EloState:
    ratings: Mapping[str, float] = field(default_factory=dict)
    k_factor: float = K_FACTOR
    initial_rating: float = INITIAL_RATING

    def __post_init__(self) -> None:
        if self.k_factor <= 0:
            raise ConfigError(f"k_factor must be positive, got {self.k_factor}")

    def rating(self, model: str) -> float:
        return float(self.ratings.get(model, self.initial_rating))


def expected_score(r_a: float, r_b: float) -> float:
    """Probability-like expected score of A against B."""
    return 1.0 / (1.0 + 10.0 ** ((r_b - r_a) / 400.0))


def elo_update(state: EloState, record: MatchRecord) -> EloState:
    """Apply one match result, returning the new state.

    Unseen models enter at the initial rating.  A single delta is added
    to A and subtracted from B, so the rating sum is conserved exactly.
    """
    r_a = state.rating(record.model_a)
    r_b = state.rating(record.model_b)
    delta = state.k_factor * (record.outcome - expected_score(r_a, r_b))
    ratings = dict(state.ratings)
    ratings[record.model_a] = r_a + delta
    ratings[record.model_b] = r_b - delta
    return EloState(
        ratings=ratings, k_factor=state.k_factor, initial_rating=state.initial_rating
    )


def replay(records: Sequence[MatchRecord], state: EloState | None = None) -> EloState:
    """Fold a record sequence over elo_update from a starting state."""
    current = state or EloState()
    for record in records:
        current = elo_update(current, record)
    return current


def win_rate_matrix(records: Sequence[MatchRecord]) -> dict[str, dict[str, float]]:
    """Pairwise win rate with ties split evenly.

    Entry [A][B] is (wins + 0.5 * ties) / matches of A against B; pairs
    that never met have no entry.
    """
    wins: dict[tuple[str, str], float] = {}
    counts: dict[tuple[str, str], int] = {}
    for record in records:
        key = (record.model_a, record.model_b)
        wins[key] = wins.get(key, 0.0) + record.outcome
        counts[key] = counts.get(key, 0) + 1
        rev = (record.model_b, record.model_a)
        wins[rev] = wins.get(rev, 0.0) + (1.0 - record.outcome)
        counts[rev] = counts.get(rev, 0) + 1
    matrix: dict[str, dict[str, float]] = {}
    for (a, b), n in counts.items():
        matrix.setdefault(a, {})[b] = wins[(a, b)] / n
    return matrix


def bootstrap_elo(
    records: Sequence[MatchRecord],
    resamples: int,
    rng: np.random.Generator,
    *,
    k_factor: float = K_FACTOR,
    initial_rating: float = INITIAL_RATING,
) -> dict:
    """Bootstrap the final ratings by resampling match records.

    Each resample draws ``len(records)`` records with replacement and
    replays them from the initial ratings in drawn order.  Returns
    per-model medians, quartiles and the raw samples.
    """
    if not records:
        raise DataError("cannot bootstrap zero match records")
    if resamples < 1:
        raise ConfigError(f"resamples must be >= 1, got {resamples}")
    models = sorted({m for r in records for m in (r.model_a, r.model_b)})
    samples: dict[str, list[float]] = {m: [] for m in models}
    base = EloState(k_factor=k_factor, initial_rating=initial_rating)
    for _ in range(resamples):
        draw = rng.integers(len(records), size=len(records))
        state = replay([records[i] for i in draw], base)
        for model in models:
            samples[model].append(state.rating(model))
    q1, median, q3 = {}, {}, {}
    for model in models:
        lo, mid, hi = np.percentile(samples[model], [25, 50, 75])
        q1[model], median[model], q3[model] = float(lo), float(mid), float(hi)
    return {"median": median, "q1": q1, "q3": q3, "samples": samples}
