"""Evaluation harness: Elo arena, difficulty metrics, lexical similarity."""
from .arena import (
    ArenaProtocol,
    Pairing,
    content_judge,
    judge_with_swap,
    llm_judge,
    records_to_jsonl,
    round_robin_pairings,
    run_arena,
    scripted_judge,
)
from .elo import (
    INITIAL_RATING,
    JUDGE_DIMENSIONS,
    K_FACTOR,
    EloState,
    MatchRecord,
    bootstrap_elo,
    check_judge_scores,
    elo_update,
    expected_score,
    replay,
    win_rate_matrix,
)
from .metrics import (
    coerce_levels,
    difficulty_accuracy,
    diversity,
    mad,
    per_dimension_entropy,
    shannon_entropy,
)
from .rewards import REWARD_DIMENSIONS, check_weights, grpo_advantages, weighted_reward
from .textsim import bleu, originality, rouge, similarity_metric, tokenize

__all__ = [
    "ArenaProtocol",
    "Pairing",
    "content_judge",
    "judge_with_swap",
    "llm_judge",
    "records_to_jsonl",
    "round_robin_pairings",
    "run_arena",
    "scripted_judge",
    "INITIAL_RATING",
    "JUDGE_DIMENSIONS",
    "K_FACTOR",
    "EloState",
    "MatchRecord",
    "bootstrap_elo",
    "check_judge_scores",
    "elo_update",
    "expected_score",
    "replay",
    "win_rate_matrix",
    "coerce_levels",
    "difficulty_accuracy",
    "diversity",
    "mad",
    "per_dimension_entropy",
    "shannon_entropy",
    "REWARD_DIMENSIONS",
    "check_weights",
    "grpo_advantages",
    "weighted_reward",
    "bleu",
    "originality",
    "rouge",
    "similarity_metric",
    "tokenize",
]
