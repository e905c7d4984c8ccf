"""Reward aggregation and group-relative advantage normalization."""
from __future__ import annotations

import math
from typing import Mapping, Sequence

from ..errors import ConfigError, DataError

#: default reward dimensions for weighted aggregation
REWARD_DIMENSIONS = ("requirement", "correctness", "innovation")


def check_weights(weights: Mapping[str, float]) -> dict[str, float]:
    """Validate simplex weights: nonnegative, summing to 1."""
    if not weights:
        raise ConfigError("weights must be nonempty")
    for key, value in weights.items():
        if value < 0:
            raise ConfigError(f"weight {key}={value} is negative")
    total = sum(weights.values())
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"weights must sum to 1, got {total}")
    return dict(weights)


def weighted_reward(scores: Mapping[str, float], weights: Mapping[str, float]) -> float:
    """Dot product of dimension scores with simplex weights."""
    checked = check_weights(weights)
    if set(scores) != set(checked):
        raise DataError(
            f"score keys {sorted(scores)} do not match weight keys {sorted(checked)}"
        )
    for key, value in scores.items():
        if not 0 <= value <= 10:
            raise DataError(f"score {key}={value} is outside [0, 10]")
    return sum(scores[key] * checked[key] for key in checked)


def grpo_advantages(rewards: Sequence[float]) -> list[float]:
    """Center and scale a reward group: (r - mean) / population std.

    A zero-variance group has no preference signal and maps to all
    zeros rather than dividing by zero.
    """
    if not rewards:
        raise DataError("cannot normalize an empty reward group")
    n = len(rewards)
    mean = sum(rewards) / n
    variance = sum((r - mean) ** 2 for r in rewards) / n
    if variance == 0.0:
        return [0.0] * n
    std = math.sqrt(variance)
    return [(r - mean) / std for r in rewards]
