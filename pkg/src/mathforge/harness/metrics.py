"""Difficulty-control and diversity metrics.

Accuracy is the exact-match rate between true and estimated difficulty
levels; MAD is the mean absolute difference of the level ordinals
(1..4), so it weighs how far off the misses are.  Diversity is Shannon
entropy in bits over the empirical distribution of samples, computable
over whole encodings or per dimension.
"""
from __future__ import annotations

import math
from collections import Counter
from typing import Hashable, Mapping, Sequence

from ..difficulty import DIMENSION_ORDER, LEVEL_NAMES, parse_encoding
from ..errors import DataError

_LEVEL_CODES = {name: i + 1 for i, name in enumerate(LEVEL_NAMES)}


def coerce_levels(values: Sequence) -> list[int]:
    """Normalize level names or ordinals to the 1..4 integer coding."""
    out = []
    for value in values:
        if isinstance(value, str):
            if value not in _LEVEL_CODES:
                raise DataError(
                    f"unknown difficulty level {value!r}; expected one of {LEVEL_NAMES}"
                )
            out.append(_LEVEL_CODES[value])
        elif isinstance(value, int) and not isinstance(value, bool) and 1 <= value <= 4:
            out.append(value)
        else:
            raise DataError(f"difficulty level must be 1..4 or a band name, got {value!r}")
    return out


def _check_pair(truth: Sequence, estimated: Sequence) -> tuple[list[int], list[int]]:
    if len(truth) != len(estimated):
        raise DataError(
            f"length mismatch: {len(truth)} truth values vs {len(estimated)} estimates"
        )
    if not truth:
        raise DataError("cannot score zero items")
    return coerce_levels(truth), coerce_levels(estimated)


def difficulty_accuracy(truth: Sequence, estimated: Sequence) -> float:
    """Fraction of items whose estimated level exactly matches the truth."""
    y, y_hat = _check_pair(truth, estimated)
    return sum(a == b for a, b in zip(y, y_hat)) / len(y)


def mad(truth: Sequence, estimated: Sequence) -> float:
    """Mean absolute difference between true and estimated level ordinals."""
    y, y_hat = _check_pair(truth, estimated)
    return sum(abs(a - b) for a, b in zip(y, y_hat)) / len(y)


def shannon_entropy(samples: Sequence[Hashable]) -> float:
    """Entropy in bits of the empirical distribution of the samples."""
    if not samples:
        raise DataError("cannot take the entropy of zero samples")
    counts = Counter(samples)
    total = len(samples)
    return -sum((c / total) * math.log2(c / total) for c in counts.values())


def per_dimension_entropy(encodings: Sequence[str]) -> Mapping[str, float]:
    """Entropy of each dimension's level distribution across encodings."""
    if not encodings:
        raise DataError("cannot take the entropy of zero samples")
    levels = [parse_encoding(e) for e in encodings]
    return {
        dim: shannon_entropy([lv[dim] for lv in levels]) for dim in DIMENSION_ORDER
    }


def diversity(samples: Sequence[Hashable]) -> float:
    """Distinct-value ratio of a sample set: unique samples / total."""
    if not samples:
        raise DataError("cannot take the diversity of zero samples")
    return len(set(samples)) / len(samples)
