"""Lexical similarity: tokenization, BLEU, ROUGE, and originality.

Tokenization lowercases, keeps alphanumeric runs as single tokens,
splits CJK text into individual characters, and keeps every other
non-space symbol as its own token — so formulas like ``x^2+1`` become
``["x", "^", "2", "+", "1"]`` and compare token by token.

BLEU-n is the cumulative form: the geometric mean of modified n-gram
precisions for orders 1..n times the brevity penalty ``e^(1 - r/c)``
for candidates shorter than the reference.  No smoothing is applied —
zero overlap at any usable order gives 0.  Orders longer than both
texts are skipped so that a text always scores 1 against itself.
ROUGE-1/2 are n-gram F1 scores and ROUGE-L is the F1 of the longest
common subsequence.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from typing import Callable, Sequence

from ..errors import ConfigError, DataError

_TOKEN = re.compile(
    r"[a-z0-9]+"  # latin/digit runs
    r"|[぀-ヿ㐀-䶿一-鿿豈-﫿]"  # CJK: one char, one token
    r"|[^\sa-z0-9]"  # any other symbol stands alone
)


def tokenize(text: str) -> list[str]:
    """Lowercase and split text into comparison tokens."""
    return _TOKEN.findall(text.lower())


def _tokens(text_or_tokens: str | Sequence[str]) -> list[str]:
    if isinstance(text_or_tokens, str):
        return tokenize(text_or_tokens)
    return list(text_or_tokens)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str | Sequence[str], reference: str | Sequence[str], n: int = 4) -> float:
    """Cumulative BLEU-n of a candidate against a single reference."""
    if not 1 <= n <= 4:
        raise ConfigError(f"BLEU order must be 1..4, got {n}")
    cand = _tokens(candidate)
    ref = _tokens(reference)
    if not cand:
        return 0.0
    log_sum = 0.0
    orders_used = 0
    for k in range(1, n + 1):
        cand_grams = _ngrams(cand, k)
        ref_grams = _ngrams(ref, k)
        if not cand_grams and not ref_grams:
            continue  # neither text is long enough for this order
        total = sum(cand_grams.values())
        if total == 0:
            return 0.0  # reference has k-grams the candidate cannot match
        clipped = sum(min(count, ref_grams[gram]) for gram, count in cand_grams.items())
        if clipped == 0:
            return 0.0
        log_sum += math.log(clipped / total)
        orders_used += 1
    precision = math.exp(log_sum / orders_used) if orders_used else 0.0
    brevity = 1.0 if len(cand) >= len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return brevity * precision


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for token_a in a:
        row = [0]
        for j, token_b in enumerate(b, start=1):
            if token_a == token_b:
                row.append(prev[j - 1] + 1)
            else:
                row.append(max(prev[j], row[-1]))
        prev = row
    return prev[-1]


def _f1(overlap: float, cand_total: float, ref_total: float) -> float:
    if overlap == 0 or cand_total == 0 or ref_total == 0:
        return 0.0
    precision = overlap / cand_total
    recall = overlap / ref_total
    return 2 * precision * recall / (precision + recall)


def rouge(
    candidate: str | Sequence[str],
    reference: str | Sequence[str],
    variant: str | int = "L",
) -> float:
    """ROUGE F1: n-gram overlap for variants 1 and 2, LCS for variant L."""
    cand = _tokens(candidate)
    ref = _tokens(reference)
    if not ref:
        raise DataError("ROUGE needs a nonempty reference")
    variant = str(variant)
    if variant == "L":
        return _f1(_lcs_length(cand, ref), len(cand), len(ref))
    if variant in ("1", "2"):
        k = int(variant)
        cand_grams = _ngrams(cand, k)
        ref_grams = _ngrams(ref, k)
        if not ref_grams and not cand_grams:
            # both too short for this order: identical texts still match
            return 1.0 if cand == ref else 0.0
        overlap = sum(min(count, ref_grams[gram]) for gram, count in cand_grams.items())
        return _f1(overlap, sum(cand_grams.values()), sum(ref_grams.values()))
    raise ConfigError(f"ROUGE variant must be 1, 2 or L, got {variant!r}")


Similarity = Callable[[Sequence[str], Sequence[str]], float]


def similarity_metric(name: str) -> Similarity:
    """Look up a similarity function by name: bleu-1..4, rouge-1/2/L."""
    key = name.lower()
    if key.startswith("bleu-"):
        order = key.removeprefix("bleu-")
        if order in ("1", "2", "3", "4"):
            return lambda cand, ref: bleu(cand, ref, int(order))
    if key in ("rouge-1", "rouge-2", "rouge-l"):
        variant = name.split("-", 1)[1].upper() if key == "rouge-l" else key[-1]
        return lambda cand, ref: rouge(cand, ref, variant)
    raise ConfigError(f"unknown similarity metric {name!r}")


def originality(
    generated: Sequence[str],
    corpus: Sequence[str],
    metric: Similarity | str = "bleu-1",
) -> float:
    """Mean over generated texts of their maximum similarity to the corpus.

    Lower values mean the generated set strays further from anything in
    the corpus.
    """
    if not corpus:
        raise DataError("originality needs a nonempty corpus")
    if not generated:
        raise DataError("originality needs at least one generated text")
    fn = similarity_metric(metric) if isinstance(metric, str) else metric
    corpus_tokens = [tokenize(text) for text in corpus]
    total = 0.0
    for text in generated:
        cand = tokenize(text)
        total += max(fn(cand, ref) for ref in corpus_tokens)
    return total / len(generated)
