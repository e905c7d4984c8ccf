"""Pairwise arena with position-swap judging.

Judges favor whichever answer they read first often enough to matter,
so every pairing is judged twice with the presentation order reversed.
Only verdicts that agree across both orders count as a decision; a
disagreeing pair is re-judged up to a retry cap and then recorded as a
draw.  Ratings are updated sequentially in match order, so a fixed
judge and pairing list always produce the same final ratings.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Callable, Sequence

from ..errors import ConfigError, DataError
from ..gateway import Backend, ChatTurn, RoleProfile, complete
from .elo import INITIAL_RATING, K_FACTOR, EloState, MatchRecord, elo_update

#: verdicts a judge may return about the two texts it was shown
VERDICTS = ("first", "second", "tie")

#: judge callable: (text shown first, text shown second, dimension) -> verdict
Judge = Callable[[str, str, str], str]


@dataclass(frozen=True)
class Pairing:
    """One match to judge: two models and the texts they produced."""

    model_a: str
    model_b: str
    content_a: str
    content_b: str
    dimension: str = "Overall"

    def __post_init__(self) -> None:
        if self.model_a == self.model_b:
            raise DataError(f"a model cannot play itself ({self.model_a!r})")


@dataclass(frozen=True)
class ArenaProtocol:
    k_factor: float = K_FACTOR
    initial_rating: float = INITIAL_RATING
    retry_cap: int = 2

    def __post_init__(self) -> None:
        if self.retry_cap < 0:
            raise ConfigError(f"retry_cap must be >= 0, got {self.retry_cap}")


def _outcome_for_a(verdict: str, a_was_first: bool) -> float:
    """Map a positional verdict onto A's score."""
    if verdict not in VERDICTS:
        raise DataError(f"judge verdict must be one of {VERDICTS}, got {verdict!r}")
    if verdict == "tie":
        return 0.5
    if (verdict == "first") == a_was_first:
        return 1.0
    return 0.0


def judge_with_swap(pairing: Pairing, judge: Judge, retry_cap: int) -> tuple[float, bool]:
    """Judge one pairing in both presentation orders.

    Returns (A's outcome, swap_consistent).  Disagreement between the
    two orders triggers a full re-judge, up to ``retry_cap`` extra
    attempts; if every attempt disagrees the match is a draw.
    """
    for _ in range(retry_cap + 1):
        forward = _outcome_for_a(
            judge(pairing.content_a, pairing.content_b, pairing.dimension), True
        )
        reverse = _outcome_for_a(
            judge(pairing.content_b, pairing.content_a, pairing.dimension), False
        )
        if forward == reverse:
            return forward, True
    return 0.5, False


def run_arena(
    pairings: Sequence[Pairing],
    judge: Judge,
    protocol: ArenaProtocol | None = None,
) -> tuple[EloState, list[MatchRecord]]:
    """Judge every pairing under the swap protocol and rate the models.

    Ratings update in pairing order; records carry 1-based match ids in
    the same order.
    """
    proto = protocol or ArenaProtocol()
    models = {m for p in pairings for m in (p.model_a, p.model_b)}
    if pairings and len(models) < 2:
        raise DataError("an arena needs at least two distinct models")
    state = EloState(k_factor=proto.k_factor, initial_rating=proto.initial_rating)
    records: list[MatchRecord] = []
    for match_id, pairing in enumerate(pairings, start=1):
        outcome, consistent = judge_with_swap(pairing, judge, proto.retry_cap)
        record = MatchRecord(
            model_a=pairing.model_a,
            model_b=pairing.model_b,
            outcome=outcome,
            dimension=pairing.dimension,
            swap_consistent=consistent,
            match_id=match_id,
        )
        state = elo_update(state, record)
        records.append(record)
    return state, records


def scripted_judge(verdicts: Sequence[str], cycle: bool = False) -> Judge:
    """A judge that replays a fixed verdict list (optionally cycling)."""
    if not verdicts:
        raise ConfigError("scripted judge needs at least one verdict")
    for v in verdicts:
        if v not in VERDICTS:
            raise ConfigError(f"verdict must be one of {VERDICTS}, got {v!r}")
    queue = list(verdicts)
    position = {"next": 0}

    def judge(first: str, second: str, dimension: str) -> str:
        i = position["next"]
        if i >= len(queue) and not cycle:
            raise DataError("scripted judge ran out of verdicts")
        position["next"] = i + 1
        return queue[i % len(queue)]

    return judge


def content_judge(marker: str) -> Judge:
    """A position-independent judge that prefers texts containing a marker."""
    if not marker:
        raise ConfigError("content judge needs a nonempty marker")

    def judge(first: str, second: str, dimension: str) -> str:
        in_first = marker in first
        in_second = marker in second
        if in_first and not in_second:
            return "first"
        if in_second and not in_first:
            return "second"
        return "tie"

    return judge


JUDGE_SYSTEM_PROMPT = """\
You compare two answers to the same task and pick the better one on a
single named dimension. Reply with exactly one word: "first" if the
first answer is better, "second" if the second is better, or "tie" if
neither is clearly better."""

_VERDICT_WORD = re.compile(r"\b(first|second|tie)\b")


def llm_judge(backend: Backend, profile: RoleProfile | None = None) -> Judge:
    """A judge backed by a chat-completion model.

    The model sees the two texts in presentation order (the swap
    protocol supplies both orders) and must answer first/second/tie;
    an answer containing none of those words is a data error.
    """
    judge_profile = profile or RoleProfile(system_prompt=JUDGE_SYSTEM_PROMPT)

    def judge(first: str, second: str, dimension: str) -> str:
        prompt = (
            f"Dimension: {dimension}\n\n"
            f"First answer:\n{first}\n\n"
            f"Second answer:\n{second}\n\n"
            'Which answer is better on this dimension? Reply "first", "second" or "tie".'
        )
        reply = complete(judge_profile, backend, [ChatTurn("user", prompt)])
        match = _VERDICT_WORD.search(reply.lower())
        if match is None:
            raise DataError(f"judge reply has no verdict: {reply[:120]!r}")
        return match.group(1)

    return judge


def round_robin_pairings(
    models: Sequence[tuple[str, Sequence[str]]],
    rounds: int,
    dimension: str = "Overall",
) -> list[Pairing]:
    """All unordered model pairs, ``rounds`` times over.

    Round r pairs each model's ``texts[r % len(texts)]``, so multi-text
    models rotate through their outputs across rounds.
    """
    names = [name for name, _ in models]
    if len(set(names)) != len(names):
        raise DataError("model names must be unique")
    pairings = []
    for r in range(rounds):
        for i in range(len(models)):
            for j in range(i + 1, len(models)):
                name_a, texts_a = models[i]
                name_b, texts_b = models[j]
                if not texts_a or not texts_b:
                    raise DataError(f"model {name_a if not texts_a else name_b!r} has no texts")
                pairings.append(
                    Pairing(
                        model_a=name_a,
                        model_b=name_b,
                        content_a=texts_a[r % len(texts_a)],
                        content_b=texts_b[r % len(texts_b)],
                        dimension=dimension,
                    )
                )
    return pairings


def records_to_jsonl(records: Sequence[MatchRecord]) -> str:
    """Render match records as the JSON-lines match log."""
    lines = [
        json.dumps(
            {
                "match_id": r.match_id,
                "model_a": r.model_a,
                "model_b": r.model_b,
                "dimension": r.dimension,
                "s_a": r.outcome,
                "swap_consistent": r.swap_consistent,
            }
        )
        for r in records
    ]
    return "\n".join(lines) + ("\n" if lines else "")
