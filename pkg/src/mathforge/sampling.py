"""Corpus-guided sampling of difficulty encodings.

A labeled corpus of encodings is reduced to pairwise node co-occurrence
counts, turned into a Jaccard association matrix, and column-normalized
into a transition matrix.  Encodings are then sampled by a random walk
that visits one node per dimension — at each step the walk truncates
the current transition column to the dimensions not yet visited and
renormalizes — and rejection against a target difficulty band selects
walks whose difficulty lands where requested.  Plain random sampling
(``rs_sample``) and forbidden-pair rejection sampling (``crs_sample``)
are provided as baselines.

All randomness flows through an explicit ``numpy.random.Generator``;
nothing here touches global random state.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .difficulty import (
    DIMENSION_ORDER,
    LEVEL_COUNTS,
    LEVEL_NAMES,
    N_DIMENSIONS,
    N_NODES,
    NODE_INDEX,
    NODE_ORDER,
    band_edges,
    encoding_indices,
    format_encoding,
    node_weight_vector,
    parse_encoding,
)
from .errors import ConfigError, DataError, EncodingError, SamplingError

#: dimension index (0..7) of each node, in canonical node order.
_DIM_OF_NODE = np.array(
    [DIMENSION_ORDER.index(node[0]) for node in NODE_ORDER], dtype=np.int64
)


@dataclass(frozen=True)
class CorpusItem:
    """One corpus line: an encoding plus optional metadata."""

    encoding: str
    chapter: str | None = None
    type: str | None = None
    text: str | None = None


@dataclass(frozen=True)
class CooccurrenceCounts:
    """Pairwise node co-occurrence counts over a corpus.

    ``C[i, j]`` counts corpus items containing both node i and node j
    (so ``C[i, i]`` is the occurrence count ``N[i]``), and ``total`` is
    the corpus size.
    """

    C: np.ndarray
    N: np.ndarray
    total: int


@dataclass(frozen=True)
class TransitionMatrix:
    """Column-stochastic transition matrix over the 21 nodes."""

    P: np.ndarray
    node_order: tuple[str, ...] = NODE_ORDER


@dataclass(frozen=True)
class WalkState:
    """State of a dimension-constrained walk: where it is and has been."""

    current: str
    visited_dims: frozenset[str]
    path: tuple[str, ...]


@dataclass(frozen=True)
class SamplerConfig:
    batch_size: int = 64
    max_attempt_rounds: int = 100
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not (isinstance(self.batch_size, int) and self.batch_size >= 1):
            raise ConfigError(f"batch_size must be a positive integer, got {self.batch_size!r}")
        if not (isinstance(self.max_attempt_rounds, int) and self.max_attempt_rounds >= 1):
            raise ConfigError(
                f"max_attempt_rounds must be a positive integer, got {self.max_attempt_rounds!r}"
            )


@dataclass(frozen=True)
class SampleReport:
    """Bookkeeping from one rejection-sampling run."""

    rounds_used: int
    candidates_generated: int
    accepted_count: int
    alpha_estimate: float


def load_corpus(path: str | Path) -> list[CorpusItem]:
    """Read a JSON-lines corpus of ``{"encoding": ..., ...}`` objects.

    Whitespace-only lines are skipped.  Any malformed line raises
    :class:`DataError` naming its 1-based line number.
    """
    items: list[CorpusItem] = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read corpus {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict) or "encoding" not in obj:
            raise DataError(f"{path}:{lineno}: expected an object with an 'encoding' field")
        try:
            parse_encoding(obj["encoding"])
        except EncodingError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        items.append(
            CorpusItem(
                encoding=obj["encoding"],
                chapter=obj.get("chapter"),
                type=obj.get("type"),
                text=obj.get("text"),
            )
        )
    return items


def _encodings_of(corpus: Iterable[CorpusItem | str]) -> list[str]:
    out = []
    for item in corpus:
        out.append(item if isinstance(item, str) else item.encoding)
    return out


def fit_cooccurrence(corpus: Sequence[CorpusItem | str]) -> CooccurrenceCounts:
    """Count pairwise node co-occurrences over a corpus of encodings."""
    encodings = _encodings_of(corpus)
    if not encodings:
        raise DataError("cannot fit on an empty corpus")
    X = np.zeros((len(encodings), N_NODES), dtype=np.int64)
    for row, enc in enumerate(encodings):
        X[row, encoding_indices(enc)] = 1
    C = X.T @ X
    return CooccurrenceCounts(C=C, N=np.diag(C).copy(), total=len(encodings))


def jaccard_matrix(counts: CooccurrenceCounts) -> np.ndarray:
    """Jaccard association of every node pair: C_ij / (N_i + N_j - C_ij).

    Pairs with an empty union (both nodes unseen) get association 0.
    """
    N = counts.N.astype(float)
    denom = N[:, None] + N[None, :] - counts.C
    J = np.zeros((N_NODES, N_NODES))
    np.divide(counts.C, denom, out=J, where=denom > 0)
    return J


def transition_matrix(J: np.ndarray) -> TransitionMatrix:
    """Column-normalize an association matrix into transition probabilities.

    Columns with zero total mass (nodes never seen in the corpus) fall
    back to the uniform distribution over all nodes, so every column is
    stochastic regardless of corpus coverage.
    """
    J = np.asarray(J, dtype=float)
    if J.shape != (N_NODES, N_NODES):
        raise DataError(f"association matrix must be {N_NODES}x{N_NODES}, got {J.shape}")
    mass = J.sum(axis=0)
    P = np.empty_like(J)
    for j in range(N_NODES):
        if mass[j] > 0:
            P[:, j] = J[:, j] / mass[j]
        else:
            P[:, j] = 1.0 / N_NODES
    return TransitionMatrix(P=P)


def fit_transition_matrix(corpus: Sequence[CorpusItem | str]) -> TransitionMatrix:
    """Convenience: corpus -> counts -> Jaccard -> transition matrix."""
    return transition_matrix(jaccard_matrix(fit_cooccurrence(corpus)))


def save_matrix(tm: TransitionMatrix, path: str | Path) -> None:
    """Write a transition matrix as a round-trippable JSON artifact."""
    payload = {"node_order": list(tm.node_order), "P": tm.P.tolist()}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_matrix(path: str | Path) -> TransitionMatrix:
    """Read a transition-matrix artifact, validating shape and stochasticity."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read matrix {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    if tuple(payload.get("node_order", ())) != NODE_ORDER:
        raise DataError(f"{path}: node_order does not match the canonical node ordering")
    P = np.array(payload.get("P"), dtype=float)
    if P.shape != (N_NODES, N_NODES):
        raise DataError(f"{path}: P must be {N_NODES}x{N_NODES}, got {P.shape}")
    if (P < 0).any():
        raise DataError(f"{path}: P has negative entries")
    if not np.allclose(P.sum(axis=0), 1.0, atol=1e-9):
        raise DataError(f"{path}: P columns do not sum to 1")
    return TransitionMatrix(P=P)


def start_state(node: str) -> WalkState:
    if node not in NODE_INDEX:
        raise EncodingError(f"unknown node {node!r}")
    return WalkState(current=node, visited_dims=frozenset(node[0]), path=(node,))


def walk_step(P: TransitionMatrix, state: WalkState, rng: np.random.Generator) -> WalkState:
    """Advance a walk one node, excluding already-visited dimensions.

    The current node's transition column is truncated to nodes of
    unvisited dimensions and renormalized; if the truncated column has
    zero mass the step falls back to uniform over the candidates.
    """
    if len(state.visited_dims) >= N_DIMENSIONS:
        raise SamplingError("walk already visited every dimension")
    candidates = [
        i for i, node in enumerate(NODE_ORDER) if node[0] not in state.visited_dims
    ]
    column = P.P[:, NODE_INDEX[state.current]]
    weights = column[candidates]
    total = weights.sum()
    if total > 0:
        probs = weights / total
    else:
        probs = np.full(len(candidates), 1.0 / len(candidates))
    chosen = NODE_ORDER[candidates[rng.choice(len(candidates), p=probs)]]
    return WalkState(
        current=chosen,
        visited_dims=state.visited_dims | {chosen[0]},
        path=state.path + (chosen,),
    )


def random_walk(P: TransitionMatrix, rng: np.random.Generator) -> str:
    """One full walk: uniform start node, then one step per remaining dimension.

    The visited path is standardized into canonical dimension order and
    returned as an encoding string.
    """
    state = start_state(NODE_ORDER[rng.integers(N_NODES)])
    while len(state.visited_dims) < N_DIMENSIONS:
        state = walk_step(P, state, rng)
    levels = {node[0]: int(node[1]) for node in state.path}
    return format_encoding(levels)


def random_walks(P: TransitionMatrix, n: int, rng: np.random.Generator) -> np.ndarray:
    """Run ``n`` independent walks at once.

    Returns an ``(n, 8)`` array whose column d holds the canonical node
    index chosen for dimension d.  Batch counterpart of
    :func:`random_walk` — same walk law, vectorized over walks.
    """
    if n < 1:
        raise ConfigError(f"walk count must be positive, got {n}")
    current = rng.integers(N_NODES, size=n)
    visited = np.zeros((n, N_DIMENSIONS), dtype=bool)
    chosen = np.full((n, N_DIMENSIONS), -1, dtype=np.int64)
    visited[np.arange(n), _DIM_OF_NODE[current]] = True
    chosen[np.arange(n), _DIM_OF_NODE[current]] = current
    for _ in range(N_DIMENSIONS - 1):
        weights = P.P[:, current].T.copy()  # (n, 21): row w = column of current[w]
        weights[visited[:, _DIM_OF_NODE]] = 0.0
        dead = weights.sum(axis=1) == 0.0
        if dead.any():
            # zero-mass truncated column: uniform over the allowed nodes
            allowed = ~visited[:, _DIM_OF_NODE]
            weights[dead] = allowed[dead].astype(float)
        cum = np.cumsum(weights, axis=1)
        cum /= cum[:, -1:]  # last entry becomes exactly 1.0
        u = rng.random(n)
        current = (cum < u[:, None]).sum(axis=1)
        visited[np.arange(n), _DIM_OF_NODE[current]] = True
        chosen[np.arange(n), _DIM_OF_NODE[current]] = current
    return chosen


def walk_encodings(chosen: np.ndarray) -> list[str]:
    """Render :func:`random_walks` output rows as encoding strings."""
    return ["".join(NODE_ORDER[i] for i in row) for row in chosen]


def _sigma_vector(sigma: Mapping[str, float] | None) -> np.ndarray:
    if sigma is None:
        return np.ones(N_DIMENSIONS)
    vec = np.ones(N_DIMENSIONS)
    for dim, value in sigma.items():
        if dim not in LEVEL_COUNTS:
            raise ConfigError(f"sigma has unknown dimension {dim!r}")
        if not value > 0:
            raise ConfigError(f"sigma[{dim!r}] must be positive, got {value!r}")
        vec[DIMENSION_ORDER.index(dim)] = float(value)
    return vec


def walk_difficulties(chosen: np.ndarray, sigma: Mapping[str, float] | None = None) -> np.ndarray:
    """Difficulty coefficient of each :func:`random_walks` output row."""
    sig = _sigma_vector(sigma)
    return (node_weight_vector()[chosen] * sig).sum(axis=1) / N_DIMENSIONS


def _band_interval(
    level: str,
    bands: Sequence[float] | None,
    sigma: Mapping[str, float] | None,
) -> tuple[float, float, bool]:
    """(lo, hi, closed_top) of the target band."""
    if level not in LEVEL_NAMES:
        raise ConfigError(f"unknown difficulty level {level!r}; expected one of {LEVEL_NAMES}")
    edges = list(bands) if bands is not None else band_edges(sigma)
    if len(edges) != len(LEVEL_NAMES) + 1 or sorted(edges) != list(edges):
        raise ConfigError("bands must be 5 nondecreasing edge values")
    idx = LEVEL_NAMES.index(level)
    return edges[idx], edges[idx + 1], idx == len(LEVEL_NAMES) - 1


def daps_sample(
    P: TransitionMatrix,
    level: str,
    *,
    rng: np.random.Generator,
    bands: Sequence[float] | None = None,
    sigma: Mapping[str, float] | None = None,
    config: SamplerConfig | None = None,
) -> tuple[str, SampleReport]:
    """Sample one encoding in the target band by batched walk rejection.

    Each round runs ``batch_size`` walks, keeps those whose difficulty
    falls in the band, and returns a uniform pick from the first
    nonempty accepted set.  Raises :class:`SamplingError` when
    ``max_attempt_rounds`` rounds all reject.
    """
    cfg = config or SamplerConfig()
    lo, hi, closed = _band_interval(level, bands, sigma)
    generated = 0
    accepted_total = 0
    for round_no in range(1, cfg.max_attempt_rounds + 1):
        chosen = random_walks(P, cfg.batch_size, rng)
        d = walk_difficulties(chosen, sigma)
        mask = (d >= lo) & ((d <= hi) if closed else (d < hi))
        generated += cfg.batch_size
        n_accepted = int(mask.sum())
        accepted_total += n_accepted
        if n_accepted:
            pick = rng.integers(n_accepted)
            row = chosen[np.flatnonzero(mask)[pick]]
            encoding = "".join(NODE_ORDER[i] for i in row)
            return encoding, SampleReport(
                rounds_used=round_no,
                candidates_generated=generated,
                accepted_count=accepted_total,
                alpha_estimate=accepted_total / generated,
            )
    raise SamplingError(
        f"no walk reached the {level} band [{lo}, {hi}{']' if closed else ')'} "
        f"in {cfg.max_attempt_rounds} rounds of {cfg.batch_size}"
    )


def rs_sample(rng: np.random.Generator) -> str:
    """Baseline: draw each dimension's level independently and uniformly."""
    levels = {
        dim: int(rng.integers(1, LEVEL_COUNTS[dim] + 1)) for dim in DIMENSION_ORDER
    }
    return format_encoding(levels)


def _check_rules(rules: Sequence[tuple[str, str]]) -> list[tuple[str, str]]:
    checked = []
    for rule in rules:
        if len(rule) != 2:
            raise DataError(f"forbidden-pair rule must have 2 nodes, got {rule!r}")
        a, b = rule
        for node in (a, b):
            if node not in NODE_INDEX:
                raise DataError(f"rule {rule!r} names unknown node {node!r}")
        if a[0] == b[0]:
            raise DataError(f"rule {rule!r} pairs nodes of the same dimension")
        checked.append((a, b))
    return checked


def crs_sample(
    rules: Sequence[tuple[str, str]],
    rng: np.random.Generator,
    max_attempts: int = 100_000,
) -> str:
    """Baseline: uniform draws rejected until no forbidden pair appears."""
    checked = _check_rules(rules)
    for _ in range(max_attempts):
        encoding = rs_sample(rng)
        nodes = {encoding[i : i + 2] for i in range(0, len(encoding), 2)}
        if not any(a in nodes and b in nodes for a, b in checked):
            return encoding
    raise SamplingError(f"no encoding satisfied the rules after {max_attempts} attempts")


def success_probability(alpha: float, n: int) -> float:
    """Chance that at least one of ``n`` rounds accepts, at per-round rate alpha."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must be in [0, 1], got {alpha!r}")
    if n < 0:
        raise ConfigError(f"round count must be nonnegative, got {n!r}")
    return 1.0 - (1.0 - alpha) ** n
