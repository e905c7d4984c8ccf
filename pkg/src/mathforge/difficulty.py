"""Difficulty encoding model.

A problem's difficulty is described by eight factor dimensions (A..H).
Each dimension takes one discrete level, and the 21 dimension-level
pairs ("nodes") are identified by ids like ``"C3"``.  A full encoding
fixes one level per dimension and is written as the 16-character string
of its node ids in dimension order, e.g. ``"A1B2C1D1E2F1G1H2"``.

The scalar difficulty coefficient is the weighted mean of the selected
levels' weights:

    D(x) = (1/8) * sum_i sigma_i * w_i

with per-dimension scale factors ``sigma`` (all 1.0 by default).  With
default weights and scales D ranges over [1.0, 2.625]; that range is
split into four equal-width bands named Easy, Medium, Hard and Expert,
the last band closed at the top.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .errors import ConfigError, DataError, EncodingError

DIMENSION_ORDER = "ABCDEFGH"
LEVEL_COUNTS = {"A": 3, "B": 2, "C": 4, "D": 2, "E": 3, "F": 2, "G": 2, "H": 3}

#: All 21 node ids in canonical order: A1, A2, A3, B1, ..., H3.
NODE_ORDER = tuple(
    f"{dim}{level}"
    for dim in DIMENSION_ORDER
    for level in range(1, LEVEL_COUNTS[dim] + 1)
)
NODE_INDEX = {node: i for i, node in enumerate(NODE_ORDER)}

N_DIMENSIONS = len(DIMENSION_ORDER)
N_NODES = len(NODE_ORDER)
N_ENCODINGS = 1728  # product of the per-dimension level counts

LEVEL_NAMES = ("Easy", "Medium", "Hard", "Expert")


@dataclass(frozen=True)
class FactorNode:
    """One dimension-level pair from the factor table."""

    node_id: str
    dimension: str
    level: int
    weight: float
    name: str
    description: str


def _load_table() -> dict:
    raw = resources.files("mathforge.data").joinpath("difficulty_factors.json")
    return json.loads(raw.read_text(encoding="utf-8"))


_TABLE = _load_table()

FACTOR_TABLE_VERSION: int = _TABLE["version"]

#: node id -> FactorNode, loaded from the bundled factor table.
FACTOR_NODES: dict[str, FactorNode] = {
    node_id: FactorNode(
        node_id=node_id,
        dimension=entry["dimension"],
        level=entry["level"],
        weight=float(entry["weight"]),
        name=entry["name"],
        description=entry["description"],
    )
    for node_id, entry in _TABLE["nodes"].items()
}

#: dimension letter -> {"name": ..., "summary": ...}
DIMENSION_INFO: dict[str, dict] = _TABLE["dimensions"]


def node_weight_vector() -> np.ndarray:
    """Factor weights of all 21 nodes, in canonical node order."""
    return np.array([FACTOR_NODES[node].weight for node in NODE_ORDER])


def use_factor_table(source: str | Path | Mapping) -> None:
    """Replace the active factor table (names, descriptions, weights).

    The replacement must describe exactly the canonical 21 nodes; only
    the wording and weights may differ from the bundled table.  Call
    before building matrices or running sessions — the swap takes
    effect for all subsequent difficulty computations.
    """
    global FACTOR_TABLE_VERSION
    if isinstance(source, (str, Path)):
        try:
            table = json.loads(Path(source).read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataError(f"cannot read factor table {source}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"{source}: invalid JSON: {exc}") from exc
    else:
        table = dict(source)
    nodes = table.get("nodes")
    if not isinstance(nodes, dict) or set(nodes) != set(NODE_ORDER):
        raise DataError("factor table must define exactly the canonical 21 nodes")
    if "version" not in table:
        raise DataError("factor table must carry a version field")
    dims = table.get("dimensions")
    if not isinstance(dims, dict) or set(dims) != set(DIMENSION_ORDER):
        raise DataError("factor table must describe all 8 dimensions")
    parsed: dict[str, FactorNode] = {}
    for node_id, entry in nodes.items():
        dim, level = node_id[0], int(node_id[1])
        if entry.get("dimension") != dim or entry.get("level") != level:
            raise DataError(f"node {node_id!r} has inconsistent dimension/level fields")
        weight = entry.get("weight")
        if not (isinstance(weight, (int, float)) and weight > 0):
            raise DataError(f"node {node_id!r} needs a positive weight, got {weight!r}")
        name, description = entry.get("name"), entry.get("description")
        if not name or not description:
            raise DataError(f"node {node_id!r} needs a name and a description")
        parsed[node_id] = FactorNode(
            node_id=node_id, dimension=dim, level=level,
            weight=float(weight), name=name, description=description,
        )
    FACTOR_NODES.clear()
    FACTOR_NODES.update(parsed)
    DIMENSION_INFO.clear()
    DIMENSION_INFO.update(dims)
    FACTOR_TABLE_VERSION = table["version"]


def parse_encoding(text: str) -> dict[str, int]:
    """Parse an encoding string into a ``{dimension: level}`` mapping.

    The string must contain exactly one node id per dimension, in
    canonical dimension order, with no separators — 16 characters
    total.  Raises :class:`EncodingError` describing the first problem
    found (bad length, unexpected dimension, level out of range).
    """
    if not isinstance(text, str):
        raise EncodingError(f"encoding must be a string, got {type(text).__name__}")
    if len(text) != 2 * N_DIMENSIONS:
        raise EncodingError(
            f"encoding {text!r} has length {len(text)}, expected {2 * N_DIMENSIONS}"
        )
    levels: dict[str, int] = {}
    for i, dim in enumerate(DIMENSION_ORDER):
        chunk = text[2 * i : 2 * i + 2]
        if chunk[0] != dim:
            raise EncodingError(
                f"encoding {text!r}: expected dimension {dim!r} at position {2 * i}, "
                f"found {chunk[0]!r}"
            )
        if not chunk[1].isdigit():
            raise EncodingError(f"encoding {text!r}: level {chunk[1]!r} is not a digit")
        level = int(chunk[1])
        if not 1 <= level <= LEVEL_COUNTS[dim]:
            raise EncodingError(
                f"encoding {text!r}: dimension {dim} has levels 1..{LEVEL_COUNTS[dim]}, "
                f"got {level}"
            )
        levels[dim] = level
    return levels


def format_encoding(levels: Mapping[str, int]) -> str:
    """Format a ``{dimension: level}`` mapping as the canonical string."""
    missing = [d for d in DIMENSION_ORDER if d not in levels]
    if missing:
        raise EncodingError(f"encoding is missing dimensions {missing}")
    extra = [d for d in levels if d not in LEVEL_COUNTS]
    if extra:
        raise EncodingError(f"encoding has unknown dimensions {extra}")
    parts = []
    for dim in DIMENSION_ORDER:
        level = levels[dim]
        if not 1 <= level <= LEVEL_COUNTS[dim]:
            raise EncodingError(
                f"dimension {dim} has levels 1..{LEVEL_COUNTS[dim]}, got {level}"
            )
        parts.append(f"{dim}{level}")
    return "".join(parts)


def iter_encodings() -> Iterator[str]:
    """Yield all valid encoding strings in lexicographic order."""

    def rec(i: int, prefix: str) -> Iterator[str]:
        if i == N_DIMENSIONS:
            yield prefix
            return
        dim = DIMENSION_ORDER[i]
        for level in range(1, LEVEL_COUNTS[dim] + 1):
            yield from rec(i + 1, prefix + f"{dim}{level}")

    return rec(0, "")


def encoding_nodes(encoding: str) -> list[str]:
    """Return the eight node ids selected by an encoding string."""
    levels = parse_encoding(encoding)
    return [f"{dim}{levels[dim]}" for dim in DIMENSION_ORDER]


def encoding_indices(encoding: str) -> list[int]:
    """Return the canonical indices of an encoding's eight nodes."""
    return [NODE_INDEX[node] for node in encoding_nodes(encoding)]


def _check_sigma(sigma: Mapping[str, float] | None) -> dict[str, float]:
    if sigma is None:
        return {dim: 1.0 for dim in DIMENSION_ORDER}
    out = {dim: 1.0 for dim in DIMENSION_ORDER}
    for dim, value in sigma.items():
        if dim not in LEVEL_COUNTS:
            raise ConfigError(f"sigma has unknown dimension {dim!r}")
        if not (isinstance(value, (int, float)) and value > 0):
            raise ConfigError(f"sigma[{dim!r}] must be a positive number, got {value!r}")
        out[dim] = float(value)
    return out


def difficulty(encoding: str, sigma: Mapping[str, float] | None = None) -> float:
    """Difficulty coefficient of an encoding.

    The mean over dimensions of ``sigma[dim] * weight(selected node)``.
    """
    scales = _check_sigma(sigma)
    levels = parse_encoding(encoding)
    total = 0.0
    for dim in DIMENSION_ORDER:
        node = FACTOR_NODES[f"{dim}{levels[dim]}"]
        total += scales[dim] * node.weight
    return total / N_DIMENSIONS


def difficulty_range(sigma: Mapping[str, float] | None = None) -> tuple[float, float]:
    """Smallest and largest difficulty reachable under the given scales."""
    scales = _check_sigma(sigma)
    lo = hi = 0.0
    for dim in DIMENSION_ORDER:
        weights = [
            FACTOR_NODES[f"{dim}{level}"].weight
            for level in range(1, LEVEL_COUNTS[dim] + 1)
        ]
        lo += scales[dim] * min(weights)
        hi += scales[dim] * max(weights)
    return lo / N_DIMENSIONS, hi / N_DIMENSIONS


def band_edges(sigma: Mapping[str, float] | None = None) -> list[float]:
    """The five boundaries of the four equal-width difficulty bands."""
    lo, hi = difficulty_range(sigma)
    width = (hi - lo) / len(LEVEL_NAMES)
    return [lo + i * width for i in range(len(LEVEL_NAMES))] + [hi]


def band(value: float, sigma: Mapping[str, float] | None = None) -> str:
    """Name of the band containing a difficulty value.

    Bands are half-open ``[edge, next_edge)`` except the last, which is
    closed at the top so the maximum difficulty is Expert.
    """
    edges = band_edges(sigma)
    if value < edges[0] or value > edges[-1]:
        raise EncodingError(
            f"difficulty {value} is outside [{edges[0]}, {edges[-1]}]"
        )
    for i, name in enumerate(LEVEL_NAMES):
        if value < edges[i + 1]:
            return name
    return LEVEL_NAMES[-1]


def level_of(encoding: str, sigma: Mapping[str, float] | None = None) -> str:
    """Band name of an encoding (Easy, Medium, Hard or Expert)."""
    return band(difficulty(encoding, sigma), sigma)


def level_index(name: str) -> int:
    """Ordinal of a band name: Easy=1 .. Expert=4."""
    try:
        return LEVEL_NAMES.index(name) + 1
    except ValueError:
        raise EncodingError(f"unknown difficulty level {name!r}") from None


def describe(encoding: str, sigma: Mapping[str, float] | None = None) -> dict:
    """Full human-readable breakdown of an encoding, for display.

    Returns the encoding, its difficulty and band, and one entry per
    dimension with the factor name and the selected level's name,
    weight and description.
    """
    levels = parse_encoding(encoding)
    value = difficulty(encoding, sigma)
    factors = []
    for dim in DIMENSION_ORDER:
        node = FACTOR_NODES[f"{dim}{levels[dim]}"]
        factors.append(
            {
                "dimension": dim,
                "factor": DIMENSION_INFO[dim]["name"],
                "node": node.node_id,
                "level": node.level,
                "weight": node.weight,
                "name": node.name,
                "description": node.description,
            }
        )
    return {
        "encoding": format_encoding(levels),
        "difficulty": value,
        "level": band(value, sigma),
        "factors": factors,
    }
