"""Request/response models for the HTTP service.

The service is stateless: every request carries its own data (corpus
rows, matrices, scripts) inline, and every artifact comes back in the
response body.  File handling belongs to the client.
"""
from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field

from ..difficulty import N_NODES


class CorpusItemModel(BaseModel):
    encoding: str
    chapter: Optional[str] = None
    type: Optional[str] = None
    text: Optional[str] = None


class MatrixModel(BaseModel):
    node_order: list[str] = Field(min_length=N_NODES, max_length=N_NODES)
    P: list[list[float]]


class FitRequest(BaseModel):
    corpus: list[CorpusItemModel]


class FitResponse(BaseModel):
    node_order: list[str]
    P: list[list[float]]
    node_counts: dict[str, int]
    total: int
    column_sums_ok: bool


class SampleRequest(BaseModel):
    method: Literal["daps", "rs", "crs"]
    count: int = Field(default=1, ge=1, le=1_000_000)
    seed: int = 0
    level: Optional[str] = None
    matrix: Optional[MatrixModel] = None
    rules: Optional[list[tuple[str, str]]] = None
    sigma: Optional[dict[str, float]] = None
    bands: Optional[list[float]] = None
    batch_size: int = Field(default=64, ge=1)
    max_attempt_rounds: int = Field(default=100, ge=1)


class SampleRecord(BaseModel):
    encoding: str
    difficulty: float
    level: str
    rounds_used: Optional[int] = None
    alpha_estimate: Optional[float] = None


class SampleSummary(BaseModel):
    count: int
    entropy: float
    diversity: float
    alpha_estimate: Optional[float] = None


class SampleResponse(BaseModel):
    samples: list[SampleRecord]
    summary: SampleSummary


class BackendModel(BaseModel):
    base_url: str
    model: str
    credential_env: Optional[str] = None
    timeout: float = 60.0
    max_retries: int = 2
    backoff: float = 0.5


class ProfileModel(BaseModel):
    temperature: float = 0.2
    top_p: float = 0.7
    top_k: int = 20
    max_output_tokens: int = 4096


class MockScripts(BaseModel):
    generator: list[str]
    evaluator: list[str]


class GenerateRequest(BaseModel):
    chapter: str
    level: str
    type: str
    mode: Literal["apprentice", "expert"] = "apprentice"
    seed: int = 0
    matrix: MatrixModel
    sigma: Optional[dict[str, float]] = None
    bands: Optional[list[float]] = None
    tau_max: int = Field(default=5, ge=1)
    thresholds: Optional[dict[str, float]] = None
    retry_budget: int = Field(default=2, ge=0)
    history_cycles: int = Field(default=2, ge=0)
    batch_size: int = Field(default=64, ge=1)
    max_attempt_rounds: int = Field(default=100, ge=1)
    mock: Optional[MockScripts] = None
    backends: Optional[dict[str, BackendModel]] = None
    profiles: Optional[dict[str, ProfileModel]] = None
    templates: Optional[dict[str, str]] = None


class ModelEntry(BaseModel):
    name: str
    texts: list[str] = Field(min_length=1)


class JudgeModel(BaseModel):
    mode: Literal["scripted", "prefer_content", "http"]
    verdicts: Optional[list[str]] = None
    cycle: bool = True
    marker: Optional[str] = None
    backend: Optional[BackendModel] = None


class ArenaRequest(BaseModel):
    models: list[ModelEntry] = Field(min_length=2)
    judge: JudgeModel
    rounds: int = Field(default=1, ge=0)
    seed: int = 0
    dimension: str = "Overall"
    k_factor: float = Field(default=32.0, gt=0)
    initial_rating: float = 1000.0
    resamples: int = Field(default=100, ge=1)
    retry_cap: int = Field(default=2, ge=0)
    include_samples: bool = False


class MatchRecordModel(BaseModel):
    match_id: int
    model_a: str
    model_b: str
    dimension: str
    s_a: float
    swap_consistent: bool


class BootstrapModel(BaseModel):
    median: dict[str, float]
    q1: dict[str, float]
    q3: dict[str, float]
    samples: Optional[dict[str, list[float]]] = None


class ArenaResponse(BaseModel):
    ratings: dict[str, float]
    win_rate_matrix: dict[str, dict[str, float]]
    bootstrap: BootstrapModel
    match_log: list[MatchRecordModel]


class MetricsRequest(BaseModel):
    truth: list[Union[int, str]]
    predicted: list[Union[int, str]]
    encodings: Optional[list[str]] = None
    generated_texts: Optional[list[str]] = None
    corpus_texts: Optional[list[str]] = None


class OriginalityModel(BaseModel):
    bleu: dict[str, float]
    rouge: dict[str, float]


class MetricsResponse(BaseModel):
    accuracy: float
    mad: float
    entropy: float
    per_dimension_entropy: Optional[dict[str, float]] = None
    originality: Optional[OriginalityModel] = None


class DecodeRequest(BaseModel):
    encoding: str
    sigma: Optional[dict[str, float]] = None


class FactorModel(BaseModel):
    dimension: str
    factor: str
    node: str
    level: int
    weight: float
    name: str
    description: str


class DecodeResponse(BaseModel):
    encoding: str
    difficulty: float
    level: str
    factors: list[FactorModel]


class ErrorBody(BaseModel):
    type: str
    message: str


class ErrorResponse(BaseModel):
    error: ErrorBody
