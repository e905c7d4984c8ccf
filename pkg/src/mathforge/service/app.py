"""FastAPI service exposing the full pipeline.

Endpoints mirror the client commands one-to-one: fit, sample,
generate, arena, metrics, decode.  The service holds no state between
requests — data arrives inline and artifacts leave in the response —
so any number of clients can share one instance.

Package errors map onto structured error bodies: data and config
problems are 400s, backend failures are 502s.
"""
from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..difficulty import NODE_ORDER, describe
from ..errors import BackendError, ConfigError, DataError, MathforgeError
from ..gateway import BackendConfig, RoleProfile, ScriptedBackend
from ..harness import (
    ArenaProtocol,
    bleu,
    bootstrap_elo,
    content_judge,
    difficulty_accuracy,
    diversity,
    llm_judge,
    mad,
    originality,
    per_dimension_entropy,
    rouge,
    round_robin_pairings,
    run_arena,
    scripted_judge,
    shannon_entropy,
    win_rate_matrix,
)
from ..loop import (
    LoopConfig,
    ProblemRequest,
    default_evaluator_profile,
    default_generator_profile,
    outcome_to_dict,
    run_with_retries,
)
from ..sampling import (
    CorpusItem,
    SamplerConfig,
    TransitionMatrix,
    crs_sample,
    daps_sample,
    fit_cooccurrence,
    fit_transition_matrix,
    rs_sample,
)
from . import schemas

app = FastAPI(title="mathforge", version="0.1.0")


@app.exception_handler(MathforgeError)
async def _package_error(request: Request, exc: MathforgeError) -> JSONResponse:
    if isinstance(exc, BackendError):
        status, kind = 502, "backend_error"
    elif isinstance(exc, ConfigError):
        status, kind = 400, "config_error"
    else:
        status, kind = 400, "data_error"
    return JSONResponse(
        status_code=status, content={"error": {"type": kind, "message": str(exc)}}
    )


@app.get("/healthz")
async def healthz() -> dict:
    return {"status": "ok"}


def _matrix_from_model(model: schemas.MatrixModel) -> TransitionMatrix:
    if tuple(model.node_order) != NODE_ORDER:
        raise DataError("matrix node_order does not match the canonical node ordering")
    P = np.array(model.P, dtype=float)
    if P.shape != (len(NODE_ORDER), len(NODE_ORDER)):
        raise DataError(f"matrix P must be {len(NODE_ORDER)}x{len(NODE_ORDER)}")
    if (P < 0).any():
        raise DataError("matrix P has negative entries")
    if not np.allclose(P.sum(axis=0), 1.0, atol=1e-9):
        raise DataError("matrix P columns do not sum to 1")
    return TransitionMatrix(P=P)


@app.post("/fit", response_model=schemas.FitResponse)
async def fit(request: schemas.FitRequest) -> schemas.FitResponse:
    corpus = [
        CorpusItem(encoding=i.encoding, chapter=i.chapter, type=i.type, text=i.text)
        for i in request.corpus
    ]
    counts = fit_cooccurrence(corpus)
    tm = fit_transition_matrix(corpus)
    sums = tm.P.sum(axis=0)
    return schemas.FitResponse(
        node_order=list(tm.node_order),
        P=tm.P.tolist(),
        node_counts={node: int(n) for node, n in zip(NODE_ORDER, counts.N)},
        total=counts.total,
        column_sums_ok=bool(np.allclose(sums, 1.0, atol=1e-9)),
    )


@app.post("/sample", response_model=schemas.SampleResponse)
async def sample(request: schemas.SampleRequest) -> schemas.SampleResponse:
    rng = np.random.default_rng(request.seed)
    sigma = request.sigma
    records: list[schemas.SampleRecord] = []
    total_generated = 0
    total_accepted = 0
    if request.method == "daps":
        if request.level is None:
            raise ConfigError("daps sampling needs a target level")
        if request.matrix is None:
            raise ConfigError("daps sampling needs a fitted matrix")
        tm = _matrix_from_model(request.matrix)
        cfg = SamplerConfig(
            batch_size=request.batch_size,
            max_attempt_rounds=request.max_attempt_rounds,
            rng_seed=request.seed,
        )
        for _ in range(request.count):
            encoding, report = daps_sample(
                tm, request.level, rng=rng, bands=request.bands, sigma=sigma, config=cfg
            )
            info = describe(encoding, sigma)
            total_generated += report.candidates_generated
            total_accepted += report.accepted_count
            records.append(
                schemas.SampleRecord(
                    encoding=encoding,
                    difficulty=info["difficulty"],
                    level=info["level"],
                    rounds_used=report.rounds_used,
                    alpha_estimate=report.alpha_estimate,
                )
            )
    else:
        rules = [tuple(rule) for rule in (request.rules or [])]
        if request.method == "crs" and request.rules is None:
            raise ConfigError("crs sampling needs a rules list (may be empty)")
        for _ in range(request.count):
            if request.method == "rs":
                encoding = rs_sample(rng)
            else:
                encoding = crs_sample(rules, rng)
            info = describe(encoding, sigma)
            records.append(
                schemas.SampleRecord(
                    encoding=encoding, difficulty=info["difficulty"], level=info["level"]
                )
            )
    encodings = [r.encoding for r in records]
    summary = schemas.SampleSummary(
        count=len(records),
        entropy=shannon_entropy(encodings),
        diversity=diversity(encodings),
        alpha_estimate=(total_accepted / total_generated) if total_generated else None,
    )
    return schemas.SampleResponse(samples=records, summary=summary)


def _backend_from_model(model: schemas.BackendModel) -> BackendConfig:
    return BackendConfig(
        base_url=model.base_url,
        model_name=model.model,
        credential_env=model.credential_env,
        timeout=model.timeout,
        max_retries=model.max_retries,
        backoff=model.backoff,
    )


def _profile_from_model(model: schemas.ProfileModel | None, system_prompt: str) -> RoleProfile:
    if model is None:
        return RoleProfile(system_prompt=system_prompt)
    return RoleProfile(
        system_prompt=system_prompt,
        temperature=model.temperature,
        top_p=model.top_p,
        top_k=model.top_k,
        max_output_tokens=model.max_output_tokens,
    )


@app.post("/generate")
async def generate(request: schemas.GenerateRequest) -> dict:
    tm = _matrix_from_model(request.matrix)
    loop_config = LoopConfig(
        tau_max=request.tau_max,
        thresholds=request.thresholds or LoopConfig().thresholds,
        mode=request.mode,
        retry_budget=request.retry_budget,
        history_cycles=request.history_cycles,
    )
    sampler_config = SamplerConfig(
        batch_size=request.batch_size,
        max_attempt_rounds=request.max_attempt_rounds,
        rng_seed=request.seed,
    )
    problem_request = ProblemRequest(
        chapter=request.chapter, level=request.level, type=request.type
    )

    if request.mock is not None and request.backends:
        raise ConfigError("pass either mock scripts or live backends, not both")
    if request.mock is not None:
        generator_backend = ScriptedBackend(request.mock.generator)
        evaluator_backend = ScriptedBackend(request.mock.evaluator)
        clock = lambda: 0.0  # noqa: E731 - fixed clock keeps mock artifacts reproducible
    else:
        if not request.backends or "generator" not in request.backends:
            raise ConfigError("live generation needs a generator backend (or mock scripts)")
        generator_backend = _backend_from_model(request.backends["generator"])
        evaluator_role = "expert" if request.mode == "expert" else "evaluator"
        if request.mode == "expert" and evaluator_role not in request.backends:
            raise ConfigError("expert mode needs an expert backend")
        if evaluator_role in request.backends:
            evaluator_backend = _backend_from_model(request.backends[evaluator_role])
        else:
            evaluator_backend = generator_backend
        clock = None

    profiles = request.profiles or {}
    templates = request.templates
    gen_profile = (
        _profile_from_model(
            profiles["generator"], default_generator_profile(templates).system_prompt
        )
        if "generator" in profiles
        else default_generator_profile(templates)
    )
    eval_role = "expert" if request.mode == "expert" else "evaluator"
    eval_profile = (
        _profile_from_model(
            profiles[eval_role], default_evaluator_profile(templates).system_prompt
        )
        if eval_role in profiles
        else default_evaluator_profile(templates)
    )

    outcome = run_with_retries(
        problem_request,
        generator_backend,
        evaluator_backend,
        tm,
        rng=np.random.default_rng(request.seed),
        bands=request.bands,
        sigma=request.sigma,
        config=loop_config,
        sampler_config=sampler_config,
        generator_profile=gen_profile,
        evaluator_profile=eval_profile,
        templates=templates,
        clock=clock,
    )
    return outcome_to_dict(problem_request, outcome, request.sigma)


@app.post("/arena", response_model=schemas.ArenaResponse)
async def arena(request: schemas.ArenaRequest) -> schemas.ArenaResponse:
    judge_model = request.judge
    if judge_model.mode == "scripted":
        if not judge_model.verdicts:
            raise ConfigError("scripted judge needs a verdicts list")
        judge = scripted_judge(judge_model.verdicts, cycle=judge_model.cycle)
    elif judge_model.mode == "prefer_content":
        if not judge_model.marker:
            raise ConfigError("prefer_content judge needs a marker")
        judge = content_judge(judge_model.marker)
    else:
        if judge_model.backend is None:
            raise ConfigError("http judge needs a backend")
        judge = llm_judge(_backend_from_model(judge_model.backend))

    pairings = round_robin_pairings(
        [(m.name, m.texts) for m in request.models],
        rounds=request.rounds,
        dimension=request.dimension,
    )
    protocol = ArenaProtocol(
        k_factor=request.k_factor,
        initial_rating=request.initial_rating,
        retry_cap=request.retry_cap,
    )
    state, records = run_arena(pairings, judge, protocol)

    names = [m.name for m in request.models]
    ratings = {name: state.rating(name) for name in names}
    if records:
        boot = bootstrap_elo(
            records,
            request.resamples,
            np.random.default_rng(request.seed),
            k_factor=request.k_factor,
            initial_rating=request.initial_rating,
        )
        bootstrap = schemas.BootstrapModel(
            median=boot["median"],
            q1=boot["q1"],
            q3=boot["q3"],
            samples=boot["samples"] if request.include_samples else None,
        )
    else:
        flat = {name: request.initial_rating for name in names}
        bootstrap = schemas.BootstrapModel(median=flat, q1=dict(flat), q3=dict(flat))
    return schemas.ArenaResponse(
        ratings=ratings,
        win_rate_matrix=win_rate_matrix(records),
        bootstrap=bootstrap,
        match_log=[
            schemas.MatchRecordModel(
                match_id=r.match_id,
                model_a=r.model_a,
                model_b=r.model_b,
                dimension=r.dimension,
                s_a=r.outcome,
                swap_consistent=r.swap_consistent,
            )
            for r in records
        ],
    )


@app.post("/metrics", response_model=schemas.MetricsResponse)
async def metrics(request: schemas.MetricsRequest) -> schemas.MetricsResponse:
    accuracy = difficulty_accuracy(request.truth, request.predicted)
    mad_value = mad(request.truth, request.predicted)
    if request.encodings:
        entropy = shannon_entropy(request.encodings)
        per_dim = dict(per_dimension_entropy(request.encodings))
    else:
        entropy = shannon_entropy(list(request.predicted))
        per_dim = None
    originality_model = None
    if request.generated_texts is not None:
        if not request.corpus_texts:
            raise DataError("originality needs corpus_texts alongside generated_texts")
        gen, corpus = request.generated_texts, request.corpus_texts
        originality_model = schemas.OriginalityModel(
            bleu={
                str(n): originality(gen, corpus, lambda c, r, n=n: bleu(c, r, n))
                for n in (1, 2, 3, 4)
            },
            rouge={
                variant: originality(gen, corpus, lambda c, r, v=variant: rouge(c, r, v))
                for variant in ("1", "2", "L")
            },
        )
    return schemas.MetricsResponse(
        accuracy=accuracy,
        mad=mad_value,
        entropy=entropy,
        per_dimension_entropy=per_dim,
        originality=originality_model,
    )


@app.post("/decode", response_model=schemas.DecodeResponse)
async def decode(request: schemas.DecodeRequest) -> schemas.DecodeResponse:
    info = describe(request.encoding, request.sigma)
    return schemas.DecodeResponse(
        encoding=info["encoding"],
        difficulty=info["difficulty"],
        level=info["level"],
        factors=[schemas.FactorModel(**factor) for factor in info["factors"]],
    )
