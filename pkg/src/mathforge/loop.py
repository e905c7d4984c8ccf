"""Closed generation loop: sample, generate, evaluate, judge, refine.

One session turns a problem request into a problem/solution pair.  A
difficulty encoding is drawn for the requested band, decoded into a
formatted requirement, and handed to the generator role.  Each cycle
the evaluator role scores the current pair on ten dimensions against
per-dimension thresholds; the state machine then either accepts the
pair, sends score-driven suggestions back to the generator for another
cycle, or gives up once the cycle cap is reached.

The evaluator is stateless: every evaluation request contains only the
current memory snapshot (requirement, problem, solution), never any
earlier evaluator turn.  The generator, by contrast, keeps its own
recent turns so revisions stay anchored to what it wrote before.
"""
from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Mapping, Sequence

import numpy as np

from .difficulty import LEVEL_NAMES, describe
from .errors import ConfigError, DataError, GenerationParseError, ScoreParseError
from .gateway import Backend, ChatTurn, RoleProfile, complete
from .sampling import SampleReport, SamplerConfig, TransitionMatrix, daps_sample

EVALUATION_DIMENSIONS = (
    "Requirement",
    "Correctness-P",
    "Correctness-S",
    "Fluency-P",
    "Fluency-S",
    "Optimization",
    "Coverage",
    "Innovation",
    "Computability",
    "Discrimination",
)

#: Correctness and requirement adherence bind hardest by default.
DEFAULT_THRESHOLDS = {
    dim: 8.0 if dim in ("Requirement", "Correctness-P", "Correctness-S") else 6.0
    for dim in EVALUATION_DIMENSIONS
}

ACTION_OUTPUT = "output_results"
ACTION_RETURN = "return_generator"
ACTION_TERMINATED = "terminated"

STATE_COMPLETED = "completed"
STATE_TERMINATED = "terminated"

MODES = ("apprentice", "expert")


#: template stems a session uses; callers may override any subset inline.
TEMPLATE_STEMS = (
    "generator_system",
    "generator_initial",
    "generator_feedback",
    "evaluator_system",
    "evaluator_input",
)


def load_template(name: str) -> str:
    """Read one of the bundled role templates by file name."""
    return (
        resources.files("mathforge.templates").joinpath(name).read_text(encoding="utf-8")
    )


def _template(templates: Mapping[str, str] | None, stem: str) -> str:
    if templates and stem in templates:
        return templates[stem]
    return load_template(stem + ".txt")


def default_generator_profile(templates: Mapping[str, str] | None = None) -> RoleProfile:
    return RoleProfile(system_prompt=_template(templates, "generator_system"))


def default_evaluator_profile(templates: Mapping[str, str] | None = None) -> RoleProfile:
    return RoleProfile(system_prompt=_template(templates, "evaluator_system"))


@dataclass(frozen=True)
class ProblemRequest:
    """What the caller wants: a chapter, a difficulty band, a problem type."""

    chapter: str
    level: str
    type: str

    def __post_init__(self) -> None:
        if self.level not in LEVEL_NAMES:
            raise ConfigError(
                f"unknown difficulty level {self.level!r}; expected one of {LEVEL_NAMES}"
            )
        if not self.chapter or not self.type:
            raise ConfigError("chapter and type must be nonempty")


@dataclass
class SessionMemory:
    """The session's shared state: requirement, problem, solution.

    ``update`` replaces problem and solution together, so the memory
    never mixes texts from two different cycles.
    """

    requirement: str
    problem: str
    solution: str

    def update(self, problem: str, solution: str) -> None:
        if not problem or not solution:
            raise DataError("memory update needs nonempty problem and solution")
        self.problem = problem
        self.solution = solution


@dataclass(frozen=True)
class EvaluationResult:
    """Ten dimension scores plus the evaluator's revision suggestions."""

    scores: Mapping[str, float]
    problem_suggestions: str = ""
    solution_suggestions: str = ""

    def __post_init__(self) -> None:
        missing = [d for d in EVALUATION_DIMENSIONS if d not in self.scores]
        if missing:
            raise DataError(f"evaluation result is missing dimensions {missing}")
        extra = [d for d in self.scores if d not in EVALUATION_DIMENSIONS]
        if extra:
            raise DataError(f"evaluation result has unknown dimensions {extra}")
        for dim, value in self.scores.items():
            if not 0 <= value <= 10:
                raise DataError(f"score {dim}={value} is outside [0, 10]")

    @property
    def suggestions(self) -> str:
        parts = []
        if self.problem_suggestions:
            parts.append(f"Problem suggestions: {self.problem_suggestions}")
        if self.solution_suggestions:
            parts.append(f"Solution suggestions: {self.solution_suggestions}")
        return "\n".join(parts)


@dataclass(frozen=True)
class LoopConfig:
    tau_max: int = 5
    thresholds: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    mode: str = "apprentice"
    retry_budget: int = 2
    history_cycles: int = 2

    def __post_init__(self) -> None:
        if self.tau_max < 1:
            raise ConfigError(f"tau_max must be >= 1, got {self.tau_max}")
        if self.retry_budget < 0:
            raise ConfigError(f"retry_budget must be >= 0, got {self.retry_budget}")
        if self.history_cycles < 0:
            raise ConfigError(f"history_cycles must be >= 0, got {self.history_cycles}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        unknown = [d for d in self.thresholds if d not in EVALUATION_DIMENSIONS]
        if unknown:
            raise ConfigError(f"thresholds name unknown dimensions {unknown}")
        for dim, value in self.thresholds.items():
            if not 0 <= value <= 10:
                raise ConfigError(f"threshold {dim}={value} is outside [0, 10]")

    def threshold(self, dim: str) -> float:
        return float(self.thresholds.get(dim, DEFAULT_THRESHOLDS[dim]))


@dataclass(frozen=True)
class CycleRecord:
    cycle: int
    problem: str
    solution: str
    evaluation: EvaluationResult
    action: str
    duration_s: float = 0.0


@dataclass
class SessionOutcome:
    final_problem: str
    final_solution: str
    state: str
    transcript: list[CycleRecord]
    encoding: str
    difficulty: float
    level: str
    requirement: str
    mode: str
    sample_report: SampleReport
    retries_used: int = 0
    total_s: float = 0.0


def format_requirement(request: ProblemRequest, decoded: Mapping) -> str:
    """Render the requirement text the generator receives.

    Deterministic: same request and decoded profile give byte-identical
    text.  Every factor's selected level name and description appear
    verbatim, so the generator sees the full difficulty profile.
    """
    lines = [
        f"Chapter: {request.chapter}",
        f"Problem type: {request.type}",
        f"Target difficulty: {decoded['level']} (coefficient {decoded['difficulty']:.6g})",
        "Difficulty profile:",
    ]
    for factor in decoded["factors"]:
        lines.append(
            f"- {factor['factor']} ({factor['node']}), level {factor['level']}: "
            f"{factor['name']} — {factor['description']}"
        )
    return "\n".join(lines)


_SCORE_LINE = {
    dim: re.compile(rf"^\s*{re.escape(dim)}\s*:\s*([-+]?\d+(?:\.\d+)?)\s*$", re.MULTILINE)
    for dim in EVALUATION_DIMENSIONS
}
_SUGGESTION_BLOCK = re.compile(
    r"^Problem suggestions:\s*$(?P<problem>.*?)"
    r"^Solution suggestions:\s*$(?P<solution>.*)\Z",
    re.MULTILINE | re.DOTALL,
)


def parse_scores(text: str) -> EvaluationResult:
    """Extract the ten scores and suggestion sections from evaluator text.

    Noise outside the structured block is tolerated.  Raises
    :class:`ScoreParseError` with ``kind`` set to ``"block"`` (nothing
    to parse), ``"missing"`` (a dimension line is absent), or
    ``"range"`` (a score is outside [0, 10]).
    """
    if not text or not text.strip():
        raise ScoreParseError("evaluator reply is empty", kind="block")
    scores: dict[str, float] = {}
    for dim in EVALUATION_DIMENSIONS:
        match = _SCORE_LINE[dim].search(text)
        if match is None:
            raise ScoreParseError(f"no score line for {dim!r}", kind="missing")
        value = float(match.group(1))
        if not 0 <= value <= 10:
            raise ScoreParseError(f"score {dim}={value} is outside [0, 10]", kind="range")
        scores[dim] = value
    problem_sugg = solution_sugg = ""
    block = _SUGGESTION_BLOCK.search(text)
    if block:
        problem_sugg = block.group("problem").strip()
        solution_sugg = block.group("solution").strip()
    return EvaluationResult(
        scores=scores,
        problem_suggestions=problem_sugg,
        solution_suggestions=solution_sugg,
    )


_GENERATION = re.compile(
    r"^Problem:\s*(?P<problem>.*?)^Solution:\s*(?P<solution>.*)\Z",
    re.MULTILINE | re.DOTALL,
)


def parse_generation(text: str) -> tuple[str, str]:
    """Split a generator reply into its problem and solution sections."""
    if not text or not text.strip():
        raise GenerationParseError("generator reply is empty")
    match = _GENERATION.search(text)
    if match is None:
        raise GenerationParseError(
            "generator reply lacks the Problem:/Solution: sections"
        )
    problem = match.group("problem").strip()
    solution = match.group("solution").strip()
    if not problem or not solution:
        raise GenerationParseError("generator reply has an empty section")
    return problem, solution


def judge_state(result: EvaluationResult, cycle: int, config: LoopConfig) -> str:
    """Decide the loop action from the scores — a pure threshold rule.

    Accept when every dimension clears its threshold; otherwise send
    the pair back to the generator while cycles remain, and terminate
    once the cycle cap is hit.
    """
    if cycle < 1:
        raise ConfigError(f"cycle must be >= 1, got {cycle}")
    passed = all(
        result.scores[dim] >= config.threshold(dim) for dim in EVALUATION_DIMENSIONS
    )
    if passed:
        return ACTION_OUTPUT
    if cycle < config.tau_max:
        return ACTION_RETURN
    return ACTION_TERMINATED


def failing_feedback(result: EvaluationResult, config: LoopConfig) -> str:
    """Summarize which dimensions failed, with the evaluator's suggestions."""
    failing = [
        f"- {dim}: scored {result.scores[dim]:g}, needs at least {config.threshold(dim):g}"
        for dim in EVALUATION_DIMENSIONS
        if result.scores[dim] < config.threshold(dim)
    ]
    parts = ["Dimensions below threshold:"] + failing if failing else []
    if result.problem_suggestions and result.problem_suggestions.lower() != "none":
        parts.append(f"Problem suggestions: {result.problem_suggestions}")
    if result.solution_suggestions and result.solution_suggestions.lower() != "none":
        parts.append(f"Solution suggestions: {result.solution_suggestions}")
    return "\n".join(parts)


def format_feedback(
    requirement: str, suggestions: str, templates: Mapping[str, str] | None = None
) -> str:
    """Render the refinement prompt for the generator's next cycle."""
    if not suggestions or not suggestions.strip():
        raise DataError("cannot format feedback from empty suggestions")
    return _template(templates, "generator_feedback").format(
        requirement=requirement, suggestions=suggestions
    )


def _call_with_parse_retries(
    profile: RoleProfile,
    backend: Backend,
    turns: Sequence[ChatTurn],
    parser: Callable,
    retry_budget: int,
):
    attempts = 0
    while True:
        text = complete(profile, backend, list(turns))
        try:
            return text, parser(text)
        except (ScoreParseError, GenerationParseError):
            attempts += 1
            if attempts > retry_budget:
                raise


def run_session(
    request: ProblemRequest,
    generator_backend: Backend,
    evaluator_backend: Backend,
    P: TransitionMatrix,
    *,
    rng: np.random.Generator,
    bands: Sequence[float] | None = None,
    sigma: Mapping[str, float] | None = None,
    config: LoopConfig | None = None,
    sampler_config: SamplerConfig | None = None,
    generator_profile: RoleProfile | None = None,
    evaluator_profile: RoleProfile | None = None,
    templates: Mapping[str, str] | None = None,
    clock: Callable[[], float] | None = None,
) -> SessionOutcome:
    """Run one complete generation session.

    Draws an encoding for the requested band, formats the requirement,
    and iterates generate/evaluate/judge until the pair passes every
    threshold or the cycle cap terminates the session.  Apprentice and
    expert mode differ only in which backend the caller wires in as
    ``evaluator_backend``; the control flow is identical.
    """
    cfg = config or LoopConfig()
    gen_profile = generator_profile or default_generator_profile(templates)
    eval_profile = evaluator_profile or default_evaluator_profile(templates)
    tick = clock or time.perf_counter
    t_start = tick()

    encoding, report = daps_sample(
        P, request.level, rng=rng, bands=bands, sigma=sigma, config=sampler_config
    )
    decoded = describe(encoding, sigma)
    requirement = format_requirement(request, decoded)

    initial_input = _template(templates, "generator_initial").format(requirement=requirement)
    evaluator_input_template = _template(templates, "evaluator_input")

    history: list[tuple[str, str]] = []  # (user input, assistant reply) per cycle

    def generate(user_input: str) -> tuple[str, str]:
        turns = [ChatTurn("system", gen_profile.system_prompt)]
        for past_input, past_output in history[-cfg.history_cycles :]:
            turns.append(ChatTurn("user", past_input))
            turns.append(ChatTurn("assistant", past_output))
        turns.append(ChatTurn("user", user_input))
        raw, parsed = _call_with_parse_retries(
            gen_profile, generator_backend, turns, parse_generation, cfg.retry_budget
        )
        history.append((user_input, raw))
        return parsed

    def evaluate(memory: SessionMemory) -> EvaluationResult:
        # Stateless by construction: only the current memory snapshot.
        turns = [
            ChatTurn("system", eval_profile.system_prompt),
            ChatTurn(
                "user",
                evaluator_input_template.format(
                    requirement=memory.requirement,
                    problem=memory.problem,
                    solution=memory.solution,
                ),
            ),
        ]
        _, result = _call_with_parse_retries(
            eval_profile, evaluator_backend, turns, parse_scores, cfg.retry_budget
        )
        return result

    problem, solution = generate(initial_input)
    memory = SessionMemory(requirement=requirement, problem=problem, solution=solution)

    transcript: list[CycleRecord] = []
    state = STATE_TERMINATED
    cycle = 1
    while True:
        t_cycle = tick()
        result = evaluate(memory)
        action = judge_state(result, cycle, cfg)
        transcript.append(
            CycleRecord(
                cycle=cycle,
                problem=memory.problem,
                solution=memory.solution,
                evaluation=result,
                action=action,
                duration_s=tick() - t_cycle,
            )
        )
        if action == ACTION_OUTPUT:
            state = STATE_COMPLETED
            break
        if action == ACTION_TERMINATED:
            state = STATE_TERMINATED
            break
        suggestions = failing_feedback(result, cfg)
        problem, solution = generate(format_feedback(requirement, suggestions, templates))
        memory.update(problem, solution)
        cycle += 1

    return SessionOutcome(
        final_problem=memory.problem,
        final_solution=memory.solution,
        state=state,
        transcript=transcript,
        encoding=encoding,
        difficulty=decoded["difficulty"],
        level=decoded["level"],
        requirement=requirement,
        mode=cfg.mode,
        sample_report=report,
        total_s=tick() - t_start,
    )


def run_with_retries(
    request: ProblemRequest,
    generator_backend: Backend,
    evaluator_backend: Backend,
    P: TransitionMatrix,
    *,
    rng: np.random.Generator,
    bands: Sequence[float] | None = None,
    sigma: Mapping[str, float] | None = None,
    config: LoopConfig | None = None,
    sampler_config: SamplerConfig | None = None,
    generator_profile: RoleProfile | None = None,
    evaluator_profile: RoleProfile | None = None,
    templates: Mapping[str, str] | None = None,
    clock: Callable[[], float] | None = None,
) -> SessionOutcome:
    """Run a session, restarting with a fresh encoding on termination.

    Each restart consumes one unit of the retry budget and draws a new
    difficulty sample; the last session's outcome is returned with
    ``retries_used`` filled in.
    """
    cfg = config or LoopConfig()
    retries = 0
    while True:
        outcome = run_session(
            request,
            generator_backend,
            evaluator_backend,
            P,
            rng=rng,
            bands=bands,
            sigma=sigma,
            config=cfg,
            sampler_config=sampler_config,
            generator_profile=generator_profile,
            evaluator_profile=evaluator_profile,
            templates=templates,
            clock=clock,
        )
        if outcome.state == STATE_COMPLETED or retries >= cfg.retry_budget:
            outcome.retries_used = retries
            return outcome
        retries += 1


def outcome_to_dict(
    request: ProblemRequest,
    outcome: SessionOutcome,
    sigma: Mapping[str, float] | None = None,
) -> dict:
    """JSON-ready view of a session, suitable for the transcript artifact."""
    return {
        "request": {"chapter": request.chapter, "level": request.level, "type": request.type},
        "encoding": outcome.encoding,
        "difficulty": outcome.difficulty,
        "level": outcome.level,
        "decoded": describe(outcome.encoding, sigma),
        "requirement": outcome.requirement,
        "mode": outcome.mode,
        "state": outcome.state,
        "final_problem": outcome.final_problem,
        "final_solution": outcome.final_solution,
        "retries_used": outcome.retries_used,
        "sample_report": {
            "rounds_used": outcome.sample_report.rounds_used,
            "candidates_generated": outcome.sample_report.candidates_generated,
            "accepted_count": outcome.sample_report.accepted_count,
            "alpha_estimate": outcome.sample_report.alpha_estimate,
        },
        "cycles": [
            {
                "cycle": record.cycle,
                "problem": record.problem,
                "solution": record.solution,
                "scores": dict(record.evaluation.scores),
                "problem_suggestions": record.evaluation.problem_suggestions,
                "solution_suggestions": record.evaluation.solution_suggestions,
                "action": record.action,
                "duration_s": record.duration_s,
            }
            for record in outcome.transcript
        ],
        "timings": {"total_s": outcome.total_s},
    }
