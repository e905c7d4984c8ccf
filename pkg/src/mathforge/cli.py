"""Command-line client for the pipeline service.

Every subcommand is a thin wrapper over one service endpoint: the
client reads local files, sends their content inline, and writes the
response back to disk.  By default the service runs in-process, so no
server needs to be started; ``--server URL`` switches to a remote
instance, and ``serve`` starts one.

Exit codes: 0 success (session completed where relevant), 3 session
terminated by the cycle cap, 4 configuration error, 5 backend error,
6 data error.  argparse reserves 2 for usage errors.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import httpx

from .config import AppConfig, load_config
from .difficulty import use_factor_table
from .errors import BackendError, ConfigError, DataError, MathforgeError
from .loop import TEMPLATE_STEMS
from .sampling import load_corpus

EXIT_OK = 0
EXIT_TERMINATED = 3
EXIT_CONFIG = 4
EXIT_BACKEND = 5
EXIT_DATA = 6

IN_PROCESS = "in-process"


def make_client(server: str | None):
    """An httpx-compatible client: in-process app or remote base URL."""
    if server:
        return httpx.Client(base_url=server, timeout=httpx.Timeout(600.0, connect=10.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def call_service(client, path: str, payload: dict) -> dict:
    """POST one request and map error bodies back onto package errors."""
    try:
        response = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        raise BackendError(f"cannot reach the service: {exc}") from exc
    if response.status_code == 200:
        return response.json()
    try:
        body = response.json()
    except json.JSONDecodeError:
        raise BackendError(
            f"service returned HTTP {response.status_code}: {response.text[:200]}"
        ) from None
    error = body.get("error") if isinstance(body, dict) else None
    if isinstance(error, dict):
        message = error.get("message", "service error")
        kind = error.get("type")
        if kind == "config_error":
            raise ConfigError(message)
        if kind == "backend_error":
            raise BackendError(message)
        raise DataError(message)
    if response.status_code == 422:
        raise DataError(f"invalid request: {json.dumps(body.get('detail'))[:300]}")
    raise BackendError(f"service returned HTTP {response.status_code}")


def write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_json(path: str | Path, what: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {what} {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: {what} is not valid JSON: {exc}") from exc


def _matrix_payload(args, config: AppConfig) -> dict:
    path = getattr(args, "matrix", None) or config.paths.get("matrix")
    if not path:
        raise ConfigError("a fitted matrix is needed: pass --matrix or set paths.matrix")
    matrix = read_json(path, "matrix artifact")
    if not isinstance(matrix, dict) or "node_order" not in matrix or "P" not in matrix:
        raise DataError(f"{path}: matrix artifact must carry node_order and P")
    return {"node_order": matrix["node_order"], "P": matrix["P"]}


def _seed(args, config: AppConfig) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    return config.sampler.rng_seed


def _templates_payload(config: AppConfig) -> dict[str, str] | None:
    directory = config.paths.get("templates")
    if not directory:
        return None
    templates = {}
    for stem in TEMPLATE_STEMS:
        candidate = Path(directory) / f"{stem}.txt"
        if candidate.exists():
            templates[stem] = candidate.read_text(encoding="utf-8")
    return templates or None


def cmd_fit(args, config: AppConfig, client) -> int:
    corpus_path = args.corpus or config.paths.get("corpus")
    if not corpus_path:
        raise ConfigError("a corpus is needed: pass --corpus or set paths.corpus")
    items = load_corpus(corpus_path)
    if not items:
        raise DataError(f"{corpus_path}: corpus is empty")
    payload = {
        "corpus": [
            {"encoding": i.encoding, "chapter": i.chapter, "type": i.type, "text": i.text}
            for i in items
        ]
    }
    result = call_service(client, "/fit", payload)
    write_json(args.out, {"node_order": result["node_order"], "P": result["P"]})
    for node, count in result["node_counts"].items():
        print(f"{node}: {count}")
    print(f"items: {result['total']}")
    print(f"column sums ok: {str(result['column_sums_ok']).lower()}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_sample(args, config: AppConfig, client) -> int:
    payload = {
        "method": args.method,
        "count": args.count,
        "seed": _seed(args, config),
        "sigma": config.sigma,
        "bands": config.bands,
        "batch_size": config.sampler.batch_size,
        "max_attempt_rounds": config.sampler.max_attempt_rounds,
    }
    if args.method == "daps":
        if not args.level:
            raise ConfigError("daps sampling needs --level")
        payload["level"] = args.level
        payload["matrix"] = _matrix_payload(args, config)
    elif args.method == "crs":
        rules_path = args.rules or config.paths.get("rules")
        if not rules_path:
            raise ConfigError("crs sampling needs --rules or paths.rules")
        rules = read_json(rules_path, "rules file")
        if not isinstance(rules, list):
            raise DataError(f"{rules_path}: rules must be a JSON list of node pairs")
        payload["rules"] = rules
    result = call_service(client, "/sample", payload)
    lines = [json.dumps(record) for record in result["samples"]]
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    summary = result["summary"]
    print(json.dumps(summary))
    if args.summary:
        write_json(args.summary, summary)
    return EXIT_OK


def cmd_generate(args, config: AppConfig, client) -> int:
    payload = {
        "chapter": args.chapter,
        "level": args.level,
        "type": args.type,
        "mode": args.mode or config.loop.mode,
        "seed": _seed(args, config),
        "matrix": _matrix_payload(args, config),
        "sigma": config.sigma,
        "bands": config.bands,
        "tau_max": args.tau_max if args.tau_max is not None else config.loop.tau_max,
        "thresholds": dict(config.loop.thresholds),
        "retry_budget": (
            args.retry_budget if args.retry_budget is not None else config.loop.retry_budget
        ),
        "history_cycles": config.loop.history_cycles,
        "batch_size": config.sampler.batch_size,
        "max_attempt_rounds": config.sampler.max_attempt_rounds,
        "templates": _templates_payload(config),
    }
    if args.mock:
        scripts = read_json(args.mock, "mock script file")
        if (
            not isinstance(scripts, dict)
            or "generator" not in scripts
            or "evaluator" not in scripts
        ):
            raise DataError(f"{args.mock}: mock scripts need generator and evaluator lists")
        payload["mock"] = {
            "generator": scripts["generator"],
            "evaluator": scripts["evaluator"],
        }
    else:
        mode = payload["mode"]
        backends = {}
        for role in ("generator", "evaluator", "expert"):
            if config.backends.get(role):
                section = config.backends[role]
                backends[role] = {
                    "base_url": section["base_url"],
                    "model": section["model"],
                    "credential_env": section.get("credential_env"),
                    "timeout": section.get("timeout", 60.0),
                    "max_retries": section.get("max_retries", 2),
                    "backoff": section.get("backoff", 0.5),
                }
        if "generator" not in backends:
            raise ConfigError("live generation needs a generator backend (or --mock)")
        if mode == "expert" and "expert" not in backends:
            raise ConfigError("expert mode needs an expert backend in the config")
        payload["backends"] = backends
        if config.profiles:
            payload["profiles"] = {
                role: overrides for role, overrides in config.profiles.items() if overrides
            }
    transcript = call_service(client, "/generate", payload)
    write_json(args.out, transcript)
    print(f"state: {transcript['state']}  encoding: {transcript['encoding']}")
    print(f"\nProblem:\n{transcript['final_problem']}")
    print(f"\nSolution:\n{transcript['final_solution']}")
    print(f"\nwrote {args.out}")
    return EXIT_OK if transcript["state"] == "completed" else EXIT_TERMINATED


def cmd_arena(args, config: AppConfig, client) -> int:
    models_raw = read_json(args.models, "models file")
    if not isinstance(models_raw, list):
        raise DataError(f"{args.models}: models file must be a JSON list")
    models = []
    for entry in models_raw:
        if not isinstance(entry, dict) or "name" not in entry:
            raise DataError(f"{args.models}: each model needs a name")
        texts = entry.get("texts") or ([entry["text"]] if entry.get("text") else None)
        if not texts:
            raise DataError(f"{args.models}: model {entry['name']!r} needs text(s)")
        models.append({"name": entry["name"], "texts": texts})

    if args.judge:
        judge = read_json(args.judge, "judge file")
        if not isinstance(judge, dict) or "mode" not in judge:
            raise DataError(f"{args.judge}: judge file needs a mode")
    else:
        section = config.backends.get("judge")
        if not section:
            raise ConfigError("an arena needs --judge or a judge backend in the config")
        judge = {
            "mode": "http",
            "backend": {
                "base_url": section["base_url"],
                "model": section["model"],
                "credential_env": section.get("credential_env"),
                "timeout": section.get("timeout", 60.0),
                "max_retries": section.get("max_retries", 2),
                "backoff": section.get("backoff", 0.5),
            },
        }
    payload = {
        "models": models,
        "judge": judge,
        "rounds": args.rounds,
        "seed": _seed(args, config),
        "dimension": config.arena.dimension,
        "k_factor": config.arena.k_factor,
        "initial_rating": config.arena.initial_rating,
        "resamples": config.arena.resamples,
        "retry_cap": config.arena.retry_cap,
        "include_samples": args.include_samples,
    }
    result = call_service(client, "/arena", payload)
    report = {
        "ratings": result["ratings"],
        "win_rate_matrix": result["win_rate_matrix"],
        "bootstrap": result["bootstrap"],
    }
    if not args.include_samples:
        report["bootstrap"] = {
            k: v for k, v in result["bootstrap"].items() if k != "samples" or v
        }
        report["bootstrap"].pop("samples", None)
    write_json(args.out, report)
    if args.match_log:
        lines = [json.dumps(record) for record in result["match_log"]]
        Path(args.match_log).write_text(
            "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8"
        )
    for model, rating in sorted(result["ratings"].items(), key=lambda kv: -kv[1]):
        print(f"{model}: {rating:.1f}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_metrics(args, config: AppConfig, client) -> int:
    truth = read_json(args.truth, "truth file")
    predicted = read_json(args.pred, "predictions file")
    if not isinstance(truth, list) or not isinstance(predicted, list):
        raise DataError("truth and prediction files must be JSON lists of levels")
    payload: dict = {"truth": truth, "predicted": predicted}
    if args.encodings:
        encodings = read_json(args.encodings, "encodings file")
        if not isinstance(encodings, list):
            raise DataError(f"{args.encodings}: encodings file must be a JSON list")
        payload["encodings"] = encodings
    if args.generated:
        generated = read_json(args.generated, "generated-texts file")
        if not isinstance(generated, list):
            raise DataError(f"{args.generated}: generated-texts file must be a JSON list")
        corpus_path = args.corpus or config.paths.get("corpus")
        if not corpus_path:
            raise ConfigError("originality needs --corpus or paths.corpus")
        corpus_texts = [item.text for item in load_corpus(corpus_path) if item.text]
        if not corpus_texts:
            raise DataError(f"{corpus_path}: corpus has no text fields for originality")
        payload["generated_texts"] = generated
        payload["corpus_texts"] = corpus_texts
    result = call_service(client, "/metrics", payload)
    report = {
        "accuracy": result["accuracy"],
        "mad": result["mad"],
        "entropy": result["entropy"],
        "per_dimension_entropy": result.get("per_dimension_entropy"),
        "originality": result.get("originality"),
    }
    write_json(args.out, report)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_decode(args, config: AppConfig, client) -> int:
    payload = {"encoding": args.encoding, "sigma": config.sigma}
    result = call_service(client, "/decode", payload)
    if args.json:
        print(json.dumps(result, indent=2, ensure_ascii=False))
        return EXIT_OK
    print(
        f"{result['encoding']}  difficulty {result['difficulty']:.5g}  "
        f"level {result['level']}"
    )
    for factor in result["factors"]:
        print(
            f"  {factor['dimension']} {factor['factor']} ({factor['node']}, weight "
            f"{factor['weight']:g}): {factor['name']} — {factor['description']}"
        )
    return EXIT_OK


def cmd_serve(args, config: AppConfig, client) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mathforge",
        description="Difficulty-controlled math problem generation pipeline.",
    )
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument(
        "--server",
        help="base URL of a running service (default: run the service in-process)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a transition matrix from an encoded corpus")
    p.add_argument("--corpus", help="JSON-lines corpus of encodings")
    p.add_argument("--out", default="matrix.json", help="matrix artifact path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sample", help="sample difficulty encodings")
    p.add_argument("--method", choices=("daps", "rs", "crs"), default="daps")
    p.add_argument("--level", help="target band for daps (Easy/Medium/Hard/Expert)")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--matrix", help="matrix artifact (daps)")
    p.add_argument("--rules", help="forbidden-pair rules file (crs)")
    p.add_argument("--out", default="samples.jsonl", help="JSON-lines output path")
    p.add_argument("--summary", help="also write the summary JSON here")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("generate", help="run one generation session")
    p.add_argument("--chapter", required=True)
    p.add_argument("--level", required=True)
    p.add_argument("--type", required=True, help='problem type, e.g. "multiple-choice"')
    p.add_argument("--mode", choices=("apprentice", "expert"))
    p.add_argument("--matrix", help="matrix artifact path")
    p.add_argument("--mock", help="scripted replies file (offline run)")
    p.add_argument("--seed", type=int)
    p.add_argument("--tau-max", type=int, dest="tau_max")
    p.add_argument("--retry-budget", type=int, dest="retry_budget")
    p.add_argument("--out", default="transcript.json", help="session transcript path")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("arena", help="run a pairwise arena with a judge")
    p.add_argument("--models", required=True, help="JSON file of {name, texts}")
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--judge", help="judge definition file (scripted/prefer_content/http)")
    p.add_argument("--out", default="arena.json", help="arena report path")
    p.add_argument("--match-log", dest="match_log", help="also write the match log JSONL")
    p.add_argument(
        "--include-samples",
        action="store_true",
        dest="include_samples",
        help="keep raw bootstrap samples in the report",
    )
    p.set_defaults(func=cmd_arena)

    p = sub.add_parser("metrics", help="score difficulty control and originality")
    p.add_argument("--truth", required=True, help="JSON list of true levels")
    p.add_argument("--pred", required=True, help="JSON list of estimated levels")
    p.add_argument("--encodings", help="JSON list of sampled encodings (for entropy)")
    p.add_argument("--generated", help="JSON list of generated texts (for originality)")
    p.add_argument("--corpus", help="corpus with text fields (for originality)")
    p.add_argument("--out", default="metrics.json", help="metric report path")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("decode", help="explain an encoding factor by factor")
    p.add_argument("encoding")
    p.add_argument("--json", action="store_true", help="print the JSON form")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if config.paths.get("factor_table"):
            use_factor_table(config.paths["factor_table"])
        client = make_client(args.server)
        try:
            return args.func(args, config, client)
        finally:
            client.close()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MathforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
