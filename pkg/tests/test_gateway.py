"""Chat backend access: scripted double, HTTP retries, credentials."""
import json

import httpx
import pytest

from mathforge.errors import AuthError, BackendError, ConfigError
from mathforge.gateway import (
    DEFAULT_TEMPERATURE,
    DEFAULT_TOP_K,
    DEFAULT_TOP_P,
    BackendConfig,
    ChatTurn,
    RoleProfile,
    ScriptedBackend,
    complete,
    scripted_backend,
)

PROFILE = RoleProfile(system_prompt="terse assistant")


def ok_response(content="fine"):
    return httpx.Response(200, json={"choices": [{"message": {"content": content}}]})


def http_backend(handler, **kwargs):
    kwargs.setdefault("backoff", 0.0)
    return BackendConfig(
        base_url="http://backend.test/v1",
        model_name="unit-model",
        transport=httpx.MockTransport(handler),
        **kwargs,
    )


# ----------------------------------------------------------------- profiles


def test_role_profile_defaults():
    assert PROFILE.temperature == DEFAULT_TEMPERATURE == 0.2
    assert PROFILE.top_p == DEFAULT_TOP_P == 0.7
    assert PROFILE.top_k == DEFAULT_TOP_K == 20


def test_role_profile_validates():
    with pytest.raises(ConfigError):
        RoleProfile(system_prompt="x", temperature=-0.1)
    with pytest.raises(ConfigError):
        RoleProfile(system_prompt="x", top_p=0.0)
    with pytest.raises(ConfigError):
        RoleProfile(system_prompt="x", top_k=0)


def test_chat_turn_validates_role():
    with pytest.raises(ConfigError):
        ChatTurn("narrator", "hi")


def test_backend_config_validates():
    with pytest.raises(ConfigError):
        BackendConfig(base_url="http://x", model_name="m", max_retries=-1)
    with pytest.raises(ConfigError):
        BackendConfig(base_url="http://x", model_name="m", timeout=0)


# ----------------------------------------------------------- scripted double


def test_scripted_list_replays_in_order():
    backend = scripted_backend(["a", "b"])
    assert complete(PROFILE, backend, [ChatTurn("user", "one")]) == "a"
    assert complete(PROFILE, backend, [ChatTurn("user", "two")]) == "b"
    assert backend.calls == 2
    assert len(backend.requests) == 2


def test_scripted_exhaustion_errors():
    backend = scripted_backend(["only"])
    complete(PROFILE, backend, [ChatTurn("user", "x")])
    with pytest.raises(BackendError):
        complete(PROFILE, backend, [ChatTurn("user", "y")])


def test_scripted_table_keys_by_last_turn():
    backend = scripted_backend({"ping": "pong", "*": "fallback"})
    assert complete(PROFILE, backend, [ChatTurn("user", "ping")]) == "pong"
    assert complete(PROFILE, backend, [ChatTurn("user", "other")]) == "fallback"


def test_scripted_table_without_fallback_errors():
    backend = scripted_backend({"ping": "pong"})
    with pytest.raises(BackendError):
        complete(PROFILE, backend, [ChatTurn("user", "unknown")])


def test_scripted_records_full_turn_tuples():
    backend = scripted_backend(["r"])
    complete(PROFILE, backend, [ChatTurn("user", "q")])
    turns = backend.requests[0]
    assert turns[0].role == "system" and turns[0].content == "terse assistant"
    assert turns[-1].role == "user" and turns[-1].content == "q"


def test_scripted_rejects_empty_script():
    with pytest.raises(ConfigError):
        scripted_backend([])


def test_system_turn_not_duplicated():
    backend = scripted_backend(["r"])
    complete(PROFILE, backend, [ChatTurn("system", "custom"), ChatTurn("user", "q")])
    turns = backend.requests[0]
    assert [t.role for t in turns] == ["system", "user"]
    assert turns[0].content == "custom"


# ------------------------------------------------------------- http behavior


def test_http_payload_shape():
    captured = {}

    def handler(request):
        captured["url"] = str(request.url)
        captured["body"] = json.loads(request.content)
        return ok_response("pong")

    backend = http_backend(handler)
    reply = complete(PROFILE, backend, [ChatTurn("user", "ping")])
    assert reply == "pong"
    assert captured["url"] == "http://backend.test/v1/chat/completions"
    body = captured["body"]
    assert body["model"] == "unit-model"
    assert body["messages"] == [
        {"role": "system", "content": "terse assistant"},
        {"role": "user", "content": "ping"},
    ]
    assert body["temperature"] == 0.2
    assert body["top_p"] == 0.7
    assert body["top_k"] == 20
    assert body["stream"] is False


def test_retries_5xx_then_succeeds():
    calls = {"n": 0}

    def handler(request):
        calls["n"] += 1
        if calls["n"] < 3:
            return httpx.Response(503, text="busy")
        return ok_response()

    backend = http_backend(handler, max_retries=2)
    assert complete(PROFILE, backend, [ChatTurn("user", "x")]) == "fine"
    assert calls["n"] == 3


def test_retries_exhausted_raises_backend_error():
    def handler(request):
        return httpx.Response(500, text="down")

    backend = http_backend(handler, max_retries=1)
    with pytest.raises(BackendError) as err:
        complete(PROFILE, backend, [ChatTurn("user", "x")])
    assert "2 attempts" in str(err.value)


def test_transport_errors_retry():
    calls = {"n": 0}

    def handler(request):
        calls["n"] += 1
        if calls["n"] == 1:
            raise httpx.ConnectError("refused")
        return ok_response()

    backend = http_backend(handler, max_retries=1)
    assert complete(PROFILE, backend, [ChatTurn("user", "x")]) == "fine"
    assert calls["n"] == 2


def test_auth_failure_is_immediate():
    calls = {"n": 0}

    def handler(request):
        calls["n"] += 1
        return httpx.Response(401, text="no")

    backend = http_backend(handler, max_retries=5)
    with pytest.raises(AuthError):
        complete(PROFILE, backend, [ChatTurn("user", "x")])
    assert calls["n"] == 1


def test_client_error_no_retry():
    calls = {"n": 0}

    def handler(request):
        calls["n"] += 1
        return httpx.Response(400, text="bad request")

    backend = http_backend(handler, max_retries=5)
    with pytest.raises(BackendError):
        complete(PROFILE, backend, [ChatTurn("user", "x")])
    assert calls["n"] == 1


def test_malformed_response_body():
    def handler(request):
        return httpx.Response(200, json={"unexpected": True})

    backend = http_backend(handler)
    with pytest.raises(BackendError):
        complete(PROFILE, backend, [ChatTurn("user", "x")])


def test_non_text_content_rejected():
    def handler(request):
        return httpx.Response(200, json={"choices": [{"message": {"content": None}}]})

    backend = http_backend(handler)
    with pytest.raises(BackendError):
        complete(PROFILE, backend, [ChatTurn("user", "x")])


def test_empty_turns_rejected():
    backend = scripted_backend(["r"])
    with pytest.raises(ConfigError):
        complete(PROFILE, backend, [])


# -------------------------------------------------------------- credentials


def test_bearer_token_read_from_environment(monkeypatch):
    monkeypatch.setenv("UNIT_TEST_TOKEN", "secret-value")
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("authorization")
        return ok_response()

    backend = http_backend(handler, credential_env="UNIT_TEST_TOKEN")
    complete(PROFILE, backend, [ChatTurn("user", "x")])
    assert seen["auth"] == "Bearer secret-value"


def test_unset_credential_env_is_config_error(monkeypatch):
    monkeypatch.delenv("UNIT_TEST_TOKEN", raising=False)

    backend = http_backend(lambda request: ok_response(), credential_env="UNIT_TEST_TOKEN")
    with pytest.raises(ConfigError):
        complete(PROFILE, backend, [ChatTurn("user", "x")])


def test_no_credential_header_when_env_not_configured():
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("authorization")
        return ok_response()

    complete(PROFILE, http_backend(handler), [ChatTurn("user", "x")])
    assert seen["auth"] is None


def test_audit_log_never_contains_credentials(tmp_path, monkeypatch):
    monkeypatch.setenv("UNIT_TEST_TOKEN", "super-secret-credential")
    log = tmp_path / "audit.jsonl"

    backend = BackendConfig(
        base_url="http://backend.test/v1",
        model_name="unit-model",
        credential_env="UNIT_TEST_TOKEN",
        audit_log=str(log),
        backoff=0.0,
        transport=httpx.MockTransport(lambda request: ok_response("done")),
    )
    complete(PROFILE, backend, [ChatTurn("user", "question")])
    content = log.read_text()
    entry = json.loads(content.splitlines()[0])
    assert entry["reply"] == "done"
    assert entry["model"] == "unit-model"
    assert "super-secret-credential" not in content
    assert "UNIT_TEST_TOKEN" not in content


def test_config_repr_never_leaks_token_values(monkeypatch):
    monkeypatch.setenv("UNIT_TEST_TOKEN", "super-secret-credential")
    backend = BackendConfig(
        base_url="http://backend.test/v1",
        model_name="unit-model",
        credential_env="UNIT_TEST_TOKEN",
    )
    assert "super-secret-credential" not in repr(backend)
