import pytest

from gpta import (
    FinetuneError,
    MetricKind,
    TransportError,
    collect,
    finetune,
    freeze,
    generate,
    init_params,
    seed_history,
    synth_generate,
    train_pass,
)
from gpta.remote import RemoteClient
from gpta.ta import remote_handle, render_generation_request

from mock_openai import MockOpenAIServer
from test_ta import finetune_file, make_mp


def make_client(server, **kwargs) -> RemoteClient:
    defaults = dict(
        base_url=server.base_url,
        api_key="test-key",
        timeout=5.0,
        backoff_base=0.01,
        poll_interval=0.01,
        finetune_timeout=5.0,
    )
    defaults.update(kwargs)
    return RemoteClient(**defaults)


class TestGenerate:
    def test_single_chat_call_with_auth(self):
        with MockOpenAIServer(completions=["alpha one\nbeta two"]) as server:
            handle = remote_handle(make_client(server), "base-model")
            request = render_generation_request(make_mp(), _history(), 2, 1.0)
            out = generate(handle, request, 2, 1.0)
            assert out == ["alpha one", "beta two"]
            chats = server.requests_for("/v1/chat/completions")
            assert len(chats) == 1
            assert chats[0].headers["Authorization"] == "Bearer test-key"
            body = chats[0].json()
            assert body["model"] == "base-model"
            assert body["temperature"] == 1.0
            assert [m["role"] for m in body["messages"]] == ["system", "user"]

    def test_history_lines_ordered_in_request(self):
        with MockOpenAIServer() as server:
            handle = remote_handle(make_client(server), "base-model")
            request = render_generation_request(make_mp(), _history(), 1, 1.0)
            generate(handle, request, 1, 1.0)
            user = server.requests_for("/v1/chat/completions")[0].json()["messages"][1]
            scores = [
                float(line.rsplit("SCORE: ", 1)[1])
                for line in user["content"].splitlines()
                if line.startswith("PREFIX:")
            ]
            assert scores == sorted(scores)

    def test_transport_retries_three_attempts_then_error(self):
        with MockOpenAIServer(fail_first=99) as server:
            handle = remote_handle(make_client(server), "base-model")
            request = render_generation_request(make_mp(), _history(), 1, 1.0)
            with pytest.raises(TransportError, match="3 attempts"):
                generate(handle, request, 1, 1.0)
            assert len(server.requests_for("/v1/chat/completions")) == 3
            assert handle.generation == 0  # no local mutation

    def test_recovers_within_retry_budget(self):
        with MockOpenAIServer(fail_first=2, completions=["good prefix"]) as server:
            handle = remote_handle(make_client(server), "base-model")
            request = render_generation_request(make_mp(), _history(), 1, 1.0)
            assert generate(handle, request, 1, 1.0) == ["good prefix"]
            assert len(server.requests_for("/v1/chat/completions")) == 3


class TestFinetune:
    def test_full_protocol_flow(self):
        with MockOpenAIServer(job_statuses=["running", "running", "succeeded"]) as server:
            handle = remote_handle(make_client(server), "base-model")
            data = finetune_file(["good prefix"])
            new = finetune(handle, data)

            assert new.model_id == "ft:mock-model:v1"
            assert new.generation == 1
            assert new.base_model_id == "base-model"

            uploads = server.requests_for("/v1/files")
            assert len(uploads) == 1
            assert b"fine-tune" in uploads[0].body  # multipart purpose field
            assert b"good prefix" in uploads[0].body  # the JSONL payload

            creates = server.requests_for("/v1/fine_tuning/jobs")
            creates = [r for r in creates if r.method == "POST"]
            assert len(creates) == 1
            assert creates[0].json() == {
                "model": "base-model",
                "training_file": "file-mock-1",
            }

            polls = [
                r for r in server.requests_for("/v1/fine_tuning/jobs/") if r.method == "GET"
            ]
            assert len(polls) == 3  # two running, one succeeded

    def test_job_failure_raises_without_mutation(self):
        with MockOpenAIServer(job_statuses=["failed"]) as server:
            handle = remote_handle(make_client(server), "base-model")
            with pytest.raises(FinetuneError, match="failed"):
                finetune(handle, finetune_file(["x"]))
            assert handle.model_id == "base-model"
            assert handle.generation == 0

    def test_poll_timeout(self):
        with MockOpenAIServer(job_statuses=["running"]) as server:
            handle = remote_handle(make_client(server, finetune_timeout=0.05), "base-model")
            with pytest.raises(FinetuneError, match="still"):
                finetune(handle, finetune_file(["x"]))

    def test_from_base_lineage_always_tunes_base(self):
        with MockOpenAIServer() as server:
            handle = remote_handle(make_client(server), "base-model", lineage="from_base")
            tuned = finetune(handle, finetune_file(["x"]))
            tuned = finetune(tuned, finetune_file(["y"]))
            creates = [
                r
                for r in server.requests_for("/v1/fine_tuning/jobs")
                if r.method == "POST"
            ]
            assert [c.json()["model"] for c in creates] == ["base-model", "base-model"]
            assert tuned.generation == 2

    def test_continual_lineage_chains_models(self):
        with MockOpenAIServer() as server:
            handle = remote_handle(make_client(server), "base-model")
            tuned = finetune(handle, finetune_file(["x"]))
            finetune(tuned, finetune_file(["y"]))
            creates = [
                r
                for r in server.requests_for("/v1/fine_tuning/jobs")
                if r.method == "POST"
            ]
            assert [c.json()["model"] for c in creates] == [
                "base-model",
                "ft:mock-model:v1",
            ]


class TestCollectOverRemote:
    def test_one_chat_call_per_round(self):
        frozen, data = _scored_world()
        completions = [
            "alpha step one\nalpha step two\nalpha step three",
            "beta move one\nbeta move two\nbeta move three",
        ]
        with MockOpenAIServer(completions=completions) as server:
            handle = remote_handle(make_client(server), "base-model")
            h0 = seed_history(frozen, data, MetricKind.ACCURACY)
            h, rounds = collect(
                handle, make_mp(), frozen, data, MetricKind.ACCURACY, h0, k=7, l=3
            )
            assert len(h) == 7
            assert len(rounds) == 2
            assert len(server.requests_for("/v1/chat/completions")) == 2


def _history():
    from gpta import ScoredPrefix
    from gpta.history import PrefixHistory, insert_sorted

    h = PrefixHistory()
    for prefix, score in (("mid", 0.5), ("low", 0.1), ("high", 0.9)):
        h = insert_sorted(h, ScoredPrefix(prefix=prefix, score=score))
    return h


def _scored_world():
    data = synth_generate(2, 30, 60, 0.1, 5)
    p = init_params(512, 2)
    p, _ = train_pass(p, data, "alpha", 0.1, shuffle_seed=1)
    return freeze(p), data
