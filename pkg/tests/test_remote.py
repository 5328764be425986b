import logging

import httpx
import pytest

from ainav.agents import (
    AgentContext,
    AuthMissing,
    EmptyProposal,
    EndpointConfig,
    HttpStatus,
    Interpretation,
    InterpretationKind,
    RemoteBackend,
    RemoteClient,
    Timeout,
    advise,
    propose,
    remote_complete,
)
from ainav.agents.remote import ENV_KEY
from ainav.skills import Skill, SkillInvocation
from ainav.tree import SkillLevelPlan, build_tree
from ainav.world import BeliefState, ObjectKind, Pose3, World

from builders import block, box, scenario
from stub_server import Stub, serve


def config(url="http://stub.invalid/v1/chat/completions", key="test-key", **kw):
    return EndpointConfig(endpoint=url, model="stub", api_key=key, backoff_s=0.01, **kw)


@pytest.fixture
def ctx():
    objs = [box("box_1", 2.0, 1.0), box("box_2", 3.0, 2.0, size=(0.6, 0.6, 0.45)),
            block("platform_1", ObjectKind.PLATFORM, 4.5, 5.5, 0.5, 2.5, 0.5)]
    world = World.from_scenario(scenario(objs, goal=Pose3(5.0, 1.5, 0.5, 0.0)))
    return AgentContext.from_belief(BeliefState.omniscient(world))


def reply(text: str) -> httpx.Response:
    return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})


# -- transport --------------------------------------------------------------------------------


def test_missing_key_fails_before_any_request():
    calls = []
    transport = httpx.MockTransport(lambda req: calls.append(req) or reply("x"))
    with pytest.raises(AuthMissing, match=ENV_KEY):
        RemoteClient(config(key=None), transport).complete("hello")
    assert calls == []


def test_key_comes_from_the_environment():
    cfg = EndpointConfig.from_env({ENV_KEY: "abc", "AINAV_LLM_TIMEOUT_S": "5"})
    assert cfg.api_key == "abc" and cfg.timeout_s == 5.0
    assert EndpointConfig.from_env({}).api_key is None


def test_retry_after_429(caplog):
    answers = iter([httpx.Response(429), reply("fine")])
    client = RemoteClient(config(), httpx.MockTransport(lambda req: next(answers)))
    with caplog.at_level(logging.INFO, logger="ainav.agents.remote"):
        assert client.complete("hi") == "fine"
    assert client.attempts == 2
    assert [r.message for r in caplog.records] == ["attempt 1 answered 429", "attempt 2 answered 200"]


def test_non_retryable_status_surfaces():
    client = RemoteClient(config(), httpx.MockTransport(lambda req: httpx.Response(403, text="no")))
    with pytest.raises(HttpStatus) as err:
        client.complete("hi")
    assert err.value.code == 403 and client.attempts == 1


def test_retries_are_bounded():
    client = RemoteClient(config(retries=2), httpx.MockTransport(lambda req: httpx.Response(503)))
    with pytest.raises(HttpStatus):
        client.complete("hi")
    assert client.attempts == 3


def test_timeouts_raise_after_retries():
    def slow(req):
        raise httpx.ReadTimeout("too slow", request=req)

    client = RemoteClient(config(retries=1), httpx.MockTransport(slow))
    with pytest.raises(Timeout):
        client.complete("hi")
    assert client.attempts == 2


def test_request_shape():
    seen = {}

    def capture(req):
        seen["auth"] = req.headers["Authorization"]
        seen["body"] = req.read()
        return reply("ok")

    assert remote_complete(config(), "prompt text", httpx.MockTransport(capture)) == "ok"
    assert seen["auth"] == "Bearer test-key"
    assert b'"content":"prompt text"' in seen["body"].replace(b": ", b":")


# -- against the local stub server ------------------------------------------------------------


def test_stub_429_then_success():
    with serve(Stub(fail_first=1)) as stub:
        client = RemoteClient(config(stub.url))
        assert "[begin of plan]" in client.complete("Give me five different abstract plans")
    assert client.attempts == 2 and len(stub.requests) == 2


def test_propose_parses_five_golden_plans(ctx):
    with serve(Stub()) as stub:
        backend = RemoteBackend(RemoteClient(config(stub.url)))
        plans = propose(backend, ctx)
    assert len(plans) == 5
    assert plans[3].steps == (
        SkillInvocation(Skill.CLIMB, "top of platform_1"),
        SkillInvocation(Skill.NAVIGATE, "goal"),
    )
    assert backend.planning_time > 0


def test_plan_with_unknown_object_is_rejected(ctx):
    with serve(Stub(overrides={"skill_plans.txt": "unknown_id.txt"})) as stub:
        backend = RemoteBackend(RemoteClient(config(stub.url)))
        with pytest.raises(EmptyProposal, match="known objects"):
            propose(backend, ctx)


def test_remote_roles_round_trip(ctx):
    with serve(Stub()) as stub:
        backend = RemoteBackend(RemoteClient(config(stub.url)))
        plans = propose(backend, ctx)
        tree = build_tree(plans)
        scores, goals = backend.score(ctx, tree)
        pose = backend.resolve(ctx, SkillInvocation(Skill.CLIMB, "top of box_1"))
        decision = advise(backend, ctx, tree, [1], Interpretation(InterpretationKind.FAILURE, 1, "Stall"))
    assert len(scores) == len(tree) - 1
    assert (pose.x, pose.y, pose.z) == (2.0, 0.0, 0.25)
    assert decision.replan and decision.suggestions


def test_advisor_errors_keep_the_plan(ctx):
    backend = RemoteBackend(RemoteClient(config(), httpx.MockTransport(lambda req: httpx.Response(500))))
    tree = build_tree([SkillLevelPlan("plan1", (SkillInvocation(Skill.NAVIGATE, "goal"),))])
    out = advise(backend, ctx, tree, [1], Interpretation(InterpretationKind.NEW_OBJECT, "box_2", "box"))
    assert not out.replan

