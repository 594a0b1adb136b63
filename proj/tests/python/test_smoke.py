import os

import pytest

import hybridcep

FIXTURES = os.environ.get("HCEP_FIXTURE_DIR", os.path.join(os.path.dirname(__file__), "..", "fixtures"))


def fixture(name):
    return os.path.join(FIXTURES, name)


@pytest.fixture
def reactor():
    return hybridcep.load_model(fixture("reactor.json"))


def test_model_properties(reactor):
    assert reactor.constraint_ids == ["1", "2", "3"]
    assert reactor.enforcement == "prevent"


def test_invalid_model_raises():
    with pytest.raises(hybridcep.EngineError):
        hybridcep.compile_model('{"variables": [')


def test_case_cooling_in_time(reactor):
    case = hybridcep.Case(reactor, "py")
    case.signal("temp", 85, 10)
    out = case.watermark(20)
    assert any(o["type"] == "status" and o["status"] == "ACTIVATION" and o["ts"] == 20 for o in out)
    result = case.task("StartCooling", 22.5)
    assert result["accepted"]
    assert any(o.get("status") == "FULFILLMENT" for o in result["outputs"])
    assert case.status()["constraints"][1]["state"] == "Fulfilled"


def test_precedence_rejection(reactor):
    case = hybridcep.Case(reactor)
    case.signal("temp", 45, 10)
    result = case.task("Restart", 24, {"userId": 3})
    assert not result["accepted"]
    assert result["reasons"][0]["reason"] == "precedence not satisfied"


def test_replay_and_check(reactor):
    with open(fixture("overheating.ndjson"), encoding="utf-8") as f:
        text = f.read()
    lines = hybridcep.replay(reactor, text)
    assert lines[-1]["type"] == "summary"
    assert lines[-1]["constraints"][0]["state"] == "PermanentlyViolated"
    verdicts = hybridcep.check(reactor, text)[0]["verdicts"]
    assert verdicts[0]["outcome"] == "permanentlyViolated"


def test_bench_short():
    report = hybridcep.bench(rate=100, duration=1, cases=2)
    assert report["runs"][0]["lost"] == 0
