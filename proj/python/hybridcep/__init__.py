"""Python bindings for the hybrid process execution engine."""

import json

from . import _hybridcep
from ._hybridcep import EngineError, Model

__all__ = ["EngineError", "Model", "Case", "load_model", "compile_model", "replay", "check", "bench"]


def compile_model(text):
    """Compile a model document given as JSON text or a dict."""
    if not isinstance(text, str):
        text = json.dumps(text)
    return _hybridcep.compile(text)


def load_model(path):
    with open(path, encoding="utf-8") as f:
        return _hybridcep.compile(f.read())


def _ndjson(records):
    if isinstance(records, str):
        return records
    return "".join(json.dumps(r) + "\n" for r in records)


class Case:
    """One process case driven with explicit event times."""

    def __init__(self, model, case_id="c", enforcement=None):
        self._case = _hybridcep.Case(model, case_id, enforcement)

    def signal(self, sensor, value, ts):
        return json.loads(self._case.signal(sensor, float(value), float(ts)))

    def task(self, activity, ts, payload=None):
        return json.loads(self._case.task(activity, json.dumps(payload or {}), float(ts)))

    def watermark(self, ts):
        return json.loads(self._case.watermark(float(ts)))

    def close(self, ts):
        return json.loads(self._case.close(float(ts)))

    def status(self):
        return json.loads(self._case.status())

    def summary(self):
        return json.loads(self._case.summary())

    @property
    def finishable(self):
        return self._case.finishable


def replay(model, records, parallelism=1, enforcement=None, close_at_end=False):
    """Replay NDJSON text or a list of record dicts; returns the output records."""
    text = _hybridcep.replay(model, _ndjson(records), parallelism, enforcement, close_at_end)
    return [json.loads(line) for line in text.splitlines() if line]


def check(model, records):
    """Offline verdicts per case and constraint."""
    return json.loads(_hybridcep.check(model, _ndjson(records)))


def bench(rate=1000.0, duration=60.0, constraints=10, cases=100, runs=1, seed=42):
    return json.loads(_hybridcep.bench(rate, duration, constraints, cases, runs, seed))
