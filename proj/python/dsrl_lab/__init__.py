"""Python bindings for the dsrl desk-scale RLVR laboratory."""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    avg_at_k,
    classify_thought,
    config_keys,
    pass_at_k,
    segment_steps,
    verify,
)

__all__ = [
    "ConfigError",
    "Trainer",
    "avg_at_k",
    "classify_thought",
    "config_keys",
    "count_thoughts",
    "evaluate",
    "make_task",
    "pass_at_k",
    "segment_steps",
    "train",
    "verify",
]


def make_task(task, length, seed):
    """Return a task instance as a dict with task, prompt_tokens, answer_tokens and seed."""
    return _json.loads(_core.make_task_json(task, length, seed))


def count_thoughts(text):
    """Return transition, reflection, execution and total step counts."""
    return _json.loads(_core.count_thoughts_json(text))


def train(out_dir, config_text="", overrides=None):
    """Run a full training job; returns the final checkpoint path."""
    return _core.train(out_dir, config_text, _assignments(overrides))


def evaluate(checkpoint, tasks, n=64, ks=(1,), seed=0, temperature=1.0, max_response=16):
    """Evaluate a checkpoint on task dicts; returns the eval report as a dict."""
    report = _core.evaluate_json(
        checkpoint, _json.dumps(list(tasks)), n, list(ks), seed, temperature, max_response
    )
    return _json.loads(report)


class Trainer(_core.Trainer):
    """Step-wise trainer; overrides is a dict of config keys."""

    def __init__(self, config_text="", overrides=None):
        super().__init__(config_text, _assignments(overrides))

    def step(self):
        """Run one training step and return its metrics record."""
        return _json.loads(self.step_json())


def _assignments(overrides):
    return [f"{k}={v}" for k, v in (overrides or {}).items()]
