"""Access to the JSON schemas shipped with the package."""

from __future__ import annotations

import json
from importlib import resources

NAMES = ("attention", "compare", "dataset_record", "eval_report", "manifest", "scores", "solve_stats", "train_curve")


def load_schema(name: str) -> dict:
    if name not in NAMES:
        raise KeyError(f"unknown schema {name!r}; expected one of {', '.join(NAMES)}")
    text = resources.files("satformer").joinpath("schemas", f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)
