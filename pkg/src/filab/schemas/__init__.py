"""JSON schemas for configs, reports, strategies, distributions, couplings,
plus the documented CSV column layout."""
import json
from functools import lru_cache
from importlib import resources

import jsonschema

NAMES = ("config", "report", "strategy", "distribution", "coupling", "csv_columns")


@lru_cache(maxsize=None)
def load(name: str) -> dict:
    if name not in NAMES:
        raise KeyError(name)
    return json.loads(resources.files(__package__).joinpath(f"{name}.json").read_text())


def validate(obj, name: str):
    jsonschema.validate(obj, load(name))
