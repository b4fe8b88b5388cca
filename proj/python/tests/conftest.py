import json
import os
import pathlib

import pytest
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

ROOT = pathlib.Path(__file__).resolve().parents[2]
SCHEMAS = pathlib.Path(os.environ.get("CALAGENT_SCHEMAS", ROOT / "schemas"))
CORPUS = pathlib.Path(os.environ.get("CALAGENT_CORPUS", ROOT / "data" / "corpus_en.jsonl"))

NOW = "2025-04-28T13:00:00Z"
TZ = "America/New_York"


@pytest.fixture(scope="session")
def validator():
    resources = []
    for path in SCHEMAS.glob("*.schema.json"):
        doc = json.loads(path.read_text())
        resources.append((doc["$id"], Resource.from_contents(doc)))
    registry = Registry().with_resources(resources)

    def make(name):
        schema = json.loads((SCHEMAS / f"{name}.schema.json").read_text())
        return Draft202012Validator(schema, registry=registry)

    return make


@pytest.fixture()
def service():
    import calagent

    return calagent.Service({"fixed_now": NOW, "time_zone": TZ})
