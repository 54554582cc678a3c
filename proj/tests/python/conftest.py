import json
import os
import pathlib

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]


@pytest.fixture(scope="session")
def schema_dir():
    return pathlib.Path(os.environ.get("TRAJCRIT_SCHEMA_DIR", ROOT / "schemas"))


@pytest.fixture(scope="session")
def validate_bundle(schema_dir):
    jsonschema = pytest.importorskip("jsonschema")

    def check(bundle_dir):
        bundle_dir = pathlib.Path(bundle_dir)
        index = json.loads((bundle_dir / "index.json").read_text())
        jsonschema.validate(index, json.loads((schema_dir / "index.schema.json").read_text()))
        kinds = set()
        for entry in index["artifacts"]:
            if entry["kind"] == "csv":
                continue
            doc = json.loads((bundle_dir / entry["file"]).read_text())
            schema = json.loads((schema_dir / f"{entry['kind']}.schema.json").read_text())
            jsonschema.validate(doc, schema)
            kinds.add(entry["kind"])
        return index, kinds

    return check
