"""Access to the bundled example models, instances and witnesses."""

import json
from importlib import resources


def corpus_root():
    return resources.files(__package__) / "corpus"


def corpus_path(*parts):
    """Path-like handle to a bundled corpus file, e.g. corpus_path("golomb", "oracle.cpm")."""
    p = corpus_root()
    for part in parts:
        p = p / part
    return p


def read_text(*parts):
    return corpus_path(*parts).read_text(encoding="utf-8")


def load_manifest():
    """The benchmark manifest shipped with the package."""
    return json.loads(read_text("manifest.json"))
