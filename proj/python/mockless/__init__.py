"""Python access to the mockless test generation core."""

import json
from pathlib import Path

from ._mockless import (
    INIT_STATE,
    BackendError,
    ClassIndex,
    ConfigError,
    TypestateModel,
    build_models,
    check_sequence,
    dep_metrics,
    enumerate_paths,
    line_coverage,
    mutation_score,
    structural_hash,
)
from . import _mockless

__all__ = [
    "INIT_STATE",
    "BackendError",
    "ClassIndex",
    "ConfigError",
    "TypestateModel",
    "build_models",
    "check_sequence",
    "dep_metrics",
    "efficiency",
    "enumerate_paths",
    "generate",
    "jdk_table",
    "line_coverage",
    "mutation_score",
    "parse_toml",
    "structural_hash",
]


def jdk_table():
    """Path of the bundled JDK member table."""
    here = Path(__file__).with_name("jdk_table.tsv")
    if here.exists():
        return str(here)
    # source checkout: python/mockless -> data/
    return str(Path(__file__).resolve().parents[2] / "data" / "jdk_table.tsv")


def parse_toml(text):
    return json.loads(_mockless._parse_toml(text))


def generate(config_path):
    """Runs the loop for the configured class. Returns (manifest path, manifest dict)."""
    path, manifest = _mockless._generate(str(config_path), jdk_table())
    return path, json.loads(manifest)


def efficiency(*manifests):
    """Efficiency figures over manifest dicts (or paths to manifest files)."""
    texts = []
    for m in manifests:
        if isinstance(m, (str, Path)):
            texts.append(Path(m).read_text())
        else:
            texts.append(json.dumps(m))
    return json.loads(_mockless._efficiency(texts))
