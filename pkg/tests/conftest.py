"""Shared fixtures for the SepsisLens test suite."""

import copy
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from builders import write_config  # noqa: E402
from config.settings import DEFAULT_CONFIG  # noqa: E402
from data.synth_cohort import GeneratorSpec, write_synthetic  # noqa: E402
from utils.text_features import EmbeddingTable  # noqa: E402


@pytest.fixture
def default_config():
    return copy.deepcopy(DEFAULT_CONFIG)


@pytest.fixture
def small_table():
    return EmbeddingTable.from_entries(
        {
            "fever": [1.0, 0.0, 0.0],
            "rigors": [0.0, 1.0, 0.0],
            "stable": [0.0, 0.0, 1.0],
            "patient": [0.5, 0.5, 0.5],
        }
    )


@pytest.fixture(scope="session")
def synthetic_files(tmp_path_factory):
    """A small planted-signal cohort on disk, shared across tests (read-only)"""
    directory = tmp_path_factory.mktemp("synthetic")
    spec = GeneratorSpec(n_encounters=600, prevalence=0.1, seed=5, vasopressor_fraction=0.05, leak_fraction=0.2)
    cohort_path, embeddings_path, truth = write_synthetic(spec, directory / "cohort.jsonl")
    return {"dir": directory, "cohort": cohort_path, "embeddings": embeddings_path, "truth": truth, "spec": spec}


@pytest.fixture
def synthetic_config(synthetic_files, tmp_path):
    """Config file in a fresh directory pointing at the shared synthetic files"""
    return write_config(
        tmp_path,
        synthetic_files["cohort"].resolve(),
        synthetic_files["embeddings"].resolve(),
    )
