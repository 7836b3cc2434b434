"""Shared fixtures: synthetic corpora and the optional real-data directory."""

from __future__ import annotations

import os
from pathlib import Path

import pytest

from synth import make_corpus, make_eval_split

#: Environment variable pointing at a directory with the real WALS splits.
DATA_ENV = "TYPOPREDICT_DATA"
REQUIRED_SPLITS = ("train.tsv", "dev.tsv")

#: One "label: PASS/FAIL" line per acceptance check, shown after the run.
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance checklist")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)


def real_data_path() -> Path | None:
    """The directory holding train.tsv/dev.tsv (and optional extras), if any."""
    candidates = []
    env = os.environ.get(DATA_ENV)
    if env:
        candidates.append(Path(env))
    candidates.append(Path(__file__).resolve().parent.parent / "data")
    for root in candidates:
        if all((root / name).is_file() for name in REQUIRED_SPLITS):
            return root
    return None


@pytest.fixture(scope="session")
def real_data_dir() -> Path:
    root = real_data_path()
    if root is None:
        pytest.skip(
            "real WALS shared-task splits not available: put train.tsv and dev.tsv "
            f"(TSV format, see README) in ./data or point ${DATA_ENV} at them"
        )
    return root


@pytest.fixture(scope="session")
def corpus():
    """A small unmasked synthetic corpus."""
    return make_corpus(n=60, seed=1)


@pytest.fixture(scope="session")
def eval_split():
    """``(train, gold, masked, merged)`` for the synthetic corpus."""
    return make_eval_split(n=120, n_eval=30, rate=0.5, seed=0)
