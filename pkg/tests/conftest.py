import json
from pathlib import Path

import pytest

from hvd.encoders import EncoderConfig
from hvd.ingest import SyntheticCorpusConfig, synth_corpus

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def oracles() -> dict:
    """Frozen Monte Carlo oracle measurements (scripts/calibrate.py)."""
    return json.loads((FIXTURES / "oracles.json").read_text())


@pytest.fixture(scope="session")
def small_corpus():
    """300 records, 3 topics; enough structure for behavioral tests."""
    cfg = SyntheticCorpusConfig(per_topic=100, seed=11)
    return synth_corpus(cfg)


@pytest.fixture(scope="session")
def config_1k() -> EncoderConfig:
    return EncoderConfig.create(dim=1024, seed=5)


@pytest.fixture(scope="session")
def config_10k() -> EncoderConfig:
    return EncoderConfig.create(dim=10240, seed=5)
