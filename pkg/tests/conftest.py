"""Shared fixtures"""
import json

import numpy as np
import pytest

from keyleak.config import get_settings
from keyleak.distributions import KeyDistribution


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch):
    """Keep the developer's KEYLEAK_* environment out of the tests"""
    import os

    for key in list(os.environ):
        if key.startswith("KEYLEAK_"):
            monkeypatch.delenv(key)
    monkeypatch.setenv("KEYLEAK_WORKERS", "1")
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def random_distribution(rng):
    def make(n: int, alpha: float = 1.0) -> KeyDistribution:
        return KeyDistribution(n, weights=rng.dirichlet(np.full(1 << n, alpha)))

    return make


@pytest.fixture
def write_json(tmp_path):
    def write(name: str, document) -> str:
        path = tmp_path / name
        text = document if isinstance(document, str) else json.dumps(document)
        path.write_text(text, encoding="utf-8")
        return str(path)

    return write
