import numpy as np
import pytest

from critforest.scaling import settings
from critforest.scaling.combinatorics import LogCountTable
from critforest.scaling.drift import DriftEvalConfig
from critforest.scaling.utils import child_rng


@pytest.fixture(autouse=True, scope='session')
def cache_dir(tmp_path_factory):
    """Keep the g grid and alpha table caches out of the home directory"""
    path = tmp_path_factory.mktemp('cache')
    old = settings.CACHE_DIR
    settings.CACHE_DIR = path
    yield path
    settings.CACHE_DIR = old


@pytest.fixture(autouse=True)
def validate_samples(monkeypatch):
    monkeypatch.setattr(settings, 'VALIDATE_SAMPLES', True)


@pytest.fixture
def rng() -> np.random.Generator:
    return child_rng(20240601, 0)


@pytest.fixture(scope='session')
def small_table() -> LogCountTable:
    return LogCountTable(12)


@pytest.fixture(scope='session')
def drift_cfg() -> DriftEvalConfig:
    return DriftEvalConfig()


@pytest.fixture(scope='session')
def hot_drift_cfg() -> DriftEvalConfig:
    """Spline-backed g, built once per session"""
    return DriftEvalConfig.hot()
