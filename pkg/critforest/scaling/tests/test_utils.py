import numpy as np
import pytest

from critforest.scaling import settings
from critforest.scaling.errors import ConfigError
from critforest.scaling.utils import child_rng, make_rng, utils


@pytest.fixture
def restore(monkeypatch):
    for name in ('G_ABS_TOL', 'THREADS', 'ALPHA_TABLE_LAMBDA'):
        monkeypatch.setattr(settings, name, getattr(settings, name))


@pytest.mark.usefixtures('restore')
def test_change_setting_coerces():
    assert utils.change_setting('G_ABS_TOL', '1e-9') == 1e-9
    assert settings.G_ABS_TOL == 1e-9
    assert utils.change_setting('THREADS', '4') == 4
    assert utils.change_setting('ALPHA_TABLE_LAMBDA', '-4,2') == (-4.0, 2.0)


@pytest.mark.usefixtures('restore')
def test_change_setting_rejects():
    with pytest.raises(ConfigError):
        utils.change_setting('SCHEMA_VERSION', '2')
    with pytest.raises(ConfigError):
        utils.change_setting('THREADS', 'many')
    with pytest.raises(ConfigError):
        utils.change_setting('ALPHA_TABLE_LAMBDA', '1,2,3')
    with pytest.raises(ConfigError):
        utils.change_setting('ALPHA_TABLE_LAMBDA', '1')
    assert settings.ALPHA_TABLE_LAMBDA == (-12.0, 6.0)
    with pytest.raises(ConfigError):
        utils.change_setting('THREADS', '2', action='*')


@pytest.mark.usefixtures('restore')
def test_apply_overrides():
    utils.apply_overrides(['G_ABS_TOL = 1e-8', 'THREADS=3'])
    assert settings.G_ABS_TOL == 1e-8
    assert settings.THREADS == 3
    with pytest.raises(ConfigError):
        utils.apply_overrides(['THREADS'])


def test_child_streams():
    first = child_rng(5, 0).random(4)
    assert np.array_equal(first, child_rng(5, 0).random(4))
    assert not np.array_equal(first, child_rng(5, 1).random(4))
    assert not np.array_equal(first, child_rng(6, 0).random(4))
    generator = child_rng(1, 1)
    assert make_rng(generator) is generator
    assert make_rng(3).random() == make_rng(3).random()
