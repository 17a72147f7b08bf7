import math

import pytest

from spcelab.hv_models import LabeledSetting


@pytest.fixture
def chsh_settings():
    """The standard quadruple a = 0°, a' = 90°, b = 45°, b' = 135°."""
    return (LabeledSetting.from_degrees("a", 0.0), LabeledSetting.from_degrees("a'", 90.0),
            LabeledSetting.from_degrees("b", 45.0), LabeledSetting.from_degrees("b'", 135.0))


@pytest.fixture
def spin_grid():
    """13 equally spaced spin-angle differences on [0, π]."""
    return [k * math.pi / 12 for k in range(13)]
