import math

import pytest

from qtherm.config import SimConfig


@pytest.fixture
def paper_cfg():
    """Experiment-default configuration, fields overridable per test."""

    def make(**kwargs) -> SimConfig:
        base = dict(
            gamma=1.7,
            omega_r=2.0 * math.pi,
            eta=0.35,
            dt=0.02,
            tau=8.0,
            seed=1,
        )
        base.update(kwargs)
        return SimConfig(**base)

    return make
