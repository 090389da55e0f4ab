import numpy as np
import pytest

from maxinfo import spinmodel as sm


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def generic_configs(n, count, rng, mode="medium"):
    out = []
    while len(out) < count:
        cfg = sm.SpinModelConfig.random(n, rng)
        if sm.genericity_check(cfg, mode, 1e-3).generic:
            out.append(cfg)
    return out
