import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import alavi


@pytest.fixture(scope="session")
def ncvi1_small():
    return alavi.gen_ncvi1(10, seed=7)


@pytest.fixture(scope="session")
def ncvi2_small():
    return alavi.gen_ncvi2(10, seed=7)


@pytest.fixture(scope="session")
def affine_small():
    return alavi.gen_monotone_affine(12, 4, seed=5)


@pytest.fixture(scope="session")
def ncvi1_small_trace(ncvi1_small):
    return alavi.alavi_run(
        ncvi1_small,
        stop=alavi.StopRule(max_iters=5000, kkt_tol=1e-9),
        snapshot_stride=1,
        ergodic_stride=1,
    )


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
