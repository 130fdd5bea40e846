from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hemm import ckks
from hemm.rns import generate_chain

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SET_A_Q = [44, 44, 44, 43, 43]
SET_A_P = [56, 56, 56, 56]


@pytest.fixture(scope="session")
def frozen() -> dict:
    return json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


@pytest.fixture(scope="session")
def chain64():
    return generate_chain(64, SET_A_Q, SET_A_P, 1)


@pytest.fixture(scope="session")
def keys64(chain64):
    sk, pk = ckks.keygen(chain64, 11)
    return sk, pk


@pytest.fixture(scope="session")
def chain_b2():
    """Two digits of two limbs each, to exercise beta > 1."""
    return generate_chain(64, [50, 45, 45, 45], [55, 55], 2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
