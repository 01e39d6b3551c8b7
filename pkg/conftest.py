import os

import numpy as np
import pytest
from hypothesis import settings

import database
from rng import seeded_stream

settings.register_profile("fast", max_examples=25, deadline=None)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))

np.seterr(over="raise")


@pytest.fixture
def rng():
    return seeded_stream(0)


@pytest.fixture
def ledger(tmp_path):
    database.configure(tmp_path / "runs.db", override=True)
    database.init_database()
    return tmp_path / "runs.db"
