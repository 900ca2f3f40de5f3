import numpy as np
import pytest

from neurovoxel.classifier import train_model
from neurovoxel.synth import SessionProtocol, SubjectProfile
from neurovoxel.synth import generate_session as _generate_session
from neurovoxel.workflow import preprocess_session

ACCEPTANCE_SEEDS = (1, 2, 3)


@pytest.fixture(scope="session")
def default_session():
    """Seed-1 full training session at calibrated default snr."""
    profile = SubjectProfile(seed=1, snr=1.0)
    return _generate_session(SessionProtocol(), profile)


@pytest.fixture(scope="session")
def default_features(default_session):
    rec, markers = default_session
    return preprocess_session(rec, markers)


@pytest.fixture(scope="session")
def pair_model(default_features):
    """Cube-vs-pyramid model on the seed-1 session."""
    return train_model(default_features, classes=[0, 1], seed=0)


@pytest.fixture(scope="session")
def four_class_model(default_features):
    return train_model(default_features, classes=[0, 1, 2, 3], seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
