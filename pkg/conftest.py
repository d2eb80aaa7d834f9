"""
JointFace — shared test fixtures.

    tiny_dims       the gradient-check network: d_a=5, d_l=3, S=2, V=4
    small_spec      a 4×3-vertex synthetic corpus, 2 speakers × 4 utterances
    small_corpus    that corpus generated once per session
"""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from jointface.model.network import ModelDims  # noqa: E402
from jointface.synth.generator import SynthSpec, generate_corpus  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: training-based checks that take minutes")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_dims():
    return ModelDims(
        vertices=4, speakers=2, mel_channels=6, audio_dim=5, text_in=7,
        text_hidden=6, text_dim=3, dec_hidden=4, blstm_hidden=3,
    )


def _small_spec(**overrides) -> SynthSpec:
    values = dict(
        rows=4, cols=3, speakers=2, utterances_per_speaker=4,
        val_per_speaker=1, test_per_speaker=1, duration_range=(1.0, 1.6), seed=7,
    )
    values.update(overrides)
    return SynthSpec(**values)


@pytest.fixture
def small_spec():
    return _small_spec()


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    return generate_corpus(_small_spec(), out)
