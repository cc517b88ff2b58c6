import numpy as np
import pytest

from gabor_access.decoder import calibrate_threshold
from gabor_access.effective_codebook import enumerate_codebook
from gabor_access.gabor_frames import FrameConfig, build_codebooks, codeword_tensor


@pytest.fixture(scope='session')
def cfg5():
    return FrameConfig(5)


@pytest.fixture(scope='session')
def codebooks5(cfg5):
    return build_codebooks(cfg5)


@pytest.fixture(scope='session')
def G5(codebooks5):
    return codeword_tensor(codebooks5)


@pytest.fixture(scope='session')
def index5_full(codebooks5):
    """N = M = 5, every active-set size, p = 0.4."""
    return enumerate_codebook(codebooks5, 5, 0.4)


@pytest.fixture(scope='session')
def index5_half(codebooks5):
    """N = M = 5 restricted to at most two active users, p = 0.4."""
    return enumerate_codebook(codebooks5, 5, 0.4, n_max=2)


@pytest.fixture(scope='session')
def table5_10db(codebooks5):
    return calibrate_threshold(5, 5, 0.4, 10.0, samples=20_000,
                               rng=np.random.default_rng(1234),
                               hist_samples=10_000, codebooks=codebooks5)
