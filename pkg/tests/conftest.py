import numpy as np
import pytest

from jpsord.types import JpsSample, MultiRankerSample


def make_jps(values, ranks, set_size=None, num_categories=None):
    values = np.asarray(values, dtype=np.int64)
    ranks = np.asarray(ranks, dtype=np.int64)
    if set_size is None:
        set_size = int(ranks.max())
    if num_categories is None:
        num_categories = int(values.max())
    return JpsSample(values, ranks, set_size, num_categories)


def make_multi(values, ranks, set_size=None, num_categories=None, scores=None):
    values = np.asarray(values, dtype=np.int64)
    ranks = np.asarray(ranks, dtype=np.int64)
    if ranks.ndim != 2:
        raise ValueError("multi-ranker ranks must be 2-d")
    if set_size is None:
        set_size = int(ranks.max())
    if num_categories is None:
        num_categories = int(values.max())
    return MultiRankerSample(values, ranks, set_size, num_categories, scores=scores)


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)
