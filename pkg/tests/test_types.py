import numpy as np
import pytest

from jpsord.types import (
    EstimateResult,
    FinitePopulation,
    JpsSample,
    MultiRankerSample,
    OrdinalDistribution,
)

from conftest import make_jps


def test_distribution_cumulative_identity_is_exact():
    d = OrdinalDistribution([0.3, 0.4, 0.3])
    assert d.cumulative[-1] == 1.0
    np.testing.assert_array_equal(np.diff(d.cumulative, prepend=0.0), d.probs)
    assert d.num_categories == 3


def test_distribution_point_mass_moments():
    d = OrdinalDistribution([1.0])
    assert d.category_mean() == 1.0
    assert d.category_sd() == 0.0


def test_distribution_mean_sd_hand_values():
    d = OrdinalDistribution([0.5, 0.5])
    assert d.category_mean() == pytest.approx(1.5)
    assert d.category_sd() == pytest.approx(0.5)


def test_distribution_rejects_bad_probs():
    with pytest.raises(ValueError):
        OrdinalDistribution([0.5, 0.6])
    with pytest.raises(ValueError):
        OrdinalDistribution([0.5, 0.5, 0.0])
    with pytest.raises(ValueError):
        OrdinalDistribution([])


def test_distribution_arrays_are_frozen():
    d = OrdinalDistribution([0.2, 0.8])
    with pytest.raises(ValueError):
        d.probs[0] = 0.9


def test_jps_sample_validates_ranges():
    make_jps([1, 2], [1, 2], set_size=2, num_categories=2)
    with pytest.raises(ValueError):
        JpsSample(np.array([1, 3]), np.array([1, 1]), 2, 2)
    with pytest.raises(ValueError):
        JpsSample(np.array([1, 2]), np.array([1, 3]), 2, 2)
    with pytest.raises(ValueError):
        JpsSample(np.array([1, 2]), np.array([1]), 2, 2)


def test_multi_sample_needs_matrix_ranks():
    MultiRankerSample(np.array([1, 2]), np.array([[1, 2], [2, 1]]), 2, 2)
    with pytest.raises(ValueError):
        MultiRankerSample(np.array([1, 2]), np.array([1, 2]), 2, 2)


def test_estimate_result_differences_sum_to_one():
    r = EstimateResult.from_cumulative(np.array([0.25, 0.5]), method="st")
    np.testing.assert_allclose(r.proportions_hat, [0.25, 0.25, 0.5])
    assert r.proportions_hat.sum() == pytest.approx(1.0, abs=1e-15)


def test_estimate_result_rejects_decreasing_cumulative():
    with pytest.raises(ValueError):
        EstimateResult.from_cumulative(np.array([0.6, 0.4]), method="st")
    with pytest.raises(ValueError):
        EstimateResult.from_cumulative(np.array([1.2]), method="st")


def test_population_proportions_and_validation():
    pop = FinitePopulation(
        x=np.array([1, 2, 2, 3]), z=np.zeros((4, 1)), num_categories=3
    )
    np.testing.assert_allclose(pop.proportions(), [0.25, 0.5, 0.25])
    assert pop.size == 4
    with pytest.raises(ValueError):
        FinitePopulation(x=np.array([], dtype=int), z=np.zeros((0, 1)), num_categories=2)
    with pytest.raises(ValueError):
        FinitePopulation(x=np.array([1, 4]), z=np.zeros((2, 1)), num_categories=3)
