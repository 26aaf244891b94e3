import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mugscreen.core import (
    DesignProblem,
    GroundTruth,
    Grouping,
    SupportSet,
    group_support_to_variables,
    intersect_supports,
    normalize_columns,
    validate_partition,
)
from mugscreen.errors import (
    BadGroupIndexError,
    DimensionMismatchError,
    EmptyListError,
    ZeroColumnError,
)


def one_based(*idx):
    return SupportSet(tuple(i - 1 for i in idx))


class TestSupportSet:
    def test_sorted_and_deduplicated(self):
        s = SupportSet((5, 1, 5, 3))
        assert s.indices == (1, 3, 5)
        assert len(s) == 3 and 3 in s and 2 not in s

    def test_mask_roundtrip(self):
        s = SupportSet((0, 4))
        mask = s.to_mask(6)
        assert mask.tolist() == [True, False, False, False, True, False]
        assert SupportSet.from_mask(mask) == s

    def test_one_based(self):
        assert SupportSet((0, 2)).one_based() == [1, 3]

    def test_negative_index_rejected(self):
        with pytest.raises(BadGroupIndexError):
            SupportSet((-1,))
        with pytest.raises(BadGroupIndexError):
            SupportSet((3,), p=3)


class TestDesignProblem:
    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            DesignProblem(np.ones((3, 2)), np.ones(4))

    def test_normalized_flag_checks_columns(self):
        with pytest.raises(ValueError):
            DesignProblem(np.ones((4, 2)) * 2.0, np.ones(4), normalized=True)
        DesignProblem(np.ones((4, 2)), np.ones(4), normalized=True)

    def test_gram_and_xty(self, rng):
        x = rng.standard_normal((6, 3))
        y = rng.standard_normal(6)
        prob = DesignProblem(x, y)
        np.testing.assert_allclose(prob.gram, x.T @ x / 6)
        np.testing.assert_allclose(prob.xty, x.T @ y / 6)


class TestNormalize:
    def test_hand_example(self):
        x = np.array([[2.0, 1.0], [2.0, -1.0], [2.0, 1.0], [2.0, -1.0]])
        prob, scale = normalize_columns(DesignProblem(x, np.zeros(4)))
        np.testing.assert_array_equal(prob.x_matrix[:, 0], np.ones(4))
        assert scale[0] == 0.5

    def test_already_normalized_column_untouched(self):
        x = np.array([[1.0, 3.0], [-1.0, 0.0], [1.0, 1.0], [-1.0, 0.0]])
        prob, scale = normalize_columns(DesignProblem(x, np.zeros(4)))
        assert scale[0] == 1.0
        np.testing.assert_array_equal(prob.x_matrix[:, 0], x[:, 0])

    def test_zero_column(self):
        x = np.ones((3, 3))
        x[:, 1] = 0
        with pytest.raises(ZeroColumnError) as err:
            normalize_columns(DesignProblem(x, np.zeros(3)))
        assert err.value.column == 1

    def test_idempotent(self, rng):
        prob = DesignProblem(rng.standard_normal((7, 5)) * 3, np.zeros(7))
        once, _ = normalize_columns(prob)
        twice, _ = normalize_columns(once)
        np.testing.assert_allclose(twice.x_matrix, once.x_matrix, atol=1e-12, rtol=0)
        np.testing.assert_allclose(np.sum(once.x_matrix ** 2, axis=0) / 7, 1.0, atol=1e-12)


class TestIntersect:
    def test_eight_variable_example(self):
        a = one_based(1, 2, 5, 6, 7, 8)
        b = one_based(1, 3, 5, 7, 4, 8)
        assert intersect_supports([a, b]) == one_based(1, 5, 7, 8)

    def test_single(self):
        s = one_based(2, 9)
        assert intersect_supports([s]) == s

    def test_disjoint(self):
        assert len(intersect_supports([one_based(1, 2), one_based(3, 4)])) == 0

    def test_empty_list(self):
        with pytest.raises(EmptyListError):
            intersect_supports([])

    @given(st.lists(st.sets(st.integers(0, 30)), min_size=1, max_size=6))
    @settings(max_examples=200, deadline=None)
    def test_matches_set_intersection(self, sets):
        out = intersect_supports([SupportSet(tuple(s)) for s in sets])
        assert out.as_set() == frozenset.intersection(*map(frozenset, sets))


class TestGroupExpansion:
    def test_expand(self):
        g = Grouping(((0, 1), (2, 3)), m_max=2)
        assert group_support_to_variables(g, [0]) == SupportSet((0, 1))
        assert len(group_support_to_variables(g, [])) == 0

    def test_three_pair_expansion(self):
        g = Grouping(((0, 1), (2, 3), (4, 5), (6, 7)), m_max=2)
        assert group_support_to_variables(g, [0, 2, 3]) == one_based(1, 2, 5, 6, 7, 8)

    def test_bad_index(self):
        g = Grouping(((0, 1), (2, 3)), m_max=2)
        with pytest.raises(BadGroupIndexError):
            group_support_to_variables(g, [2])


class TestGrouping:
    def test_partition_validation(self):
        with pytest.raises(ValueError):
            validate_partition([(0, 1), (1, 2)], 3, 2)
        with pytest.raises(ValueError):
            validate_partition([(0, 1, 2)], 3, 2)
        with pytest.raises(ValueError):
            validate_partition([(0,), (2,)], 3, 2)
        validate_partition([(2, 0), (1,)], 3, 2)

    def test_active(self):
        g = Grouping(((0, 3), (1,), (2, 4)), m_max=2)
        assert g.active(np.array([0, 0, 1e-3, 0, 0])).tolist() == [2]
        assert g.d == 3 and g.p == 5

    def test_singletons(self):
        g = Grouping.singletons(4)
        assert g.groups == ((0,), (1,), (2,), (3,))


def test_ground_truth():
    t = GroundTruth(np.array([0.0, -0.7, 0.0, 2.0]))
    assert t.support == SupportSet((1, 3))
    assert t.k == 2
    assert t.beta_min == pytest.approx(0.7)
