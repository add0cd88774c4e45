import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pasa.errors import ConfigError, SchemaError, UndefinedAUCError
from pasa.metrics import auc, confusion_counts, corrections, predict_labels


def brute_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = sum(1.0 if a > b else 0.5 if a == b else 0.0
                for a, b in itertools.product(pos, neg))
    return total / (len(pos) * len(neg))


class TestAuc:
    def test_separating(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
        assert auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0

    def test_small_case(self):
        assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75

    def test_all_tied(self):
        assert auc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5

    def test_null(self):
        rng = np.random.default_rng(0)
        assert abs(auc(rng.random(100_000), rng.random(100_000) < 0.3) - 0.5) <= 0.01

    @settings(max_examples=200, deadline=None)
    @given(data=st.data(), n=st.integers(2, 200))
    def test_matches_brute_force(self, data, n):
        # coarse grid so ties are common
        scores = data.draw(st.lists(st.integers(0, 8), min_size=n, max_size=n))
        labels = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)
                           .filter(lambda l: 0 < sum(l) < len(l)))
        scores = [s / 8 for s in scores]
        assert auc(scores, labels) == pytest.approx(brute_auc(scores, labels), abs=1e-12)

    def test_single_class(self):
        with pytest.raises(UndefinedAUCError):
            auc([0.1, 0.2], [1, 1])

    def test_label_validation(self):
        with pytest.raises(SchemaError):
            auc([0.1, 0.2], [0, 2])
        with pytest.raises(SchemaError):
            auc([0.1, 0.2], [0, 1, 1])


# ten-row toy: scores of two models, truth, cutoff 0.5
TOY_Y = np.array([1, 1, 1, 1, 0, 0, 0, 0, 0, 1])
TOY_A = np.array([.9, .4, .6, .2, .7, .1, .3, .8, .2, .45])
TOY_B = np.array([.8, .7, .3, .6, .2, .1, .6, .4, .3, .55])


class TestConfusion:
    def test_all_below(self):
        c = confusion_counts([0.01] * 5, [1, 0, 1, 1, 0], 0.5)
        assert c == {"FN": 3, "FP": 0, "F": 3}

    def test_cutoff_below_min(self):
        c = confusion_counts([0.3, 0.4, 0.5], [1, 0, 0], 0.29)
        assert c == {"FN": 0, "FP": 2, "F": 2}

    def test_strict_inequality(self):
        assert predict_labels([0.5, 0.50001], 0.5).tolist() == [False, True]

    def test_toy(self):
        # A wrong on rows 1,3,4,7,9 -> FN 3 (1,3,9), FP 2 (4,7)
        assert confusion_counts(TOY_A, TOY_Y, 0.5) == {"FN": 3, "FP": 2, "F": 5}

    def test_corrections_by_enumeration(self):
        yhat_a, yhat_b = TOY_A > 0.5, TOY_B > 0.5
        expected = sum(1 for a, b, y in zip(yhat_a, yhat_b, TOY_Y) if a != y and b == y)
        got = corrections(TOY_A, TOY_B, TOY_Y, 0.5)
        assert got == expected == 5
        assert corrections(TOY_A, TOY_A, TOY_Y, 0.5) == 0

    @pytest.mark.parametrize("cutoff", [0.0, 1.0])
    def test_cutoff_domain(self, cutoff):
        with pytest.raises(ConfigError):
            confusion_counts([0.5], [1], cutoff)
