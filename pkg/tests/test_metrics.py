import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from goalcast.distribution import OutcomeDistribution, argmax_classes, classes_for, tie_break_argmax
from goalcast.errors import ClassOutOfRange, ZeroProbability
from goalcast.metrics import (
    confusion_matrix,
    cross_entropy,
    cross_entropy_batch,
    mean_with_stderr,
    rps,
    rps_batch,
)

DIFF = classes_for("diff")


def one_hot(classes, c):
    p = np.zeros(len(classes))
    p[classes.index(c)] = 1
    return OutcomeDistribution(classes, p)


def test_cross_entropy_hand_values():
    assert cross_entropy(one_hot(DIFF, 3), 3) == 0
    uniform = OutcomeDistribution(DIFF, np.full(21, 1 / 21))
    assert abs(cross_entropy(uniform, -7) - math.log(21)) < 1e-12
    assert abs(cross_entropy(uniform, 0) - 3.044522437723423) < 1e-12
    q = OutcomeDistribution((0, 1, 2, 3), [0.25, 0.25, 0.25, 0.25])
    assert abs(cross_entropy(q, 2) - 1.3862943611198906) < 1e-12


def test_cross_entropy_errors():
    q = OutcomeDistribution((0, 1, 2), [0.5, 0.5, 0.0])
    with pytest.raises(ZeroProbability):
        cross_entropy(q, 2)
    with pytest.raises(ClassOutOfRange):
        cross_entropy(q, 3)


def test_rps_hand_values():
    q = OutcomeDistribution((0, 1, 2), [0.5, 0.3, 0.2])
    assert abs(rps(q, 0) - 0.145) < 1e-12
    near = OutcomeDistribution((0, 1, 2), [0, 1, 0])
    far = OutcomeDistribution((0, 1, 2), [0, 0, 1])
    # cdf gaps (-1, 0, 0) and (-1, -1, 0) over n_c - 1 = 2
    assert abs(rps(near, 0) - 0.5) < 1e-12
    assert abs(rps(far, 0) - 1.0) < 1e-12
    assert rps(near, 0) < rps(far, 0)
    assert rps(one_hot(DIFF, -4), -4) == 0
    with pytest.raises(ClassOutOfRange):
        rps(q, -1)


def prob_vectors(n):
    return arrays(np.float64, n, elements=st.floats(0, 1)).filter(lambda v: v.sum() > 1e-3).map(lambda v: v / v.sum())


@settings(max_examples=200, deadline=None)
@given(p=prob_vectors(21), true=st.integers(-10, 10))
def test_rps_properties(p, true):
    q = OutcomeDistribution(DIFF, p)
    value = rps(q, true)
    assert -1e-12 <= value <= 1 + 1e-12
    # dropping the last cumulative term changes nothing: both cdfs reach 1
    truth = np.zeros(21)
    truth[true + 10] = 1
    d = np.cumsum(p) - np.cumsum(truth)
    assert abs(np.sum(d[:-1] ** 2) / 20 - value) < 1e-12
    if value < 1e-15:
        assert p[true + 10] == pytest.approx(1)


@settings(max_examples=200, deadline=None)
@given(p=prob_vectors(17), true=st.integers(0, 16))
def test_cross_entropy_non_negative(p, true):
    q = OutcomeDistribution(classes_for("total"), p)
    if q[true] > 0:
        assert cross_entropy(q, true) >= 0


@settings(max_examples=50, deadline=None)
@given(p=arrays(np.float64, (8, 21), elements=st.floats(1e-6, 1)), y=arrays(np.int64, 8, elements=st.integers(0, 20)))
def test_batch_versions_agree(p, y):
    P = p / p.sum(axis=1, keepdims=True)
    ce = cross_entropy_batch(P, y)
    r = rps_batch(P, y)
    for k in range(8):
        d = OutcomeDistribution(DIFF, P[k])
        assert abs(ce[k] - cross_entropy(d, DIFF[y[k]])) < 1e-12
        assert abs(r[k] - rps(d, DIFF[y[k]])) < 1e-12


def test_cross_entropy_of_empirical_distribution_is_its_entropy():
    labels = [0, 0, 1, 2, 2, 2, 1, 0, 2, 2]
    freq = np.bincount(labels, minlength=3) / len(labels)
    q = OutcomeDistribution((0, 1, 2), freq)
    mean_ce = np.mean([cross_entropy(q, y) for y in labels])
    entropy = -np.sum(freq * np.log(freq))
    assert abs(mean_ce - entropy) < 1e-12


def test_confusion_matrix():
    classes = (0, 1, 2)
    pairs = [(0, 0), (1, 1), (2, 2), (1, 1)]
    m = confusion_matrix(pairs, classes)
    assert np.array_equal(m, np.diag([1, 2, 1]))
    rng = np.random.default_rng(0)
    pairs = [(int(a), int(b)) for a, b in rng.integers(-10, 11, size=(500, 2))]
    m = confusion_matrix(pairs, DIFF)
    assert m.sum() == 500
    tally = Counter(pairs)
    for (p, t), n in tally.items():
        assert m[p + 10, t + 10] == n
    assert np.array_equal(m.sum(axis=0), np.bincount([t + 10 for _, t in pairs], minlength=21))
    assert np.array_equal(m.sum(axis=1), np.bincount([p + 10 for p, _ in pairs], minlength=21))


def test_argmax_tie_break():
    classes = (-2, -1, 0, 1, 2)
    assert tie_break_argmax([0.3, 0.1, 0.1, 0.3, 0.2], classes) == 3  # +1 beats -2
    assert tie_break_argmax([0.1, 0.3, 0.1, 0.3, 0.2], classes) == 1  # -1 beats +1
    assert tie_break_argmax([0.2, 0.2, 0.2, 0.2, 0.2], classes) == 2
    P = np.array([[0.3, 0.1, 0.1, 0.3, 0.2], [0.1, 0.3, 0.1, 0.3, 0.2], [0.2] * 5, [0.0, 0.0, 0.1, 0.2, 0.7]])
    assert list(argmax_classes(P, classes)) == [1, -1, 0, 2]
    d = OutcomeDistribution(classes, [0.1, 0.3, 0.1, 0.3, 0.2])
    assert d.argmax() == -1


def test_distribution_validation():
    with pytest.raises(ValueError):
        OutcomeDistribution((0, 1), [0.5, 0.6])
    with pytest.raises(ValueError):
        OutcomeDistribution((0, 1), [1.2, -0.2])
    with pytest.raises(ValueError):
        OutcomeDistribution((0, 1, 2), [0.5, 0.5])


def test_mean_with_stderr():
    mv = mean_with_stderr("ce", [1.0, 2.0, 3.0, 4.0])
    assert mv.value == 2.5
    assert abs(mv.std_err - np.std([1, 2, 3, 4], ddof=1) / 2) < 1e-15
    assert mv.n == 4
