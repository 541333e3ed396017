# Copyright 2023 RCALAD Developers, All rights reserved.
#
#  This file is part of RCALAD.
#
#  RCALAD is free software: you can redistribute it and/or modify it under the
#  terms of the GNU General Public License as published by the Free Software
#  Foundation, either version 3 of the License, or (at your option) any later
#  version.
#
#  RCALAD is distributed in the hope that it will be useful, but WITHOUT ANY
#  WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR
#  A PARTICULAR PURPOSE.  See the GNU General Public License for more details.
#
#  You should have received a copy of the GNU General Public License along with
#  RCALAD.  If not, see <http://www.gnu.org/licenses/

# Core packages
import itertools
import math

# 3rd party packages
import numpy as np
import pytest
import scipy.stats

# Project packages
from rcalad.core.exceptions import (ConfigurationError,
                                    ContractError,
                                    InsufficientDataError,
                                    UndefinedMetricError)
from rcalad.perf_measures.metrics import (Metrics,
                                          aggregate_runs,
                                          auroc,
                                          evaluate,
                                          flag_count,
                                          prf1,
                                          threshold_flags)
from rcalad.perf_measures.wilcoxon import wilcoxon_signed_rank

################################################################################
# Thresholding
################################################################################


def test_flag_count():
    assert flag_count(10, 0.2) == 2
    assert flag_count(10, 0.25) == 3
    assert flag_count(7, 0.0) == 0
    assert flag_count(7, 1.0) == 7
    assert flag_count(1000, 0.15) == 150


def test_top_scores_flagged():
    flags = threshold_flags(np.array([5.0, 4.0, 3.0, 2.0, 1.0]), 0.4)
    assert list(flags) == [True, True, False, False, False]


def test_ties_go_to_lower_index():
    flags = threshold_flags(np.array([0.0, 1.0, 1.0, 1.0]), 0.5)
    assert list(flags) == [False, True, True, False]


def test_alpha_range():
    with pytest.raises(ConfigurationError):
        threshold_flags(np.zeros(3), 1.5)

################################################################################
# Precision, recall, F1
################################################################################


def test_half_right():
    cc, m = prf1(np.array([1, 0, 1, 0]), np.array([1, 1, 0, 0]))
    assert (cc.tp, cc.fp, cc.fn, cc.tn) == (1, 1, 1, 1)
    assert m.precision == pytest.approx(0.5)
    assert m.recall == pytest.approx(0.5)
    assert m.f1 == pytest.approx(0.5)
    assert m.undefined == ()


def test_no_flags_reports_zero():
    _, m = prf1(np.zeros(4, dtype=bool), np.array([1, 0, 0, 0]))
    assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)
    assert 'precision' in m.undefined and 'f1' in m.undefined


def test_no_anomalies_recall_undefined():
    _, m = prf1(np.array([1, 0]), np.array([0, 0]))
    assert m.recall == 0.0
    assert 'recall' in m.undefined


def test_length_mismatch():
    with pytest.raises(ContractError):
        prf1(np.zeros(3), np.zeros(4))

################################################################################
# AUROC
################################################################################


def test_auroc_values():
    labels = np.array([0, 0, 1, 1])
    assert auroc(np.array([0.1, 0.2, 0.8, 0.9]), labels) == pytest.approx(1.0)
    assert auroc(np.array([0.9, 0.8, 0.2, 0.1]), labels) == pytest.approx(0.0)
    assert auroc(np.array([0.1, 0.4, 0.35, 0.8]), labels) == pytest.approx(0.75)
    assert auroc(np.ones(4), labels) == pytest.approx(0.5)


@pytest.mark.parametrize('seed', range(8))
def test_auroc_invariant_under_monotone_transforms(seed):
    gen = np.random.default_rng(seed)
    n = int(gen.integers(10, 300))
    labels = (gen.random(n) < 0.3).astype(int)
    labels[:2] = [0, 1]
    scores = gen.normal(size=n)
    scores[gen.integers(0, n, size=4)] = scores[0]

    base = auroc(scores, labels)
    increasing = [np.exp,
                  np.arctan,
                  lambda s: s ** 3,
                  lambda s: 2.5 * s - 7.0,
                  lambda s: np.log1p(np.exp(s))]
    for f in increasing:
        assert auroc(f(scores), labels) == pytest.approx(base, abs=1e-12)
    assert auroc(-scores, labels) == pytest.approx(1.0 - base, abs=1e-12)


def test_auroc_single_class():
    with pytest.raises(UndefinedMetricError):
        auroc(np.array([0.1, 0.2]), np.array([0, 0]))


def test_evaluate_single_class_keeps_prf1():
    m = evaluate(np.array([0.3, 0.1, 0.2]), np.array([0, 0, 0]), 0.34)
    assert m.auroc is None
    assert 'auroc' in m.undefined


def test_evaluate_perfect_detector():
    scores = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
    labels = np.array([0, 0, 0, 0, 0, 0, 0, 0, 1, 1])
    m = evaluate(scores, labels, 0.2)
    assert (m.precision, m.recall, m.f1, m.auroc) == (1.0, 1.0, 1.0, 1.0)

################################################################################
# Aggregation
################################################################################


def test_aggregate_two_runs():
    agg = aggregate_runs([Metrics(0.4, 0.4, 0.4, 0.7), Metrics(0.6, 0.6, 0.6, 0.9)])
    assert agg.n_runs == 2
    assert agg.mean['f1'] == pytest.approx(0.5)
    assert agg.std['f1'] == pytest.approx(0.1414, abs=1e-4)
    assert agg.mean['auroc'] == pytest.approx(0.8)


def test_aggregate_one_run_has_zero_std():
    agg = aggregate_runs([Metrics(0.3, 0.2, 0.24)])
    assert agg.std['precision'] == 0.0
    assert 'auroc' not in agg.mean


def test_aggregate_nothing():
    with pytest.raises(ContractError):
        aggregate_runs([])

################################################################################
# Wilcoxon signed-rank
################################################################################


def _brute_force_p(d):
    ranks = scipy.stats.rankdata(np.abs(d))
    observed = min(ranks[d > 0].sum(), ranks[d < 0].sum())
    hits = 0
    for signs in itertools.product([0, 1], repeat=len(d)):
        if sum(r for r, s in zip(ranks, signs) if s) <= observed + 1e-9:
            hits += 1
    return min(1.0, 2.0 * hits / 2 ** len(d))


def test_wilcoxon_all_one_sided():
    a = np.arange(1.0, 11.0)
    res = wilcoxon_signed_rank(a, np.zeros(10))
    assert res.statistic == 0.0
    assert res.n == 10
    assert res.exact
    assert res.p_value == pytest.approx(0.001953125, abs=1e-12)


def test_wilcoxon_seven():
    d = np.array([1.0, 2.0, -3.0, -4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0])
    res = wilcoxon_signed_rank(d, np.zeros(10))
    assert res.statistic == 7.0
    assert res.p_value == pytest.approx(0.037109375, abs=1e-12)


@pytest.mark.parametrize('d', [[1.0, -2.0, 3.0, 4.0, -5.0, 6.0],
                               [0.5, 0.5, -1.0, 2.0, 3.0, -4.0]])
def test_wilcoxon_matches_enumeration(d):
    d = np.array(d)
    res = wilcoxon_signed_rank(d, np.zeros(len(d)))
    assert res.p_value == pytest.approx(_brute_force_p(d), abs=1e-12)


def test_wilcoxon_zero_differences_dropped():
    a = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0])
    b = np.array([1.0, 2.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    res = wilcoxon_signed_rank(a, b)
    assert res.n == 5


def test_wilcoxon_identical_runs():
    a = np.linspace(0.1, 0.9, 8)
    with pytest.raises(InsufficientDataError):
        wilcoxon_signed_rank(a, a.copy())


def test_wilcoxon_normal_approximation():
    d = np.arange(1.0, 21.0)
    d[:3] *= -1
    res = wilcoxon_signed_rank(d, np.zeros(20))
    assert not res.exact
    assert res.statistic == 6.0

    var = 20 * 21 * 41 / 24.0
    expected = 2.0 * scipy.stats.norm.cdf((6.0 - 105.0 + 0.5) / math.sqrt(var))
    assert res.p_value == pytest.approx(expected, rel=1e-9)


def test_wilcoxon_unequal_lengths():
    with pytest.raises(ContractError):
        wilcoxon_signed_rank(np.zeros(6), np.zeros(7))
