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
"""
Paired Wilcoxon signed-rank test between two sets of per-run results.
"""

# Core packages
import typing as tp
import dataclasses
import logging

# 3rd party packages
import numpy as np
import scipy.stats

# Project packages
from rcalad.core.exceptions import ContractError, InsufficientDataError

kMinPairs = 5
kExactMaxPairs = 12


@dataclasses.dataclass(frozen=True)
class WilcoxonResult():
    """
    Attributes:
        statistic: The smaller of the positive and negative signed-rank sums.

        p_value: Two-sided.

        n: Pairs left after dropping zero differences.

        exact: Whether ``p_value`` came from the exact null distribution.
    """
    statistic: float
    p_value: float
    n: int
    exact: bool

    def as_dict(self) -> tp.Dict[str, tp.Any]:
        return {'statistic': self.statistic, 'p_value': self.p_value, 'n': self.n}


def exact_null_counts(doubled_ranks: np.ndarray) -> np.ndarray:
    """
    Number of sign assignments giving each value of the doubled positive rank
    sum, by adding one rank at a time to the count vector. Doubling keeps
    averaged tie ranks integral.
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled_ranks.astype(int):
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    return counts


def exact_p_value(statistic: float, ranks: np.ndarray) -> float:
    doubled = np.rint(2.0 * ranks).astype(int)
    counts = exact_null_counts(doubled)
    cut = int(np.rint(2.0 * statistic))
    lower = counts[:cut + 1].sum() / counts.sum()
    return float(min(1.0, 2.0 * lower))


def normal_p_value(statistic: float, ranks: np.ndarray) -> float:
    """Normal approximation with continuity and tie corrections."""
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    _, ties = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - (ties ** 3 - ties).sum() / 48.0
    z = (statistic - mean + 0.5) / np.sqrt(var)
    return float(min(1.0, 2.0 * scipy.stats.norm.cdf(z)))


def wilcoxon_signed_rank(a: tp.Sequence[float], b: tp.Sequence[float]) -> WilcoxonResult:
    """
    Test whether the paired differences ``a - b`` are symmetric about zero.

    Zero differences are dropped. The p-value is exact for up to
    ``kExactMaxPairs`` remaining pairs and a normal approximation above.

    Raises:
        InsufficientDataError: Fewer than ``kMinPairs`` nonzero differences.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ContractError(f"Wilcoxon needs equal-length 1-D inputs, got {a.shape} and {b.shape}")

    d = a - b
    d = d[d != 0.0]
    n = len(d)
    if n < kMinPairs:
        raise InsufficientDataError(
            f"Wilcoxon needs >= {kMinPairs} nonzero differences, got {n}")

    ranks = scipy.stats.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    statistic = min(w_plus, w_minus)

    exact = n <= kExactMaxPairs
    p = exact_p_value(statistic, ranks) if exact else normal_p_value(statistic, ranks)

    logging.getLogger(__name__).debug("Wilcoxon: n=%d W+=%s W-=%s p=%.6g (%s)",
                                      n,
                                      w_plus,
                                      w_minus,
                                      p,
                                      'exact' if exact else 'normal')
    return WilcoxonResult(statistic=statistic, p_value=p, n=n, exact=exact)


__api__ = [
    'WilcoxonResult',
    'wilcoxon_signed_rank',
    'exact_p_value',
    'normal_p_value'
]
