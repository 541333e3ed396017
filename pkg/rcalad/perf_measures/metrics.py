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
Detection metrics over oriented scores (larger = more anomalous): top-:math:`\\alpha`
flagging, precision/recall/F1 of the anomaly class, AUROC, and aggregation over
runs.
"""

# Core packages
import math
import typing as tp
import dataclasses
import logging

# 3rd party packages
import numpy as np
import scipy.stats

# Project packages
from rcalad.core.exceptions import (ConfigurationError,
                                    ContractError,
                                    UndefinedMetricError)

kMetricNames = ['precision', 'recall', 'f1', 'auroc']


@dataclasses.dataclass(frozen=True)
class ConfusionCounts():
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclasses.dataclass(frozen=True)
class Metrics():
    """
    Attributes:
        undefined: Metrics whose denominator was zero and which were set to 0.
    """
    precision: float
    recall: float
    f1: float
    auroc: tp.Optional[float] = None
    undefined: tp.Tuple[str, ...] = ()

    def as_dict(self) -> tp.Dict[str, tp.Any]:
        return {'precision': self.precision,
                'recall': self.recall,
                'f1': self.f1,
                'auroc': self.auroc,
                'undefined': list(self.undefined)}


@dataclasses.dataclass(frozen=True)
class RunAggregate():
    n_runs: int
    mean: tp.Dict[str, float]
    std: tp.Dict[str, float]

    def as_dict(self) -> tp.Dict[str, tp.Any]:
        return {'n_runs': self.n_runs, 'mean': self.mean, 'std': self.std}


def flag_count(n: int, alpha: float) -> int:
    """:math:`\\lceil \\alpha N \\rceil`, robust to float noise in :math:`\\alpha N`."""
    return min(n, int(math.ceil(round(alpha * n, 9))))


def threshold_flags(scores: np.ndarray, alpha: float) -> np.ndarray:
    """
    Flag the :math:`\\lceil \\alpha N \\rceil` rows with the largest scores;
    among equal scores the lower row index wins.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError(f"alpha={alpha} must be in [0,1]")
    scores = np.asarray(scores, dtype=np.float64)
    k = flag_count(len(scores), alpha)

    order = np.argsort(-scores, kind='stable')
    flags = np.zeros(len(scores), dtype=bool)
    flags[order[:k]] = True
    return flags


def confusion(flags: np.ndarray, labels: np.ndarray) -> ConfusionCounts:
    flags = np.asarray(flags, dtype=bool)
    labels = np.asarray(labels)
    if flags.shape != labels.shape:
        raise ContractError(
            f"flags and labels differ in length: {len(flags)} vs {len(labels)}")
    if not np.isin(labels, [0, 1]).all():
        raise ContractError("labels must be 0/1")

    pos = labels == 1
    return ConfusionCounts(tp=int((flags & pos).sum()),
                           fp=int((flags & ~pos).sum()),
                           fn=int((~flags & pos).sum()),
                           tn=int((~flags & ~pos).sum()))


def prf1(flags: np.ndarray, labels: np.ndarray) -> tp.Tuple[ConfusionCounts, Metrics]:
    """Precision, recall and F1 of the anomaly class; 0/0 is reported as 0."""
    cc = confusion(flags, labels)
    undefined = []

    if cc.tp + cc.fp > 0:
        precision = cc.tp / (cc.tp + cc.fp)
    else:
        precision = 0.0
        undefined.append('precision')

    if cc.tp + cc.fn > 0:
        recall = cc.tp / (cc.tp + cc.fn)
    else:
        recall = 0.0
        undefined.append('recall')

    if precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        undefined.append('f1')

    return cc, Metrics(precision=precision,
                       recall=recall,
                       f1=f1,
                       undefined=tuple(undefined))


def auroc(scores: np.ndarray, labels: np.ndarray) -> float:
    """
    Probability that a random anomaly outscores a random normal row, ties
    counting one half (Mann-Whitney rank-sum form).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ContractError(
            f"scores and labels differ in length: {len(scores)} vs {len(labels)}")

    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs both normal and anomalous rows")

    ranks = scipy.stats.rankdata(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def evaluate(scores: np.ndarray, labels: np.ndarray, alpha: float) -> Metrics:
    """Threshold at ``alpha`` then PRF1, plus AUROC when both classes are present."""
    _, m = prf1(threshold_flags(scores, alpha), labels)
    try:
        area = auroc(scores, labels)
    except UndefinedMetricError:
        return dataclasses.replace(m, undefined=m.undefined + ('auroc',))
    return dataclasses.replace(m, auroc=area)


def evaluate_all_scores(scores: tp.Any,
                        labels: np.ndarray,
                        alpha: float) -> tp.Dict[str, Metrics]:
    """
    :func:`evaluate` for every score present in an oriented
    :class:`~rcalad.scoring.scores.ScoreVector`.
    """
    return {name: evaluate(scores.get(name), labels, alpha) for name in scores.available()}


def aggregate_runs(runs: tp.Sequence[Metrics]) -> RunAggregate:
    """Mean and sample (n-1) standard deviation of each metric; std 0 for one run."""
    if not runs:
        raise ContractError("aggregate_runs: no runs")

    mean, std = {}, {}
    for name in kMetricNames:
        values = np.array([getattr(r, name) for r in runs if getattr(r, name) is not None],
                          dtype=np.float64)
        if len(values) == 0:
            continue
        mean[name] = float(values.mean())
        std[name] = float(values.std(ddof=1)) if len(values) > 1 else 0.0

    logging.getLogger(__name__).debug("Aggregated %d runs: %s", len(runs), mean)
    return RunAggregate(n_runs=len(runs), mean=mean, std=std)


__api__ = [
    'ConfusionCounts',
    'Metrics',
    'RunAggregate',
    'threshold_flags',
    'flag_count',
    'confusion',
    'prf1',
    'auroc',
    'evaluate',
    'evaluate_all_scores',
    'aggregate_runs'
]
