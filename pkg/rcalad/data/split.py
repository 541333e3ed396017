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
Stratified train/validation/test splitting, normal-only training sets,
relabelling and subsampling.
"""

# Core packages
import typing as tp
import dataclasses
import logging

# 3rd party packages
import numpy as np

# Project packages
from rcalad.core.rng import RngStream
from rcalad.core.exceptions import ConfigurationError, ContractError, InsufficientDataError
from rcalad.data.dataset import Dataset


@dataclasses.dataclass(frozen=True)
class SplitSpec():
    """
    Attributes:
        validation_fraction: Share of the training rows held out for
                             monitoring; 0 keeps every training row.

        anomalies_to_test: Route every anomalous row to the test split
                           instead of splitting the anomalies like the
                           normal rows.

        alpha: Contamination rate assumed at test time.
    """
    train_fraction: float = 0.8
    test_fraction: float = 0.2
    validation_fraction: float = 0.25
    seed: int = 0
    alpha: float = 0.2
    anomalies_to_test: bool = False

    def validate(self) -> None:
        for name in ['train_fraction', 'test_fraction']:
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigurationError(f"{name}={v} must be in (0,1)")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigurationError(
                f"validation_fraction={self.validation_fraction} must be in [0,1)")
        if abs(self.train_fraction + self.test_fraction - 1.0) > 1e-9:
            raise ConfigurationError(
                f"train_fraction + test_fraction must be 1, got "
                f"{self.train_fraction} + {self.test_fraction}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"alpha={self.alpha} must be in [0,1]")


class SplitIndices(tp.NamedTuple):
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray


def _share(n: int, fraction: float) -> int:
    """
    Rows of an ``n``-row class going to a ``fraction`` part; never 0 if
    n >= 2 and ``fraction`` > 0.
    """
    if fraction == 0.0:
        return 0
    k = int(round(fraction * n))
    if n >= 2:
        k = min(max(k, 1), n - 1)
    return k


def split_indices(labels: np.ndarray, spec: SplitSpec) -> SplitIndices:
    """
    Per class: shuffle, take the test share, then the validation share of the
    rest. With ``spec.anomalies_to_test`` every anomalous row is a test row.
    The three index sets partition ``range(len(labels))``; each is sorted.
    """
    spec.validate()
    rng = RngStream(spec.seed).substream('split')
    train, val, test = [], [], []

    for cls in [0, 1]:
        rows = np.nonzero(labels == cls)[0]
        rows = rows[rng.permutation(len(rows))]
        if cls == 1 and spec.anomalies_to_test:
            test.append(rows)
            continue

        n_test = _share(len(rows), spec.test_fraction)
        test.append(rows[:n_test])
        rest = rows[n_test:]
        n_val = _share(len(rest), spec.validation_fraction)
        val.append(rest[:n_val])
        train.append(rest[n_val:])

    return SplitIndices(train=np.sort(np.concatenate(train)),
                        validation=np.sort(np.concatenate(val)),
                        test=np.sort(np.concatenate(test)))


def split(dataset: Dataset, spec: SplitSpec) -> tp.Tuple[Dataset, Dataset, Dataset]:
    """
    Returns:
        ``(train_normal, validation, test)``; ``train_normal`` holds only the
        label-0 training rows.
    """
    if dataset.labels is None:
        raise ContractError(f"{dataset.schema.name}: cannot split without labels")

    idx = split_indices(dataset.labels, spec)
    train_normal = idx.train[dataset.labels[idx.train] == 0]
    if len(train_normal) == 0:
        raise InsufficientDataError(f"{dataset.schema.name}: no normal rows to train on")

    logging.getLogger(__name__).info(
        "Split %s: %d train (%d normal), %d validation, %d test (%d anomalies)",
        dataset.schema.name,
        len(idx.train),
        len(train_normal),
        len(idx.validation),
        len(idx.test),
        int(dataset.labels[idx.test].sum()))

    return (dataset.take(train_normal),
            dataset.take(idx.validation),
            dataset.take(idx.test))


def one_vs_all(dataset: Dataset, normal_class: tp.Any) -> Dataset:
    """Label rows whose raw label is ``normal_class`` 0 and every other row 1."""
    if dataset.raw_labels is None:
        raise ContractError(f"{dataset.schema.name}: no raw labels to relabel")
    raw = np.asarray([str(v) for v in dataset.raw_labels])
    key = str(normal_class)
    if not (raw == key).any():
        raise ConfigurationError(f"{dataset.schema.name}: no rows of class '{key}'")

    return dataclasses.replace(dataset, labels=(raw != key).astype(int))


def subsample(dataset: Dataset, fraction: float, rng: RngStream) -> Dataset:
    """
    Keep ``fraction`` of the rows of each class (at least one per non-empty
    class), in their original order.
    """
    if not 0.0 < fraction <= 1.0:
        raise ConfigurationError(f"Subsample fraction {fraction} must be in (0,1]")
    if fraction == 1.0:
        return dataset

    labels = dataset.labels if dataset.labels is not None else np.zeros(len(dataset), dtype=int)
    keep = []
    for cls in np.unique(labels):
        rows = np.nonzero(labels == cls)[0]
        k = max(1, int(round(fraction * len(rows))))
        keep.append(rows[rng.permutation(len(rows))[:k]])

    out = dataset.take(np.sort(np.concatenate(keep)))
    logging.getLogger(__name__).info("Subsampled %s: %d -> %d rows",
                                     dataset.schema.name,
                                     len(dataset),
                                     len(out))
    return out


def row_limit(dataset: Dataset, limit: tp.Optional[int], rng: RngStream) -> Dataset:
    """Stratified subsample down to at most ``limit`` rows; None means no limit."""
    if limit is None or len(dataset) <= limit:
        return dataset
    return subsample(dataset, limit / len(dataset), rng)


__api__ = [
    'SplitSpec',
    'SplitIndices',
    'split',
    'split_indices',
    'one_vs_all',
    'subsample',
    'row_limit'
]
