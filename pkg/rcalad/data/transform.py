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
One-hot encoding of categorical columns and scaling of continuous ones.

Parameters are fitted once, on training rows, and then only applied; there is
no way to refit on rows passed to :func:`apply_scaling`.
"""

# Core packages
import typing as tp
import dataclasses
import logging

# 3rd party packages
import numpy as np
import pandas as pd

# Project packages
from rcalad.core.exceptions import ConfigurationError, ContractError
from rcalad.data.dataset import Dataset

kMethods = ['standardize', 'minmax_pm1', 'none']


@dataclasses.dataclass
class ScalingParams():
    """
    Attributes:
        categories: Known categories per categorical column, in one-hot order.

        fill: Value imputed for missing continuous cells (the training mean).

        center/scale: Continuous column ``c`` maps to ``(c - center) / scale``
                      (then ``- 1`` for ``minmax_pm1``).

        unseen: Count of categorical cells seen at transform time whose
                category was not fitted; they encode as all zeros.
    """
    method: str
    continuous: tp.List[str]
    categories: tp.Dict[str, tp.List[str]]
    fill: np.ndarray
    center: np.ndarray
    scale: np.ndarray
    unseen: tp.Dict[str, int] = dataclasses.field(default_factory=dict)

    def feature_names(self) -> tp.List[str]:
        names = list(self.continuous)
        for col, cats in self.categories.items():
            names.extend(f"{col}={c}" for c in cats)
        return names

    @property
    def width(self) -> int:
        return len(self.continuous) + sum(len(c) for c in self.categories.values())


def fit_scaling(dataset: Dataset, method: str = 'standardize') -> ScalingParams:
    if method not in kMethods:
        raise ConfigurationError(f"Unknown scaling '{method}': must be one of {kMethods}")
    if len(dataset) == 0:
        raise ContractError("Cannot fit scaling on an empty dataset")

    schema = dataset.schema
    cont = [c.name for c in schema.continuous()]
    values = dataset.frame[cont].to_numpy(dtype=np.float64) if cont else \
        np.zeros((len(dataset), 0))

    with np.errstate(invalid='ignore'):
        fill = np.nanmean(values, axis=0) if values.size else np.zeros(len(cont))
    fill = np.where(np.isfinite(fill), fill, 0.0)
    filled = np.where(np.isnan(values), fill, values)

    if method == 'standardize':
        center = filled.mean(axis=0)
        scale = filled.std(axis=0)
    elif method == 'minmax_pm1':
        lo, hi = filled.min(axis=0), filled.max(axis=0)
        center = lo
        scale = (hi - lo) / 2.0
    else:
        center = np.zeros(len(cont))
        scale = np.ones(len(cont))
    scale = np.where(scale > 0, scale, 1.0)

    categories = {}
    for c in schema.categorical():
        if c.categories is not None:
            categories[c.name] = list(c.categories)
        else:
            categories[c.name] = sorted(dataset.frame[c.name].astype(str).unique().tolist())

    return ScalingParams(method=method,
                         continuous=cont,
                         categories=categories,
                         fill=fill,
                         center=center,
                         scale=scale)


def apply_scaling(dataset: Dataset, params: ScalingParams) -> Dataset:
    logger = logging.getLogger(__name__)
    frame = dataset.frame

    values = frame[params.continuous].to_numpy(dtype=np.float64) if params.continuous else \
        np.zeros((len(dataset), 0))
    values = np.where(np.isnan(values), params.fill, values)
    scaled = (values - params.center) / params.scale
    if params.method == 'minmax_pm1':
        scaled = scaled - 1.0

    blocks = [scaled]
    for col, cats in params.categories.items():
        raw = frame[col].astype(str)
        coded = pd.Categorical(raw, categories=cats).codes
        onehot = np.zeros((len(raw), len(cats)))
        known = coded >= 0
        onehot[np.nonzero(known)[0], coded[known]] = 1.0

        n_unseen = int((~known).sum())
        if n_unseen:
            params.unseen[col] = params.unseen.get(col, 0) + n_unseen
            logger.warning("Column '%s': %d cells with unseen categories encoded as zeros",
                           col,
                           n_unseen)
        blocks.append(onehot)

    features = np.concatenate(blocks, axis=1) if blocks else np.zeros((len(dataset), 0))
    out = dataclasses.replace(dataset,
                              features=features,
                              feature_names=params.feature_names(),
                              scaling=params)
    out.validate()
    return out


def encode_and_scale(dataset: Dataset,
                     method: str = 'standardize',
                     params: tp.Optional[ScalingParams] = None) -> tp.Tuple[Dataset, ScalingParams]:
    """
    One-hot encode and scale ``dataset``. Without ``params`` they are fitted on
    ``dataset`` (which should be the training rows); with ``params`` they are
    applied as-is and ``method`` must agree.
    """
    if params is None:
        params = fit_scaling(dataset, method)
    elif params.method != method:
        raise ConfigurationError(
            f"Scaling parameters were fitted with '{params.method}', not '{method}'")
    return apply_scaling(dataset, params), params


__api__ = [
    'ScalingParams',
    'encode_and_scale',
    'fit_scaling',
    'apply_scaling'
]
