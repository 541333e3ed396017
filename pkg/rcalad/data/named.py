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
Protocol defaults of the named datasets, from ``config/datasets.yaml``.
"""

# Core packages
import os
import typing as tp
import dataclasses

# 3rd party packages
import yaml

# Project packages
from rcalad.core.exceptions import ConfigurationError
from rcalad.data.dataset import Schema, load_schema

kConfigDir = os.path.join(os.path.dirname(__file__), '..', 'config')
kDatasetsFile = os.path.join(kConfigDir, 'datasets.yaml')


@dataclasses.dataclass(frozen=True)
class NamedDataset():
    name: str
    schema: tp.Optional[str]
    input_dim: int
    alpha: float
    batch_size: int
    max_epochs: int
    score: str
    scaling: str
    row_limit: tp.Optional[int] = None
    validation_fraction: float = 0.25
    anomalies_to_test: bool = False

    def load_schema(self) -> Schema:
        if self.schema is None:
            raise ConfigurationError(f"Dataset '{self.name}' has no packaged schema")
        return load_schema(os.path.join(kConfigDir, 'schemas', self.schema))


def named_datasets() -> tp.Dict[str, NamedDataset]:
    with open(kDatasetsFile) as f:
        raw = yaml.safe_load(f)
    return {k: NamedDataset(name=k, **v) for k, v in raw.items()}


def named_dataset(name: str) -> NamedDataset:
    known = named_datasets()
    if name not in known:
        raise ConfigurationError(f"Unknown dataset '{name}': must be one of {sorted(known)}")
    return known[name]


__api__ = [
    'NamedDataset',
    'named_dataset',
    'named_datasets'
]
