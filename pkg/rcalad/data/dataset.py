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
Tabular schemas and the in-memory dataset they describe.

A schema lists the feature columns in file order (continuous or categorical)
and how the trailing label column maps to 0 (normal) / 1 (anomaly). Schemas are
YAML; a run of identically-typed columns may be declared as a group::

  columns:
    - {prefix: a, count: 274, type: continuous}
    - {name: protocol_type, type: categorical, categories: [icmp, tcp, udp]}
  label:
    name: class
    anomaly_values: [3, 4, 5]
"""

# Core packages
import typing as tp
import dataclasses

# 3rd party packages
import numpy as np
import pandas as pd
import yaml

# Project packages
from rcalad.core.exceptions import ConfigurationError, ContractError

kColumnTypes = ['continuous', 'categorical']


@dataclasses.dataclass(frozen=True)
class ColumnSpec():
    name: str
    kind: str = 'continuous'
    categories: tp.Optional[tp.Tuple[str, ...]] = None


@dataclasses.dataclass(frozen=True)
class LabelSpec():
    """
    Exactly one of ``anomaly_values``/``normal_values`` may be given; with
    neither, the raw label must already be 0/1.
    """
    name: str = 'label'
    anomaly_values: tp.Optional[tp.Tuple[str, ...]] = None
    normal_values: tp.Optional[tp.Tuple[str, ...]] = None

    def encode(self, raw: pd.Series) -> np.ndarray:
        values = raw.astype(str).str.strip()
        if self.anomaly_values is not None:
            return values.isin(self.anomaly_values).to_numpy().astype(int)
        if self.normal_values is not None:
            return (~values.isin(self.normal_values)).to_numpy().astype(int)

        bad = ~values.isin(['0', '1'])
        if bad.any():
            row = int(np.argmax(bad.to_numpy())) + 1
            raise ContractError(
                f"Row {row}: label '{values.iloc[row - 1]}' is not 0/1 and the schema "
                "declares no anomaly/normal values")
        return values.astype(int).to_numpy()


@dataclasses.dataclass(frozen=True)
class Schema():
    name: str
    columns: tp.Tuple[ColumnSpec, ...]
    label: tp.Optional[LabelSpec] = LabelSpec()
    header: bool = False
    na_values: tp.Tuple[str, ...] = ()

    @property
    def names(self) -> tp.List[str]:
        return [c.name for c in self.columns]

    def continuous(self) -> tp.List[ColumnSpec]:
        return [c for c in self.columns if c.kind == 'continuous']

    def categorical(self) -> tp.List[ColumnSpec]:
        return [c for c in self.columns if c.kind == 'categorical']

    def to_dict(self) -> tp.Dict[str, tp.Any]:
        cols = []
        for c in self.columns:
            d = {'name': c.name, 'type': c.kind}  # type: tp.Dict[str, tp.Any]
            if c.categories is not None:
                d['categories'] = list(c.categories)
            cols.append(d)

        ret = {'name': self.name,
               'header': self.header,
               'columns': cols}  # type: tp.Dict[str, tp.Any]
        if self.na_values:
            ret['na_values'] = list(self.na_values)
        ret['label'] = None
        if self.label is not None:
            label = {'name': self.label.name}  # type: tp.Dict[str, tp.Any]
            if self.label.anomaly_values is not None:
                label['anomaly_values'] = list(self.label.anomaly_values)
            if self.label.normal_values is not None:
                label['normal_values'] = list(self.label.normal_values)
            ret['label'] = label
        return ret


def _strs(values: tp.Optional[tp.Sequence[tp.Any]]) -> tp.Optional[tp.Tuple[str, ...]]:
    return None if values is None else tuple(str(v) for v in values)


def schema_from_dict(d: tp.Dict[str, tp.Any]) -> Schema:
    unknown = set(d) - {'name', 'header', 'columns', 'label', 'na_values'}
    if unknown:
        raise ConfigurationError(f"Unknown schema keys {sorted(unknown)}")
    if not d.get('columns'):
        raise ConfigurationError("Schema declares no columns")

    cols = []
    for c in d['columns']:
        kind = c.get('type', 'continuous')
        if kind not in kColumnTypes:
            raise ConfigurationError(f"Unknown column type '{kind}': must be one of {kColumnTypes}")
        cats = _strs(c.get('categories'))
        if 'count' in c:
            cols.extend(ColumnSpec(f"{c.get('prefix', 'f')}{i}", kind, cats)
                        for i in range(int(c['count'])))
        else:
            cols.append(ColumnSpec(str(c['name']), kind, cats))

    names = [c.name for c in cols]
    if len(set(names)) != len(names):
        raise ConfigurationError("Schema column names are not unique")

    label = None
    if d.get('label', {}) is not None:
        ld = d.get('label', {})
        label = LabelSpec(name=str(ld.get('name', 'label')),
                          anomaly_values=_strs(ld.get('anomaly_values')),
                          normal_values=_strs(ld.get('normal_values')))
        if label.anomaly_values is not None and label.normal_values is not None:
            raise ConfigurationError("Label declares both anomaly_values and normal_values")

    return Schema(name=str(d.get('name', 'dataset')),
                  columns=tuple(cols),
                  label=label,
                  header=bool(d.get('header', False)),
                  na_values=_strs(d.get('na_values', [])) or ())


def load_schema(path: str) -> Schema:
    with open(path) as f:
        return schema_from_dict(yaml.safe_load(f))


@dataclasses.dataclass
class Dataset():
    """
    Attributes:
        frame: Raw feature columns, in schema order.

        labels: 0/1 per row (1 = anomaly), or None.

        raw_labels: The label column as read, for relabelling.

        features: Encoded and scaled matrix, once available.

        feature_names: Column names of ``features``.

        scaling: Parameters ``features`` was produced with.
    """
    schema: Schema
    frame: pd.DataFrame
    labels: tp.Optional[np.ndarray] = None
    raw_labels: tp.Optional[np.ndarray] = None
    features: tp.Optional[np.ndarray] = None
    feature_names: tp.Optional[tp.List[str]] = None
    scaling: tp.Any = None

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def dim(self) -> int:
        assert self.features is not None, "Dataset is not encoded yet"
        return self.features.shape[1]

    def take(self, idx: np.ndarray) -> 'Dataset':
        """The rows ``idx``, in that order."""
        idx = np.asarray(idx, dtype=int)
        return Dataset(schema=self.schema,
                       frame=self.frame.iloc[idx].reset_index(drop=True),
                       labels=None if self.labels is None else self.labels[idx],
                       raw_labels=None if self.raw_labels is None else self.raw_labels[idx],
                       features=None if self.features is None else self.features[idx],
                       feature_names=self.feature_names,
                       scaling=self.scaling)

    def validate(self) -> None:
        if self.labels is not None:
            if len(self.labels) != len(self.frame) or \
                    not np.isin(self.labels, [0, 1]).all():
                raise ContractError(f"{self.schema.name}: labels must be 0/1, one per row")
        if self.features is not None:
            if self.features.shape[0] != len(self.frame):
                raise ContractError(f"{self.schema.name}: feature/row count mismatch")
            if not np.isfinite(self.features).all():
                raise ContractError(f"{self.schema.name}: non-finite features")


def from_matrix(name: str,
                features: np.ndarray,
                labels: tp.Optional[np.ndarray] = None) -> Dataset:
    """An all-continuous dataset straight from a matrix; features are the columns."""
    features = np.asarray(features, dtype=np.float64)
    names = [f"x{i}" for i in range(features.shape[1])]
    schema = Schema(name=name,
                    columns=tuple(ColumnSpec(n) for n in names),
                    label=LabelSpec() if labels is not None else None,
                    header=True)
    labels = None if labels is None else np.asarray(labels, dtype=int)
    ds = Dataset(schema=schema,
                 frame=pd.DataFrame(features, columns=names),
                 labels=labels,
                 raw_labels=None if labels is None else labels.astype(str),
                 features=features.copy(),
                 feature_names=names)
    ds.validate()
    return ds


__api__ = [
    'Dataset',
    'Schema',
    'ColumnSpec',
    'LabelSpec',
    'load_schema',
    'schema_from_dict',
    'from_matrix'
]
