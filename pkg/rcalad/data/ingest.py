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
Reading and writing tabular CSV files described by a
:class:`~rcalad.data.dataset.Schema`. The label, when the schema has one, is
always the last column.
"""

# Core packages
import os
import re
import typing as tp
import logging

# 3rd party packages
import numpy as np
import pandas as pd
import yaml

# Project packages
from rcalad.core.exceptions import IngestionError, ContractError
from rcalad.data.dataset import Dataset, Schema, LabelSpec


def _parse_error_row(err: Exception) -> tp.Optional[int]:
    # pandas reports "Expected N fields in line L, saw M"
    match = re.search(r"line (\d+)", str(err))
    return int(match.group(1)) if match else None


def load_tabular(path: str, schema: Schema) -> Dataset:
    """
    Read ``path`` per ``schema``. Continuous columns must parse as numbers;
    cells equal to one of ``schema.na_values`` become NaN and are imputed when
    the dataset is encoded.

    Raises:
        IngestionError: Missing/empty file, wrong field count or an
                        unparseable cell; ``row`` is the 1-based data row.
    """
    logger = logging.getLogger(__name__)
    if not os.path.isfile(path):
        raise IngestionError(f"No such file: {path}")

    names = schema.names + ([schema.label.name] if schema.label is not None else [])
    try:
        df = pd.read_csv(path,
                         header=0 if schema.header else None,
                         names=names,
                         dtype=str,
                         keep_default_na=False,
                         skipinitialspace=True)
    except pd.errors.EmptyDataError as err:
        raise IngestionError(f"{path} is empty") from err
    except pd.errors.ParserError as err:
        row = _parse_error_row(err)
        if row is not None and schema.header:
            row -= 1
        raise IngestionError(f"{path}: malformed row ({err})", row) from err

    if len(df) == 0:
        raise IngestionError(f"{path} has no data rows")

    missing = df.isna()
    if missing.to_numpy().any():
        row = int(np.argmax(missing.any(axis=1).to_numpy())) + 1
        raise IngestionError(f"{path}: too few fields", row)

    frame = pd.DataFrame(index=df.index)
    na = set(schema.na_values)
    for col in schema.columns:
        raw = df[col.name].str.strip()
        if col.kind == 'categorical':
            frame[col.name] = raw
            continue

        is_na = raw.isin(na)
        values = pd.to_numeric(raw.where(~is_na), errors='coerce')
        bad = values.isna() & ~is_na
        if bad.any():
            row = int(np.argmax(bad.to_numpy())) + 1
            raise IngestionError(
                f"{path}: column '{col.name}' value '{raw.iloc[row - 1]}' is not a number",
                row)
        frame[col.name] = values.astype(np.float64)

    labels = raw_labels = None
    if schema.label is not None:
        raw_labels = df[schema.label.name].str.strip().to_numpy()
        try:
            labels = schema.label.encode(df[schema.label.name])
        except ContractError as err:
            raise IngestionError(f"{path}: {err}") from err

    ds = Dataset(schema=schema, frame=frame, labels=labels, raw_labels=raw_labels)
    logger.info("Loaded %d rows x %d columns from %s%s",
                len(frame),
                len(schema.columns),
                path,
                "" if labels is None else f" ({int(labels.sum())} anomalies)")
    return ds


def write_dataset(dataset: Dataset, path: str) -> str:
    """
    Write ``dataset`` as a headed CSV with a 0/1 ``label`` column last, plus the
    matching schema next to it, so :func:`load_tabular` reads it back.

    Returns:
        The schema path.
    """
    frame = dataset.frame.copy()
    label = None
    if dataset.labels is not None:
        frame['label'] = dataset.labels.astype(int)
        label = LabelSpec()

    if os.path.dirname(path):
        os.makedirs(os.path.dirname(path), exist_ok=True)
    frame.to_csv(path, index=False, float_format='%.17g')

    schema = Schema(name=dataset.schema.name,
                    columns=dataset.schema.columns,
                    label=label,
                    header=True,
                    na_values=dataset.schema.na_values)
    schema_path = os.path.splitext(path)[0] + '.schema.yaml'
    with open(schema_path, 'w') as f:
        yaml.safe_dump(schema.to_dict(), f, sort_keys=False)

    logging.getLogger(__name__).info("Wrote %d rows to %s (schema %s)",
                                     len(frame),
                                     path,
                                     schema_path)
    return schema_path


__api__ = [
    'load_tabular',
    'write_dataset'
]
