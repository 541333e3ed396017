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
Per-sample score dumps: one CSV row per sample, in sample order.
"""

# Core packages
import typing as tp
import logging

# 3rd party packages
import numpy as np
import pandas as pd

# Project packages
from rcalad.core.exceptions import IngestionError
from rcalad.scoring.scores import ScoreVector, kScoreNames

kColumns = ['sample_id'] + kScoreNames + ['label']


def scores_to_frame(scores: ScoreVector,
                    labels: tp.Optional[np.ndarray] = None) -> pd.DataFrame:
    n = len(scores)
    df = pd.DataFrame({'sample_id': np.arange(n)})
    for name in kScoreNames:
        value = getattr(scores, name)
        df[name] = value if value is not None else np.full(n, np.nan)
    if labels is not None:
        df['label'] = np.asarray(labels, dtype=int)
    return df


def write_scores(path: str,
                 scores: ScoreVector,
                 labels: tp.Optional[np.ndarray] = None) -> None:
    """
    Write the score table. Scores the bundle could not compute are empty cells;
    the label column is omitted without labels.
    """
    df = scores_to_frame(scores, labels)
    df.to_csv(path, index=False, float_format='%.17g')
    logging.getLogger(__name__).info("Wrote %d score rows to %s", len(df), path)


def read_scores(path: str) -> tp.Tuple[ScoreVector, tp.Optional[np.ndarray]]:
    try:
        df = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise IngestionError(f"Cannot read score dump {path}: {err}") from err

    missing = [c for c in ['sample_id'] + kScoreNames if c not in df.columns]
    if missing:
        raise IngestionError(f"Score dump {path} is missing columns {missing}")

    df = df.sort_values('sample_id', kind='stable')
    scores = ScoreVector()
    for name in kScoreNames:
        col = df[name].to_numpy(dtype=np.float64)
        setattr(scores, name, None if np.isnan(col).all() else col)

    labels = df['label'].to_numpy(dtype=int) if 'label' in df.columns else None
    return scores, labels


__api__ = [
    'write_scores',
    'read_scores',
    'scores_to_frame'
]
