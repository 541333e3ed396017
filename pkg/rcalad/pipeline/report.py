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
Experiment reports and the files they are written to.

``metrics.json``, the score CSVs and the loss-history CSVs depend only on the
configuration, so rerunning an experiment rewrites them byte for byte.
Wall-clock times and the software environment go to ``provenance.json``.
"""

# Core packages
import os
import sys
import json
import typing as tp
import dataclasses
import logging

# 3rd party packages
import numpy as np
import pandas as pd

# Project packages
from rcalad.core.exceptions import IngestionError
from rcalad.perf_measures.metrics import Metrics, RunAggregate, kMetricNames
from rcalad.perf_measures.wilcoxon import WilcoxonResult
from rcalad.scoring.scores import ScoreVector
from rcalad.scoring.dump import write_scores
from rcalad.training.trainer import TrainHistory
from rcalad.version import __version__


@dataclasses.dataclass
class RunRecord():
    """
    Outcome of one run. A failed run has ``error`` set to
    ``"<ErrorClass>: <message>"`` and no metrics.

    Attributes:
        score: The score field the metrics were computed from (may differ from
               the configured one when falling back).

        final_losses: Loss terms of the last epoch.
    """
    run: int
    seed: int
    metrics: tp.Optional[Metrics] = None
    all_scores: tp.Dict[str, Metrics] = dataclasses.field(default_factory=dict)
    score: tp.Optional[str] = None
    epochs: int = 0
    final_losses: tp.Dict[str, float] = dataclasses.field(default_factory=dict)
    wall_clock: float = 0.0
    error: tp.Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def as_dict(self) -> tp.Dict[str, tp.Any]:
        return {
            'run': self.run,
            'seed': self.seed,
            'status': 'ok' if self.ok else 'failed',
            'error': self.error,
            'score': self.score,
            'metrics': self.metrics.as_dict() if self.metrics else None,
            'all_scores': {k: v.as_dict() for k, v in self.all_scores.items()},
            'epochs': self.epochs,
            'final_losses': self.final_losses
        }


@dataclasses.dataclass
class RunArtifacts():
    """Per-sample outputs of a run, kept out of ``metrics.json``."""
    scores: tp.Optional[ScoreVector] = None
    labels: tp.Optional[np.ndarray] = None
    history: tp.Optional[TrainHistory] = None


@dataclasses.dataclass
class Report():
    dataset: str
    variant: str
    score: str
    alpha: float
    seed: int
    config_hash: str
    toggles: tp.Dict[str, bool]
    runs: tp.List[RunRecord]
    aggregate: tp.Optional[RunAggregate] = None
    wilcoxon: tp.Optional[WilcoxonResult] = None
    artifacts: tp.List[RunArtifacts] = dataclasses.field(default_factory=list)

    @property
    def failed(self) -> tp.List[int]:
        return [r.run for r in self.runs if not r.ok]

    def per_run(self, metric: str) -> tp.List[float]:
        """``metric`` of every successful run, in run order."""
        return [getattr(r.metrics, metric) for r in self.runs if r.ok]

    def metrics_dict(self) -> tp.Dict[str, tp.Any]:
        mean = self.aggregate.mean if self.aggregate else {}
        ret = {name: mean.get(name) for name in kMetricNames}
        ret.update({
            'n_runs': self.aggregate.n_runs if self.aggregate else 0,
            'mean': mean,
            'std': self.aggregate.std if self.aggregate else {},
            'wilcoxon': self.wilcoxon.as_dict() if self.wilcoxon else None,
            'dataset': self.dataset,
            'variant': self.variant,
            'score': self.score,
            'alpha': self.alpha,
            'seed': self.seed,
            'config_hash': self.config_hash,
            'toggles': self.toggles,
            'failed_runs': self.failed,
            'runs': [r.as_dict() for r in self.runs]
        })
        return ret

    def provenance_dict(self) -> tp.Dict[str, tp.Any]:
        return {
            'seed': self.seed,
            'config_hash': self.config_hash,
            'wall_clock': {str(r.run): r.wall_clock for r in self.runs},
            'rcalad': __version__,
            'numpy': np.__version__,
            'pandas': pd.__version__,
            'python': sys.version.split()[0]
        }


def _dump_json(obj: tp.Any, path: str) -> None:
    with open(path, 'w') as f:
        json.dump(obj, f, sort_keys=True, indent=2)
        f.write('\n')


def emit_report(report: Report, out_dir: str) -> tp.List[str]:
    """
    Write ``metrics.json``, ``provenance.json``, and for every run with
    artifacts ``scores_run<i>.csv`` and ``loss_history_run<i>.csv``.

    Returns:
        The paths written.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    path = os.path.join(out_dir, 'metrics.json')
    _dump_json(report.metrics_dict(), path)
    written.append(path)

    path = os.path.join(out_dir, 'provenance.json')
    _dump_json(report.provenance_dict(), path)
    written.append(path)

    for record, art in zip(report.runs, report.artifacts):
        if art.scores is not None:
            path = os.path.join(out_dir, f"scores_run{record.run}.csv")
            write_scores(path, art.scores, art.labels)
            written.append(path)
        if art.history is not None and len(art.history) > 0:
            path = os.path.join(out_dir, f"loss_history_run{record.run}.csv")
            art.history.to_frame().to_csv(path, index=False, float_format='%.17g')
            written.append(path)

    logging.getLogger(__name__).info("Report for %s/%s written to %s (%d files)",
                                     report.dataset,
                                     report.variant,
                                     out_dir,
                                     len(written))
    return written


def read_metrics(path: str) -> tp.Dict[str, tp.Any]:
    """Load a ``metrics.json``, or the one inside directory ``path``."""
    if os.path.isdir(path):
        path = os.path.join(path, 'metrics.json')
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as err:
        raise IngestionError(f"Cannot read report {path}: {err}") from err


def per_run_values(metrics: tp.Dict[str, tp.Any], metric: str) -> tp.List[float]:
    """Per-run ``metric`` values of successful runs in a loaded ``metrics.json``."""
    if metric not in kMetricNames:
        raise IngestionError(f"Unknown metric '{metric}': must be one of {kMetricNames}")
    return [r['metrics'][metric] for r in metrics.get('runs', [])
            if r['status'] == 'ok' and r['metrics'][metric] is not None]


def ablation_frame(reports: tp.Dict[str, Report]) -> pd.DataFrame:
    """One row per report label with the mean and std of every metric."""
    rows = []
    for label, rep in reports.items():
        row = {'variant': label,
               'score': rep.score,
               'n_runs': rep.aggregate.n_runs if rep.aggregate else 0,
               'failed': len(rep.failed)}
        for m in kMetricNames:
            row[f"{m}_mean"] = rep.aggregate.mean.get(m) if rep.aggregate else None
            row[f"{m}_std"] = rep.aggregate.std.get(m) if rep.aggregate else None
        rows.append(row)
    return pd.DataFrame(rows)


__api__ = [
    'RunRecord',
    'RunArtifacts',
    'Report',
    'emit_report',
    'read_metrics',
    'per_run_values',
    'ablation_frame'
]
