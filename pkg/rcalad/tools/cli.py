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
The ``rcalad-cli`` console script.

On failure a single machine-readable line ``error: <ErrorClass>: <message>``
is written to stderr and the exit status is nonzero.
"""

# Core packages
import os
import sys
import json
import typing as tp
import argparse
import logging

# 3rd party packages

# Project packages
import rcalad.core.logging
from rcalad.cmdline import Cmdline
from rcalad.core.exceptions import ContractError, RCALADError
from rcalad.data.ingest import write_dataset
from rcalad.data.toy import ToySpec, synth_toy
from rcalad.perf_measures.wilcoxon import wilcoxon_signed_rank
from rcalad.pipeline.config import load_config
from rcalad.pipeline import experiment
from rcalad.pipeline.report import per_run_values, read_metrics

kExitError = 1
kExitFailedRuns = 2


class RCALADCli():
    def __init__(self) -> None:
        self.logger = logging.getLogger(__name__)

    def __call__(self, args: argparse.Namespace) -> int:
        handler = getattr(self, '_' + args.command)
        return handler(args)

    def _config(self, args: argparse.Namespace):
        return load_config(args.config, Cmdline.overrides(args))

    def _train(self, args: argparse.Namespace) -> int:
        config = self._config(args)
        report = experiment.run_experiment(config, evaluate_test=False, resume=args.checkpoint)
        return kExitFailedRuns if report.failed else 0

    def _eval(self, args: argparse.Namespace) -> int:
        config = self._config(args)
        report = experiment.run_experiment(config, resume=args.checkpoint)
        summary = report.metrics_dict()
        print(json.dumps({k: summary[k] for k in ['precision', 'recall', 'f1', 'auroc',
                                                  'n_runs', 'wilcoxon']}))
        return kExitFailedRuns if report.failed else 0

    def _score(self, args: argparse.Namespace) -> int:
        config = self._config(args)
        out = None
        if config.output_dir is not None:
            out = os.path.join(config.output_dir, f"scores_run{args.run}.csv")
        scores, _ = experiment.score_checkpoint(config, args.checkpoint, out, args.run)
        self.logger.info("Scored %d rows: %s", len(scores), ",".join(scores.available()))
        return 0

    def _ablate(self, args: argparse.Namespace) -> int:
        config = self._config(args)
        reports = experiment.ablate(config, args.variants, args.sigma_sweep)
        for label, rep in reports.items():
            f1 = rep.aggregate.mean.get('f1') if rep.aggregate else None
            self.logger.info("%-22s f1=%s", label, f"{f1:.4f}" if f1 is not None else "n/a")
        return kExitFailedRuns if any(r.failed for r in reports.values()) else 0

    def _stats(self, args: argparse.Namespace) -> int:
        a = per_run_values(read_metrics(args.reports[0]), args.metric)
        b = per_run_values(read_metrics(args.reports[1]), args.metric)
        if len(a) != len(b):
            raise ContractError(f"Reports have {len(a)} and {len(b)} successful runs")

        result = wilcoxon_signed_rank(a, b)
        line = json.dumps(result.as_dict(), sort_keys=True)
        print(line)
        if args.out is not None:
            with open(args.out, 'w') as f:
                f.write(line + '\n')
        return 0

    def _toy(self, args: argparse.Namespace) -> int:
        spec = ToySpec(kind=args.kind,
                       n_normal=args.n_normal,
                       n_anomaly=args.n_anomaly,
                       noise=args.noise,
                       seed=args.seed)
        schema_path = write_dataset(synth_toy(spec), args.out)
        self.logger.info("Wrote %s and %s", args.out, schema_path)
        return 0


def main(argv: tp.Optional[tp.List[str]] = None) -> int:
    cmdline = Cmdline()
    args = cmdline.parser.parse_args(argv)
    rcalad.core.logging.initialize(args.log_level)

    try:
        return RCALADCli()(args)
    except (RCALADError, ArithmeticError, OSError) as err:
        logging.getLogger(__name__).debug("Command failed", exc_info=True)
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return kExitError


if __name__ == '__main__':
    sys.exit(main())
