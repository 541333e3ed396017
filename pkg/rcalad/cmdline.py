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
Command line parsing for ``rcalad-cli``.
"""

# Core packages
import typing as tp
import argparse

# 3rd party packages

# Project packages
from rcalad.scoring.scores import kCliNames
from rcalad.training.variants import kVariants
from rcalad.data.toy import kToyKinds

kCommands = ['train', 'score', 'eval', 'ablate', 'stats', 'toy']


class Cmdline():
    """
    One sub-command per pipeline entry point. Flags given on the command line
    override the matching keys of the ``--config`` file.
    """

    def __init__(self) -> None:
        self.parser = argparse.ArgumentParser(prog='rcalad-cli',
                                              description="Adversarial anomaly detection on tabular data")
        self.parser.add_argument("--log-level",
                                 choices=['ERROR', 'WARNING', 'INFO', 'DEBUG', 'TRACE'],
                                 default='INFO',
                                 help="""Console logging level.""")
        sub = self.parser.add_subparsers(dest='command', required=True)

        self.init_train(sub.add_parser('train', help="Train without evaluating"))
        self.init_score(sub.add_parser('score', help="Score a test split with a checkpoint"))
        self.init_eval(sub.add_parser('eval', help="Train, score and evaluate"))
        self.init_ablate(sub.add_parser('ablate', help="Compare variants on one experiment"))
        self.init_stats(sub.add_parser('stats', help="Wilcoxon test between two reports"))
        self.init_toy(sub.add_parser('toy', help="Write a synthetic 2-D dataset"))

    @staticmethod
    def add_experiment_args(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--config",
                            metavar="PATH",
                            help="""

                            Experiment YAML file. Keys left out take the
                            packaged defaults.

                            """)
        parser.add_argument("--seed",
                            type=int,
                            help="""Seed of the first run; run i uses seed + i.""")
        parser.add_argument("--runs",
                            type=int,
                            help="""Number of independent runs.""")
        parser.add_argument("--out",
                            metavar="DIR",
                            help="""Output directory for reports and checkpoints.""")
        parser.add_argument("--variant",
                            choices=list(kVariants),
                            help="""

                            Which discriminators and terms the objective
                            uses. ``ali`` has D_xz only; ``rcalad`` has all
                            four discriminators and the supplementary term.

                            """)
        parser.add_argument("--score",
                            choices=list(kCliNames),
                            help="""Anomaly score to threshold.""")

    def init_train(self, parser: argparse.ArgumentParser) -> None:
        self.add_experiment_args(parser)
        parser.add_argument("--checkpoint",
                            metavar="PATH",
                            help="""Resume run 0 from this checkpoint.""")

    def init_score(self, parser: argparse.ArgumentParser) -> None:
        self.add_experiment_args(parser)
        parser.add_argument("--checkpoint",
                            metavar="PATH",
                            required=True,
                            help="""Trained bundle to score with.""")
        parser.add_argument("--run",
                            type=int,
                            default=0,
                            help="""

                            Which run's test split to rebuild (the checkpoint
                            should come from that run).

                            """)

    def init_eval(self, parser: argparse.ArgumentParser) -> None:
        self.add_experiment_args(parser)
        parser.add_argument("--checkpoint",
                            metavar="PATH",
                            help="""Resume run 0 from this checkpoint.""")
        parser.add_argument("--baseline",
                            metavar="PATH",
                            help="""

                            ``metrics.json`` (or its directory) of another
                            experiment with the same number of runs; adds a
                            paired Wilcoxon test to the report.

                            """)

    def init_ablate(self, parser: argparse.ArgumentParser) -> None:
        self.add_experiment_args(parser)
        parser.add_argument("--variants",
                            nargs='+',
                            choices=list(kVariants),
                            help="""Variants to run; all of them by default.""")
        parser.add_argument("--sigma-sweep",
                            action='store_true',
                            help="""

                            Instead of comparing variants, run the full model
                            once per supplementary distribution.

                            """)

    def init_stats(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("reports",
                            nargs=2,
                            metavar="REPORT",
                            help="""Two ``metrics.json`` files or report directories.""")
        parser.add_argument("--metric",
                            default='f1',
                            choices=['precision', 'recall', 'f1', 'auroc'],
                            help="""Per-run metric to pair.""")
        parser.add_argument("--out",
                            metavar="PATH",
                            help="""Write the result as JSON here as well.""")

    def init_toy(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--out",
                            metavar="PATH",
                            required=True,
                            help="""

                            CSV file to write; the schema goes next to it as
                            ``<stem>.schema.yaml``.

                            """)
        parser.add_argument("--kind", choices=kToyKinds, default='gaussian_ring')
        parser.add_argument("--n-normal", type=int, default=2500)
        parser.add_argument("--n-anomaly", type=int, default=100)
        parser.add_argument("--noise", type=float, default=0.05)
        parser.add_argument("--seed", type=int, default=0)

    @staticmethod
    def overrides(args: argparse.Namespace) -> tp.Dict[str, tp.Any]:
        """Config overrides (dotted keys) from the experiment flags."""
        return {
            'seed': getattr(args, 'seed', None),
            'runs': getattr(args, 'runs', None),
            'output_dir': getattr(args, 'out', None),
            'train.variant': getattr(args, 'variant', None),
            'score.name': getattr(args, 'score', None),
            'baseline_report': getattr(args, 'baseline', None)
        }


def sphinx_cmdline():
    return Cmdline().parser


__api__ = [
    'Cmdline',
    'kCommands',
    'sphinx_cmdline'
]
