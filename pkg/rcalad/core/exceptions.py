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
Error vocabulary shared by every RCALAD sub-package.

Each error also derives from the closest builtin, so callers which only care
about "bad value" vs. "bad arithmetic" can catch the builtin instead.
"""

# Core packages
import typing as tp

# 3rd party packages

# Project packages


class RCALADError(Exception):
    """Base class for all errors raised on purpose by RCALAD."""


class ShapeError(RCALADError, ValueError):
    pass


class ConfigurationError(RCALADError, ValueError):
    pass


class ContractError(RCALADError, ValueError):
    pass


class DegenerateBatchError(RCALADError, ValueError):
    pass


class InsufficientDataError(RCALADError, ValueError):
    pass


class UndefinedMetricError(RCALADError, ValueError):
    pass


class IncompatibleCheckpointError(RCALADError, ValueError):
    pass


class UnavailableScoreError(RCALADError, LookupError):
    pass


class NumericalFailureError(RCALADError, ArithmeticError):
    """
    A loss term evaluated to NaN/Inf. ``term`` names the offending term so that
    training can report exactly which discriminator blew up.
    """

    def __init__(self, term: str, value: float) -> None:
        super().__init__(f"Non-finite value {value} in loss term '{term}'")
        self.term = term
        self.value = value


class IngestionError(RCALADError, ValueError):
    """
    Raised while reading a tabular file. ``row`` is the 1-based data row number
    (header excluded) when the problem is local to a row.
    """

    def __init__(self, msg: str, row: tp.Optional[int] = None) -> None:
        if row is not None:
            msg = f"Row {row}: {msg}"
        super().__init__(msg)
        self.row = row


__api__ = [
    'RCALADError',
    'ShapeError',
    'ConfigurationError',
    'ContractError',
    'DegenerateBatchError',
    'InsufficientDataError',
    'UndefinedMetricError',
    'IncompatibleCheckpointError',
    'UnavailableScoreError',
    'NumericalFailureError',
    'IngestionError'
]
