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
Sign conventions turning raw scores into "larger = more anomalous".
"""

# Core packages
import typing as tp
import dataclasses

# 3rd party packages

# Project packages
from rcalad.core.exceptions import ConfigurationError
from rcalad.scoring.scores import ScoreVector, kScoreNames

kSigns = ['as_is', 'negate']


@dataclasses.dataclass(frozen=True)
class OrientationConvention():
    """
    Discriminator outputs are high for well-reconstructed (normal) rows, so
    ``a_logits`` and ``a_all`` are negated by default.
    """
    a_l1: str = 'as_is'
    a_l2: str = 'as_is'
    a_logits: str = 'negate'
    a_features: str = 'as_is'
    a_fm: str = 'as_is'
    a_all: str = 'negate'

    def validate(self) -> None:
        for n in kScoreNames:
            if getattr(self, n) not in kSigns:
                raise ConfigurationError(
                    f"Orientation for {n} must be one of {kSigns}, got '{getattr(self, n)}'")

    @staticmethod
    def as_is() -> 'OrientationConvention':
        return OrientationConvention(**{n: 'as_is' for n in kScoreNames})

    @staticmethod
    def from_dict(d: tp.Dict[str, str]) -> 'OrientationConvention':
        unknown = set(d) - set(kScoreNames)
        if unknown:
            raise ConfigurationError(f"Unknown scores in orientation: {sorted(unknown)}")
        conv = OrientationConvention(**d)
        conv.validate()
        return conv


def orient(scores: ScoreVector, convention: OrientationConvention) -> ScoreVector:
    convention.validate()
    out = ScoreVector()
    for n in kScoreNames:
        value = getattr(scores, n)
        if value is not None and getattr(convention, n) == 'negate':
            value = -value
        setattr(out, n, value)
    return out


__api__ = [
    'OrientationConvention',
    'orient'
]
