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
The latent prior :math:`p(z)` and the supplementary input-space distributions
:math:`\\sigma(x)` whose samples are pushed towards the normal manifold through
:math:`D_{xz}`.
"""

# Core packages
import typing as tp
import dataclasses

# 3rd party packages
import implements
import numpy as np

# Project packages
from rcalad.core.tensor import Tensor, dtype
from rcalad.core.rng import RngStream
from rcalad.core.exceptions import ConfigurationError, ContractError


class ISupplementaryDistribution(implements.Interface):
    """
    Interface for supplementary distributions :math:`\\sigma(x)`.
    """

    def draw(self, n: int, dim: int, rng: RngStream) -> np.ndarray:
        """
        Draw ``n`` i.i.d. rows of width ``dim``.
        """
        raise NotImplementedError


@implements.implements(ISupplementaryDistribution)
class StandardNormal():
    """:math:`N(0,I)`; the default."""

    def draw(self, n: int, dim: int, rng: RngStream) -> np.ndarray:
        return rng.normal((n, dim))


@implements.implements(ISupplementaryDistribution)
class WideNormal():
    """:math:`N(0,2I)`, i.e. per-coordinate standard deviation :math:`\\sqrt{2}`."""

    def draw(self, n: int, dim: int, rng: RngStream) -> np.ndarray:
        return rng.normal((n, dim), scale=float(np.sqrt(2.0)))


@implements.implements(ISupplementaryDistribution)
class SymmetricUniform():
    """:math:`U(-1,+1)` per coordinate."""

    def draw(self, n: int, dim: int, rng: RngStream) -> np.ndarray:
        return rng.uniform((n, dim), low=-1.0, high=1.0)


kSupplementaryKinds = {
    'normal_0_1': StandardNormal,
    'normal_0_2': WideNormal,
    'uniform_m1_1': SymmetricUniform
}


@dataclasses.dataclass(frozen=True)
class LatentPrior():
    dim: int
    kind: str = 'standard_normal'


@dataclasses.dataclass(frozen=True)
class SupplementaryDistribution():
    dim: int
    kind: str = 'normal_0_1'

    def validate(self) -> None:
        if self.kind not in kSupplementaryKinds:
            raise ConfigurationError(
                f"Unknown supplementary distribution '{self.kind}': must be one of "
                f"{sorted(kSupplementaryKinds)}")


def factory(kind: str) -> ISupplementaryDistribution:
    """Construct the supplementary distribution named ``kind``."""
    if kind not in kSupplementaryKinds:
        raise ConfigurationError(
            f"Unknown supplementary distribution '{kind}': must be one of "
            f"{sorted(kSupplementaryKinds)}")
    return kSupplementaryKinds[kind]()


def sample_latent(prior: LatentPrior, n: int, rng: RngStream) -> Tensor:
    if n < 1:
        raise ContractError(f"sample_latent: need n >= 1, got {n}")
    return Tensor(rng.normal((n, prior.dim)))


def sample_supplementary(sigma: SupplementaryDistribution,
                         n: int,
                         rng: RngStream) -> Tensor:
    """
    Draw ``n`` rows from :math:`\\sigma(x)`; ``n=0`` gives an empty
    ``(0, dim)`` tensor without consuming the stream.
    """
    dist = factory(sigma.kind)
    if n < 0:
        raise ContractError(f"sample_supplementary: negative n={n}")
    if n == 0:
        return Tensor(np.zeros((0, sigma.dim), dtype=dtype()))
    return Tensor(dist.draw(n, sigma.dim, rng))


__api__ = [
    'ISupplementaryDistribution',
    'LatentPrior',
    'SupplementaryDistribution',
    'sample_latent',
    'sample_supplementary',
    'factory'
]
