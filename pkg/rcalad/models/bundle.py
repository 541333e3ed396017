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
The encoder E, generator G and discriminators :math:`D_{xz}, D_{xx}, D_{zz},
D_{xxzz}` of one model, and the three forward entry points used by training and
scoring.
"""

# Core packages
import typing as tp
import copy
import logging

# 3rd party packages

# Project packages
from rcalad.core.tensor import Tensor
from rcalad.core.rng import RngStream
from rcalad.core.exceptions import ContractError
from rcalad.models.specs import BundleSpec
from rcalad.models.network import Network, Bound, build_network
from rcalad.models.architectures import kDiscriminators


class DiscriminatorOutput(tp.NamedTuple):
    logit: Tensor
    prob: Tensor
    features: Tensor


class ModelBundle():
    """
    Discriminators that a variant does not use are not built; their slot is
    ``None``.
    """

    def __init__(self,
                 spec: BundleSpec,
                 E: Network,
                 G: Network,
                 D_xz: Network,
                 D_xx: tp.Optional[Network] = None,
                 D_zz: tp.Optional[Network] = None,
                 D_xxzz: tp.Optional[Network] = None) -> None:
        self.spec = spec
        self.E = E
        self.G = G
        self.D_xz = D_xz
        self.D_xx = D_xx
        self.D_zz = D_zz
        self.D_xxzz = D_xxzz

    @property
    def input_dim(self) -> int:
        return self.spec.input_dim

    @property
    def latent_dim(self) -> int:
        return self.spec.latent_dim

    def discriminators(self) -> tp.Dict[str, Network]:
        found = {'dxz': self.D_xz, 'dxx': self.D_xx,
                 'dzz': self.D_zz, 'dxxzz': self.D_xxzz}
        return {k: v for k, v in found.items() if v is not None}

    def networks(self) -> tp.Dict[str, Network]:
        ret = {'encoder': self.E, 'generator': self.G}
        ret.update(self.discriminators())
        return ret

    def has(self, name: str) -> bool:
        return name in self.networks()

    def copy(self) -> 'ModelBundle':
        return copy.deepcopy(self)


def build_bundle(spec: BundleSpec,
                 rng: RngStream,
                 discriminators: tp.Iterable[str] = tuple(kDiscriminators)) -> ModelBundle:
    """
    Build E, G, :math:`D_{xz}` and whichever of the other discriminators are
    listed. Each network draws its initial weights from its own sub-stream.
    """
    wanted = set(discriminators) | {'dxz'}
    unknown = wanted - set(kDiscriminators)
    assert not unknown, f"Unknown discriminators {sorted(unknown)}"

    def _build(name: str) -> tp.Optional[Network]:
        if name not in wanted and name in kDiscriminators:
            return None
        return build_network(getattr(spec, name), rng.substream(f"init/{name}"))

    bundle = ModelBundle(spec,
                         E=_build('encoder'),
                         G=_build('generator'),
                         D_xz=_build('dxz'),
                         D_xx=_build('dxx'),
                         D_zz=_build('dzz'),
                         D_xxzz=_build('dxxzz'))

    logging.getLogger(__name__).info("Built bundle: input_dim=%d, latent_dim=%d, networks=%s",
                                     spec.input_dim,
                                     spec.latent_dim,
                                     ",".join(bundle.networks().keys()))
    return bundle


def encode(E: Network,
           x: Tensor,
           mode: str = 'eval',
           rng: tp.Optional[RngStream] = None,
           bound: tp.Optional[Bound] = None) -> Tensor:
    """:math:`z_x = E(x)`."""
    return E([x], mode, rng, bound).output


def generate(G: Network,
             z: Tensor,
             mode: str = 'eval',
             rng: tp.Optional[RngStream] = None,
             bound: tp.Optional[Bound] = None) -> Tensor:
    """:math:`\\hat{x} = G(z)`."""
    return G([z], mode, rng, bound).output


def discriminate(D: Network,
                 inputs: tp.Sequence[Tensor],
                 mode: str = 'eval',
                 rng: tp.Optional[RngStream] = None,
                 bound: tp.Optional[Bound] = None) -> DiscriminatorOutput:
    """
    Run a discriminator on a pair (:math:`D_{xz}, D_{xx}, D_{zz}`) or quadruple
    (:math:`D_{xxzz}`).
    """
    if not D.spec.discriminator:
        raise ContractError(f"{D.name} is not a discriminator")
    if len(inputs) != D.arity:
        raise ContractError(
            f"{D.name}: expects {D.arity} inputs, got {len(inputs)}")

    out = D(inputs, mode, rng, bound)
    return DiscriminatorOutput(logit=out.logit,
                               prob=out.output,
                               features=out.features)


__api__ = [
    'ModelBundle',
    'DiscriminatorOutput',
    'build_bundle',
    'encode',
    'generate',
    'discriminate'
]
