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
Declarative descriptions of the dense networks: layers, input branches, the
joint stack after branch concatenation, and the full six-network bundle.
"""

# Core packages
import typing as tp
import dataclasses

# 3rd party packages

# Project packages
from rcalad.core.exceptions import ConfigurationError
from rcalad.core import ops


@dataclasses.dataclass(frozen=True)
class LayerSpec():
    """One dense layer: affine, then optional batch norm, activation, dropout."""
    width: int
    activation: str = 'none'
    batch_norm: bool = False
    dropout: float = 0.0
    spectral_norm: bool = False

    def validate(self) -> None:
        if not isinstance(self.width, int) or self.width < 1:
            raise ConfigurationError(f"Layer width must be >= 1, got {self.width}")
        if self.activation not in ops.kActivations:
            raise ConfigurationError(
                f"Unknown activation '{self.activation}': must be one of {ops.kActivations}")
        if not 0.0 <= self.dropout <= 1.0:
            raise ConfigurationError(f"Dropout rate {self.dropout} outside [0,1]")


@dataclasses.dataclass(frozen=True)
class BranchSpec():
    """
    A stack applied to the concatenation of some of the network inputs before
    the joint stack. A branch with no layers passes the concatenation through.
    """
    name: str
    inputs: tp.Tuple[int, ...]
    layers: tp.Tuple[LayerSpec, ...] = ()


@dataclasses.dataclass(frozen=True)
class NetworkSpec():
    """
    Attributes:
        name: Used as the parameter-name prefix, e.g. ``dxxzz``.

        input_dims: Width of each positional input; the length is the arity.

        branches: Per-input-group stacks. Empty means "concatenate all inputs".

        joint: Stack applied to the concatenated branch outputs.

        discriminator: If true, the final layer output is treated as a logit and
                       its activation (sigmoid) is applied separately, so the
                       logit, probability and penultimate features are all
                       available.
    """
    name: str
    input_dims: tp.Tuple[int, ...]
    joint: tp.Tuple[LayerSpec, ...]
    branches: tp.Tuple[BranchSpec, ...] = ()
    discriminator: bool = False

    @property
    def arity(self) -> int:
        return len(self.input_dims)

    def branch_in_width(self, branch: BranchSpec) -> int:
        return sum(self.input_dims[i] for i in branch.inputs)

    def branch_out_width(self, branch: BranchSpec) -> int:
        if branch.layers:
            return branch.layers[-1].width
        return self.branch_in_width(branch)

    def joint_in_width(self) -> int:
        if not self.branches:
            return sum(self.input_dims)
        return sum(self.branch_out_width(b) for b in self.branches)

    @property
    def output_width(self) -> int:
        return self.joint[-1].width

    @property
    def feature_width(self) -> int:
        if len(self.joint) > 1:
            return self.joint[-2].width
        return self.joint_in_width()

    def stacks(self) -> tp.List[tp.Tuple[str, int, tp.Tuple[LayerSpec, ...]]]:
        """(prefix, input width, layers) for every stack, in forward order."""
        ret = [(b.name, self.branch_in_width(b), b.layers) for b in self.branches]
        ret.append(('joint', self.joint_in_width(), self.joint))
        return ret

    def validate(self) -> None:
        if not self.joint:
            raise ConfigurationError(f"{self.name}: empty layer list")
        if any(d < 1 for d in self.input_dims) or not self.input_dims:
            raise ConfigurationError(f"{self.name}: bad input dims {self.input_dims}")

        for _, _, layers in self.stacks():
            for layer in layers:
                layer.validate()

        if self.branches:
            used = sorted(i for b in self.branches for i in b.inputs)
            if used != list(range(self.arity)):
                raise ConfigurationError(
                    f"{self.name}: branches must consume each input exactly once, got {used}")

        if self.discriminator and self.joint[-1].width != 1:
            raise ConfigurationError(
                f"{self.name}: discriminator output width must be 1")

    def param_count(self) -> int:
        """:math:`\\sum (in \\cdot out + out)` plus :math:`2 \\cdot out` per batch-norm layer."""
        total = 0
        for _, width, layers in self.stacks():
            for layer in layers:
                total += width * layer.width + layer.width
                if layer.batch_norm:
                    total += 2 * layer.width
                width = layer.width
        return total


@dataclasses.dataclass(frozen=True)
class BundleSpec():
    """Specs for E, G and the four discriminators, plus the two dimensions."""
    input_dim: int
    latent_dim: int
    encoder: NetworkSpec
    generator: NetworkSpec
    dxz: NetworkSpec
    dxx: NetworkSpec
    dzz: NetworkSpec
    dxxzz: NetworkSpec

    def validate(self) -> None:
        for spec in [self.encoder, self.generator,
                     self.dxz, self.dxx, self.dzz, self.dxxzz]:
            spec.validate()

        d, k = self.input_dim, self.latent_dim
        expected = {
            'encoder': ((d,), k),
            'generator': ((k,), d),
        }
        for name, (dims, out) in expected.items():
            spec = getattr(self, name)
            if spec.input_dims != dims or spec.output_width != out:
                raise ConfigurationError(
                    f"{name}: maps {spec.input_dims}->{spec.output_width}, expected {dims}->{out}")

        arities = {'dxz': (d, k), 'dxx': (d, d), 'dzz': (k, k), 'dxxzz': (d, d, k, k)}
        for name, dims in arities.items():
            if getattr(self, name).input_dims != dims:
                raise ConfigurationError(
                    f"{name}: inputs {getattr(self, name).input_dims}, expected {dims}")


def layer_from_dict(d: tp.Dict[str, tp.Any],
                    widths: tp.Dict[str, int],
                    spectral_default: bool = False) -> LayerSpec:
    known = {'width', 'activation', 'batch_norm', 'dropout', 'spectral_norm'}
    unknown = set(d.keys()) - known
    if unknown:
        raise ConfigurationError(f"Unknown layer keys {sorted(unknown)}")

    width = d['width']
    if isinstance(width, str):
        if width not in widths:
            raise ConfigurationError(f"Unknown symbolic width '{width}'")
        width = widths[width]

    return LayerSpec(width=int(width),
                     activation=d.get('activation', 'none'),
                     batch_norm=bool(d.get('batch_norm', False)),
                     dropout=float(d.get('dropout', 0.0)),
                     spectral_norm=bool(d.get('spectral_norm', spectral_default)))


__api__ = [
    'LayerSpec',
    'BranchSpec',
    'NetworkSpec',
    'BundleSpec',
    'layer_from_dict'
]
