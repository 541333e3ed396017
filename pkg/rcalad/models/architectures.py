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
The published dense layouts, loaded from ``config/architectures.yaml``, and the
conversion of YAML architecture dictionaries into
:class:`~rcalad.models.specs.BundleSpec`.
"""

# Core packages
import os
import typing as tp
import logging

# 3rd party packages
import yaml

# Project packages
from rcalad.core.exceptions import ConfigurationError
from rcalad.models.specs import (BranchSpec,
                                 BundleSpec,
                                 NetworkSpec,
                                 layer_from_dict)

kArchFile = os.path.join(os.path.dirname(__file__),
                         '..',
                         'config',
                         'architectures.yaml')

kNetworks = ['encoder', 'generator', 'dxz', 'dxx', 'dzz', 'dxxzz']
kDiscriminators = ['dxz', 'dxx', 'dzz', 'dxxzz']


def load_layouts(path: str = kArchFile) -> tp.Dict[str, tp.Any]:
    with open(path) as f:
        return yaml.safe_load(f)


def _network_from_dict(name: str,
                       d: tp.Dict[str, tp.Any],
                       input_dims: tp.Tuple[int, ...],
                       widths: tp.Dict[str, int]) -> NetworkSpec:
    unknown = set(d.keys()) - {'joint', 'branches', 'spectral_norm'}
    if unknown:
        raise ConfigurationError(f"{name}: unknown keys {sorted(unknown)}")

    is_disc = name in kDiscriminators
    sn_default = bool(d.get('spectral_norm', is_disc))

    branches = []
    for b in d.get('branches', []):
        branches.append(BranchSpec(name=b['name'],
                                   inputs=tuple(b['inputs']),
                                   layers=tuple(layer_from_dict(l, widths, sn_default)
                                                for l in b.get('layers', []))))

    joint = tuple(layer_from_dict(l, widths, sn_default) for l in d.get('joint', []))
    return NetworkSpec(name=name,
                       input_dims=input_dims,
                       joint=joint,
                       branches=tuple(branches),
                       discriminator=is_disc)


def bundle_spec_from_dict(layout: tp.Dict[str, tp.Any],
                          input_dim: int,
                          latent_dim: tp.Optional[int] = None) -> BundleSpec:
    """
    Build a :class:`BundleSpec` from one architecture dictionary (same format as
    the entries of ``architectures.yaml``).

    Args:
        layout: The architecture dictionary.

        input_dim: Dataset feature dimension; replaces the symbolic ``input``
                   width.

        latent_dim: Overrides the layout's ``latent_dim`` if not None.
    """
    missing = [n for n in kNetworks if n not in layout]
    if missing:
        raise ConfigurationError(f"Architecture is missing networks {missing}")

    k = int(latent_dim if latent_dim is not None else layout['latent_dim'])
    d = int(input_dim)
    widths = {'input': d, 'latent': k}

    dims = {
        'encoder': (d,),
        'generator': (k,),
        'dxz': (d, k),
        'dxx': (d, d),
        'dzz': (k, k),
        'dxxzz': (d, d, k, k)
    }
    nets = {n: _network_from_dict(n, layout[n], dims[n], widths) for n in kNetworks}
    spec = BundleSpec(input_dim=d, latent_dim=k, **nets)
    spec.validate()
    return spec


def default_arch(dataset_kind: str,
                 input_dim: int,
                 latent_dim: tp.Optional[int] = None) -> BundleSpec:
    """
    The published layout for a named dataset kind (``arrhythmia``, ``thyroid``,
    ``musk``, ``kdd``, ``toy``), with the generator output width set to
    ``input_dim``.
    """
    layouts = load_layouts()
    if dataset_kind not in layouts['kinds']:
        raise ConfigurationError(
            f"Unknown dataset kind '{dataset_kind}': must be one of {sorted(layouts['kinds'])}")

    table = layouts['kinds'][dataset_kind]
    logging.getLogger(__name__).debug("Using layout '%s' for '%s' (input_dim=%d)",
                                      table,
                                      dataset_kind,
                                      input_dim)
    return bundle_spec_from_dict(layouts[table], input_dim, latent_dim)


__api__ = [
    'default_arch',
    'bundle_spec_from_dict',
    'load_layouts'
]
