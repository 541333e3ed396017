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
Dense networks built from a :class:`~rcalad.models.specs.NetworkSpec`.

A network owns plain numpy parameter arrays. A forward pass either reads them
as constants or, after :meth:`Network.bind` on a tape, as tracked leaves, so the
same network can be trained in one loss and held fixed in another.
"""

# Core packages
import typing as tp
import copy
import logging

# 3rd party packages
import numpy as np

# Project packages
from rcalad.core.tensor import Tensor, Tape
from rcalad.core.rng import RngStream
from rcalad.core import ops, spectral
from rcalad.core.exceptions import ContractError, ShapeError, ConfigurationError
from rcalad.models.specs import NetworkSpec, LayerSpec

Bound = tp.Dict[str, Tensor]


class NetworkOutput(tp.NamedTuple):
    """
    Attributes:
        output: Final activation output.

        logit: Final pre-activation output (the raw logit for discriminators).

        features: Input to the final layer, i.e. the penultimate activations.
    """
    output: Tensor
    logit: Tensor
    features: Tensor


def _init_std(layer: LayerSpec, fan_in: int) -> float:
    if layer.activation in ('lrelu', 'relu'):
        return float(np.sqrt(2.0 / fan_in))
    return float(np.sqrt(1.0 / fan_in))


class Network():
    """
    Attributes:
        spec: What was built.

        params: Trainable arrays keyed ``<stack>.<index>.<W|b|gamma|beta>``.

        bn_stats: Running batch-norm statistics keyed ``<stack>.<index>``.

        sn_states: Spectral-norm power-iteration vectors keyed like ``bn_stats``.
    """

    def __init__(self,
                 spec: NetworkSpec,
                 params: tp.Dict[str, np.ndarray],
                 bn_stats: tp.Dict[str, ops.RunningStats],
                 sn_states: tp.Dict[str, spectral.SpectralState]) -> None:
        self.spec = spec
        self.params = params
        self.bn_stats = bn_stats
        self.sn_states = sn_states

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def arity(self) -> int:
        return self.spec.arity

    def n_params(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def bind(self, tape: tp.Optional[Tape] = None) -> Bound:
        """
        Parameters as tensors: watched leaves on ``tape`` when given, constants
        otherwise.
        """
        if tape is None:
            return {k: Tensor(v) for k, v in self.params.items()}
        return {k: tape.watch(Tensor(v)) for k, v in self.params.items()}

    def refresh_spectral(self, iters: int = 1) -> None:
        """Advance every spectral-norm vector by ``iters`` power iterations."""
        for key, state in self.sn_states.items():
            _, self.sn_states[key] = spectral.spectral_normalize(
                Tensor(self.params[key + '.W']), state, iters)

    def __call__(self,
                 inputs: tp.Sequence[Tensor],
                 mode: str = 'eval',
                 rng: tp.Optional[RngStream] = None,
                 bound: tp.Optional[Bound] = None) -> NetworkOutput:
        spec = self.spec
        if len(inputs) != spec.arity:
            raise ContractError(
                f"{spec.name}: expects {spec.arity} inputs, got {len(inputs)}")
        for i, (x, d) in enumerate(zip(inputs, spec.input_dims)):
            if x.ndim != 2 or x.shape[1] != d:
                raise ShapeError(
                    f"{spec.name}: input {i} has shape {list(x.shape)}, expected [n,{d}]")

        if bound is None:
            bound = self.bind()

        if spec.branches:
            outs = []
            for branch in spec.branches:
                h = ops.concat([inputs[i] for i in branch.inputs], axis=1)
                h, _, _ = self._stack(branch.name, branch.layers, h, mode, rng, bound, False)
                outs.append(h)
            h = ops.concat(outs, axis=1)
        else:
            h = ops.concat(list(inputs), axis=1)

        out, logit, features = self._stack('joint',
                                           spec.joint,
                                           h,
                                           mode,
                                           rng,
                                           bound,
                                           spec.discriminator)
        return NetworkOutput(output=out, logit=logit, features=features)

    def _stack(self,
               prefix: str,
               layers: tp.Sequence[LayerSpec],
               h: Tensor,
               mode: str,
               rng: tp.Optional[RngStream],
               bound: Bound,
               split_last: bool) -> tp.Tuple[Tensor, Tensor, Tensor]:
        features = h
        logit = h
        for i, layer in enumerate(layers):
            key = f"{prefix}.{i}"
            last = i == len(layers) - 1
            if last:
                features = h

            W = bound[key + '.W']
            if layer.spectral_norm:
                W = spectral.spectral_apply(W, self.sn_states[key])

            h = ops.affine(h, W, bound[key + '.b'])

            if layer.batch_norm:
                h = ops.batch_norm(h,
                                   ops.BatchNormParams(bound[key + '.gamma'],
                                                       bound[key + '.beta'],
                                                       self.bn_stats[key]),
                                   mode)
            logit = h
            h = ops.activation(layer.activation, h)
            if layer.dropout > 0.0 and not (last and split_last):
                h = ops.dropout(h, layer.dropout, mode, rng)

        return h, logit, features

    def state_arrays(self) -> tp.Dict[str, np.ndarray]:
        """Every array needed to reproduce this network, flat and named."""
        ret = {'param/' + k: v for k, v in self.params.items()}
        for k, s in self.bn_stats.items():
            ret[f"bn/{k}.mean"] = s.mean
            ret[f"bn/{k}.var"] = s.var
        for k, s in self.sn_states.items():
            ret[f"sn/{k}.u"] = s.u
            ret[f"sn/{k}.iterations"] = np.asarray([s.iterations], dtype=np.float64)
        return ret

    def load_state_arrays(self, arrays: tp.Dict[str, np.ndarray]) -> None:
        for k in self.params:
            self.params[k] = np.array(arrays['param/' + k])
        for k, s in self.bn_stats.items():
            s.mean = np.array(arrays[f"bn/{k}.mean"])
            s.var = np.array(arrays[f"bn/{k}.var"])
        for k in self.sn_states:
            self.sn_states[k] = spectral.SpectralState(
                u=np.array(arrays[f"sn/{k}.u"]),
                iterations=int(arrays[f"sn/{k}.iterations"][0]))

    def copy(self) -> 'Network':
        return copy.deepcopy(self)


def build_network(spec: NetworkSpec,
                  rng: RngStream,
                  init: str = 'gaussian') -> Network:
    """
    Allocate and initialize a network.

    Weights are scaled Gaussian (:math:`\\sqrt{2/fan_{in}}` for (L)ReLU layers,
    :math:`\\sqrt{1/fan_{in}}` otherwise) and biases zero. ``init='identity'``
    sets every weight to a (rectangular) identity, which is only useful for
    stubs in tests.
    """
    spec.validate()
    if init not in ('gaussian', 'identity'):
        raise ConfigurationError(f"Unknown init '{init}'")

    logger = logging.getLogger(__name__)
    params = {}  # type: tp.Dict[str, np.ndarray]
    bn_stats = {}  # type: tp.Dict[str, ops.RunningStats]
    sn_states = {}  # type: tp.Dict[str, spectral.SpectralState]

    for prefix, width, layers in spec.stacks():
        for i, layer in enumerate(layers):
            key = f"{prefix}.{i}"
            if init == 'identity':
                W = np.eye(width, layer.width)
            else:
                W = rng.normal((width, layer.width), scale=_init_std(layer, width))

            params[key + '.W'] = W
            params[key + '.b'] = np.zeros(layer.width)

            if layer.batch_norm:
                params[key + '.gamma'] = np.ones(layer.width)
                params[key + '.beta'] = np.zeros(layer.width)
                bn_stats[key] = ops.RunningStats.fresh(layer.width)

            if layer.spectral_norm:
                sn_states[key] = spectral.SpectralState.init(layer.width, rng)

            width = layer.width

    net = Network(spec, params, bn_stats, sn_states)
    logger.debug("Built %s: arity=%d, %d parameters",
                 spec.name,
                 spec.arity,
                 net.n_params())
    return net


__api__ = [
    'Network',
    'NetworkOutput',
    'build_network'
]
