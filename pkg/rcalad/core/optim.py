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
Adaptive-moment (Adam) optimization over named parameter arrays.
"""

# Core packages
import typing as tp
import dataclasses

# 3rd party packages
import numpy as np

# Project packages
from rcalad.core.exceptions import ContractError

Params = tp.Dict[str, np.ndarray]


@dataclasses.dataclass
class OptimizerState():
    """
    Per-parameter first/second moments plus the shared step counter.

    Defaults are the usual GAN settings: a small learning rate and
    :math:`\\beta_1=0.5`.
    """
    lr: float = 1e-5
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: Params = dataclasses.field(default_factory=dict)
    v: Params = dataclasses.field(default_factory=dict)

    @staticmethod
    def for_params(params: Params, **hyper) -> 'OptimizerState':
        state = OptimizerState(**hyper)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        return state


def adam_step(params: Params,
              grads: Params,
              state: OptimizerState) -> tp.Tuple[Params, OptimizerState]:
    """
    One bias-corrected Adam update. Returns fresh parameter arrays; moment
    arrays in ``state`` are replaced and ``state.t`` is incremented by one.

    Parameters without an entry in ``grads`` are left untouched.
    """
    for name, g in grads.items():
        if name not in params or name not in state.m:
            raise ContractError(f"adam_step: no parameter/state named '{name}'")
        if g.shape != params[name].shape or g.shape != state.m[name].shape:
            raise ContractError(
                f"adam_step: shape mismatch for '{name}': param "
                f"{list(params[name].shape)}, grad {list(g.shape)}, state "
                f"{list(state.m[name].shape)}")

    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t

    updated = dict(params)
    for name, g in grads.items():
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        state.m[name] = m
        state.v[name] = v

        mhat = m / c1
        vhat = v / c2
        updated[name] = params[name] - state.lr * mhat / (np.sqrt(vhat) + state.epsilon)

    return updated, state


__api__ = [
    'OptimizerState',
    'adam_step'
]
