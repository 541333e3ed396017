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
Finite-difference checking of tape gradients.
"""

# Core packages
import typing as tp

# 3rd party packages
import numpy as np

# Project packages
from rcalad.core.tensor import Tensor, Tape

ScalarFn = tp.Callable[..., Tensor]


def analytic_gradient(f: ScalarFn,
                      point: tp.Sequence[np.ndarray]) -> tp.List[np.ndarray]:
    with Tape() as tape:
        leaves = [tape.watch(Tensor(p)) for p in point]
        root = f(*leaves)
        return tape.gradient(root, leaves)


def numeric_gradient(f: ScalarFn,
                     point: tp.Sequence[np.ndarray],
                     h: float = 1e-4) -> tp.List[np.ndarray]:
    """Central differences, one coordinate at a time."""
    work = [np.array(p, dtype=np.float64) for p in point]
    grads = []
    for arr in work:
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f(*[Tensor(w) for w in work]).item()
            flat[i] = orig - h
            fm = f(*[Tensor(w) for w in work]).item()
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads


def grad_check(f: ScalarFn,
               point: tp.Union[np.ndarray, tp.Sequence[np.ndarray]],
               h: float = 1e-4,
               floor: float = 1e-8) -> float:
    """
    Compare tape gradients of the scalar function ``f`` at ``point`` against
    central differences.

    Args:
        f: Takes one :class:`Tensor` per array in ``point``; returns a scalar
           tensor. Must be deterministic across calls.

        point: A single array or a list of arrays.

        h: Finite-difference step.

        floor: Lower bound on the denominator of the relative error.

    Returns:
        :math:`\\max_i |a_i - n_i| / \\max(|a_i|, floor)` over all coordinates.
    """
    if isinstance(point, np.ndarray):
        point = [point]

    analytic = analytic_gradient(f, point)
    numeric = numeric_gradient(f, point, h)

    worst = 0.0
    for a, n in zip(analytic, numeric):
        if a.size == 0:
            continue
        err = np.abs(a - n) / np.maximum(np.abs(a), floor)
        worst = max(worst, float(err.max()))
    return worst


__api__ = [
    'grad_check',
    'analytic_gradient',
    'numeric_gradient'
]
