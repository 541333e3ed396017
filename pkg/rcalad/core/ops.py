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
Differentiable dense-tensor operations. Each op computes its forward value with
numpy and, when a tape is active and an input is tracked, records the
vector-Jacobian product needed by :meth:`~rcalad.core.tensor.Tape.backward`.
"""

# Core packages
import typing as tp
import dataclasses

# 3rd party packages
import numpy as np
import scipy.special

# Project packages
from rcalad.core.tensor import Tensor, active_tape, dtype, VJP
from rcalad.core.rng import RngStream
from rcalad.core.exceptions import (ShapeError,
                                    ConfigurationError,
                                    DegenerateBatchError)

kLReLUSlope = 0.2
kBatchNormEps = 1e-5
kBatchNormMomentum = 0.9

kActivations = ['lrelu', 'relu', 'tanh', 'sigmoid', 'none']
kModes = ['train', 'eval']


def _emit(kind: str,
          inputs: tp.Sequence[Tensor],
          value: np.ndarray,
          vjp: VJP) -> Tensor:
    tape = active_tape()
    if tape is not None and any(i.tape is tape and i.node_id is not None
                                for i in inputs):
        return tape.record(kind, inputs, value, vjp)
    return Tensor(value)


def _unbroadcast(g: np.ndarray, shape: tp.Tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_mode(mode: str) -> None:
    if mode not in kModes:
        raise ConfigurationError(f"Unknown mode '{mode}': must be one of {kModes}")

################################################################################
# Network layer ops
################################################################################


def affine(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """
    :math:`y = xW + b`, with ``b`` broadcast over the rows of ``x``.
    """
    if x.ndim != 2 or W.ndim != 2 or x.shape[1] != W.shape[0]:
        raise ShapeError(
            f"affine: cannot multiply x{list(x.shape)} by W{list(W.shape)}")
    if b.shape != (W.shape[1],):
        raise ShapeError(
            f"affine: bias{list(b.shape)} does not match W{list(W.shape)}")

    xv, Wv = x.value, W.value
    y = xv @ Wv + b.value

    def vjp(g: np.ndarray):
        return (g @ Wv.T, xv.T @ g, g.sum(axis=0))

    return _emit('affine', (x, W, b), y, vjp)


def activation(kind: str, x: Tensor, slope: float = kLReLUSlope) -> Tensor:
    """
    Elementwise non-linearity: one of ``lrelu``, ``relu``, ``tanh``,
    ``sigmoid``, ``none``.
    """
    xv = x.value
    if kind == 'none':
        return x
    elif kind == 'lrelu':
        mask = np.where(xv > 0, 1.0, slope)
        y = xv * mask
        return _emit('lrelu', (x,), y, lambda g: (g * mask,))
    elif kind == 'relu':
        mask = (xv > 0).astype(dtype())
        y = xv * mask
        return _emit('relu', (x,), y, lambda g: (g * mask,))
    elif kind == 'tanh':
        y = np.tanh(xv)
        return _emit('tanh', (x,), y, lambda g: (g * (1.0 - y * y),))
    elif kind == 'sigmoid':
        y = scipy.special.expit(xv)
        return _emit('sigmoid', (x,), y, lambda g: (g * y * (1.0 - y),))

    raise ConfigurationError(
        f"Unknown activation '{kind}': must be one of {kActivations}")


def sigmoid(x: Tensor) -> Tensor:
    return activation('sigmoid', x)


def concat(parts: tp.Sequence[Tensor], axis: int = -1) -> Tensor:
    """
    Concatenate ``parts`` along ``axis``, preserving order.
    """
    assert len(parts) > 0, "concat() of nothing"
    if len(parts) == 1:
        return parts[0]

    ndim = parts[0].ndim
    ax = axis % ndim
    for p in parts[1:]:
        if p.ndim != ndim or any(p.shape[i] != parts[0].shape[i]
                                 for i in range(ndim) if i != ax):
            raise ShapeError("concat: off-axis dimensions disagree: " +
                             ", ".join(str(list(q.shape)) for q in parts))

    y = np.concatenate([p.value for p in parts], axis=ax)
    splits = np.cumsum([p.shape[ax] for p in parts])[:-1]

    def vjp(g: np.ndarray):
        return tuple(np.split(g, splits, axis=ax))

    return _emit('concat', parts, y, vjp)


def dropout(x: Tensor, rate: float, mode: str, rng: tp.Optional[RngStream]) -> Tensor:
    """
    Inverted dropout: in ``train`` mode kept units are scaled by
    :math:`1/(1-rate)`, so ``eval`` mode is the identity.
    """
    if not 0.0 <= rate <= 1.0:
        raise ConfigurationError(f"Dropout rate {rate} outside [0,1]")
    _check_mode(mode)

    if mode == 'eval' or rate == 0.0:
        return x

    if rate == 1.0:
        mask = np.zeros(x.shape, dtype=dtype())
    else:
        assert rng is not None, "Train-mode dropout needs a random stream"
        keep = rng.uniform(x.shape) >= rate
        mask = keep.astype(dtype()) / (1.0 - rate)

    return _emit('dropout', (x,), x.value * mask, lambda g: (g * mask,))


@dataclasses.dataclass
class RunningStats():
    """Batch-norm running mean/variance; updated in place in train mode."""
    mean: np.ndarray
    var: np.ndarray
    momentum: float = kBatchNormMomentum
    eps: float = kBatchNormEps

    @staticmethod
    def fresh(width: int) -> 'RunningStats':
        return RunningStats(mean=np.zeros(width, dtype=dtype()),
                            var=np.ones(width, dtype=dtype()))


class BatchNormParams(tp.NamedTuple):
    gamma: Tensor
    beta: Tensor
    stats: RunningStats


def batch_norm(x: Tensor, params: BatchNormParams, mode: str) -> Tensor:
    """
    Batch normalization followed by the learned scale/shift.

    - ``train``: normalize by batch mean/(biased) variance and fold the batch
      statistics into the running statistics.

    - ``eval``: normalize by the running statistics, so each row's output is
      independent of the rest of the batch.
    """
    _check_mode(mode)
    stats = params.stats
    gamma, beta = params.gamma, params.beta

    if x.ndim != 2 or x.shape[1] != gamma.shape[0] or beta.shape != gamma.shape:
        raise ShapeError(
            f"batch_norm: input{list(x.shape)} vs gamma{list(gamma.shape)}")

    xv, gv = x.value, gamma.value

    if mode == 'eval':
        inv = 1.0 / np.sqrt(stats.var + stats.eps)
        xhat = (xv - stats.mean) * inv
        y = gv * xhat + beta.value

        def eval_vjp(g: np.ndarray):
            return (g * gv * inv, (g * xhat).sum(axis=0), g.sum(axis=0))

        return _emit('batch_norm', (x, gamma, beta), y, eval_vjp)

    n = xv.shape[0]
    if n < 2:
        raise DegenerateBatchError("batch_norm: batch of size 1 in train mode")

    mu = xv.mean(axis=0)
    var = xv.var(axis=0)
    inv = 1.0 / np.sqrt(var + stats.eps)
    xhat = (xv - mu) * inv
    y = gv * xhat + beta.value

    stats.mean = stats.momentum * stats.mean + (1.0 - stats.momentum) * mu
    stats.var = stats.momentum * stats.var + (1.0 - stats.momentum) * var

    def train_vjp(g: np.ndarray):
        dxhat = g * gv
        dx = (inv / n) * (n * dxhat -
                          dxhat.sum(axis=0) -
                          xhat * (dxhat * xhat).sum(axis=0))
        return (dx, (g * xhat).sum(axis=0), g.sum(axis=0))

    return _emit('batch_norm', (x, gamma, beta), y, train_vjp)

################################################################################
# Elementwise/reduction ops used by losses
################################################################################


def add(a: Tensor, b: Tensor) -> Tensor:
    sa, sb = a.shape, b.shape
    return _emit('add', (a, b), a.value + b.value,
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    sa, sb = a.shape, b.shape
    return _emit('sub', (a, b), a.value - b.value,
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.value, b.value
    return _emit('mul', (a, b), av * bv,
                 lambda g: (_unbroadcast(g * bv, av.shape),
                            _unbroadcast(g * av, bv.shape)))


def square(x: Tensor) -> Tensor:
    xv = x.value
    return _emit('square', (x,), xv * xv, lambda g: (2.0 * g * xv,))


def log(x: Tensor) -> Tensor:
    xv = x.value
    return _emit('log', (x,), np.log(xv), lambda g: (g / xv,))


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    xv = x.value
    inside = ((xv >= lo) & (xv <= hi)).astype(dtype())
    return _emit('clamp', (x,), np.clip(xv, lo, hi), lambda g: (g * inside,))


def total(x: Tensor) -> Tensor:
    shape = x.shape
    return _emit('sum', (x,), np.asarray(x.value.sum()),
                 lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(x: Tensor) -> Tensor:
    shape = x.shape
    n = max(x.value.size, 1)
    return _emit('mean', (x,), np.asarray(x.value.mean()),
                 lambda g: (np.broadcast_to(g / n, shape).copy(),))


__api__ = [
    'affine',
    'activation',
    'sigmoid',
    'concat',
    'dropout',
    'batch_norm',
    'BatchNormParams',
    'RunningStats',
    'add',
    'sub',
    'mul',
    'square',
    'log',
    'clamp',
    'total',
    'mean'
]
