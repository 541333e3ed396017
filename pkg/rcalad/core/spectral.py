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
Spectral normalization of weight matrices by power iteration.

For :math:`W \\in \\mathbb{R}^{in \\times out}` we keep a persistent unit vector
:math:`u \\in \\mathbb{R}^{out}` and refine it with

.. math::
   v \\leftarrow \\frac{Wu}{\\|Wu\\|}, \\qquad u \\leftarrow \\frac{W^Tv}{\\|W^Tv\\|}

The estimate is :math:`\\hat{\\sigma} = \\|Wu\\|`, which never exceeds the true top
singular value and does not decrease as iterations are added.
"""

# Core packages
import typing as tp
import dataclasses

# 3rd party packages
import numpy as np

# Project packages
from rcalad.core.tensor import Tensor
from rcalad.core.rng import RngStream
from rcalad.core.ops import _emit
from rcalad.core.exceptions import ContractError

kSigmaFloor = 1e-12


@dataclasses.dataclass
class SpectralState():
    u: np.ndarray
    iterations: int = 0

    @staticmethod
    def init(n_out: int, rng: RngStream) -> 'SpectralState':
        u = rng.normal((n_out,))
        return SpectralState(u=u / max(np.linalg.norm(u), kSigmaFloor))


def _unit(x: np.ndarray) -> tp.Tuple[np.ndarray, float]:
    n = float(np.linalg.norm(x))
    return x / max(n, kSigmaFloor), n


def power_iterate(W: np.ndarray, u: np.ndarray, iters: int) -> np.ndarray:
    for _ in range(iters):
        v, nv = _unit(W @ u)
        u_next, nu = _unit(W.T @ v)
        if nv < kSigmaFloor or nu < kSigmaFloor:
            break  # Zero matrix; keep the previous unit vector
        u = u_next
    return u


def _normalize(W: Tensor, u: np.ndarray) -> Tensor:
    Wv = W.value
    v, sigma = _unit(Wv @ u)
    if sigma < kSigmaFloor:
        return W

    Wsn = Wv / sigma

    def vjp(g: np.ndarray):
        return ((g - np.sum(g * Wsn) * np.outer(v, u)) / sigma,)

    return _emit('spectral_normalize', (W,), Wsn, vjp)


def spectral_normalize(W: Tensor,
                       state: SpectralState,
                       iters: int = 1) -> tp.Tuple[Tensor, SpectralState]:
    """
    Refine ``state.u`` by ``iters`` power iterations, then divide ``W`` by the
    resulting :math:`\\hat{\\sigma}`. A (near) zero matrix is returned as is.
    """
    if W.ndim != 2:
        raise ContractError(
            f"spectral_normalize: W must be a matrix, got {list(W.shape)}")
    if iters < 1:
        raise ContractError(f"spectral_normalize: iters={iters} < 1")
    if state.u.shape != (W.shape[1],):
        raise ContractError(
            f"spectral_normalize: u{list(state.u.shape)} vs W{list(W.shape)}")

    u = power_iterate(W.value, state.u, iters)
    new_state = SpectralState(u=u, iterations=state.iterations + iters)
    return _normalize(W, u), new_state


def spectral_apply(W: Tensor, state: SpectralState) -> Tensor:
    """
    Normalize with the stored vector and no refinement; used for eval-mode
    forward passes, which must not change any state.
    """
    return _normalize(W, state.u)


def estimate_sigma(W: np.ndarray, state: SpectralState) -> float:
    return float(np.linalg.norm(W @ state.u))


__api__ = [
    'SpectralState',
    'spectral_normalize',
    'spectral_apply',
    'estimate_sigma',
    'power_iterate'
]
