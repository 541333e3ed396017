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
Anomaly scores computed from a trained bundle.

All forward passes run in eval mode (no dropout, running batch-norm statistics)
so every score of a row depends only on that row and the bundle parameters.
"""

# Core packages
import typing as tp
import dataclasses
import logging

# 3rd party packages
import numpy as np

# Project packages
from rcalad.core.tensor import Tensor
from rcalad.core.exceptions import ContractError, ShapeError, UnavailableScoreError
from rcalad.models.bundle import ModelBundle, encode, generate, discriminate

kScoreNames = ['a_l1', 'a_l2', 'a_logits', 'a_features', 'a_fm', 'a_all']
kCliNames = {
    'l1': 'a_l1',
    'l2': 'a_l2',
    'logits': 'a_logits',
    'features': 'a_features',
    'fm': 'a_fm',
    'all': 'a_all'
}


@dataclasses.dataclass
class ReconTriple():
    """:math:`z_x = E(x)`, :math:`\\hat{x} = G(z_x)`, :math:`\\hat{z}_{\\hat{x}} = E(\\hat{x})`."""
    z_x: np.ndarray
    x_hat: np.ndarray
    z_hat: np.ndarray


@dataclasses.dataclass
class ScoreVector():
    """
    One array per score, each of length N. A score the bundle cannot compute
    is ``None``.
    """
    a_l1: tp.Optional[np.ndarray] = None
    a_l2: tp.Optional[np.ndarray] = None
    a_logits: tp.Optional[np.ndarray] = None
    a_features: tp.Optional[np.ndarray] = None
    a_fm: tp.Optional[np.ndarray] = None
    a_all: tp.Optional[np.ndarray] = None

    def available(self) -> tp.List[str]:
        return [n for n in kScoreNames if getattr(self, n) is not None]

    def get(self, name: str) -> np.ndarray:
        value = getattr(self, name)
        if value is None:
            raise UnavailableScoreError(f"Score '{name}' was not computed for this bundle")
        return value

    def __len__(self) -> int:
        for n in kScoreNames:
            if getattr(self, n) is not None:
                return len(getattr(self, n))
        return 0


def select_score(name: str) -> str:
    """Map ``l1``/``l2``/``logits``/``features``/``fm``/``all`` (or a field name) to a field name."""
    if name in kScoreNames:
        return name
    if name not in kCliNames:
        raise UnavailableScoreError(
            f"Unknown score '{name}': must be one of {list(kCliNames)}")
    return kCliNames[name]


def _as_input(bundle: ModelBundle, x: np.ndarray) -> Tensor:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != bundle.input_dim:
        raise ContractError(
            f"Scoring input has shape {list(x.shape)}, expected [n,{bundle.input_dim}]")
    return Tensor(x)


def reconstruct(bundle: ModelBundle, x: np.ndarray) -> ReconTriple:
    xt = _as_input(bundle, x)
    z_x = encode(bundle.E, xt)
    x_hat = generate(bundle.G, z_x)
    z_hat = encode(bundle.E, x_hat)
    return ReconTriple(z_x=z_x.numpy(), x_hat=x_hat.numpy(), z_hat=z_hat.numpy())


def _check_triple(x: np.ndarray, triple: ReconTriple) -> None:
    if triple.x_hat.shape != x.shape or triple.z_x.shape[0] != x.shape[0] or \
            triple.z_hat.shape != triple.z_x.shape:
        raise ShapeError(
            f"Triple shapes z_x{list(triple.z_x.shape)}, x_hat{list(triple.x_hat.shape)}, "
            f"z_hat{list(triple.z_hat.shape)} do not match x{list(x.shape)}")


def score_baselines(bundle: ModelBundle,
                    x: np.ndarray,
                    triple: ReconTriple) -> tp.Tuple[np.ndarray, np.ndarray,
                                                     tp.Optional[np.ndarray],
                                                     tp.Optional[np.ndarray]]:
    """
    Residual and :math:`D_{xx}` scores:

    - ``a_l1``: :math:`\\|x - \\hat{x}\\|_1`

    - ``a_l2``: :math:`\\|x - \\hat{x}\\|_2`

    - ``a_logits``: :math:`\\log D_{xx}(x, \\hat{x})`

    - ``a_features``: :math:`\\|f_{xx}(x, x) - f_{xx}(x, \\hat{x})\\|_1`

    The last two are ``None`` when the bundle has no :math:`D_{xx}`.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_triple(x, triple)
    residual = x - triple.x_hat
    a_l1 = np.abs(residual).sum(axis=1)
    a_l2 = np.sqrt((residual * residual).sum(axis=1))

    if bundle.D_xx is None:
        return a_l1, a_l2, None, None

    xt, xh = Tensor(x), Tensor(triple.x_hat)
    real = discriminate(bundle.D_xx, [xt, xt])
    fake = discriminate(bundle.D_xx, [xt, xh])

    # log(sigmoid(l)) without overflow
    a_logits = -np.logaddexp(0.0, -fake.logit.numpy()[:, 0])
    a_features = np.abs(real.features.numpy() - fake.features.numpy()).sum(axis=1)
    return a_l1, a_l2, a_logits, a_features


def score_fm(bundle: ModelBundle, x: np.ndarray, triple: ReconTriple) -> np.ndarray:
    """
    :math:`\\|f_{xxzz}(x, x, z_x, z_x) - f_{xxzz}(x, \\hat{x}, z_x, \\hat{z}_{\\hat{x}})\\|_1`
    on the penultimate activations of :math:`D_{xxzz}`.
    """
    if bundle.D_xxzz is None:
        raise UnavailableScoreError("a_fm needs D_xxzz, which this bundle was trained without")
    x = np.asarray(x, dtype=np.float64)
    _check_triple(x, triple)

    xt, zx = Tensor(x), Tensor(triple.z_x)
    real = discriminate(bundle.D_xxzz, [xt, xt, zx, zx])
    fake = discriminate(bundle.D_xxzz, [xt, Tensor(triple.x_hat), zx, Tensor(triple.z_hat)])
    return np.abs(real.features.numpy() - fake.features.numpy()).sum(axis=1)


def score_all(bundle: ModelBundle, x: np.ndarray, triple: ReconTriple) -> np.ndarray:
    """
    :math:`D_{xxzz}(x, \\hat{x}, z_x, \\hat{z}_{\\hat{x}}) + D_{xx}(x, \\hat{x}) +
    D_{zz}(z_x, \\hat{z}_{\\hat{x}})`, each the sigmoid output.
    """
    missing = [n for n, net in [('dxx', bundle.D_xx),
                                ('dzz', bundle.D_zz),
                                ('dxxzz', bundle.D_xxzz)] if net is None]
    if missing:
        raise UnavailableScoreError(f"a_all needs discriminators {missing}, which are absent")
    x = np.asarray(x, dtype=np.float64)
    _check_triple(x, triple)

    xt, xh = Tensor(x), Tensor(triple.x_hat)
    zx, zh = Tensor(triple.z_x), Tensor(triple.z_hat)
    total = discriminate(bundle.D_xxzz, [xt, xh, zx, zh]).prob.numpy()[:, 0]
    total = total + discriminate(bundle.D_xx, [xt, xh]).prob.numpy()[:, 0]
    total = total + discriminate(bundle.D_zz, [zx, zh]).prob.numpy()[:, 0]
    return total


def score_table(bundle: ModelBundle, x: np.ndarray) -> ScoreVector:
    """Every score the bundle supports, raw (not oriented)."""
    triple = reconstruct(bundle, x)
    a_l1, a_l2, a_logits, a_features = score_baselines(bundle, x, triple)
    scores = ScoreVector(a_l1=a_l1, a_l2=a_l2, a_logits=a_logits, a_features=a_features)

    if bundle.D_xxzz is not None:
        scores.a_fm = score_fm(bundle, x, triple)
    if all(n is not None for n in [bundle.D_xx, bundle.D_zz, bundle.D_xxzz]):
        scores.a_all = score_all(bundle, x, triple)

    logging.getLogger(__name__).debug("Scored %d rows: %s",
                                      x.shape[0],
                                      ",".join(scores.available()))
    return scores


__api__ = [
    'ReconTriple',
    'ScoreVector',
    'reconstruct',
    'score_baselines',
    'score_fm',
    'score_all',
    'score_table',
    'select_score',
    'kScoreNames'
]
