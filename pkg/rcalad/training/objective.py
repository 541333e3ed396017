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
The adversarial objective: the discriminator loss (up to nine expectation
terms) and the generator/encoder loss, with terms switched on and off by
:class:`~rcalad.training.variants.Toggles`.

Every term is stored as a non-negative loss, i.e. the negated mean of
:math:`\\log D` or :math:`\\log(1-D)`, so that the discriminator total is
exactly the negated sum of the enabled value-function terms.

Term routing:

- ``dxz``: :math:`(x, E(x))` real, :math:`(G(z), z)` fake.

- ``dxx``: :math:`(x, x)` real, :math:`(x, G(E(x)))` fake.

- ``dzz``: :math:`(z, z)` real, :math:`(z, E(G(z)))` fake.

- ``dxxzz``: :math:`(x, x, E(x), E(x))` real,
  :math:`(x, G(E(x)), E(x), E(G(E(x))))` fake.

- ``sigma``: :math:`(\\tilde{x}, E(\\tilde{x}))` fake for
  :math:`\\tilde{x} \\sim \\sigma`, through :math:`D_{xz}` only.
"""

# Core packages
import typing as tp
import dataclasses
import collections
import math

# 3rd party packages

# Project packages
from rcalad.core.tensor import Tensor
from rcalad.core.rng import RngStream
from rcalad.core import ops
from rcalad.core.exceptions import ContractError, NumericalFailureError
from rcalad.models.bundle import ModelBundle, encode, generate, discriminate
from rcalad.models.network import Bound
from rcalad.training.variants import Toggles

kProbClamp = 1e-7

kDiscriminatorTerms = ['dxz_real', 'dxz_fake',
                       'dxx_real', 'dxx_fake',
                       'dzz_real', 'dzz_fake',
                       'dxxzz_real', 'dxxzz_fake',
                       'sigma']
kGeneratorTerms = ['ge_dxz', 'ge_dxx', 'ge_dzz', 'ge_dxxzz', 'ge_sigma']

Terms = tp.Dict[str, Tensor]
Bounds = tp.Dict[str, Bound]


@dataclasses.dataclass
class LossBreakdown():
    """
    Attributes:
        terms: Enabled discriminator terms, in the order of
               :data:`kDiscriminatorTerms`.

        generator_terms: Enabled generator/encoder terms.

        discriminator_total: Sum of ``terms``.

        generator_total: Generator/encoder loss; NaN if not computed.
    """
    terms: tp.Dict[str, float]
    discriminator_total: float
    generator_terms: tp.Dict[str, float] = dataclasses.field(default_factory=dict)
    generator_total: float = float('nan')

    def flat(self) -> tp.Dict[str, float]:
        """One flat row: every term name, missing ones as NaN, plus totals."""
        row = {k: self.terms.get(k, float('nan')) for k in kDiscriminatorTerms}
        row.update({k: self.generator_terms.get(k, float('nan')) for k in kGeneratorTerms})
        row['d_total'] = self.discriminator_total
        row['ge_total'] = self.generator_total
        return row


@dataclasses.dataclass
class Batch():
    """
    Inputs to one objective evaluation: data rows, prior draws and (optionally)
    supplementary draws.
    """
    x: Tensor
    z: Tensor
    x_sigma: tp.Optional[Tensor] = None


def _neg_log(p: Tensor) -> Tensor:
    return -ops.mean(ops.log(ops.clamp(p, kProbClamp, 1.0 - kProbClamp)))


def _neg_log1m(p: Tensor) -> Tensor:
    return _neg_log(1.0 - p)


def _check(bundle: ModelBundle, batch: Batch, toggles: Toggles) -> None:
    for name in toggles.discriminators():
        if not bundle.has(name):
            raise ContractError(f"Toggles enable '{name}' but the bundle has no such network")
    if batch.x.shape[0] < 1 or batch.z.shape[0] < 1:
        raise ContractError("Objective needs non-empty x and z batches")
    if toggles.use_sigma and batch.x_sigma is None:
        raise ContractError("use_sigma is on but no supplementary batch was given")


class _Pass():
    """
    One forward sweep of E and G over a batch, computing only the
    reconstructions the enabled terms need.
    """

    def __init__(self,
                 bundle: ModelBundle,
                 batch: Batch,
                 toggles: Toggles,
                 mode: str,
                 rng: tp.Optional[RngStream],
                 bounds: Bounds) -> None:
        E, G = bundle.E, bundle.G
        bE, bG = bounds.get('encoder'), bounds.get('generator')

        self.z_x = encode(E, batch.x, mode, rng, bE)
        self.x_gen = generate(G, batch.z, mode, rng, bG)

        self.x_rec = None  # type: tp.Optional[Tensor]
        self.z_rec = None  # type: tp.Optional[Tensor]
        self.z_cycle = None  # type: tp.Optional[Tensor]
        self.z_sigma = None  # type: tp.Optional[Tensor]

        if toggles.use_dxx or toggles.use_dxxzz:
            self.x_rec = generate(G, self.z_x, mode, rng, bG)
        if toggles.use_dzz:
            self.z_rec = encode(E, self.x_gen, mode, rng, bE)
        if toggles.use_dxxzz:
            self.z_cycle = encode(E, self.x_rec, mode, rng, bE)
        if toggles.use_sigma:
            self.z_sigma = encode(E, batch.x_sigma, mode, rng, bE)


def _finite(terms: Terms) -> None:
    for name, t in terms.items():
        value = t.item()
        if not math.isfinite(value):
            raise NumericalFailureError(name, value)


def discriminator_objective(bundle: ModelBundle,
                            batch: Batch,
                            toggles: Toggles,
                            mode: str = 'train',
                            rng: tp.Optional[RngStream] = None,
                            bounds: tp.Optional[Bounds] = None) -> tp.Tuple[Tensor, Terms]:
    """
    The discriminator loss as a tensor, plus its individual terms.

    Only discriminators in ``bounds`` are differentiable; pass
    ``{'dxz': D_xz.bind(tape), ...}`` to train them. E and G are evaluated
    without binding and are constants here.
    """
    _check(bundle, batch, toggles)
    bounds = bounds or {}
    dbounds = {k: v for k, v in bounds.items() if k not in ('encoder', 'generator')}
    fw = _Pass(bundle, batch, toggles, mode, rng, {})
    x, z = batch.x, batch.z

    def D(name: str, inputs: tp.Sequence[Tensor]) -> Tensor:
        net = bundle.discriminators()[name]
        return discriminate(net, inputs, mode, rng, dbounds.get(name)).prob

    terms = collections.OrderedDict()  # type: Terms
    terms['dxz_real'] = _neg_log(D('dxz', [x, fw.z_x]))
    terms['dxz_fake'] = _neg_log1m(D('dxz', [fw.x_gen, z]))

    if toggles.use_dxx:
        terms['dxx_real'] = _neg_log(D('dxx', [x, x]))
        terms['dxx_fake'] = _neg_log1m(D('dxx', [x, fw.x_rec]))
    if toggles.use_dzz:
        terms['dzz_real'] = _neg_log(D('dzz', [z, z]))
        terms['dzz_fake'] = _neg_log1m(D('dzz', [z, fw.z_rec]))
    if toggles.use_dxxzz:
        terms['dxxzz_real'] = _neg_log(D('dxxzz', [x, x, fw.z_x, fw.z_x]))
        terms['dxxzz_fake'] = _neg_log1m(D('dxxzz', [x, fw.x_rec, fw.z_x, fw.z_cycle]))
    if toggles.use_sigma:
        terms['sigma'] = _neg_log1m(D('dxz', [batch.x_sigma, fw.z_sigma]))

    _finite(terms)
    loss = terms['dxz_real']
    for name, t in terms.items():
        if name != 'dxz_real':
            loss = loss + t
    return loss, terms


def generator_objective(bundle: ModelBundle,
                        batch: Batch,
                        toggles: Toggles,
                        mode: str = 'train',
                        rng: tp.Optional[RngStream] = None,
                        bounds: tp.Optional[Bounds] = None,
                        literal: bool = False) -> tp.Tuple[Tensor, Terms]:
    """
    The generator/encoder loss as a tensor, plus its individual terms.

    The default is the non-saturating form :math:`-\\sum \\log D(fake)`. With
    ``literal=True`` E and G instead minimize the value function itself, i.e.
    the negated discriminator loss, whose terms are returned under the
    discriminator term names.

    Only ``encoder``/``generator`` entries of ``bounds`` are used;
    discriminators are constants here.
    """
    _check(bundle, batch, toggles)
    bounds = bounds or {}
    eg = {k: v for k, v in bounds.items() if k in ('encoder', 'generator')}
    fw = _Pass(bundle, batch, toggles, mode, rng, eg)
    x, z = batch.x, batch.z

    def D(name: str, inputs: tp.Sequence[Tensor]) -> Tensor:
        return discriminate(bundle.discriminators()[name], inputs, mode, rng).prob

    terms = collections.OrderedDict()  # type: Terms

    if literal:
        terms['dxz_real'] = -_neg_log(D('dxz', [x, fw.z_x]))
        terms['dxz_fake'] = -_neg_log1m(D('dxz', [fw.x_gen, z]))
        if toggles.use_dxx:
            terms['dxx_fake'] = -_neg_log1m(D('dxx', [x, fw.x_rec]))
        if toggles.use_dzz:
            terms['dzz_fake'] = -_neg_log1m(D('dzz', [z, fw.z_rec]))
        if toggles.use_dxxzz:
            terms['dxxzz_real'] = -_neg_log(D('dxxzz', [x, x, fw.z_x, fw.z_x]))
            terms['dxxzz_fake'] = -_neg_log1m(D('dxxzz', [x, fw.x_rec, fw.z_x, fw.z_cycle]))
        if toggles.use_sigma:
            terms['sigma'] = -_neg_log1m(D('dxz', [batch.x_sigma, fw.z_sigma]))
    else:
        terms['ge_dxz'] = _neg_log(D('dxz', [fw.x_gen, z]))
        if toggles.use_dxx:
            terms['ge_dxx'] = _neg_log(D('dxx', [x, fw.x_rec]))
        if toggles.use_dzz:
            terms['ge_dzz'] = _neg_log(D('dzz', [z, fw.z_rec]))
        if toggles.use_dxxzz:
            terms['ge_dxxzz'] = _neg_log(D('dxxzz', [x, fw.x_rec, fw.z_x, fw.z_cycle]))
        if toggles.use_sigma:
            terms['ge_sigma'] = _neg_log(D('dxz', [batch.x_sigma, fw.z_sigma]))

    _finite(terms)
    names = list(terms.keys())
    loss = terms[names[0]]
    for name in names[1:]:
        loss = loss + terms[name]
    return loss, terms


def _floats(terms: Terms) -> tp.Dict[str, float]:
    return collections.OrderedDict((k, float(v.item())) for k, v in terms.items())


def loss_discriminators(bundle: ModelBundle,
                        x: Tensor,
                        z: Tensor,
                        x_sigma: tp.Optional[Tensor],
                        toggles: Toggles,
                        mode: str = 'eval',
                        rng: tp.Optional[RngStream] = None) -> LossBreakdown:
    """Evaluate the discriminator loss and its terms as plain numbers."""
    loss, terms = discriminator_objective(bundle,
                                          Batch(x, z, x_sigma),
                                          toggles,
                                          mode,
                                          rng)
    return LossBreakdown(terms=_floats(terms), discriminator_total=float(loss.item()))


def loss_generator_encoder(bundle: ModelBundle,
                           x: Tensor,
                           z: Tensor,
                           x_sigma: tp.Optional[Tensor],
                           toggles: Toggles,
                           mode: str = 'eval',
                           rng: tp.Optional[RngStream] = None,
                           literal: bool = False) -> float:
    loss, _ = generator_objective(bundle,
                                  Batch(x, z, x_sigma),
                                  toggles,
                                  mode,
                                  rng,
                                  literal=literal)
    return float(loss.item())


__api__ = [
    'LossBreakdown',
    'Batch',
    'discriminator_objective',
    'generator_objective',
    'loss_discriminators',
    'loss_generator_encoder',
    'kDiscriminatorTerms',
    'kGeneratorTerms'
]
