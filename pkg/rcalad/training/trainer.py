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
Alternating optimization: discriminator steps on the enabled discriminators
jointly, then one encoder/generator step, over shuffled minibatches of normal
training rows.
"""

# Core packages
import typing as tp
import dataclasses
import logging
import copy
import time

# 3rd party packages
import numpy as np
import pandas as pd

# Project packages
from rcalad.core.tensor import Tensor, Tape
from rcalad.core.rng import RngStream
from rcalad.core.optim import OptimizerState, adam_step
from rcalad.core.exceptions import (ConfigurationError,
                                    ContractError,
                                    DegenerateBatchError,
                                    RCALADError)
from rcalad.models.bundle import ModelBundle
from rcalad.training import priors
from rcalad.training.variants import Toggles
from rcalad.training.objective import (Batch,
                                       LossBreakdown,
                                       discriminator_objective,
                                       generator_objective,
                                       kDiscriminatorTerms,
                                       kGeneratorTerms)

OptStates = tp.Dict[str, OptimizerState]


@dataclasses.dataclass
class TrainConfig():
    """
    Attributes:
        checkpoint_every: Emit a checkpoint every this many epochs; 0 means
                          only after the last epoch.

        d_steps_per_g_step: Discriminator updates before each E/G update.

        sigma_batch_ratio: Supplementary rows per data row in a step.

        literal_generator_loss: Let E/G minimize the value function itself
                                instead of the non-saturating loss.
    """
    lr: float = 1e-5
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 32
    max_epochs: int = 100
    seed: int = 0
    toggles: Toggles = dataclasses.field(default_factory=Toggles)
    sigma_kind: str = 'normal_0_1'
    latent_dim: tp.Optional[int] = None
    checkpoint_every: int = 0
    d_steps_per_g_step: int = 1
    sigma_batch_ratio: float = 1.0
    literal_generator_loss: bool = False
    spectral_iters: int = 1

    def validate(self) -> None:
        if self.batch_size < 2:
            raise ConfigurationError(
                f"batch_size must be >= 2 for batch norm, got {self.batch_size}")
        if self.max_epochs < 0:
            raise ConfigurationError(f"max_epochs must be >= 0, got {self.max_epochs}")
        if self.lr < 0 or not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ConfigurationError(
                f"Bad optimizer settings: lr={self.lr}, beta1={self.beta1}, beta2={self.beta2}")
        if self.d_steps_per_g_step < 1:
            raise ConfigurationError("d_steps_per_g_step must be >= 1")
        if self.sigma_batch_ratio <= 0:
            raise ConfigurationError("sigma_batch_ratio must be > 0")
        if self.checkpoint_every < 0:
            raise ConfigurationError("checkpoint_every must be >= 0")
        if self.spectral_iters < 1:
            raise ConfigurationError("spectral_iters must be >= 1")
        priors.factory(self.sigma_kind)


class TrainStreams():
    """
    The random streams a training run consumes: minibatch shuffling, and
    per-step draws (prior, supplementary, dropout).
    """

    def __init__(self, rng: RngStream) -> None:
        self.shuffle = rng.substream('shuffle')
        self.steps = rng.substream('steps')

    def state(self) -> tp.Dict[str, tp.Any]:
        return {'shuffle': self.shuffle.state(), 'steps': self.steps.state()}

    def set_state(self, state: tp.Dict[str, tp.Any]) -> None:
        self.shuffle.set_state(state['shuffle'])
        self.steps.set_state(state['steps'])


@dataclasses.dataclass
class TrainState():
    """Everything besides the bundle needed to resume training at an epoch boundary."""
    epoch: int
    opt_states: OptStates
    streams: tp.Dict[str, tp.Any]


@dataclasses.dataclass
class TrainHistory():
    """
    Attributes:
        losses: Per-epoch mean of every loss term.

        wall_clock: Seconds spent in each epoch.

        validation_auroc: Per-epoch validation AUROC, if monitored.

        rng_states: Stream states at the end of each epoch.

        start_epoch: Epochs completed before this history began (resume).
    """
    losses: tp.List[LossBreakdown] = dataclasses.field(default_factory=list)
    wall_clock: tp.List[float] = dataclasses.field(default_factory=list)
    validation_auroc: tp.List[float] = dataclasses.field(default_factory=list)
    rng_states: tp.List[tp.Dict[str, tp.Any]] = dataclasses.field(default_factory=list)
    start_epoch: int = 0

    def __len__(self) -> int:
        return len(self.losses)

    def to_frame(self, timing: bool = False) -> pd.DataFrame:
        """
        One row per epoch; suitable for the loss-history CSV. Wall-clock times
        are left out unless ``timing``, so reruns write identical files.
        """
        rows = []
        for i, lb in enumerate(self.losses):
            row = {'epoch': self.start_epoch + i + 1}
            row.update(lb.flat())
            if timing:
                row['wall_clock'] = self.wall_clock[i]
            if self.validation_auroc:
                row['val_auroc'] = self.validation_auroc[i]
            rows.append(row)

        cols = ['epoch'] + kDiscriminatorTerms + kGeneratorTerms + ['d_total', 'ge_total']
        if timing:
            cols.append('wall_clock')
        if self.validation_auroc:
            cols.append('val_auroc')
        return pd.DataFrame(rows, columns=cols)


def init_opt_states(bundle: ModelBundle, config: TrainConfig) -> OptStates:
    hyper = {'lr': config.lr, 'beta1': config.beta1, 'beta2': config.beta2}
    return {name: OptimizerState.for_params(net.params, **hyper)
            for name, net in bundle.networks().items()}


def _update(bundle: ModelBundle,
            names: tp.Sequence[str],
            loss: Tensor,
            tape: Tape,
            bounds: tp.Dict[str, tp.Dict[str, Tensor]],
            opt_states: OptStates) -> None:
    sources = [(n, k, t) for n in names for k, t in bounds[n].items()]
    grads = tape.gradient(loss, [t for _, _, t in sources])

    per_net = {n: {} for n in names}  # type: tp.Dict[str, tp.Dict[str, np.ndarray]]
    for (n, k, _), g in zip(sources, grads):
        per_net[n][k] = g

    nets = bundle.networks()
    for n in names:
        nets[n].params, opt_states[n] = adam_step(nets[n].params,
                                                  per_net[n],
                                                  opt_states[n])


def _draw(bundle: ModelBundle,
          n: int,
          config: TrainConfig,
          rng: RngStream) -> tp.Tuple[Tensor, tp.Optional[Tensor]]:
    z = priors.sample_latent(priors.LatentPrior(bundle.latent_dim), n, rng)
    x_sigma = None
    if config.toggles.use_sigma:
        n_sigma = max(1, int(round(config.sigma_batch_ratio * n)))
        x_sigma = priors.sample_supplementary(
            priors.SupplementaryDistribution(bundle.input_dim, config.sigma_kind),
            n_sigma,
            rng)
    return z, x_sigma


class _StepSnapshot(tp.NamedTuple):
    networks: tp.Dict[str, tp.Dict[str, np.ndarray]]
    opt_states: OptStates


def _snapshot(bundle: ModelBundle, opt_states: OptStates) -> _StepSnapshot:
    return _StepSnapshot(networks={n: {k: np.array(v) for k, v in net.state_arrays().items()}
                                   for n, net in bundle.networks().items()},
                         opt_states=copy.deepcopy(opt_states))


def _rollback(bundle: ModelBundle, opt_states: OptStates, snap: _StepSnapshot) -> None:
    nets = bundle.networks()
    for n, arrays in snap.networks.items():
        nets[n].load_state_arrays(arrays)
    opt_states.clear()
    opt_states.update(snap.opt_states)


def train_step(bundle: ModelBundle,
               batch: np.ndarray,
               opt_states: OptStates,
               config: TrainConfig,
               rng: RngStream) -> tp.Tuple[ModelBundle, OptStates, LossBreakdown]:
    """
    One optimization step on ``batch``: ``d_steps_per_g_step`` discriminator
    updates, then one encoder/generator update. Spectral-norm vectors of the
    enabled discriminators advance before each discriminator update.

    The bundle and optimizer states are updated in place and also returned.
    A non-finite loss in any update raises with every network, spectral
    vector, batch-norm statistic and optimizer state as it was before the step.
    """
    if batch.ndim != 2 or batch.shape[0] < 2:
        raise DegenerateBatchError(
            f"train_step needs a batch of >= 2 rows, got shape {list(batch.shape)}")

    toggles = config.toggles
    d_names = toggles.discriminators()
    for n in d_names:
        if not bundle.has(n):
            raise ContractError(f"Toggles enable '{n}' but the bundle has no such network")

    logger = logging.getLogger(__name__)
    x = Tensor(batch)
    snap = _snapshot(bundle, opt_states)

    try:
        for _ in range(config.d_steps_per_g_step):
            for n in d_names:
                bundle.networks()[n].refresh_spectral(config.spectral_iters)

            z, x_sigma = _draw(bundle, batch.shape[0], config, rng)
            with Tape() as tape:
                bounds = {n: bundle.networks()[n].bind(tape) for n in d_names}
                d_loss, d_terms = discriminator_objective(bundle,
                                                          Batch(x, z, x_sigma),
                                                          toggles,
                                                          'train',
                                                          rng,
                                                          bounds)
                _update(bundle, d_names, d_loss, tape, bounds, opt_states)

        eg_names = ['encoder', 'generator']
        with Tape() as tape:
            bounds = {n: bundle.networks()[n].bind(tape) for n in eg_names}
            g_loss, g_terms = generator_objective(bundle,
                                                  Batch(x, z, x_sigma),
                                                  toggles,
                                                  'train',
                                                  rng,
                                                  bounds,
                                                  config.literal_generator_loss)
            _update(bundle, eg_names, g_loss, tape, bounds, opt_states)
    except (RCALADError, ArithmeticError):
        _rollback(bundle, opt_states, snap)
        raise

    breakdown = LossBreakdown(terms={k: float(v.item()) for k, v in d_terms.items()},
                              discriminator_total=float(d_loss.item()),
                              generator_terms={k: float(v.item()) for k, v in g_terms.items()},
                              generator_total=float(g_loss.item()))
    logger.debug("Step: d_total=%.6f ge_total=%.6f",
                 breakdown.discriminator_total,
                 breakdown.generator_total)
    return bundle, opt_states, breakdown


def _epoch_mean(steps: tp.List[LossBreakdown]) -> LossBreakdown:
    def avg(dicts: tp.List[tp.Dict[str, float]]) -> tp.Dict[str, float]:
        keys = list(dicts[0].keys())
        return {k: float(np.mean([d[k] for d in dicts])) for k in keys}

    return LossBreakdown(terms=avg([s.terms for s in steps]),
                         discriminator_total=float(np.mean([s.discriminator_total for s in steps])),
                         generator_terms=avg([s.generator_terms for s in steps]),
                         generator_total=float(np.mean([s.generator_total for s in steps])))


def minibatches(n: int, batch_size: int, rng: RngStream) -> tp.List[np.ndarray]:
    """
    Shuffled row-index batches covering ``range(n)``. A trailing batch of a
    single row is dropped.
    """
    order = rng.permutation(n)
    batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(batches[-1]) < 2:
        batches.pop()
    return batches


def fit(bundle: ModelBundle,
        dataset: tp.Any,
        config: TrainConfig,
        rng: tp.Optional[RngStream] = None,
        monitor: tp.Optional[tp.Callable[[ModelBundle], float]] = None,
        on_checkpoint: tp.Optional[tp.Callable[[ModelBundle, TrainState], None]] = None,
        resume: tp.Optional[TrainState] = None) -> tp.Tuple[ModelBundle, TrainHistory]:
    """
    Train ``bundle`` for ``config.max_epochs`` epochs.

    Args:
        dataset: A :class:`~rcalad.data.dataset.Dataset` of normal rows, or a
                 plain feature matrix.

        rng: Run stream; defaults to the ``train`` sub-stream of
             ``config.seed``.

        monitor: Called after every epoch; its value (validation AUROC) is
                 recorded in the history.

        on_checkpoint: Called every ``config.checkpoint_every`` epochs and after
                       the last epoch, with the state needed to resume.

        resume: Continue from a state handed to ``on_checkpoint`` by an earlier
                run; the bundle must be the one checkpointed with it.

    Returns:
        The trained bundle (the same object) and its history. If a loss becomes
        non-finite the error propagates with the history so far attached as
        ``err.history``.
    """
    config.validate()
    x = np.asarray(getattr(dataset, 'features', dataset), dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ContractError(f"fit: empty training set (shape {list(x.shape)})")
    if x.shape[0] < 2:
        raise DegenerateBatchError("fit: need at least 2 training rows")
    if x.shape[1] != bundle.input_dim:
        raise ContractError(
            f"fit: training rows have {x.shape[1]} features, bundle expects {bundle.input_dim}")

    logger = logging.getLogger(__name__)
    streams = TrainStreams(rng if rng is not None else RngStream(config.seed).substream('train'))

    if resume is not None:
        opt_states = resume.opt_states
        streams.set_state(resume.streams)
        start = resume.epoch
    else:
        opt_states = init_opt_states(bundle, config)
        start = 0

    history = TrainHistory(start_epoch=start)
    for epoch in range(start, config.max_epochs):
        t0 = time.perf_counter()
        steps = []
        try:
            for idx in minibatches(x.shape[0], config.batch_size, streams.shuffle):
                _, _, lb = train_step(bundle, x[idx], opt_states, config, streams.steps)
                steps.append(lb)
        except ArithmeticError as err:
            logger.error("Epoch %d aborted: %s", epoch + 1, err)
            setattr(err, 'history', history)
            raise

        history.losses.append(_epoch_mean(steps))
        history.wall_clock.append(time.perf_counter() - t0)
        history.rng_states.append(streams.state())

        if monitor is not None:
            history.validation_auroc.append(float(monitor(bundle)))

        last = history.losses[-1]
        logger.info("Epoch %d/%d: d_total=%.5f ge_total=%.5f%s",
                    epoch + 1,
                    config.max_epochs,
                    last.discriminator_total,
                    last.generator_total,
                    f" val_auroc={history.validation_auroc[-1]:.4f}" if monitor else "")

        periodic = config.checkpoint_every > 0 and (epoch + 1) % config.checkpoint_every == 0
        if on_checkpoint is not None and (periodic or epoch + 1 == config.max_epochs):
            on_checkpoint(bundle, TrainState(epoch=epoch + 1,
                                             opt_states=opt_states,
                                             streams=streams.state()))

    return bundle, history


__api__ = [
    'TrainConfig',
    'TrainState',
    'TrainStreams',
    'TrainHistory',
    'init_opt_states',
    'train_step',
    'minibatches',
    'fit'
]
