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
Config-driven experiments: load data, then per run split, scale, build, train,
score and evaluate; aggregate the runs into a :class:`~rcalad.pipeline.report.Report`.

Runs are independent and may execute in a process pool of ``RCALAD_THREADS``
workers; the report is the same whatever the pool size.
"""

# Core packages
import os
import copy
import time
import typing as tp
import dataclasses
import logging
import multiprocessing

# 3rd party packages
import numpy as np

# Project packages
from rcalad.core.rng import RngStream
from rcalad.core.tensor import set_precision
from rcalad.core.exceptions import (ConfigurationError,
                                    ContractError,
                                    InsufficientDataError,
                                    RCALADError,
                                    ShapeError,
                                    UnavailableScoreError,
                                    UndefinedMetricError)
from rcalad.data.dataset import Dataset, load_schema
from rcalad.data.ingest import load_tabular
from rcalad.data.split import one_vs_all, row_limit, split, subsample
from rcalad.data.toy import synth_toy
from rcalad.data.transform import ScalingParams, encode_and_scale
from rcalad.models.architectures import bundle_spec_from_dict, default_arch
from rcalad.models.bundle import ModelBundle, build_bundle
from rcalad.models.specs import BundleSpec
from rcalad.perf_measures.metrics import aggregate_runs, auroc, evaluate, evaluate_all_scores
from rcalad.perf_measures.wilcoxon import wilcoxon_signed_rank
from rcalad.pipeline.checkpoint import load_checkpoint, make_checkpoint, restore, save_checkpoint
from rcalad.pipeline.config import ExperimentConfig
from rcalad.pipeline.report import (Report,
                                    RunArtifacts,
                                    RunRecord,
                                    ablation_frame,
                                    emit_report,
                                    per_run_values,
                                    read_metrics)
from rcalad.scoring.dump import write_scores
from rcalad.scoring.orient import orient
from rcalad.scoring.scores import ScoreVector, score_table
from rcalad.training.priors import kSupplementaryKinds
from rcalad.training.trainer import TrainState, fit
from rcalad.training.variants import kVariants, variant_toggles

kThreadsVar = 'RCALAD_THREADS'
kScoreFallbacks = ['a_features', 'a_l1']


@dataclasses.dataclass
class PreparedData():
    """Encoded splits of one run; scaling is fitted on ``train`` only."""
    train: Dataset
    validation: Dataset
    test: Dataset
    scaling: ScalingParams


def load_dataset(config: ExperimentConfig) -> Dataset:
    """
    The raw labelled dataset an experiment draws its runs from, after
    one-vs-all relabelling and any configured subsampling.
    """
    dc = config.dataset
    if dc.is_toy:
        ds = synth_toy(dc.toy)
    else:
        ds = load_tabular(dc.path, load_schema(dc.schema))

    if dc.normal_class is not None:
        ds = one_vs_all(ds, dc.normal_class)

    rng = RngStream(config.seed).substream('data')
    if dc.subsample is not None:
        ds = subsample(ds, float(dc.subsample), rng)
    ds = row_limit(ds, dc.row_limit, rng)

    if ds.labels is None:
        raise ContractError(f"{ds.schema.name}: experiments need labelled data")
    logging.getLogger(__name__).info("Dataset %s: %d rows, %d anomalies",
                                     dc.name,
                                     len(ds),
                                     int(ds.labels.sum()))
    return ds


def prepare_data(config: ExperimentConfig, dataset: Dataset, seed: int) -> PreparedData:
    train, val, test = split(dataset, dataclasses.replace(config.split, seed=seed))
    train, params = encode_and_scale(train, config.dataset.scaling)
    val, _ = encode_and_scale(val, config.dataset.scaling, params)
    test, _ = encode_and_scale(test, config.dataset.scaling, params)

    expected = config.dataset.input_dim
    if expected is not None and config.dataset.normal_class is None and train.dim != expected:
        raise ShapeError(
            f"{config.dataset.name}: encoding gives {train.dim} features, expected {expected}")
    return PreparedData(train=train, validation=val, test=test, scaling=params)


def bundle_spec(config: ExperimentConfig, input_dim: int) -> BundleSpec:
    arch = config.architecture
    if arch.layout is not None:
        return bundle_spec_from_dict(arch.layout, input_dim, arch.latent_dim)
    return default_arch(arch.kind, input_dim, arch.latent_dim)


def build_model(config: ExperimentConfig, input_dim: int, seed: int) -> ModelBundle:
    return build_bundle(bundle_spec(config, input_dim),
                        RngStream(seed),
                        config.train.toggles.discriminators())


def choose_score(scores: ScoreVector, config: ExperimentConfig) -> str:
    """
    The configured score, or with ``score_fallback`` the first available of
    ``kScoreFallbacks``.
    """
    available = scores.available()
    if config.score in available:
        return config.score
    if config.score_fallback:
        for alt in kScoreFallbacks:
            if alt in available:
                logging.getLogger(__name__).warning("Score %s unavailable for %s: using %s",
                                                    config.score,
                                                    config.variant,
                                                    alt)
                return alt
    raise UnavailableScoreError(
        f"Score {config.score} needs a discriminator variant '{config.variant}' does not build")


def _validation_monitor(data: PreparedData,
                        config: ExperimentConfig) -> tp.Callable[[ModelBundle], float]:
    def monitor(bundle: ModelBundle) -> float:
        scores = orient(score_table(bundle, data.validation.features), config.orientation)
        try:
            return auroc(scores.get(choose_score(scores, config)), data.validation.labels)
        except UndefinedMetricError:
            return float('nan')

    return monitor


def _run_dir(config: ExperimentConfig, run: int) -> tp.Optional[str]:
    if config.output_dir is None:
        return None
    return os.path.join(config.output_dir, f"run{run}")


def _checkpointer(config: ExperimentConfig,
                  run: int) -> tp.Optional[tp.Callable[[ModelBundle, TrainState], None]]:
    run_dir = _run_dir(config, run)
    if run_dir is None:
        return None

    def on_checkpoint(bundle: ModelBundle, state: TrainState) -> None:
        ckpt = make_checkpoint(bundle, state, config.config_hash())
        save_checkpoint(ckpt, os.path.join(run_dir, f"epoch{state.epoch:04d}.rcal"))
        if state.epoch == config.train.max_epochs:
            save_checkpoint(ckpt, os.path.join(run_dir, 'final.rcal'))

    return on_checkpoint


def run_once(config: ExperimentConfig,
             dataset: Dataset,
             run: int,
             evaluate_test: bool = True,
             resume: tp.Optional[str] = None) -> tp.Tuple[RunRecord, RunArtifacts]:
    """
    One complete run with seed ``config.seed + run``. Errors raised on purpose
    by any stage are recorded in the returned :class:`RunRecord` instead of
    propagating.
    """
    logger = logging.getLogger(__name__)
    seed = config.run_seed(run)
    record = RunRecord(run=run, seed=seed)
    art = RunArtifacts()
    t0 = time.perf_counter()

    try:
        set_precision(config.precision)
        data = prepare_data(config, dataset, seed)
        bundle = build_model(config, data.train.dim, seed)

        state = None
        if resume is not None:
            state = restore(load_checkpoint(resume), bundle, config.config_hash())
            logger.info("Run %d: resuming from epoch %d", run, state.epoch)

        monitor = _validation_monitor(data, config) if config.monitor_validation else None
        bundle, art.history = fit(bundle,
                                  data.train,
                                  dataclasses.replace(config.train, seed=seed),
                                  rng=RngStream(seed).substream('train'),
                                  monitor=monitor,
                                  on_checkpoint=_checkpointer(config, run),
                                  resume=state)
        record.epochs = art.history.start_epoch + len(art.history)
        if len(art.history) > 0:
            record.final_losses = art.history.losses[-1].flat()

        if evaluate_test:
            scores = orient(score_table(bundle, data.test.features), config.orientation)
            record.score = choose_score(scores, config)
            record.metrics = evaluate(scores.get(record.score),
                                      data.test.labels,
                                      config.split.alpha)
            record.all_scores = evaluate_all_scores(scores, data.test.labels, config.split.alpha)
            art.scores = scores
            art.labels = data.test.labels

            logger.info("Run %d (seed %d): %s precision=%.4f recall=%.4f f1=%.4f",
                        run,
                        seed,
                        record.score,
                        record.metrics.precision,
                        record.metrics.recall,
                        record.metrics.f1)
    except (RCALADError, ArithmeticError) as err:
        record.error = f"{type(err).__name__}: {err}"
        history = getattr(err, 'history', None)
        if history is not None:
            art.history = history
        logger.error("Run %d (seed %d) failed: %s", run, seed, record.error)

    record.wall_clock = time.perf_counter() - t0
    return record, art


def _run_task(task: tp.Tuple[ExperimentConfig, Dataset, int, bool, tp.Optional[str]]):
    return run_once(*task)


def worker_count() -> int:
    raw = os.environ.get(kThreadsVar, '1')
    try:
        n = int(raw)
    except ValueError as err:
        raise ConfigurationError(f"{kThreadsVar}='{raw}' is not an integer") from err
    if n < 1:
        raise ConfigurationError(f"{kThreadsVar} must be >= 1, got {n}")
    return n


def _execute(tasks: tp.List[tuple]) -> tp.List[tp.Tuple[RunRecord, RunArtifacts]]:
    n_workers = min(worker_count(), len(tasks))
    if n_workers <= 1:
        return [_run_task(t) for t in tasks]

    logging.getLogger(__name__).info("Running %d runs on %d workers", len(tasks), n_workers)
    with multiprocessing.Pool(n_workers) as p:
        return p.map(_run_task, tasks)


def _compare(report: Report, config: ExperimentConfig) -> None:
    logger = logging.getLogger(__name__)
    baseline = per_run_values(read_metrics(config.baseline_report), config.stats_metric)
    ours = report.per_run(config.stats_metric)
    if len(baseline) != len(ours):
        raise ContractError(
            f"Cannot pair {len(ours)} runs with {len(baseline)} baseline runs")
    try:
        report.wilcoxon = wilcoxon_signed_rank(ours, baseline)
    except InsufficientDataError as err:
        logger.warning("No Wilcoxon comparison: %s", err)


def run_experiment(config: ExperimentConfig,
                   dataset: tp.Optional[Dataset] = None,
                   evaluate_test: bool = True,
                   resume: tp.Optional[str] = None) -> Report:
    """
    Run ``config.runs`` independent runs and aggregate them. If
    ``config.output_dir`` is set, checkpoints go to ``run<i>/`` below it and
    the report is emitted there.

    Args:
        dataset: The raw dataset; loaded from the config if None.

        evaluate_test: Score the test split and compute metrics; otherwise
                       only train.

        resume: Checkpoint to resume run 0 from.
    """
    logger = logging.getLogger(__name__)
    if dataset is None:
        dataset = load_dataset(config)

    tasks = [(config, dataset, run, evaluate_test, resume if run == 0 else None)
             for run in range(config.runs)]
    results = _execute(tasks)

    report = Report(dataset=config.dataset.name,
                    variant=config.variant,
                    score=config.score,
                    alpha=config.split.alpha,
                    seed=config.seed,
                    config_hash=config.config_hash(),
                    toggles=config.train.toggles.as_dict(),
                    runs=[r for r, _ in results],
                    artifacts=[a for _, a in results])

    ok = [r.metrics for r in report.runs if r.ok and r.metrics is not None]
    if ok:
        report.aggregate = aggregate_runs(ok)
        logger.info("%s/%s over %d runs: f1=%.4f +/- %.4f",
                    report.dataset,
                    report.variant,
                    report.aggregate.n_runs,
                    report.aggregate.mean['f1'],
                    report.aggregate.std['f1'])
    if report.failed:
        logger.warning("%d of %d runs failed: %s", len(report.failed), config.runs, report.failed)

    if config.baseline_report is not None and ok:
        _compare(report, config)

    if config.output_dir is not None:
        emit_report(report, config.output_dir)
    return report


def derive(config: ExperimentConfig,
           changes: tp.Dict[str, tp.Any],
           output_dir: tp.Optional[str]) -> ExperimentConfig:
    """
    A copy of ``config`` with ``changes`` (``train.variant``,
    ``train.sigma_kind``) applied, score fallback on and a new output dir.
    """
    resolved = copy.deepcopy(config.resolved)
    train = config.train
    if 'train.variant' in changes:
        resolved['train']['variant'] = changes['train.variant']
        resolved['train']['toggles'] = None
        train = dataclasses.replace(train, toggles=variant_toggles(changes['train.variant']))
    if 'train.sigma_kind' in changes:
        resolved['train']['sigma_kind'] = changes['train.sigma_kind']
        train = dataclasses.replace(train, sigma_kind=changes['train.sigma_kind'])
    resolved['score']['fallback'] = True
    resolved['output_dir'] = output_dir

    return dataclasses.replace(config,
                               train=train,
                               score_fallback=True,
                               output_dir=output_dir,
                               resolved=resolved)


def _check_ordering(reports: tp.Dict[str, Report], slack: float = 0.02) -> tp.Optional[bool]:
    """
    Log whether the full model's mean F1 is at least ALAD's minus ``slack``.
    Logged only, never raised.
    """
    full, alad = reports.get('rcalad'), reports.get('alad')
    if full is None or alad is None or full.aggregate is None or alad.aggregate is None:
        return None

    a, b = full.aggregate.mean['f1'], alad.aggregate.mean['f1']
    ok = a >= b - slack
    logging.getLogger(__name__).log(logging.INFO if ok else logging.WARNING,
                                    "Ablation ordering %s: f1 rcalad=%.4f alad=%.4f",
                                    "holds" if ok else "violated",
                                    a,
                                    b)
    return ok


def ablate(config: ExperimentConfig,
           variants: tp.Optional[tp.Sequence[str]] = None,
           sigma_sweep: bool = False) -> tp.Dict[str, Report]:
    """
    Run the same experiment (same data, splits and seeds) once per variant,
    or with ``sigma_sweep`` once per supplementary distribution of the full
    model. Variants which cannot compute the configured score fall back to
    another one. Writes ``ablation.csv`` plus one report directory per entry
    when ``config.output_dir`` is set.
    """
    dataset = load_dataset(config)
    if sigma_sweep:
        entries = {f"rcalad/{k}": {'train.variant': 'rcalad', 'train.sigma_kind': k}
                   for k in kSupplementaryKinds}
    else:
        entries = {v: {'train.variant': v} for v in (variants or list(kVariants))}

    reports = {}
    for label, changes in entries.items():
        out = None
        if config.output_dir is not None:
            out = os.path.join(config.output_dir, label.replace('/', '_'))
        logging.getLogger(__name__).info("Ablation entry %s", label)
        reports[label] = run_experiment(derive(config, changes, out), dataset)

    _check_ordering(reports)

    if config.output_dir is not None:
        os.makedirs(config.output_dir, exist_ok=True)
        path = os.path.join(config.output_dir, 'ablation.csv')
        ablation_frame(reports).to_csv(path, index=False, float_format='%.17g')
        logging.getLogger(__name__).info("Wrote %s", path)
    return reports


def score_checkpoint(config: ExperimentConfig,
                     checkpoint: str,
                     out_path: tp.Optional[str] = None,
                     run: int = 0) -> tp.Tuple[ScoreVector, np.ndarray]:
    """
    Rebuild run ``run``'s test split, load ``checkpoint`` into a fresh bundle
    and return every score it supports (oriented) with the test labels.
    """
    seed = config.run_seed(run)
    set_precision(config.precision)
    data = prepare_data(config, load_dataset(config), seed)
    bundle = build_model(config, data.train.dim, seed)
    restore(load_checkpoint(checkpoint), bundle, config.config_hash())

    scores = orient(score_table(bundle, data.test.features), config.orientation)
    if out_path is not None:
        dirname = os.path.dirname(out_path)
        if dirname:
            os.makedirs(dirname, exist_ok=True)
        write_scores(out_path, scores, data.test.labels)
    return scores, data.test.labels


__api__ = [
    'PreparedData',
    'load_dataset',
    'prepare_data',
    'bundle_spec',
    'build_model',
    'choose_score',
    'run_once',
    'run_experiment',
    'worker_count',
    'derive',
    'ablate',
    'score_checkpoint'
]
