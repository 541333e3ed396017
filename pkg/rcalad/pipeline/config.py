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
Experiment configuration: a YAML file merged over the packaged
``config/experiment.yaml`` defaults, then resolved against the protocol
defaults of the named dataset.
"""

# Core packages
import os
import copy
import json
import hashlib
import typing as tp
import dataclasses
import logging

# 3rd party packages
import yaml

# Project packages
from rcalad.core.exceptions import ConfigurationError
from rcalad.core.tensor import kPrecisions
from rcalad.data.named import kConfigDir, named_datasets
from rcalad.data.split import SplitSpec
from rcalad.data.toy import ToySpec
from rcalad.data.transform import kMethods
from rcalad.models.architectures import load_layouts
from rcalad.scoring.scores import select_score
from rcalad.scoring.orient import OrientationConvention
from rcalad.training.trainer import TrainConfig
from rcalad.training.variants import Toggles, variant_name, variant_toggles

kDefaultsFile = os.path.join(kConfigDir, 'experiment.yaml')

# Sub-trees whose contents are checked by their consumers, not by key merging.
kOpaqueKeys = ['architecture.layout', 'score.orientation', 'train.toggles']

# Protocol defaults for datasets which are not in datasets.yaml.
kCustomDefaults = {
    'alpha': 0.2,
    'batch_size': 32,
    'max_epochs': 100,
    'score': 'all',
    'scaling': 'standardize',
    'validation_fraction': 0.25,
    'anomalies_to_test': False
}


@dataclasses.dataclass(frozen=True)
class DatasetConfig():
    """
    Attributes:
        normal_class: If not None, relabel the data one-vs-all with this raw
                      label value as the normal class.

        subsample: Fraction of rows kept per class before splitting.
    """
    name: str
    path: tp.Optional[str]
    schema: tp.Optional[str]
    scaling: str
    input_dim: tp.Optional[int] = None
    normal_class: tp.Optional[tp.Any] = None
    row_limit: tp.Optional[int] = None
    subsample: tp.Optional[float] = None
    toy: tp.Optional[ToySpec] = None

    @property
    def is_toy(self) -> bool:
        return self.toy is not None


@dataclasses.dataclass(frozen=True)
class ArchitectureConfig():
    kind: tp.Optional[str]
    latent_dim: tp.Optional[int]
    layout: tp.Optional[tp.Dict[str, tp.Any]]


@dataclasses.dataclass
class ExperimentConfig():
    """
    A fully resolved experiment. ``resolved`` is the merged dictionary every
    other field was built from; it is what :meth:`config_hash` digests.
    """
    dataset: DatasetConfig
    architecture: ArchitectureConfig
    train: TrainConfig
    split: SplitSpec
    score: str
    score_fallback: bool
    orientation: OrientationConvention
    monitor_validation: bool
    seed: int
    runs: int
    output_dir: tp.Optional[str]
    precision: str
    baseline_report: tp.Optional[str]
    stats_metric: str
    resolved: tp.Dict[str, tp.Any]

    @property
    def variant(self) -> str:
        return variant_name(self.train.toggles) or 'custom'

    def config_hash(self) -> str:
        canon = json.dumps(self.resolved, sort_keys=True, separators=(',', ':'), default=str)
        return hashlib.sha256(canon.encode('utf-8')).hexdigest()[:16]

    def run_seed(self, run: int) -> int:
        return self.seed + run


def load_defaults() -> tp.Dict[str, tp.Any]:
    with open(kDefaultsFile) as f:
        return yaml.safe_load(f)


def _merge(base: tp.Dict[str, tp.Any],
           user: tp.Dict[str, tp.Any],
           prefix: str = '') -> tp.Dict[str, tp.Any]:
    """
    Recursively overlay ``user`` on ``base``. A key absent from ``base`` is an
    error naming its dotted path.
    """
    if not isinstance(user, dict):
        raise ConfigurationError(f"'{prefix.rstrip('.') or '<root>'}' must be a mapping")

    out = copy.deepcopy(base)
    for key, value in user.items():
        path = prefix + str(key)
        if key not in base:
            raise ConfigurationError(f"Unknown configuration key '{path}'")

        if isinstance(base[key], dict) and path not in kOpaqueKeys:
            out[key] = _merge(base[key], value if value is not None else {}, path + '.')
        else:
            out[key] = value
    return out


def _set_dotted(d: tp.Dict[str, tp.Any], dotted: str, value: tp.Any) -> None:
    keys = dotted.split('.')
    cur = d
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
        if not isinstance(cur, dict):
            raise ConfigurationError(f"Cannot override '{dotted}': '{k}' is not a mapping")
    cur[keys[-1]] = value


def _fill(section: tp.Dict[str, tp.Any], key: str, value: tp.Any) -> None:
    if section.get(key) is None:
        section[key] = value


def _resolve_protocol(merged: tp.Dict[str, tp.Any]) -> None:
    """Fill every ``null`` protocol default from the named dataset (in place)."""
    ds = merged['dataset']
    known = named_datasets()

    if ds['name'] in known:
        nd = known[ds['name']]
        protocol = {'alpha': nd.alpha,
                    'batch_size': nd.batch_size,
                    'max_epochs': nd.max_epochs,
                    'score': nd.score,
                    'scaling': nd.scaling,
                    'validation_fraction': nd.validation_fraction,
                    'anomalies_to_test': nd.anomalies_to_test}
        _fill(ds, 'input_dim', nd.input_dim)
        _fill(ds, 'row_limit', nd.row_limit)
        if ds['schema'] is None and nd.schema is not None:
            ds['schema'] = os.path.join(kConfigDir, 'schemas', nd.schema)
    else:
        logging.getLogger(__name__).info("Dataset '%s' is not a named dataset: using generic defaults",
                                         ds['name'])
        protocol = kCustomDefaults

    _fill(merged['split'], 'alpha', protocol['alpha'])
    _fill(merged['split'], 'validation_fraction', protocol['validation_fraction'])
    _fill(merged['split'], 'anomalies_to_test', protocol['anomalies_to_test'])
    _fill(merged['train'], 'batch_size', protocol['batch_size'])
    _fill(merged['train'], 'max_epochs', protocol['max_epochs'])
    _fill(merged['score'], 'name', protocol['score'])
    _fill(ds, 'scaling', protocol['scaling'])


def _toggles(train: tp.Dict[str, tp.Any]) -> Toggles:
    toggles = variant_toggles(str(train['variant']))
    if train['toggles'] is None:
        return toggles

    if not isinstance(train['toggles'], dict):
        raise ConfigurationError("'train.toggles' must be a mapping")
    fields = toggles.as_dict()
    unknown = set(train['toggles']) - set(fields)
    if unknown:
        raise ConfigurationError(
            f"Unknown configuration key(s) {sorted('train.toggles.' + str(k) for k in unknown)}")
    fields.update({k: bool(v) for k, v in train['toggles'].items()})
    return Toggles(**fields)


def _dataset(d: tp.Dict[str, tp.Any], seed: int) -> DatasetConfig:
    if d['scaling'] not in kMethods:
        raise ConfigurationError(f"dataset.scaling must be one of {kMethods}, got '{d['scaling']}'")
    if d['subsample'] is not None and not 0.0 < float(d['subsample']) <= 1.0:
        raise ConfigurationError(f"dataset.subsample={d['subsample']} must be in (0,1]")

    toy = None
    if d['name'] == 'toy':
        toy = ToySpec(seed=seed, **d['toy'])
        toy.validate()
    elif d['path'] is None:
        raise ConfigurationError(f"dataset.path is required for dataset '{d['name']}'")
    elif d['schema'] is None:
        raise ConfigurationError(f"dataset.schema is required for dataset '{d['name']}'")

    return DatasetConfig(name=d['name'],
                         path=d['path'],
                         schema=d['schema'],
                         scaling=d['scaling'],
                         input_dim=d['input_dim'],
                         normal_class=d['normal_class'],
                         row_limit=d['row_limit'],
                         subsample=d['subsample'],
                         toy=toy)


def _architecture(a: tp.Dict[str, tp.Any], dataset: str) -> ArchitectureConfig:
    if a['layout'] is not None:
        if not isinstance(a['layout'], dict):
            raise ConfigurationError("'architecture.layout' must be a mapping")
        return ArchitectureConfig(kind=None, latent_dim=a['latent_dim'], layout=a['layout'])

    kind = a['kind'] if a['kind'] is not None else dataset
    kinds = load_layouts()['kinds']
    if kind not in kinds:
        raise ConfigurationError(
            f"No layout for '{kind}': set architecture.kind to one of {sorted(kinds)} "
            "or give architecture.layout")
    return ArchitectureConfig(kind=kind, latent_dim=a['latent_dim'], layout=None)


def config_from_dict(user: tp.Dict[str, tp.Any],
                     overrides: tp.Optional[tp.Dict[str, tp.Any]] = None) -> ExperimentConfig:
    """
    Build an :class:`ExperimentConfig` from a user dictionary.

    Args:
        user: Same structure as ``config/experiment.yaml``; anything omitted
              takes the default.

        overrides: ``{'dotted.key': value}`` applied on top of ``user``
                   (command line flags). ``None`` values are ignored.

    Raises:
        ConfigurationError: Unknown keys (named by dotted path) or invalid
                            values.
    """
    user = copy.deepcopy(user or {})
    for dotted, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(user, dotted, value)

    merged = _merge(load_defaults(), user)
    _resolve_protocol(merged)

    if merged['precision'] not in kPrecisions:
        raise ConfigurationError(f"precision must be one of {kPrecisions}, got '{merged['precision']}'")
    if int(merged['runs']) < 1:
        raise ConfigurationError(f"runs must be >= 1, got {merged['runs']}")

    seed = int(merged['seed'])
    t = merged['train']
    train = TrainConfig(lr=float(t['lr']),
                        beta1=float(t['beta1']),
                        beta2=float(t['beta2']),
                        batch_size=int(t['batch_size']),
                        max_epochs=int(t['max_epochs']),
                        seed=seed,
                        toggles=_toggles(t),
                        sigma_kind=t['sigma_kind'],
                        latent_dim=merged['architecture']['latent_dim'],
                        checkpoint_every=int(t['checkpoint_every']),
                        d_steps_per_g_step=int(t['d_steps_per_g_step']),
                        sigma_batch_ratio=float(t['sigma_batch_ratio']),
                        literal_generator_loss=bool(t['literal_generator_loss']),
                        spectral_iters=int(t['spectral_iters']))
    train.validate()

    s = merged['split']
    split = SplitSpec(train_fraction=float(s['train_fraction']),
                      test_fraction=float(s['test_fraction']),
                      validation_fraction=float(s['validation_fraction']),
                      seed=seed,
                      alpha=float(s['alpha']),
                      anomalies_to_test=bool(s['anomalies_to_test']))
    split.validate()
    if bool(t['monitor_validation']) and split.validation_fraction == 0.0:
        raise ConfigurationError(
            "train.monitor_validation needs split.validation_fraction > 0")

    score = select_score(str(merged['score']['name']))
    orientation = OrientationConvention.from_dict(merged['score']['orientation'] or {})

    config = ExperimentConfig(dataset=_dataset(merged['dataset'], seed),
                              architecture=_architecture(merged['architecture'],
                                                         merged['dataset']['name']),
                              train=train,
                              split=split,
                              score=score,
                              score_fallback=bool(merged['score']['fallback']),
                              orientation=orientation,
                              monitor_validation=bool(t['monitor_validation']),
                              seed=seed,
                              runs=int(merged['runs']),
                              output_dir=merged['output_dir'],
                              precision=merged['precision'],
                              baseline_report=merged['baseline_report'],
                              stats_metric=merged['stats_metric'],
                              resolved=merged)
    logging.getLogger(__name__).debug("Resolved config %s: dataset=%s variant=%s score=%s",
                                      config.config_hash(),
                                      config.dataset.name,
                                      config.variant,
                                      config.score)
    return config


class ExperimentConfigLoader():
    """Reads an experiment YAML file into an :class:`ExperimentConfig`."""

    def __init__(self) -> None:
        self.logger = logging.getLogger(__name__)

    def __call__(self,
                 path: tp.Optional[str],
                 overrides: tp.Optional[tp.Dict[str, tp.Any]] = None) -> ExperimentConfig:
        user = {}  # type: tp.Dict[str, tp.Any]
        if path is not None:
            if not os.path.exists(path):
                raise ConfigurationError(f"Config file '{path}' does not exist")

            self.logger.info("Loading experiment config from %s", path)
            try:
                with open(path) as f:
                    user = yaml.safe_load(f) or {}
            except yaml.YAMLError as err:
                raise ConfigurationError(f"{path}: malformed YAML: {err}") from err
        else:
            self.logger.info("No config file given: using packaged defaults")

        return config_from_dict(user, overrides)


def load_config(path: tp.Optional[str],
                overrides: tp.Optional[tp.Dict[str, tp.Any]] = None) -> ExperimentConfig:
    return ExperimentConfigLoader()(path, overrides)


__api__ = [
    'DatasetConfig',
    'ArchitectureConfig',
    'ExperimentConfig',
    'ExperimentConfigLoader',
    'config_from_dict',
    'load_config',
    'load_defaults'
]
