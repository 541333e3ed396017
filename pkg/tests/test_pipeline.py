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

# Core packages
import os
import json
import struct

# 3rd party packages
import numpy as np
import pandas as pd
import pytest
import yaml

# Project packages
from rcalad.core.rng import RngStream
from rcalad.core.exceptions import ConfigurationError, IncompatibleCheckpointError
from rcalad.data.toy import synth_toy
from rcalad.models.architectures import default_arch
from rcalad.models.bundle import build_bundle
from rcalad.pipeline.config import config_from_dict, load_config
from rcalad.pipeline.checkpoint import (decode_checkpoint,
                                        encode_checkpoint,
                                        load_checkpoint,
                                        make_checkpoint,
                                        restore,
                                        save_checkpoint)
from rcalad.pipeline import experiment
from rcalad.perf_measures.metrics import RunAggregate
from rcalad.pipeline.report import Report, read_metrics
from rcalad.tools.cli import main
from rcalad.training.trainer import TrainConfig, fit


def _small(**extra):
    d = {'dataset': {'toy': {'n_normal': 120, 'n_anomaly': 12}},
         'train': {'max_epochs': 2, 'batch_size': 32, 'lr': 1.0e-3}}
    for k, v in extra.items():
        if isinstance(v, dict) and k in d:
            d[k].update(v)
        else:
            d[k] = v
    return d


@pytest.fixture(autouse=True)
def _serial(monkeypatch):
    monkeypatch.delenv(experiment.kThreadsVar, raising=False)

################################################################################
# Configuration
################################################################################


def test_defaults_resolve_toy_protocol():
    config = config_from_dict({})
    assert config.dataset.is_toy
    assert config.split.alpha == pytest.approx(0.1667)
    assert config.score == 'a_fm'
    assert config.train.batch_size == 64
    assert config.train.max_epochs == 100
    assert config.variant == 'rcalad'
    assert config.run_seed(3) == 3


def test_toy_protocol_split():
    config = config_from_dict({})
    assert config.split.anomalies_to_test
    assert config.split.validation_fraction == 0.0

    data = experiment.prepare_data(config, experiment.load_dataset(config), config.seed)
    assert len(data.train) == 2000
    assert len(data.validation) == 0
    assert len(data.test) == 600
    assert int(data.test.labels.sum()) == 100

    with pytest.raises(ConfigurationError, match="monitor_validation"):
        config_from_dict({'train': {'monitor_validation': True}})
    config = config_from_dict({'train': {'monitor_validation': True},
                               'split': {'validation_fraction': 0.25}})
    assert config.monitor_validation


def test_unknown_key_is_named():
    with pytest.raises(ConfigurationError, match="trian"):
        config_from_dict({'trian': {'lr': 0.1}})
    with pytest.raises(ConfigurationError, match=r"train\.lrr"):
        config_from_dict({'train': {'lrr': 0.1}})


def test_named_dataset_protocol():
    config = config_from_dict({'dataset': {'name': 'arrhythmia', 'path': 'x.csv'}})
    assert config.split.alpha == pytest.approx(0.15)
    assert config.dataset.schema.endswith('.yaml')
    assert os.path.isfile(config.dataset.schema)

    with pytest.raises(ConfigurationError, match="dataset.path"):
        config_from_dict({'dataset': {'name': 'arrhythmia'}})


def test_custom_dataset_defaults():
    config = config_from_dict({'dataset': {'name': 'mine', 'path': 'x.csv', 'schema': 's.yaml'},
                               'architecture': {'kind': 'arrhythmia'}})
    assert config.split.alpha == pytest.approx(0.2)
    assert config.train.batch_size == 32
    assert config.train.max_epochs == 100
    assert config.score == 'a_all'
    assert config.dataset.scaling == 'standardize'

    with pytest.raises(ConfigurationError, match="layout"):
        config_from_dict({'dataset': {'name': 'mine', 'path': 'x.csv', 'schema': 's.yaml'}})


def test_toggles_override_variant():
    config = config_from_dict({'train': {'variant': 'ali', 'toggles': {'use_dxx': True}}})
    assert config.variant == 'alice'
    with pytest.raises(ConfigurationError):
        config_from_dict({'train': {'toggles': {'use_dyy': True}}})


def test_overrides_and_hash():
    a = config_from_dict({}, {'seed': 4, 'runs': None})
    b = config_from_dict({'seed': 4})
    assert a.seed == 4 and a.runs == 1
    assert a.config_hash() == b.config_hash()
    assert config_from_dict({'seed': 5}).config_hash() != a.config_hash()


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigurationError, match="does not exist"):
        load_config(os.path.join(str(tmp_path), 'absent.yaml'))

    path = os.path.join(str(tmp_path), 'bad.yaml')
    with open(path, 'w') as f:
        f.write("train: [unclosed\n")
    with pytest.raises(ConfigurationError):
        load_config(path)

################################################################################
# Checkpoints
################################################################################


def _trained():
    x = synth_toy(config_from_dict(_small()).dataset.toy).features
    bundle = build_bundle(default_arch('toy', 2), RngStream(3))
    states = []
    fit(bundle, x, TrainConfig(lr=1e-3, batch_size=32, max_epochs=1, seed=3),
        on_checkpoint=lambda b, s: states.append(s))
    return bundle, states[-1]


def test_checkpoint_save_load_save(tmp_path):
    bundle, state = _trained()
    first = os.path.join(str(tmp_path), 'a', 'epoch0001.rcal')
    second = os.path.join(str(tmp_path), 'b.rcal')
    save_checkpoint(make_checkpoint(bundle, state, 'abc'), first)
    assert os.path.isfile(first + '.json')

    ckpt = load_checkpoint(first)
    assert ckpt.epoch == 1
    assert ckpt.config_hash == 'abc'
    save_checkpoint(ckpt, second)
    with open(first, 'rb') as f1, open(second, 'rb') as f2:
        assert f1.read() == f2.read()


def test_checkpoint_rejects_damage():
    bundle, state = _trained()
    buf = encode_checkpoint(make_checkpoint(bundle, state))

    with pytest.raises(IncompatibleCheckpointError):
        decode_checkpoint(buf[:-3])
    with pytest.raises(IncompatibleCheckpointError):
        decode_checkpoint(buf + b'\x00')
    with pytest.raises(IncompatibleCheckpointError):
        decode_checkpoint(b'XXXX' + buf[4:])
    with pytest.raises(IncompatibleCheckpointError, match="version 2"):
        decode_checkpoint(buf[:4] + struct.pack('<I', 2) + buf[8:])


def test_restore_into_fresh_bundle():
    bundle, state = _trained()
    ckpt = decode_checkpoint(encode_checkpoint(make_checkpoint(bundle, state)))

    fresh = build_bundle(default_arch('toy', 2), RngStream(99))
    resumed = restore(ckpt, fresh)
    assert resumed.epoch == 1
    assert resumed.opt_states['generator'].t == state.opt_states['generator'].t
    for n, net in bundle.networks().items():
        for k, v in net.state_arrays().items():
            assert np.array_equal(v, fresh.networks()[n].state_arrays()[k]), f"{n}/{k}"


def test_restore_rejects_other_architecture():
    bundle, state = _trained()
    ckpt = make_checkpoint(bundle, state)
    other = build_bundle(default_arch('toy', 2, latent_dim=3), RngStream(0))
    with pytest.raises(IncompatibleCheckpointError):
        restore(ckpt, other)

################################################################################
# Experiments and reports
################################################################################


def test_worker_count(monkeypatch):
    assert experiment.worker_count() == 1
    monkeypatch.setenv(experiment.kThreadsVar, '3')
    assert experiment.worker_count() == 3
    monkeypatch.setenv(experiment.kThreadsVar, 'many')
    with pytest.raises(ConfigurationError):
        experiment.worker_count()


def test_single_run_report(tmp_path):
    out = str(tmp_path)
    report = experiment.run_experiment(config_from_dict(_small(output_dir=out)))
    assert report.failed == []
    assert report.aggregate.n_runs == 1
    assert report.aggregate.std['f1'] == 0.0

    metrics = read_metrics(out)
    for key in ['precision', 'recall', 'f1', 'auroc', 'config_hash', 'runs']:
        assert key in metrics
    assert metrics['runs'][0]['seed'] == 0
    assert 'wall_clock' not in json.dumps(metrics)

    scores = pd.read_csv(os.path.join(out, 'scores_run0.csv'))
    assert len(scores) == len(report.artifacts[0].labels)
    losses = pd.read_csv(os.path.join(out, 'loss_history_run0.csv'))
    assert len(losses) == 2

    assert os.path.isfile(os.path.join(out, 'provenance.json'))
    assert os.path.isfile(os.path.join(out, 'run0', 'epoch0002.rcal'))
    assert os.path.isfile(os.path.join(out, 'run0', 'final.rcal'))


def test_reruns_are_identical(tmp_path):
    dirs = [os.path.join(str(tmp_path), d) for d in ('a', 'b')]
    for d in dirs:
        experiment.run_experiment(config_from_dict(_small(output_dir=d)))

    for name in ['scores_run0.csv', 'loss_history_run0.csv']:
        with open(os.path.join(dirs[0], name)) as f1, open(os.path.join(dirs[1], name)) as f2:
            assert f1.read() == f2.read(), name

    a, b = read_metrics(dirs[0]), read_metrics(dirs[1])
    for m in (a, b):
        m.pop('config_hash')
    assert a == b


def test_unavailable_score_fails_run():
    config = config_from_dict(_small(train={'variant': 'ali'}))
    report = experiment.run_experiment(config)
    assert report.failed == [0]
    assert report.runs[0].error.startswith('UnavailableScoreError')
    assert report.aggregate is None


def test_score_fallback():
    config = config_from_dict(_small(train={'variant': 'ali'}, score={'fallback': True}))
    report = experiment.run_experiment(config)
    assert report.failed == []
    assert report.runs[0].score == 'a_l1'


def test_train_only(tmp_path):
    config = config_from_dict(_small(output_dir=str(tmp_path)))
    report = experiment.run_experiment(config, evaluate_test=False)
    assert report.runs[0].metrics is None
    assert report.runs[0].epochs == 2
    assert not os.path.exists(os.path.join(str(tmp_path), 'scores_run0.csv'))


def test_score_checkpoint(tmp_path):
    out = str(tmp_path)
    config = config_from_dict(_small(output_dir=out))
    report = experiment.run_experiment(config)

    path = os.path.join(out, 'rescored.csv')
    scores, labels = experiment.score_checkpoint(config,
                                                 os.path.join(out, 'run0', 'final.rcal'),
                                                 path)
    assert np.array_equal(labels, report.artifacts[0].labels)
    assert np.allclose(scores.a_fm, report.artifacts[0].scores.a_fm)
    assert os.path.isfile(path)


def test_derive_keeps_seed_and_data():
    config = config_from_dict(_small())
    derived = experiment.derive(config, {'train.variant': 'alad'}, None)
    assert derived.variant == 'alad'
    assert derived.score_fallback
    assert derived.seed == config.seed
    assert derived.config_hash() != config.config_hash()
    assert config.variant == 'rcalad'


def _report(f1):
    return Report(dataset='toy', variant='x', score='a_fm', alpha=0.1, seed=0,
                  config_hash='h', toggles={}, runs=[],
                  aggregate=RunAggregate(1, {'f1': f1}, {'f1': 0.0}))


def test_ablation_ordering_is_reported():
    check = experiment._check_ordering  # pylint: disable=protected-access
    assert check({'rcalad': _report(0.60), 'alad': _report(0.61)})
    assert not check({'rcalad': _report(0.50), 'alad': _report(0.61)})
    assert check({'ali': _report(0.5)}) is None

################################################################################
# Command line
################################################################################


def test_cli_error_line(tmp_path, capsys):
    status = main(['eval', '--config', os.path.join(str(tmp_path), 'absent.yaml')])
    assert status == 1
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert err.startswith('error: ConfigurationError:')


def test_cli_toy(tmp_path):
    path = os.path.join(str(tmp_path), 'ring.csv')
    assert main(['toy', '--out', path, '--n-normal', '40', '--n-anomaly', '4']) == 0
    assert os.path.isfile(path)
    assert os.path.isfile(os.path.join(str(tmp_path), 'ring.schema.yaml'))
    assert len(pd.read_csv(path)) == 44


def test_toy_script_config_drives_eval():
    path = os.path.join(os.path.dirname(__file__), '..', 'scripts', 'toy.sh')
    with open(path) as f:
        script = f.read()

    body = script.split('<<CONF\n', 1)[1].split('\nCONF\n', 1)[0]
    config = config_from_dict(yaml.safe_load(body))
    assert config.dataset.is_toy
    assert config.dataset.toy.n_normal == 2500
    assert config.dataset.toy.n_anomaly == 100
    assert config.split.anomalies_to_test

    eval_call = script.split('rcalad-cli --log-level=INFO eval', 1)[1]
    assert '--config=$CONFIG' in eval_call
    assert 'rcalad-cli toy' not in script.replace('`rcalad-cli toy --out=...`', '')


def _metrics_file(tmp_path, name, f1s):
    runs = [{'run': i, 'status': 'ok', 'metrics': {'precision': v, 'recall': v, 'f1': v,
                                                   'auroc': None}}
            for i, v in enumerate(f1s)]
    path = os.path.join(str(tmp_path), name)
    with open(path, 'w') as f:
        json.dump({'runs': runs}, f)
    return path


def test_cli_stats(tmp_path, capsys):
    a = _metrics_file(tmp_path, 'a.json', [0.6, 0.7, 0.8, 0.9, 0.65, 0.75])
    b = _metrics_file(tmp_path, 'b.json', [0.5, 0.5, 0.5, 0.5, 0.5, 0.5])
    out = os.path.join(str(tmp_path), 'w.json')
    assert main(['stats', a, b, '--out', out]) == 0

    result = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert result['statistic'] == 0.0
    assert result['p_value'] == pytest.approx(0.03125)
    with open(out) as f:
        assert json.loads(f.read()) == result


def test_cli_stats_unpaired(tmp_path, capsys):
    a = _metrics_file(tmp_path, 'a.json', [0.6, 0.7, 0.8, 0.9, 0.65, 0.75])
    b = _metrics_file(tmp_path, 'b.json', [0.5, 0.5])
    assert main(['stats', a, b]) == 1
    assert 'ContractError' in capsys.readouterr().err

################################################################################
# End to end
################################################################################


@pytest.mark.slow
def test_toy_ring_detects_anomalies(tmp_path):
    config = config_from_dict({'train': {'variant': 'rcalad', 'lr': 1.0e-4},
                               'score': {'name': 'fm'},
                               'runs': 3,
                               'output_dir': str(tmp_path)})
    assert config.dataset.toy.kind == 'gaussian_ring'
    report = experiment.run_experiment(config)
    assert report.failed == []
    assert len(report.runs) == 3
    assert all(r.score == 'a_fm' for r in report.runs)
    assert report.aggregate.mean['auroc'] >= 0.90


@pytest.mark.slow
def test_ablation_table(tmp_path):
    config = config_from_dict(_small(output_dir=str(tmp_path)))
    reports = experiment.ablate(config, ['ali', 'alad', 'rcalad'])
    assert set(reports) == {'ali', 'alad', 'rcalad'}
    table = pd.read_csv(os.path.join(str(tmp_path), 'ablation.csv'))
    assert list(table['variant']) == ['ali', 'alad', 'rcalad']
    assert os.path.isfile(os.path.join(str(tmp_path), 'alad', 'metrics.json'))
