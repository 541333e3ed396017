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
import math
import os

# 3rd party packages
import numpy as np
import pytest

# Project packages
from rcalad.core.rng import RngStream
from rcalad.core.exceptions import (ConfigurationError,
                                    ContractError,
                                    IngestionError,
                                    ShapeError,
                                    UnavailableScoreError)
from rcalad.models.architectures import default_arch
from rcalad.models.bundle import build_bundle
from rcalad.scoring.scores import (ReconTriple,
                                   ScoreVector,
                                   reconstruct,
                                   score_baselines,
                                   score_fm,
                                   score_table,
                                   select_score)
from rcalad.scoring.orient import OrientationConvention, orient
from rcalad.scoring.dump import read_scores, write_scores


def _triple(x, x_hat):
    z = np.zeros((len(x), 2))
    return ReconTriple(z_x=z, x_hat=np.asarray(x_hat, dtype=float), z_hat=z.copy())


def test_perfect_reconstruction_scores_zero(toy_bundle):
    x = np.array([[0.3, -0.1], [1.0, 2.0]])
    a_l1, a_l2, _, _ = score_baselines(toy_bundle, x, _triple(x, x))
    assert np.array_equal(a_l1, [0.0, 0.0])
    assert np.array_equal(a_l2, [0.0, 0.0])


def test_residual_norms(toy_bundle):
    x = np.array([[1.0, 2.0]])
    a_l1, a_l2, _, _ = score_baselines(toy_bundle, x, _triple(x, [[2.0, 4.0]]))
    assert a_l1[0] == pytest.approx(3.0)
    assert a_l2[0] == pytest.approx(math.sqrt(5.0))


def test_triple_shape_checked(toy_bundle):
    x = np.zeros((3, 2))
    with pytest.raises(ShapeError):
        score_baselines(toy_bundle, x, _triple(x[:2], x[:2]))


def test_chance_discriminator_scores(half_bundle, toy_data):
    x = toy_data.features[:10]
    scores = score_table(half_bundle, x)
    assert np.allclose(scores.a_logits, math.log(0.5))
    assert np.allclose(scores.a_all, 1.5)

    oriented = orient(scores, OrientationConvention())
    assert np.allclose(oriented.a_all, -1.5)
    assert np.allclose(oriented.a_logits, -math.log(0.5))
    assert np.array_equal(oriented.a_l1, scores.a_l1)


def test_score_table_complete(toy_bundle, toy_data):
    scores = score_table(toy_bundle, toy_data.features)
    assert scores.available() == ['a_l1', 'a_l2', 'a_logits', 'a_features', 'a_fm', 'a_all']
    assert len(scores) == len(toy_data)
    for name in scores.available():
        assert np.isfinite(scores.get(name)).all()
        assert (scores.get(name) >= 0).all() or name == 'a_logits'


def test_scores_are_per_row(toy_bundle, toy_data):
    x = toy_data.features[:12]
    full = score_table(toy_bundle, x)
    part = score_table(toy_bundle, x[5:7])
    for name in full.available():
        assert np.allclose(full.get(name)[5:7], part.get(name))


def test_scoring_does_not_touch_state(toy_bundle, toy_data):
    before = {k: v.copy() for k, v in toy_bundle.D_xxzz.state_arrays().items()}
    score_table(toy_bundle, toy_data.features[:20])
    for k, v in toy_bundle.D_xxzz.state_arrays().items():
        assert np.array_equal(v, before[k])


def test_missing_quad_discriminator(toy_data):
    bundle = build_bundle(default_arch('toy', 2), RngStream(0), discriminators=['dxz', 'dxx'])
    x = toy_data.features[:5]
    with pytest.raises(UnavailableScoreError):
        score_fm(bundle, x, reconstruct(bundle, x))

    scores = score_table(bundle, x)
    assert scores.a_fm is None and scores.a_all is None
    assert scores.a_logits is not None
    with pytest.raises(UnavailableScoreError):
        scores.get('a_fm')


def test_ali_bundle_has_only_residuals(toy_data):
    bundle = build_bundle(default_arch('toy', 2), RngStream(0), discriminators=['dxz'])
    assert score_table(bundle, toy_data.features[:5]).available() == ['a_l1', 'a_l2']


def test_input_width_checked(toy_bundle):
    with pytest.raises(ContractError):
        reconstruct(toy_bundle, np.zeros((3, 5)))


def test_select_score():
    assert select_score('fm') == 'a_fm'
    assert select_score('a_l2') == 'a_l2'
    with pytest.raises(UnavailableScoreError):
        select_score('energy')


def test_orientation_overrides():
    conv = OrientationConvention.from_dict({'a_all': 'as_is'})
    assert conv.a_all == 'as_is' and conv.a_logits == 'negate'
    assert OrientationConvention.as_is().a_logits == 'as_is'

    with pytest.raises(ConfigurationError):
        OrientationConvention.from_dict({'a_energy': 'negate'})
    with pytest.raises(ConfigurationError):
        OrientationConvention.from_dict({'a_l1': 'flip'})


def test_score_dump(tmp_path):
    scores = ScoreVector(a_l1=np.array([0.1, 2.5, 1.0 / 3.0]),
                         a_l2=np.array([0.2, 0.3, 0.4]))
    path = os.path.join(str(tmp_path), 'scores.csv')
    write_scores(path, scores, np.array([0, 1, 0]))

    with open(path) as f:
        header = f.readline().strip()
    assert header == 'sample_id,a_l1,a_l2,a_logits,a_features,a_fm,a_all,label'

    back, labels = read_scores(path)
    assert np.array_equal(back.a_l1, scores.a_l1)
    assert back.a_fm is None
    assert list(labels) == [0, 1, 0]


def test_read_missing_dump(tmp_path):
    with pytest.raises(IngestionError):
        read_scores(os.path.join(str(tmp_path), 'nope.csv'))
