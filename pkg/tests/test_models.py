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

# 3rd party packages
import numpy as np
import pytest

# Project packages
from rcalad.core.rng import RngStream
from rcalad.core.tensor import Tensor
from rcalad.core.exceptions import ConfigurationError, ContractError, ShapeError
from rcalad.models.specs import LayerSpec, NetworkSpec
from rcalad.models.network import build_network
from rcalad.models.architectures import default_arch
from rcalad.models.bundle import build_bundle, discriminate, encode, generate


def test_encoder_param_count():
    spec = NetworkSpec(name='encoder',
                       input_dims=(274,),
                       joint=(LayerSpec(256, 'lrelu'),
                              LayerSpec(128, 'lrelu'),
                              LayerSpec(64, 'none')))
    assert spec.param_count() == 111552
    assert build_network(spec, RngStream(0)).n_params() == 111552


def test_batch_norm_adds_scale_and_shift():
    spec = NetworkSpec(name='n',
                       input_dims=(3,),
                       joint=(LayerSpec(4, 'lrelu', batch_norm=True),))
    assert spec.param_count() == 3 * 4 + 4 + 2 * 4


def test_identity_stub_passes_through():
    spec = NetworkSpec(name='stub',
                       input_dims=(3,),
                       joint=(LayerSpec(3, 'none'), LayerSpec(3, 'none')))
    net = build_network(spec, RngStream(0), init='identity')
    x = Tensor(np.array([[1.0, -2.0, 0.5]]))
    out = net([x])
    assert np.allclose(out.output.numpy(), x.numpy())
    assert np.allclose(out.features.numpy(), x.numpy())


def test_zero_width_layer_rejected():
    spec = NetworkSpec(name='bad', input_dims=(3,), joint=(LayerSpec(0, 'lrelu'),))
    with pytest.raises(ConfigurationError):
        build_network(spec, RngStream(0))


def test_discriminator_must_end_in_one_unit():
    spec = NetworkSpec(name='d',
                       input_dims=(2, 2),
                       joint=(LayerSpec(4, 'lrelu'), LayerSpec(2, 'sigmoid')),
                       discriminator=True)
    with pytest.raises(ConfigurationError):
        build_network(spec, RngStream(0))


def test_arrhythmia_layout():
    spec = default_arch('arrhythmia', 274)
    assert spec.latent_dim == 64
    assert [l.width for l in spec.encoder.joint] == [256, 128, 64]
    assert [l.width for l in spec.generator.joint] == [128, 256, 274]
    assert spec.dxxzz.feature_width == 32
    assert spec.dxxzz.input_dims == (274, 274, 64, 64)


def test_kdd_layout():
    spec = default_arch('kdd', 121)
    assert spec.latent_dim == 1
    assert [l.width for l in spec.generator.joint] == [64, 128, 121]
    assert spec.encoder.output_width == 1


def test_latent_override():
    spec = default_arch('kdd', 121, latent_dim=8)
    assert spec.encoder.output_width == 8
    assert spec.dzz.input_dims == (8, 8)


def test_toy_layout():
    spec = default_arch('toy', 2)
    assert spec.latent_dim == 2
    assert spec.generator.output_width == 2


def test_unknown_kind():
    with pytest.raises(ConfigurationError):
        default_arch('mnist', 784)


def test_discriminators_are_spectrally_normalized():
    spec = default_arch('toy', 2)
    assert all(l.spectral_norm for l in spec.dxx.joint)
    assert not any(l.spectral_norm for l in spec.encoder.joint)


def test_bundle_shapes(toy_bundle, toy_data, rng):
    x = Tensor(toy_data.features[:8])
    z = encode(toy_bundle.E, x)
    x_rec = generate(toy_bundle.G, z)
    assert z.shape == (8, 2)
    assert x_rec.shape == (8, 2)

    out = discriminate(toy_bundle.D_xxzz, [x, x_rec, z, z], mode='train', rng=rng)
    assert out.logit.shape == (8, 1)
    assert out.features.shape == (8, 16)
    assert np.all((out.prob.numpy() > 0.0) & (out.prob.numpy() < 1.0))


def test_quad_discriminator_arity(toy_bundle, toy_data):
    x = Tensor(toy_data.features[:4])
    with pytest.raises(ContractError):
        discriminate(toy_bundle.D_xxzz, [x, x])


def test_input_width_checked(toy_bundle):
    with pytest.raises(ShapeError):
        encode(toy_bundle.E, Tensor(np.zeros((4, 3))))


def test_partial_bundle():
    bundle = build_bundle(default_arch('toy', 2), RngStream(0), discriminators=['dxz'])
    assert list(bundle.discriminators()) == ['dxz']
    assert bundle.D_xxzz is None
    assert not bundle.has('dzz')


def test_bundle_init_is_seeded():
    a = build_bundle(default_arch('toy', 2), RngStream(4))
    b = build_bundle(default_arch('toy', 2), RngStream(4))
    c = build_bundle(default_arch('toy', 2), RngStream(5))
    assert np.array_equal(a.G.params['joint.0.W'], b.G.params['joint.0.W'])
    assert not np.array_equal(a.G.params['joint.0.W'], c.G.params['joint.0.W'])


def test_eval_mode_rows_independent(toy_bundle, toy_data):
    x = toy_data.features[:6]
    full = encode(toy_bundle.E, Tensor(x)).numpy()
    single = encode(toy_bundle.E, Tensor(x[2:3])).numpy()
    assert np.allclose(full[2:3], single)


def test_state_arrays_restore(toy_bundle):
    net = toy_bundle.D_xz
    saved = {k: v.copy() for k, v in net.state_arrays().items()}
    fresh = build_bundle(default_arch('toy', 2), RngStream(99)).D_xz
    fresh.load_state_arrays(saved)
    for k, v in fresh.state_arrays().items():
        assert np.array_equal(v, saved[k])
