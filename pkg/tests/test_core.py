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

# 3rd party packages
import numpy as np
import pytest

# Project packages
from rcalad.core import ops
from rcalad.core.tensor import Tensor, Tape, set_precision, dtype
from rcalad.core.rng import RngStream
from rcalad.core.optim import OptimizerState, adam_step
from rcalad.core.spectral import SpectralState, spectral_normalize
from rcalad.core.gradcheck import grad_check
from rcalad.core.exceptions import (ConfigurationError,
                                    ContractError,
                                    DegenerateBatchError,
                                    ShapeError)


def T(*rows) -> Tensor:
    return Tensor(np.asarray(rows, dtype=np.float64))

################################################################################
# Random streams
################################################################################


def test_rng_same_seed_and_name_repeat():
    a = RngStream(7).substream('x')
    b = RngStream(7).substream('x')
    assert np.array_equal(a.normal((3, 4)), b.normal((3, 4)))
    assert np.array_equal(a.uniform((5,)), b.uniform((5,)))


def test_rng_substreams_differ():
    root = RngStream(7)
    assert not np.array_equal(root.substream('a').normal((8,)),
                              root.substream('b').normal((8,)))


def test_rng_state_restores_position():
    s = RngStream(3, 'root/steps')
    s.normal((4,))
    saved = s.state()
    expected = s.normal((6,))

    t = RngStream(3, 'root/steps')
    t.set_state(saved)
    assert np.array_equal(t.normal((6,)), expected)
    assert t.counter == s.counter

################################################################################
# Ops
################################################################################


def test_affine_identity():
    y = ops.affine(T([1, 2]), Tensor(np.eye(2)), Tensor([0.0, 0.0]))
    assert np.allclose(y.numpy(), [[1, 2]])


def test_affine_hand_multiply():
    y = ops.affine(T([2, 3]), T([1, 1], [1, -1]), Tensor([1.0, 0.0]))
    assert np.allclose(y.numpy(), [[6, -1]])


def test_affine_zero_input_gives_bias():
    W = Tensor(np.random.default_rng(0).normal(size=(2, 2)))
    y = ops.affine(T([0, 0]), W, Tensor([3.0, 4.0]))
    assert np.allclose(y.numpy(), [[3, 4]])


def test_affine_shape_mismatch_names_shapes():
    with pytest.raises(ShapeError, match=r"\[1, 3\].*\[2, 2\]"):
        ops.affine(T([1, 2, 3]), Tensor(np.eye(2)), Tensor([0.0, 0.0]))


def test_activations():
    assert ops.activation('lrelu', Tensor([-1.0])).numpy()[0] == pytest.approx(-0.2)
    assert ops.activation('sigmoid', Tensor([0.0])).numpy()[0] == pytest.approx(0.5)
    assert ops.activation('tanh', Tensor([0.0])).numpy()[0] == 0.0
    assert ops.activation('relu', Tensor([-3.0])).numpy()[0] == 0.0


def test_activation_unknown():
    with pytest.raises(ConfigurationError):
        ops.activation('swish', Tensor([0.0]))


def test_concat():
    y = ops.concat([T([1]), T([2, 3])], axis=1)
    assert np.array_equal(y.numpy(), [[1, 2, 3]])

    single = T([4, 5])
    assert ops.concat([single], axis=1) is single

    with pytest.raises(ShapeError):
        ops.concat([Tensor(np.zeros((2, 1))), Tensor(np.zeros((3, 1)))], axis=1)


def test_dropout_modes(rng):
    x = Tensor(np.ones((4, 5)))
    assert ops.dropout(x, 0.0, 'train', rng) is x
    assert ops.dropout(x, 0.7, 'eval', None) is x
    assert np.array_equal(ops.dropout(x, 1.0, 'train', rng).numpy(), np.zeros((4, 5)))

    with pytest.raises(ConfigurationError):
        ops.dropout(x, 1.5, 'train', rng)


def test_dropout_keeps_expectation(rng):
    y = ops.dropout(Tensor(np.ones((200, 50))), 0.5, 'train', rng).numpy()
    assert set(np.unique(y)) <= {0.0, 2.0}
    assert y.mean() == pytest.approx(1.0, abs=0.05)


def _bn(width: int) -> ops.BatchNormParams:
    return ops.BatchNormParams(Tensor(np.ones(width)),
                               Tensor(np.zeros(width)),
                               ops.RunningStats.fresh(width))


def test_batch_norm_constant_feature():
    y = ops.batch_norm(Tensor(np.full((4, 2), 3.0)), _bn(2), 'train')
    assert np.allclose(y.numpy(), 0.0)


def test_batch_norm_two_rows():
    y = ops.batch_norm(T([1], [3]), _bn(1), 'train')
    assert np.allclose(y.numpy()[:, 0], [-1.0, 1.0], atol=1e-5)


def test_batch_norm_updates_running_stats_only_in_train():
    params = _bn(1)
    ops.batch_norm(T([1], [3]), params, 'train')
    assert params.stats.mean[0] == pytest.approx(0.2)
    assert params.stats.var[0] == pytest.approx(0.9 + 0.1 * 1.0)

    before = (params.stats.mean.copy(), params.stats.var.copy())
    ops.batch_norm(T([5]), params, 'eval')
    assert np.array_equal(params.stats.mean, before[0])
    assert np.array_equal(params.stats.var, before[1])


def test_batch_norm_single_row_train():
    with pytest.raises(DegenerateBatchError):
        ops.batch_norm(T([1, 2]), _bn(2), 'train')

################################################################################
# Tape
################################################################################


def test_backward_square():
    with Tape() as tape:
        x = tape.watch(Tensor(3.0))
        (g,) = tape.gradient(ops.square(x), [x])
    assert float(g) == pytest.approx(6.0)


def test_backward_sigmoid():
    with Tape() as tape:
        x = tape.watch(Tensor([[0.0]]))
        (g,) = tape.gradient(ops.total(ops.sigmoid(x)), [x])
    assert g[0, 0] == pytest.approx(0.25)


def test_backward_non_scalar_root():
    with Tape() as tape:
        x = tape.watch(Tensor(np.ones((2, 2))))
        with pytest.raises(ContractError):
            tape.backward(ops.square(x))


def test_backward_accumulates_fan_out():
    with Tape() as tape:
        x = tape.watch(Tensor(2.0))
        y = x * x + x
        (g,) = tape.gradient(y, [x])
    assert float(g) == pytest.approx(5.0)


def test_unwatched_tensors_are_constants():
    with Tape() as tape:
        x = tape.watch(Tensor(2.0))
        c = Tensor(10.0)
        (gx,) = tape.gradient(x * c, [x])
    assert float(gx) == pytest.approx(10.0)
    assert c.node_id is None


def test_float32_precision():
    set_precision('float32')
    assert Tensor([1.0]).value.dtype == np.float32
    assert dtype() is np.float32
    with pytest.raises(ConfigurationError):
        set_precision('float16')

################################################################################
# Gradient checking
################################################################################


def test_grad_check_polynomial():
    def f(x):
        return ops.total(x * x * x + 2.0 * x)

    assert grad_check(f, np.array([0.5, -1.2, 2.0])) < 1e-6


def test_grad_check_constant():
    def f(x):
        return ops.total(Tensor(np.ones(3)))

    assert grad_check(f, np.array([1.0, 2.0, 3.0])) == pytest.approx(0.0, abs=1e-12)


def test_grad_check_two_layer_lrelu():
    gen = np.random.default_rng(5)
    point = [gen.normal(size=(3, 4)),
             gen.normal(size=(4, 5)),
             gen.normal(size=(5,)),
             gen.normal(size=(5, 1)),
             gen.normal(size=(1,))]

    def f(x, W1, b1, W2, b2):
        h = ops.activation('lrelu', ops.affine(x, W1, b1))
        return ops.mean(ops.affine(h, W2, b2))

    assert grad_check(f, point, floor=1e-6) < 1e-4


def test_grad_check_batch_norm_train():
    gen = np.random.default_rng(9)
    point = [gen.normal(size=(6, 3)), 1.0 + 0.1 * gen.normal(size=(3,)), gen.normal(size=(3,))]
    weights = Tensor(gen.normal(size=(6, 3)))

    def f(x, gamma, beta):
        params = ops.BatchNormParams(gamma, beta, ops.RunningStats.fresh(3))
        return ops.total(ops.mul(ops.batch_norm(x, params, 'train'), weights))

    assert grad_check(f, point, floor=1e-4) < 1e-4

################################################################################
# Adam
################################################################################


def test_adam_first_step_is_lr_sign():
    params = {'w': np.array([0.5])}
    state = OptimizerState.for_params(params, lr=1e-3)
    new, state = adam_step(params, {'w': np.array([0.1])}, state)
    assert new['w'][0] - 0.5 == pytest.approx(-1e-3, rel=1e-4)
    assert state.t == 1


def test_adam_zero_gradient_keeps_params():
    params = {'w': np.array([1.0, -2.0])}
    state = OptimizerState.for_params(params, lr=1e-2)
    new, _ = adam_step(params, {'w': np.zeros(2)}, state)
    assert np.array_equal(new['w'], params['w'])


def test_adam_minimizes_square():
    params = {'w': np.array([1.0])}
    state = OptimizerState.for_params(params, lr=1e-2, beta1=0.9)
    for _ in range(100):
        params, state = adam_step(params, {'w': 2.0 * params['w']}, state)
    assert abs(params['w'][0]) < 0.9
    assert state.t == 100


def test_adam_shape_mismatch():
    params = {'w': np.zeros(2)}
    state = OptimizerState.for_params(params)
    with pytest.raises(ContractError):
        adam_step(params, {'w': np.zeros(3)}, state)

################################################################################
# Spectral normalization
################################################################################


def _sn(W: np.ndarray, iters: int = 20, seed: int = 0) -> np.ndarray:
    state = SpectralState.init(W.shape[1], RngStream(seed, 'sn'))
    out, _ = spectral_normalize(Tensor(W), state, iters)
    return out.numpy()


def test_spectral_diagonal():
    assert np.allclose(_sn(np.diag([3.0, 1.0])), np.diag([1.0, 1.0 / 3.0]), atol=1e-6)


def test_spectral_orthogonal_unchanged():
    c, s = math.cos(0.3), math.sin(0.3)
    Q = np.array([[c, -s], [s, c]])
    assert np.allclose(_sn(Q), Q, atol=1e-9)


def test_spectral_zero_matrix_unchanged():
    W = np.zeros((3, 2))
    assert np.array_equal(_sn(W), W)


def test_spectral_random_with_gap():
    gen = np.random.default_rng(11)
    U, _ = np.linalg.qr(gen.normal(size=(4, 4)))
    V, _ = np.linalg.qr(gen.normal(size=(4, 4)))
    W = U @ np.diag([4.0, 2.0, 1.0, 0.5]) @ V.T

    top = np.linalg.svd(_sn(W), compute_uv=False)[0]
    assert top == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize('seed', [0, 1, 2])
def test_spectral_large_gaussian(seed):
    W = np.random.default_rng(seed).normal(size=(512, 512))
    state = SpectralState.init(512, RngStream(seed, 'sn'))

    out, state = spectral_normalize(Tensor(W), state, 20)
    early = np.linalg.norm(out.numpy(), 2)
    assert 1.0 - 1e-9 <= early <= 1.05

    out, state = spectral_normalize(Tensor(W), state, 1000)
    assert np.linalg.norm(out.numpy(), 2) == pytest.approx(1.0, abs=1e-3)
    assert state.iterations == 1020


def test_spectral_state_advances():
    state = SpectralState.init(2, RngStream(0))
    _, new = spectral_normalize(Tensor(np.eye(2)), state, 3)
    assert new.iterations == 3
    assert state.iterations == 0
