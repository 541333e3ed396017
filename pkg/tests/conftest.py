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
import typing as tp

# 3rd party packages
import numpy as np
import pytest

# Project packages
from rcalad.core.rng import RngStream
from rcalad.core.tensor import set_precision
from rcalad.data.toy import ToySpec, synth_toy
from rcalad.models.architectures import default_arch
from rcalad.models.bundle import ModelBundle, build_bundle


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run tests marked slow (end-to-end training)")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: trains models for many epochs")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(autouse=True)
def _float64():
    set_precision('float64')
    yield
    set_precision('float64')


def silence_discriminators(bundle: ModelBundle) -> ModelBundle:
    """Zero the logit layer of every discriminator so each outputs exactly 0.5."""
    for net in bundle.discriminators().values():
        last = len(net.spec.joint) - 1
        net.params[f"joint.{last}.W"] = np.zeros_like(net.params[f"joint.{last}.W"])
        net.params[f"joint.{last}.b"] = np.zeros_like(net.params[f"joint.{last}.b"])
    return bundle


@pytest.fixture
def toy_bundle() -> ModelBundle:
    return build_bundle(default_arch('toy', 2), RngStream(0))


@pytest.fixture
def half_bundle(toy_bundle: ModelBundle) -> ModelBundle:
    return silence_discriminators(toy_bundle)


@pytest.fixture
def silence() -> tp.Callable[[ModelBundle], ModelBundle]:
    return silence_discriminators


@pytest.fixture
def toy_data():
    return synth_toy(ToySpec(kind='gaussian_ring', n_normal=200, n_anomaly=20, seed=0))


@pytest.fixture
def rng() -> RngStream:
    return RngStream(1234, 'test')