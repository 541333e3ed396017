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
Two-dimensional synthetic datasets with known anomalies.
"""

# Core packages
import typing as tp
import dataclasses

# 3rd party packages
import numpy as np

# Project packages
from rcalad.core.rng import RngStream
from rcalad.core.exceptions import ConfigurationError
from rcalad.data.dataset import Dataset, from_matrix

kToyKinds = ['gaussian_ring', 'two_gaussians']
kBox = 3.0
kRingInner = 0.7
kRingOuter = 1.3
kCentres = np.array([[-1.5, 0.0], [1.5, 0.0]])


@dataclasses.dataclass(frozen=True)
class ToySpec():
    kind: str = 'gaussian_ring'
    n_normal: int = 2000
    n_anomaly: int = 0
    noise: float = 0.05
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in kToyKinds:
            raise ConfigurationError(f"Unknown toy kind '{self.kind}': must be one of {kToyKinds}")
        if self.n_normal < 0 or self.n_anomaly < 0:
            raise ConfigurationError("Toy row counts must be >= 0")
        if self.noise < 0:
            raise ConfigurationError("Toy noise must be >= 0")


def _reject(n: int,
            outside: tp.Callable[[np.ndarray], np.ndarray],
            rng: RngStream) -> np.ndarray:
    """``n`` uniform draws from the box, keeping only those ``outside`` accepts."""
    kept = np.zeros((0, 2))
    while len(kept) < n:
        cand = rng.uniform((2 * (n - len(kept)) + 8, 2), low=-kBox, high=kBox)
        kept = np.concatenate([kept, cand[outside(cand)]])
    return kept[:n]


def _ring(spec: ToySpec, rng: RngStream) -> tp.Tuple[np.ndarray, np.ndarray]:
    theta = rng.uniform((spec.n_normal,), high=2.0 * np.pi)
    normal = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    normal = normal + rng.normal((spec.n_normal, 2), scale=spec.noise)

    def outside(p: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(p, axis=1)
        return (r < kRingInner) | (r > kRingOuter)

    return normal, _reject(spec.n_anomaly, outside, rng)


def _two_gaussians(spec: ToySpec, rng: RngStream) -> tp.Tuple[np.ndarray, np.ndarray]:
    which = np.arange(spec.n_normal) % 2
    normal = kCentres[which] + rng.normal((spec.n_normal, 2), scale=spec.noise)
    radius = 3.0 * max(spec.noise, 1e-3)

    def outside(p: np.ndarray) -> np.ndarray:
        d = np.linalg.norm(p[:, None, :] - kCentres[None, :, :], axis=2)
        return (d > radius).all(axis=1)

    return normal, _reject(spec.n_anomaly, outside, rng)


def synth_toy(spec: ToySpec) -> Dataset:
    """
    ``gaussian_ring``: normals on the unit circle plus Gaussian noise;
    anomalies uniform in :math:`[-3,3]^2` outside the annulus
    :math:`0.7 \\le r \\le 1.3`.

    ``two_gaussians``: normals split evenly between two blobs at
    :math:`(\\pm 1.5, 0)`; anomalies uniform in the box more than three noise
    deviations from both centres.

    Rows are shuffled; labels follow construction.
    """
    spec.validate()
    rng = RngStream(spec.seed).substream(f"toy/{spec.kind}")
    if spec.kind == 'gaussian_ring':
        normal, anomaly = _ring(spec, rng)
    else:
        normal, anomaly = _two_gaussians(spec, rng)

    x = np.concatenate([normal, anomaly]).reshape(-1, 2)
    y = np.concatenate([np.zeros(len(normal), dtype=int), np.ones(len(anomaly), dtype=int)])
    order = rng.permutation(len(x))
    return from_matrix(spec.kind, x[order], y[order])


__api__ = [
    'ToySpec',
    'synth_toy'
]
