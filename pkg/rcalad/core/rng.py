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
Seeded, named random streams. Every consumer of randomness (weight init,
dropout masks, minibatch shuffling, latent/supplementary sampling, splits) gets
its own sub-stream so that adding draws in one place never shifts another.
"""

# Core packages
import typing as tp
import zlib

# 3rd party packages
import numpy as np

# Project packages


class RngStream():
    """
    A named stream of random draws. Identical (seed, name, draw index) always
    yields identical output.

    Attributes:
        seed: The root seed of the run.

        name: Slash-separated path of sub-stream names from the root.

        counter: Number of draw calls made on this stream so far.
    """

    def __init__(self, seed: int, name: str = 'root') -> None:
        self.seed = int(seed)
        self.name = name
        self.counter = 0
        key = tuple(zlib.crc32(p.encode('utf-8')) for p in name.split('/'))
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=key)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def substream(self, name: str) -> 'RngStream':
        return RngStream(self.seed, f"{self.name}/{name}")

    def normal(self,
               size: tp.Tuple[int, ...],
               loc: float = 0.0,
               scale: float = 1.0) -> np.ndarray:
        self.counter += 1
        return self._gen.normal(loc, scale, size=size)

    def uniform(self,
                size: tp.Tuple[int, ...],
                low: float = 0.0,
                high: float = 1.0) -> np.ndarray:
        self.counter += 1
        return self._gen.uniform(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        self.counter += 1
        return self._gen.permutation(n)

    def state(self) -> tp.Dict[str, tp.Any]:
        return {
            'seed': self.seed,
            'name': self.name,
            'counter': self.counter,
            'bit_generator': self._gen.bit_generator.state
        }

    def set_state(self, state: tp.Dict[str, tp.Any]) -> None:
        assert state['name'] == self.name, \
            f"Cannot restore stream '{state['name']}' into '{self.name}'"
        self.seed = int(state['seed'])
        self.counter = int(state['counter'])
        self._gen.bit_generator.state = state['bit_generator']

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, name='{self.name}', counter={self.counter})"


__api__ = [
    'RngStream'
]
