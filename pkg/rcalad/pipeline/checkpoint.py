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
Versioned binary checkpoints of a model bundle plus everything needed to
resume training from an epoch boundary.

File layout (all integers little-endian)::

    b"RCAL" | u32 version | u32 meta length | meta (UTF-8 JSON)
    | u32 block count | blocks...

    block: u32 name length | name (UTF-8) | u32 ndim | u64 dims[ndim]
           | float64 data (little-endian, row-major)

Blocks are written in sorted name order and the metadata JSON with sorted
keys, so saving a loaded checkpoint reproduces the original bytes. The
metadata is duplicated in a ``<file>.json`` sidecar for humans.
"""

# Core packages
import os
import json
import struct
import typing as tp
import dataclasses
import logging

# 3rd party packages
import numpy as np

# Project packages
from rcalad.core.exceptions import IncompatibleCheckpointError
from rcalad.core.optim import OptimizerState
from rcalad.models.bundle import ModelBundle
from rcalad.training.trainer import TrainState

kMagic = b'RCAL'
kFormatVersion = 1
kOptHyper = ['lr', 'beta1', 'beta2', 'epsilon', 't']


@dataclasses.dataclass
class Checkpoint():
    """
    Attributes:
        arrays: Named float64 blocks: ``net/<network>/<state key>`` and
                ``opt/<network>/<m|v>/<param>``.

        meta: Epoch, config hash, optimizer hyperparameters and step counts,
              random stream states, and bundle dimensions.
    """
    arrays: tp.Dict[str, np.ndarray]
    meta: tp.Dict[str, tp.Any]
    version: int = kFormatVersion

    @property
    def epoch(self) -> int:
        return int(self.meta['epoch'])

    @property
    def config_hash(self) -> tp.Optional[str]:
        return self.meta.get('config_hash')


def make_checkpoint(bundle: ModelBundle,
                    state: TrainState,
                    config_hash: tp.Optional[str] = None) -> Checkpoint:
    arrays = {}  # type: tp.Dict[str, np.ndarray]
    for name, net in bundle.networks().items():
        for k, v in net.state_arrays().items():
            arrays[f"net/{name}/{k}"] = np.asarray(v, dtype=np.float64)

    optimizer = {}
    for name, opt in state.opt_states.items():
        optimizer[name] = {h: getattr(opt, h) for h in kOptHyper}
        for k in opt.m:
            arrays[f"opt/{name}/m/{k}"] = np.asarray(opt.m[k], dtype=np.float64)
            arrays[f"opt/{name}/v/{k}"] = np.asarray(opt.v[k], dtype=np.float64)

    meta = {
        'epoch': int(state.epoch),
        'config_hash': config_hash,
        'input_dim': bundle.input_dim,
        'latent_dim': bundle.latent_dim,
        'networks': sorted(bundle.networks().keys()),
        'optimizer': optimizer,
        'streams': state.streams
    }
    return Checkpoint(arrays=arrays, meta=meta)


def _meta_bytes(meta: tp.Dict[str, tp.Any]) -> bytes:
    return json.dumps(meta, sort_keys=True, separators=(',', ':')).encode('utf-8')


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    meta = _meta_bytes(ckpt.meta)
    parts = [kMagic,
             struct.pack('<I', ckpt.version),
             struct.pack('<I', len(meta)),
             meta,
             struct.pack('<I', len(ckpt.arrays))]

    for name in sorted(ckpt.arrays):
        arr = np.ascontiguousarray(ckpt.arrays[name], dtype='<f8')
        raw = name.encode('utf-8')
        parts.append(struct.pack('<I', len(raw)))
        parts.append(raw)
        parts.append(struct.pack('<I', arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes(order='C'))
    return b''.join(parts)


class _Reader():
    def __init__(self, buf: bytes, path: str) -> None:
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise IncompatibleCheckpointError(
                f"{self.path}: truncated at byte {len(self.buf)} (needed {self.pos + n})")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str) -> tp.Tuple[tp.Any, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(buf: bytes, path: str = '<bytes>') -> Checkpoint:
    """
    Raises:
        IncompatibleCheckpointError: Wrong magic, a different format version, a
                                     truncated buffer, or trailing bytes.
    """
    r = _Reader(buf, path)
    if r.take(4) != kMagic:
        raise IncompatibleCheckpointError(f"{path}: not an RCALAD checkpoint")

    (version,) = r.unpack('<I')
    if version != kFormatVersion:
        raise IncompatibleCheckpointError(
            f"{path}: format version {version}, this build reads {kFormatVersion}")

    (meta_len,) = r.unpack('<I')
    try:
        meta = json.loads(r.take(meta_len).decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise IncompatibleCheckpointError(f"{path}: corrupt metadata: {err}") from err

    (n_blocks,) = r.unpack('<I')
    arrays = {}
    for _ in range(n_blocks):
        (name_len,) = r.unpack('<I')
        name = r.take(name_len).decode('utf-8')
        (ndim,) = r.unpack('<I')
        shape = r.unpack(f"<{ndim}Q")
        count = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(r.take(8 * count), dtype='<f8')
        arrays[name] = data.astype(np.float64).reshape(shape)

    if r.pos != len(buf):
        raise IncompatibleCheckpointError(
            f"{path}: {len(buf) - r.pos} unexpected trailing bytes")

    return Checkpoint(arrays=arrays, meta=meta, version=version)


def save_checkpoint(ckpt: Checkpoint, path: str) -> None:
    """Write ``path`` and its ``.json`` sidecar."""
    dirname = os.path.dirname(path)
    if dirname:
        os.makedirs(dirname, exist_ok=True)

    with open(path, 'wb') as f:
        f.write(encode_checkpoint(ckpt))

    sidecar = dict(ckpt.meta)
    sidecar['format_version'] = ckpt.version
    sidecar['blocks'] = {k: list(v.shape) for k, v in sorted(ckpt.arrays.items())}
    with open(path + '.json', 'w') as f:
        json.dump(sidecar, f, sort_keys=True, indent=2)

    logging.getLogger(__name__).info("Wrote checkpoint %s (epoch %d, %d blocks)",
                                     path,
                                     ckpt.epoch,
                                     len(ckpt.arrays))


def load_checkpoint(path: str) -> Checkpoint:
    if not os.path.exists(path):
        raise IncompatibleCheckpointError(f"Checkpoint '{path}' does not exist")
    with open(path, 'rb') as f:
        buf = f.read()
    ckpt = decode_checkpoint(buf, path)
    logging.getLogger(__name__).info("Loaded checkpoint %s (epoch %d)", path, ckpt.epoch)
    return ckpt


def restore(ckpt: Checkpoint,
            bundle: ModelBundle,
            config_hash: tp.Optional[str] = None) -> TrainState:
    """
    Load the network state of ``ckpt`` into ``bundle`` (in place) and return
    the :class:`TrainState` to resume from. ``bundle`` must have been built
    from the same architecture; nothing is modified if it was not.
    """
    meta = ckpt.meta
    if sorted(bundle.networks().keys()) != meta['networks']:
        raise IncompatibleCheckpointError(
            f"Checkpoint networks {meta['networks']} do not match bundle "
            f"{sorted(bundle.networks().keys())}")
    if (bundle.input_dim, bundle.latent_dim) != (meta['input_dim'], meta['latent_dim']):
        raise IncompatibleCheckpointError(
            f"Checkpoint is for input_dim={meta['input_dim']}, latent_dim={meta['latent_dim']}; "
            f"bundle has {bundle.input_dim}, {bundle.latent_dim}")
    if config_hash is not None and meta.get('config_hash') not in (None, config_hash):
        logging.getLogger(__name__).warning("Checkpoint config hash %s differs from current %s",
                                            meta['config_hash'],
                                            config_hash)

    per_net = {}  # type: tp.Dict[str, tp.Dict[str, np.ndarray]]
    for name, net in bundle.networks().items():
        wanted = net.state_arrays()
        found = {}
        for k, v in wanted.items():
            block = ckpt.arrays.get(f"net/{name}/{k}")
            if block is None or block.shape != np.shape(v):
                raise IncompatibleCheckpointError(
                    f"Checkpoint block 'net/{name}/{k}' is missing or has the wrong shape")
            found[k] = block
        per_net[name] = found

    opt_states = {}
    for name, hyper in meta['optimizer'].items():
        opt = OptimizerState(lr=hyper['lr'],
                             beta1=hyper['beta1'],
                             beta2=hyper['beta2'],
                             epsilon=hyper['epsilon'],
                             t=int(hyper['t']))
        for k in bundle.networks()[name].params:
            if f"opt/{name}/m/{k}" not in ckpt.arrays or f"opt/{name}/v/{k}" not in ckpt.arrays:
                raise IncompatibleCheckpointError(
                    f"Checkpoint has no optimizer moments for '{name}/{k}'")
            opt.m[k] = np.array(ckpt.arrays[f"opt/{name}/m/{k}"])
            opt.v[k] = np.array(ckpt.arrays[f"opt/{name}/v/{k}"])
        opt_states[name] = opt

    for name, net in bundle.networks().items():
        net.load_state_arrays(per_net[name])

    return TrainState(epoch=ckpt.epoch, opt_states=opt_states, streams=meta['streams'])


__api__ = [
    'Checkpoint',
    'make_checkpoint',
    'encode_checkpoint',
    'decode_checkpoint',
    'save_checkpoint',
    'load_checkpoint',
    'restore'
]
