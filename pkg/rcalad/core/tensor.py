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
Dense tensors and the reverse-mode tape (Wengert list) that records operations
on them.

A :class:`Tape` is activated with a ``with`` block. While active, every op in
:mod:`rcalad.core.ops` whose inputs include a tensor :meth:`Tape.watch`-ed on
that tape appends a :class:`Node` holding its vector-Jacobian product. Tensors
not on the active tape are constants.
"""

# Core packages
import typing as tp
import logging
import threading

# 3rd party packages
import numpy as np

# Project packages
from rcalad.core.exceptions import ContractError, ConfigurationError
from rcalad.core.logging import kTraceLevel

kPrecisions = ['float64', 'float32']
_precision = {'dtype': np.float64}
_active = threading.local()

VJP = tp.Callable[[np.ndarray], tp.Sequence[tp.Optional[np.ndarray]]]


def set_precision(name: str) -> None:
    """Select ``float64`` (default) or ``float32`` storage for new tensors."""
    if name not in kPrecisions:
        raise ConfigurationError(f"Unknown precision '{name}'")
    _precision['dtype'] = np.dtype(name).type


def dtype() -> type:
    return _precision['dtype']


class Tensor():
    """
    A dense array of floats, optionally tied to a node on a tape.

    Attributes:
        value: Row-major storage.

        node_id: Index of the node which produced this tensor on ``tape``, or
                 ``None`` for constants.

        tape: The tape owning ``node_id``.
    """
    __slots__ = ('value', 'node_id', 'tape')

    def __init__(self,
                 value: tp.Union[np.ndarray, float, tp.Sequence],
                 node_id: tp.Optional[int] = None,
                 tape: tp.Optional['Tape'] = None) -> None:
        self.value = np.asarray(value, dtype=dtype())
        self.node_id = node_id
        self.tape = tape

    @property
    def shape(self) -> tp.Tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def item(self) -> float:
        return float(self.value.reshape(-1)[0]) if self.value.size == 1 else float('nan')

    def numpy(self) -> np.ndarray:
        return self.value

    def tracked(self) -> bool:
        tape = active_tape()
        return tape is not None and self.tape is tape and self.node_id is not None

    def detach(self) -> 'Tensor':
        return Tensor(self.value)

    # Operator sugar, mostly for tests and losses
    def __add__(self, other: tp.Union['Tensor', float]) -> 'Tensor':
        from rcalad.core import ops
        return ops.add(self, as_tensor(other))

    def __radd__(self, other: float) -> 'Tensor':
        return self.__add__(other)

    def __sub__(self, other: tp.Union['Tensor', float]) -> 'Tensor':
        from rcalad.core import ops
        return ops.sub(self, as_tensor(other))

    def __rsub__(self, other: float) -> 'Tensor':
        from rcalad.core import ops
        return ops.sub(as_tensor(other), self)

    def __mul__(self, other: tp.Union['Tensor', float]) -> 'Tensor':
        from rcalad.core import ops
        return ops.mul(self, as_tensor(other))

    def __rmul__(self, other: float) -> 'Tensor':
        return self.__mul__(other)

    def __neg__(self) -> 'Tensor':
        from rcalad.core import ops
        return ops.mul(self, as_tensor(-1.0))

    def __repr__(self) -> str:
        return f"Tensor(shape={list(self.shape)}, node_id={self.node_id})"


def as_tensor(x: tp.Union[Tensor, np.ndarray, float, tp.Sequence]) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Node(tp.NamedTuple):
    kind: str
    inputs: tp.Tuple[tp.Optional[int], ...]
    vjp: tp.Optional[VJP]
    shape: tp.Tuple[int, ...]


class Tape():
    """
    Ordered record of operations. Nodes are appended as ops execute, so the
    list is always in topological order and :meth:`backward` is a single
    reverse sweep.
    """

    def __init__(self) -> None:
        self.nodes = []  # type: tp.List[Node]
        self.logger = logging.getLogger(__name__)

    def __enter__(self) -> 'Tape':
        stack = getattr(_active, 'stack', None)
        if stack is None:
            stack = []
            _active.stack = stack
        stack.append(self)
        return self

    def __exit__(self, *args) -> None:
        _active.stack.pop()

    def watch(self, t: Tensor) -> Tensor:
        """Register ``t`` as a differentiable leaf; returns the tracked alias."""
        self.nodes.append(Node('leaf', (), None, t.shape))
        return Tensor(t.value, len(self.nodes) - 1, self)

    def record(self,
               kind: str,
               inputs: tp.Sequence[Tensor],
               value: np.ndarray,
               vjp: VJP) -> Tensor:
        ids = tuple(i.node_id if i.tape is self else None for i in inputs)
        self.nodes.append(Node(kind, ids, vjp, value.shape))
        return Tensor(value, len(self.nodes) - 1, self)

    def backward(self, root: Tensor) -> tp.Dict[int, np.ndarray]:
        """
        Reverse sweep from ``root``, which must be a scalar.

        Returns:
            Gradient of ``root`` for every leaf node reached, keyed by node id.
        """
        if root.value.size != 1:
            raise ContractError(
                f"backward() needs a scalar root, got shape {list(root.shape)}")

        leaves = {}  # type: tp.Dict[int, np.ndarray]
        if root.tape is not self or root.node_id is None:
            return leaves

        buf = {root.node_id: np.ones(root.shape, dtype=dtype())}

        for nid in range(root.node_id, -1, -1):
            g = buf.pop(nid, None)
            if g is None:
                continue

            node = self.nodes[nid]
            if node.kind == 'leaf':
                leaves[nid] = g
                continue

            in_grads = node.vjp(g)
            for src, ig in zip(node.inputs, in_grads):
                if src is None or ig is None:
                    continue
                if src in buf:
                    buf[src] = buf[src] + ig
                else:
                    buf[src] = ig

        self.logger.log(kTraceLevel, "Backward from node %d: %d nodes on tape, %d leaves reached",
                        root.node_id,
                        len(self.nodes),
                        len(leaves))
        return leaves

    def gradient(self,
                 root: Tensor,
                 sources: tp.Sequence[Tensor]) -> tp.List[np.ndarray]:
        """
        Gradients of ``root`` w.r.t. each of ``sources`` (leaves watched on this
        tape). Sources that ``root`` does not depend on get zeros.
        """
        leaves = self.backward(root)
        ret = []
        for s in sources:
            assert s.tape is self and s.node_id is not None, \
                "gradient() sources must be leaves watched on this tape"
            g = leaves.get(s.node_id)
            ret.append(np.zeros(s.shape, dtype=dtype()) if g is None else g)
        return ret


def active_tape() -> tp.Optional[Tape]:
    stack = getattr(_active, 'stack', None)
    return stack[-1] if stack else None


__api__ = [
    'Tensor',
    'Tape',
    'Node',
    'active_tape',
    'as_tensor',
    'set_precision'
]
