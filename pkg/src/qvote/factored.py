"""Product-of-blocks state store keyed by stable qubit ids.

Qubits that have never interacted live in separate dense blocks; a gate that
spans blocks merges them first. The represented state is always the tensor
product of the blocks, so results match a single dense vector while memory
tracks the largest entangled group rather than the total qubit count.
"""
from __future__ import annotations

from typing import Hashable, Iterable, Sequence

import numpy as np

from . import qstate
from .errors import ShapeError
from .qstate import ControlSpec, StateVector


class _Block:
    __slots__ = ("state", "keys")

    def __init__(self, state: StateVector, keys: list):
        self.state = state
        self.keys = keys

    def axis(self, key) -> int:
        return self.keys.index(key)


class FactoredState:
    def __init__(self):
        self._blocks: dict[Hashable, _Block] = {}

    def __contains__(self, key) -> bool:
        return key in self._blocks

    @property
    def keys(self) -> list:
        return sorted(self._blocks)

    @property
    def num_qubits(self) -> int:
        return len(self._blocks)

    def blocks(self) -> list[tuple[list, StateVector]]:
        seen, out = set(), []
        for b in self._blocks.values():
            if id(b) not in seen:
                seen.add(id(b))
                out.append((list(b.keys), b.state))
        return out

    def add(self, amplitudes, keys: Sequence[Hashable]) -> None:
        keys = list(keys)
        for k in keys:
            if k in self._blocks:
                raise KeyError(f"qubit {k!r} already live")
        state = qstate.set_amplitudes(amplitudes)
        if state.num_qubits != len(keys):
            raise ShapeError(f"{len(keys)} keys for a {state.num_qubits}-qubit state")
        block = _Block(state, keys)
        for k in keys:
            self._blocks[k] = block

    def _join(self, keys: Iterable[Hashable]) -> _Block:
        blocks = []
        for k in keys:
            b = self._blocks[k]
            if all(b is not o for o in blocks):
                blocks.append(b)
        first = blocks[0]
        for other in blocks[1:]:
            first.state = qstate.tensor_product(first.state, other.state)
            first.keys = first.keys + other.keys
            for k in other.keys:
                self._blocks[k] = first
        return first

    def apply(self, gate, target, controls: Sequence[tuple[Hashable, int]] = ()) -> None:
        block = self._join([target] + [k for k, _ in controls])
        spec = ControlSpec(tuple((block.axis(k), b) for k, b in controls), block.axis(target))
        block.state = qstate.apply_controlled(block.state, spec, gate)

    def measure(self, key, rng) -> int:
        block = self._blocks[key]
        rec, block.state = qstate.measure_qubit(block.state, block.axis(key), rng)
        return rec.outcome

    def postselect(self, key, outcome: int) -> float:
        block = self._blocks[key]
        p, block.state = qstate.postselect(block.state, block.axis(key), outcome)
        return p

    def release(self, key) -> None:
        """Drop a qubit that sits in a computational-basis state."""
        block = self._blocks.pop(key)
        if len(block.keys) == 1:
            if abs(max(abs(block.state.amplitudes)) - 1) > qstate.NORM_TOL:
                raise ValueError(f"qubit {key!r} is not in a basis state")
            return
        block.state = qstate.discard(block.state, block.axis(key))
        block.keys = [k for k in block.keys if k != key]

    def marginal(self, keys: Sequence[Hashable]) -> np.ndarray:
        """Joint probabilities of ``keys`` (first key = most significant bit)."""
        keys = list(keys)
        groups: list[_Block] = []
        for k in keys:
            b = self._blocks[k]
            if all(b is not g for g in groups):
                groups.append(b)
        # blocks are independent, so the joint marginal is a product of per-block marginals
        probs = np.ones(1)
        order: list = []
        for g in groups:
            mine = [k for k in keys if self._blocks[k] is g]
            probs = np.multiply.outer(probs, qstate.marginal_probabilities(g.state, [g.axis(k) for k in mine])).reshape(-1)
            order += mine
        t = probs.reshape((2,) * len(keys))
        t = np.transpose(t, [order.index(k) for k in keys])
        return t.reshape(-1)

    def to_statevector(self, keys: Sequence[Hashable] | None = None) -> StateVector:
        """Dense state over every live qubit, axes in ``keys`` order (default: sorted)."""
        keys = self.keys if keys is None else list(keys)
        if sorted(keys) != self.keys:
            raise KeyError("keys must list every live qubit exactly once")
        parts = self.blocks()
        full = qstate.tensor_product(*[s for _, s in parts])
        order = [k for ks, _ in parts for k in ks]
        t = np.transpose(full.tensor(), [order.index(k) for k in keys])
        return StateVector(t.reshape(-1))
