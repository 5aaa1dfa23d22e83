r"""Finite multi-index sets $\Lambda \subset \mathbb{N}_0^d$.

A set $\Lambda$ defines the polynomial space
$\text{span}\{\psi_\nu : \nu \in \Lambda\}$ with tensorized basis functions
$\psi_\nu(y) = \prod_q \varphi_{\nu_q}(y_q)$. The zero index always comes first,
so the first basis function is the constant.

Functions:
    total_degree_set: $\{\nu : |\nu|_1 \le k\}$.
    hyperbolic_cross_set: $\{\nu : \prod_q (\nu_q + 1) \le k\}$.
    is_downward_closed: Checks closure under componentwise decrease.
    index_set_from_config: Builds a set from its JSON description.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np


def _graded_key(nu: tuple[int, ...]) -> tuple:
    # total degree first, then lexicographic with the first coordinate largest
    return (sum(nu), tuple(-v for v in nu))


@dataclass(frozen=True)
class MultiIndexSet:
    """Ordered set of distinct multi-indices of a common dimension.

    Attributes:
        dim: Ambient dimension $d \\ge 1$.
        indices: Tuple of multi-indices; the zero index is first.
    """

    dim: int
    indices: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")
        idx = tuple(tuple(int(v) for v in nu) for nu in self.indices)
        object.__setattr__(self, "indices", idx)
        if not idx:
            raise ValueError("multi-index set must be nonempty")
        for nu in idx:
            if len(nu) != self.dim:
                raise ValueError(f"index {nu} does not have length {self.dim}")
            if min(nu) < 0:
                raise ValueError(f"index {nu} has a negative entry")
        if len(set(idx)) != len(idx):
            raise ValueError("multi-index set contains duplicates")
        if any(idx[0]):
            raise ValueError("the zero multi-index must be the first element")

    @property
    def n(self) -> int:
        return len(self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return iter(self.indices)

    def __contains__(self, nu) -> bool:
        return tuple(nu) in self._lookup

    @cached_property
    def _lookup(self) -> frozenset:
        return frozenset(self.indices)

    @cached_property
    def array(self) -> np.ndarray:
        """Indices as an ``(n, d)`` integer array."""
        arr = np.array(self.indices, dtype=np.int64).reshape(self.n, self.dim)
        arr.setflags(write=False)
        return arr

    @property
    def max_degree(self) -> int:
        return int(self.array.max())

    @classmethod
    def from_indices(cls, indices: Iterable[Sequence[int]], dim: int | None = None) -> "MultiIndexSet":
        indices = [tuple(int(v) for v in nu) for nu in indices]
        if dim is None:
            if not indices:
                raise ValueError("cannot infer dimension of an empty set")
            dim = len(indices[0])
        return cls(dim, tuple(indices))


def _bounded_sum(d: int, k: int) -> Iterator[tuple[int, ...]]:
    if d == 1:
        for v in range(k + 1):
            yield (v,)
        return
    for v in range(k + 1):
        for rest in _bounded_sum(d - 1, k - v):
            yield (v,) + rest


def _bounded_product(d: int, k: int) -> Iterator[tuple[int, ...]]:
    # all nu with prod(nu_q + 1) <= k
    if d == 1:
        for v in range(k):
            yield (v,)
        return
    for v in range(k):
        for rest in _bounded_product(d - 1, k // (v + 1)):
            yield (v,) + rest


def total_degree_set(d: int, k: int) -> MultiIndexSet:
    """Total degree set $\\{\\nu \\in \\mathbb{N}_0^d : \\sum_q \\nu_q \\le k\\}$ in graded order."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if k < 0:
        raise ValueError(f"order must be >= 0, got {k}")
    return MultiIndexSet(d, tuple(sorted(_bounded_sum(d, k), key=_graded_key)))


def hyperbolic_cross_set(d: int, k: int) -> MultiIndexSet:
    """Hyperbolic cross set $\\{\\nu : \\prod_q (\\nu_q + 1) \\le k\\}$ in graded order."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if k < 1:
        raise ValueError(f"order must be >= 1, got {k}")
    return MultiIndexSet(d, tuple(sorted(_bounded_product(d, k), key=_graded_key)))


def is_downward_closed(index_set: MultiIndexSet) -> bool:
    """True iff every componentwise predecessor of every index is in the set.

    Checking the immediate lower neighbours suffices: any $\\tilde\\nu \\le \\nu$
    is reached from $\\nu$ by a chain of unit decrements.
    """
    for nu in index_set:
        for q, v in enumerate(nu):
            if v > 0 and (nu[:q] + (v - 1,) + nu[q + 1:]) not in index_set:
                return False
    return True


def index_set_from_config(spec: dict) -> MultiIndexSet:
    """Build a set from ``{"type": ..., "dim": d, "order": k, "indices": [...]}``."""
    kind = spec.get("type")
    if kind == "total_degree":
        return total_degree_set(int(spec["dim"]), int(spec["order"]))
    if kind == "hyperbolic_cross":
        return hyperbolic_cross_set(int(spec["dim"]), int(spec["order"]))
    if kind == "explicit":
        indices = spec["indices"]
        dim = int(spec["dim"]) if "dim" in spec else None
        return MultiIndexSet.from_indices(indices, dim)
    raise ValueError(f"unknown index set type {kind!r}")
