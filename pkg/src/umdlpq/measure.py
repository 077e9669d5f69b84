"""Finite measure spaces, partitions, filtrations and conditional expectations.

Atoms are integers ``0..n-1``.  Products are flattened row-major (the first
factor varies slowest); every multi-index in the package uses that rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SUM_TOL = 1e-12


@dataclass(frozen=True)
class FiniteProbSpace:
    """Positive weights on ``n`` atoms.

    A probability space unless ``counting`` is set, in which case every
    weight is 1 (the measure behind an ``l_p`` layer).
    """

    weights: np.ndarray
    counting: bool = False

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.size == 0:
            raise ValueError("a space needs at least one atom")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be finite and strictly positive")
        if self.counting:
            if not np.all(w == 1.0):
                raise ValueError("counting measure must have unit weights")
        elif abs(w.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n: int) -> FiniteProbSpace:
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def counting_measure(cls, n: int) -> FiniteProbSpace:
        return cls(np.ones(n), counting=True)

    @property
    def n_atoms(self) -> int:
        return self.weights.shape[0]

    def normalized(self) -> FiniteProbSpace:
        """Probability twin of this space (same atoms, weights rescaled)."""
        if not self.counting:
            return self
        return FiniteProbSpace.uniform(self.n_atoms)

    def __eq__(self, other):
        if not isinstance(other, FiniteProbSpace):
            return NotImplemented
        return self.counting == other.counting and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash((self.counting, self.weights.tobytes()))


def product(spaces: Sequence[FiniteProbSpace]) -> FiniteProbSpace:
    """Product measure, atoms in row-major order."""
    spaces = list(spaces)
    if not spaces:
        raise ValueError("product of an empty list of spaces")
    if len(spaces) == 1:
        return spaces[0]
    w = spaces[0].weights
    for s in spaces[1:]:
        w = np.multiply.outer(w, s.weights).reshape(-1)
    counting = all(s.counting for s in spaces)
    if not counting and any(s.counting for s in spaces):
        raise ValueError("cannot mix counting and probability factors")
    if counting:
        return FiniteProbSpace(np.ones(w.size), counting=True)
    # renormalise the rounding drift of long products
    return FiniteProbSpace(w / w.sum())


def _canonical_labels(labels: np.ndarray) -> np.ndarray:
    # relabel blocks 0,1,2,... by first appearance
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv].astype(np.int64)


@dataclass(frozen=True, eq=False)
class Partition:
    """A partition of ``range(n)``, stored as a block label per atom."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels).reshape(-1)
        if lab.size == 0:
            raise ValueError("partition of an empty atom set")
        lab = _canonical_labels(lab)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @classmethod
    def from_blocks(cls, blocks: Sequence[Sequence[int]], n_atoms: int | None = None) -> Partition:
        blocks = [list(b) for b in blocks]
        if any(len(b) == 0 for b in blocks):
            raise ValueError("partition blocks must be nonempty")
        flat = [a for b in blocks for a in b]
        n = len(flat) if n_atoms is None else n_atoms
        if sorted(flat) != list(range(n)):
            raise ValueError("blocks must be disjoint and cover every atom exactly once")
        lab = np.empty(n, dtype=np.int64)
        for i, b in enumerate(blocks):
            lab[b] = i
        return cls(lab)

    @classmethod
    def trivial(cls, n: int) -> Partition:
        return cls(np.zeros(n, dtype=np.int64))

    @classmethod
    def finest(cls, n: int) -> Partition:
        return cls(np.arange(n))

    @property
    def n_atoms(self) -> int:
        return self.labels.shape[0]

    @property
    def n_blocks(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def blocks(self) -> list[list[int]]:
        out = [[] for _ in range(self.n_blocks)]
        for atom, b in enumerate(self.labels.tolist()):
            out[b].append(atom)
        return out

    def is_trivial(self) -> bool:
        return self.n_blocks == 1

    def is_finest(self) -> bool:
        return self.n_blocks == self.n_atoms

    def refines(self, coarser: Partition) -> bool:
        """True if every block of ``self`` sits inside a block of ``coarser``."""
        if coarser.n_atoms != self.n_atoms:
            return False
        # each fine block must map to a single coarse label
        pairs = self.labels * coarser.n_blocks + coarser.labels
        return np.unique(pairs).size == self.n_blocks

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash(self.labels.tobytes())


def product_partition(parts: Sequence[Partition]) -> Partition:
    """Product partition on the row-major product of the atom sets."""
    parts = list(parts)
    if not parts:
        raise ValueError("empty partition list")
    lab = parts[0].labels
    for p in parts[1:]:
        lab = (lab[:, None] * p.n_blocks + p.labels[None, :]).reshape(-1)
    return Partition(lab)


@dataclass(frozen=True)
class Filtration:
    levels: tuple

    def __post_init__(self):
        levels = tuple(self.levels)
        for lv in levels:
            if not isinstance(lv, Partition):
                raise TypeError("filtration levels must be Partition objects")
        if levels:
            n = levels[0].n_atoms
            if any(lv.n_atoms != n for lv in levels):
                raise ValueError("all filtration levels must live on the same atoms")
        for k in range(len(levels) - 1):
            if not levels[k + 1].refines(levels[k]):
                raise ValueError(f"level {k + 1} does not refine level {k}")
        object.__setattr__(self, "levels", levels)

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, k):
        return self.levels[k]

    @property
    def n_atoms(self) -> int | None:
        return self.levels[0].n_atoms if self.levels else None


def dyadic_filtration(depth: int) -> Filtration:
    """sigma(first k signs), k = 0..depth, on {+-1}^depth (first sign slowest)."""
    n = 2**depth
    atoms = np.arange(n)
    return Filtration(tuple(Partition(atoms >> (depth - k)) for k in range(depth + 1)))


def conditional_expectation(f, space: FiniteProbSpace, part: Partition) -> np.ndarray:
    """Block-average ``f`` against ``space.weights`` over the blocks of ``part``.

    ``f`` may be a scalar field of shape ``(n,)`` or a vector field of shape
    ``(n, d)``; averaging acts along the atom axis.
    """
    f = np.asarray(f)
    if f.shape[0] != space.n_atoms or part.n_atoms != space.n_atoms:
        raise ValueError(
            f"dimension mismatch: field has {f.shape[0]} atoms, space {space.n_atoms}, "
            f"partition {part.n_atoms}"
        )
    w = space.weights
    lab = part.labels
    mass = np.bincount(lab, weights=w, minlength=part.n_blocks)
    wf = w.reshape((-1,) + (1,) * (f.ndim - 1)) * f
    sums = np.zeros((part.n_blocks,) + f.shape[1:], dtype=np.result_type(f, float))
    np.add.at(sums, lab, wf)
    means = sums / mass.reshape((-1,) + (1,) * (f.ndim - 1))
    return means[lab]


def tensor_filtration(outer: Filtration, inner: Filtration, copies: int) -> Filtration:
    """Lexicographic product filtration on ``outer x inner^copies``.

    Group ``k`` (1-based, ``k <= copies``) uses ``outer[k-1]`` on the outer
    factor, the finest partition on copies ``1..k-1``, ``inner[n]`` on copy
    ``k`` and the trivial partition on later copies; groups are listed in
    order with ``n`` running over all inner levels.
    """
    if copies < 0:
        raise ValueError("copies must be nonnegative")
    if copies == 0:
        return Filtration(())
    if len(outer) < copies:
        raise ValueError(f"outer filtration has {len(outer)} levels, need {copies}")
    if not inner.levels or not inner[0].is_trivial():
        raise ValueError("inner filtration must start with the trivial partition")
    n0 = inner.n_atoms
    fine = Partition.finest(n0)
    triv = Partition.trivial(n0)
    levels = []
    for k in range(1, copies + 1):
        for b in inner.levels:
            factors = [outer[k - 1]] + [fine] * (k - 1) + [b] + [triv] * (copies - k)
            levels.append(product_partition(factors))
    # Filtration() re-checks refinement; a failure here is an indexing bug
    return Filtration(tuple(levels))
