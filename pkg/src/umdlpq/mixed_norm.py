"""Iterated mixed norms ``L_{p_1}(L_{p_2}(... L_{p_m}))`` on finite spaces."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import kernels
from .measure import FiniteProbSpace

INF = math.inf


def parse_exponent(value) -> float:
    """Accept a number or the strings ``inf``/``infinity``; reject values below 1."""
    if isinstance(value, str):
        v = value.strip().lower()
        p = INF if v in ("inf", "infinity", "+inf", "oo") else float(v)
    else:
        p = float(value)
    if math.isnan(p) or p < 1:
        raise ValueError(f"exponent must lie in [1, inf], got {value!r}")
    return p


def format_exponent(p: float):
    return "inf" if math.isinf(p) else float(p)


def dual_exponent(p: float) -> float:
    if p == 1:
        return INF
    if math.isinf(p):
        return 1.0
    return p / (p - 1)


@dataclass(frozen=True)
class MixedNormChain:
    """Layers ``(exponent, space)``, outermost first.  No layers = scalars."""

    layers: tuple = ()

    def __post_init__(self):
        layers = tuple((parse_exponent(p), s) for p, s in self.layers)
        for _, s in layers:
            if not isinstance(s, FiniteProbSpace):
                raise TypeError("layer spaces must be FiniteProbSpace instances")
        object.__setattr__(self, "layers", layers)

    @property
    def shape(self) -> tuple:
        return tuple(s.n_atoms for _, s in self.layers)

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64)) if self.layers else 1

    @property
    def exponents(self) -> tuple:
        return tuple(p for p, _ in self.layers)

    @cached_property
    def kernel_args(self):
        sizes = np.array(self.shape, dtype=np.int64)
        exps = np.array(self.exponents, dtype=np.float64)
        if self.layers:
            weights = np.concatenate([s.weights for _, s in self.layers]).astype(np.float64)
        else:
            weights = np.zeros(0)
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        return sizes, exps, weights, offsets

    def flat_index(self, multi_index: Sequence[int]) -> int:
        if len(multi_index) != len(self.layers):
            raise ValueError(f"multi-index {tuple(multi_index)} does not match chain depth {len(self.layers)}")
        if not self.layers:
            return 0
        return int(np.ravel_multi_index(tuple(int(i) for i in multi_index), self.shape))

    def multi_index(self, flat: int) -> tuple:
        if not self.layers:
            return ()
        return tuple(int(i) for i in np.unravel_index(int(flat), self.shape))

    def probability_twin(self) -> MixedNormChain:
        return MixedNormChain(tuple((p, s.normalized()) for p, s in self.layers))

    def counting_twin(self) -> MixedNormChain:
        return MixedNormChain(
            tuple((p, FiniteProbSpace.counting_measure(s.n_atoms)) for p, s in self.layers)
        )

    def compose(self, inner: MixedNormChain) -> MixedNormChain:
        """The chain of ``E(F)``: this chain's layers outside ``inner``'s."""
        return MixedNormChain(self.layers + inner.layers)

    def __eq__(self, other):
        if not isinstance(other, MixedNormChain):
            return NotImplemented
        return self.layers == other.layers

    def __hash__(self):
        return hash(self.layers)


def _check_batch(chain: MixedNormChain, X) -> np.ndarray:
    X = np.asarray(X)
    if X.shape[-1] != chain.dim:
        raise ValueError(f"element has length {X.shape[-1]}, chain dimension is {chain.dim}")
    if np.isnan(X).any():
        raise ValueError("NaN coordinate")
    return X


def norm(chain: MixedNormChain, x) -> float:
    """Mixed norm of one element given as a flat row-major coordinate array."""
    x = _check_batch(chain, np.asarray(x).reshape(-1))
    return float(kernels.chain_norms(x[None, :], chain.kernel_args)[0])


def norms(chain: MixedNormChain, X) -> np.ndarray:
    """Row-wise mixed norms of a batch of shape ``(B, dim)``."""
    X = _check_batch(chain, X)
    return kernels.chain_norms(X.reshape(-1, chain.dim), chain.kernel_args)


def normalization_factor(chain: MixedNormChain) -> float:
    """``norm_counting(x) / norm_probability(x)``, the same for every x != 0."""
    out = 1.0
    for p, s in chain.layers:
        if not math.isinf(p):
            out *= s.n_atoms ** (1.0 / p)
    return out


def build_E_n(p, q, n: int, weighting: str = "counting") -> MixedNormChain:
    """``2n`` alternating layers ``p, q, p, q, ...`` over two-atom spaces."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if weighting == "counting":
        space = FiniteProbSpace.counting_measure(2)
    elif weighting == "probability":
        space = FiniteProbSpace.uniform(2)
    else:
        raise ValueError(f"weighting must be 'counting' or 'probability', not {weighting!r}")
    p, q = parse_exponent(p), parse_exponent(q)
    return MixedNormChain(tuple((e, space) for _ in range(n) for e in (p, q)))


def reduce_monotone_runs(seq: Sequence) -> list:
    """Drop the interior points of every maximal monotone run.

    Runs are scanned greedily from the left; equal neighbours extend a run
    in either direction.  Exponents must lie strictly between 1 and inf.
    """
    seq = [parse_exponent(p) for p in seq]
    for p in seq:
        if p == 1 or math.isinf(p):
            raise ValueError("reduce_monotone_runs only handles exponents in (1, inf)")
    if len(seq) <= 2:
        return list(seq)
    out = [seq[0]]
    direction = 0  # 0 undecided, +1 non-decreasing, -1 non-increasing
    for i in range(1, len(seq)):
        step = (seq[i] > seq[i - 1]) - (seq[i] < seq[i - 1])
        if step == 0 or direction == 0 or step == direction:
            if direction == 0:
                direction = step
            continue
        # seq[i-1] closes the run
        out.append(seq[i - 1])
        direction = step
    out.append(seq[-1])
    return out
