"""Dyadic martingale transforms, UMD/Stein ratios and a lower-bound search.

Atoms of ``{+-1}^T`` are indexed ``0..2^T-1`` with the first sign as the
most significant bit, so ``sigma(first k signs)`` has contiguous blocks of
size ``2^(T-k)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import kernels
from .constants import ConstantEstimate
from .measure import Filtration, FiniteProbSpace, conditional_expectation
from .mixed_norm import MixedNormChain, parse_exponent
from .search import OptimizerConfig, pattern_search

DEPTH_CAP = 12
MEAN_TOL = 1e-12


def _cond_dyadic(f: np.ndarray, k: int) -> np.ndarray:
    """E[f | first k signs] for f of shape (2^T, D)."""
    A, D = f.shape
    blocks = f.reshape(2**k, A >> k, D).mean(axis=1)
    return np.repeat(blocks, A >> k, axis=0)


@dataclass(frozen=True)
class DyadicMartingale:
    """Differences ``df_0..df_T`` on ``{+-1}^T``; ``diffs`` has shape ``(T+1, 2^T, dim)``."""

    chain: MixedNormChain
    diffs: np.ndarray

    def __post_init__(self):
        d = np.array(self.diffs, dtype=float)
        if d.ndim == 2 and self.chain.dim == 1:
            d = d[..., None]
        if d.ndim != 3:
            raise ValueError("diffs must have shape (T+1, 2^T, dim)")
        T = d.shape[0] - 1
        if d.shape[1] != 2**T or d.shape[2] != self.chain.dim:
            raise ValueError(f"diffs shape {d.shape} inconsistent with depth {T} and dim {self.chain.dim}")
        if not np.all(np.isfinite(d)):
            raise ValueError("diffs must be finite")
        scale = max(1.0, float(np.abs(d).max()))
        for k in range(T + 1):
            if not np.allclose(_cond_dyadic(d[k], k), d[k], rtol=0, atol=MEAN_TOL * scale):
                raise ValueError(f"df_{k} is not measurable w.r.t. the first {k} signs")
            if k and not np.allclose(_cond_dyadic(d[k], k - 1), 0.0, rtol=0, atol=MEAN_TOL * scale):
                raise ValueError(f"df_{k} has nonzero conditional mean")
        d.setflags(write=False)
        object.__setattr__(self, "diffs", d)

    @property
    def depth(self) -> int:
        return self.diffs.shape[0] - 1

    @property
    def n_atoms(self) -> int:
        return self.diffs.shape[1]

    def sum(self) -> np.ndarray:
        return self.diffs.sum(axis=0)

    def embed(self, depth: int) -> DyadicMartingale:
        """Same martingale viewed on ``{+-1}^depth`` (extra signs ignored, extra diffs zero)."""
        if depth < self.depth:
            raise ValueError("cannot embed into a shallower space")
        rep = 2 ** (depth - self.depth)
        d = np.repeat(self.diffs, rep, axis=1)
        pad = np.zeros((depth - self.depth,) + d.shape[1:])
        return DyadicMartingale(self.chain, np.concatenate([d, pad]))


def project_differences(chain: MixedNormChain, fields) -> DyadicMartingale:
    """``df_k = E_k f_k - E_{k-1} f_k`` (with ``E_{-1} = 0``) for arbitrary fields ``f_k``.

    ``fields`` has shape ``(T+1, 2^T, dim)`` (or ``(T+1, 2^T)`` for scalars).
    """
    f = np.asarray(fields, dtype=float)
    if f.ndim == 2:
        f = f[..., None]
    T = f.shape[0] - 1
    d = np.empty_like(f)
    for k in range(T + 1):
        ek = _cond_dyadic(f[k], k)
        d[k] = ek - (_cond_dyadic(ek, k - 1) if k else 0.0)
    return DyadicMartingale(chain, d)


def _check_depth(T, cap):
    if T > cap:
        raise ValueError(f"depth {T} exceeds the enumeration cap {cap}")


def _ls_norms(m: DyadicMartingale, coeffs, s) -> np.ndarray:
    w = np.full(m.n_atoms, 1.0 / m.n_atoms)
    return kernels.combo_powers(coeffs, m.diffs, w, s, m.chain.kernel_args) ** (1.0 / s)


def _sign_norms(m: DyadicMartingale, s) -> np.ndarray:
    return _ls_norms(m, kernels.sign_matrix(m.depth + 1), s)


def umd_ratio(m: DyadicMartingale, s, cap: int = DEPTH_CAP) -> float:
    """``max_eps ||sum eps_k df_k||_s / ||sum df_k||_s`` over all ``2^(T+1)`` sign patterns."""
    s = _check_s(s)
    _check_depth(m.depth, cap)
    v = _sign_norms(m, s)
    if v[0] == 0:
        raise ValueError("sum of differences is zero")
    return float(v.max() / v[0])


def _check_s(s):
    s = parse_exponent(s)
    if s == 1 or np.isinf(s):
        raise ValueError("s must lie strictly between 1 and inf")
    return s


def transform_ratio(m: DyadicMartingale, alphas, s) -> float:
    """``||sum alpha_k df_k||_s / ||sum df_k||_s``."""
    s = _check_s(s)
    a = np.asarray(alphas, dtype=float).reshape(-1)
    if a.size != m.depth + 1:
        raise ValueError("need one coefficient per difference")
    if np.any(np.abs(a) > 1):
        raise ValueError("transform coefficients must lie in [-1, 1]")
    v = _ls_norms(m, np.vstack([np.ones_like(a), a]), s)
    if v[0] == 0:
        raise ValueError("sum of differences is zero")
    return float(v[1] / v[0])


def grid_transform_max(m: DyadicMartingale, s, grid: int = 11) -> float:
    """Max of :func:`transform_ratio` over ``grid`` equispaced values of each alpha_k."""
    s = _check_s(s)
    ticks = np.linspace(-1.0, 1.0, grid)
    coeffs = np.array(list(itertools.product(ticks, repeat=m.depth + 1)))
    v = _ls_norms(m, coeffs, s)
    base = _ls_norms(m, np.ones((1, m.depth + 1)), s)[0]
    return float(v.max() / base)


def extreme_point_check(m: DyadicMartingale, s, grid: int = 11, atol: float = 1e-10) -> bool:
    """True if no alpha on the grid beats the best sign pattern by more than ``atol``."""
    return grid_transform_max(m, s, grid) <= umd_ratio(m, s) + atol


def stein_ratio(fields, filt: Filtration, s, chain: MixedNormChain,
                space: FiniteProbSpace | None = None, cap: int = DEPTH_CAP) -> float:
    """``||sum eps_k E_k F_k||_s / ||sum eps_k F_k||_s`` with the sign average done exactly.

    ``fields`` has shape ``(K, n_atoms, dim)``; ``E_k`` is the conditional
    expectation onto ``filt[k]``.
    """
    s = _check_s(s)
    F = np.asarray(fields, dtype=float)
    if F.ndim == 2:
        F = F[..., None]
    K, n, _ = F.shape
    if K > cap:
        raise ValueError(f"{K} fields exceed the enumeration cap {cap}")
    if len(filt) < K:
        raise ValueError("filtration has fewer levels than fields")
    space = space or FiniteProbSpace.uniform(n)
    EF = np.array([conditional_expectation(F[k], space, filt[k]) for k in range(K)])
    signs = kernels.sign_matrix(K)
    num = kernels.combo_powers(signs, EF, space.weights, s, chain.kernel_args).mean()
    den = kernels.combo_powers(signs, F, space.weights, s, chain.kernel_args).mean()
    if den == 0:
        raise ValueError("denominator is zero")
    return float((num / den) ** (1.0 / s))


# ---------------------------------------------------------------------------
# search
#
# Parameters: for each level k, one raw vector per cylinder of the first k
# signs (2^k * dim values).  They are expanded to {+-1}^T and projected onto
# difference form, so a depth-t parameter vector is also a valid depth-(t+1)
# one once zeros are appended for the new level.


def _n_params(t, dim):
    return dim * (2 ** (t + 1) - 1)


def _param_diffs(x, t, dim) -> np.ndarray:
    """Differences on {+-1}^t from raw per-cylinder values (no validation)."""
    A = 2**t
    d = np.empty((t + 1, A, dim))
    pos = 0
    for k in range(t + 1):
        n = 2**k * dim
        blk = x[pos : pos + n].reshape(2**k, dim)
        if k:
            blk = blk - np.repeat(blk.reshape(2 ** (k - 1), 2, dim).mean(axis=1), 2, axis=0)
        d[k] = np.repeat(blk, A >> k, axis=0)
        pos += n
    return d


def _from_params(x, t, dim, chain) -> DyadicMartingale:
    return DyadicMartingale(chain, _param_diffs(x, t, dim))


def _project(x, t, dim):
    """Drop the per-pair means (they cancel in :func:`_param_diffs`) and rescale.

    Without this the search can drift into the cancelled directions, where
    the differences shrink towards roundoff while ``|x|`` stays 1.
    """
    x = x.copy()
    pos = dim
    for k in range(1, t + 1):
        n = 2**k * dim
        blk = x[pos : pos + n].reshape(2 ** (k - 1), 2, dim)
        x[pos : pos + n] = (blk - blk.mean(axis=1, keepdims=True)).ravel()
        pos += n
    nrm = np.linalg.norm(x)
    return x / nrm if nrm > 0 else x


def search_umd_lower_bound(chain: MixedNormChain, s, depth: int,
                           cfg: OptimizerConfig | None = None, cap: int = DEPTH_CAP):
    """Search dyadic martingales for a large :func:`umd_ratio`.

    Depths ``1..depth`` are searched in turn; each depth is warm-started from
    the previous best, so the result never decreases with ``depth``.
    Returns ``(ConstantEstimate, DyadicMartingale)``; ``certified_ratio`` is
    the ratio recomputed with the other kernel backend.
    """
    cfg = cfg or OptimizerConfig()
    s = _check_s(s)
    if depth < 1:
        raise ValueError("depth must be >= 1")
    _check_depth(depth, cap)
    dim = chain.dim
    best_x = None
    best_v = -np.inf
    converged = True
    for t in range(1, depth + 1):
        n = _n_params(t, dim)

        signs = kernels.sign_matrix(t + 1)
        w = np.full(2**t, 2.0**-t)

        def objective(x, t=t, signs=signs, w=w):
            v = kernels.combo_powers(signs, _param_diffs(x, t, dim), w, s, chain.kernel_args)
            return float((v.max() / v[0]) ** (1.0 / s)) if v[0] > 0 else -np.inf

        starts = []
        if best_x is not None:
            starts.append(np.concatenate([best_x, np.zeros(n - best_x.size)]))
        for r in range(cfg.restarts):
            starts.append(cfg.rng(t * 1000 + r).standard_normal(n))
        level_x, level_v, level_conv = None, -np.inf, True
        for r, x0 in enumerate(starts):
            res = pattern_search(
                objective, x0, cfg.rng(t * 1000 + 500 + r),
                step_init=cfg.step_init, shrink=cfg.shrink, tol=cfg.tol,
                max_iters=cfg.max_iters, project=lambda x, t=t: _project(x, t, dim),
            )
            if res.value > level_v:
                level_x, level_v, level_conv = res.x, res.value, res.converged
        best_x, best_v, converged = level_x, level_v, level_conv
    m = _from_params(best_x, depth, dim, chain)
    other = "numpy" if kernels.BACKEND == "numba" else kernels.BACKEND
    with kernels.backend(other):
        certified = umd_ratio(m, s, cap)
    est = ConstantEstimate(
        kind="C_s", p=s, q=s, value=float(best_v),
        witness_params=tuple(float(v) for v in best_x),
        certified_ratio=certified, method="optimizer", config=cfg, converged=converged,
    )
    return est, m
