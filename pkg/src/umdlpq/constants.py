"""The two-atom constants c(p, q) and kappa(p, q).

``c(p, q)`` is the norm of ``(f, g) -> (E f, g)`` on ``L_p(mu; l_q^2)`` with
``mu`` uniform on two atoms.  ``kappa(p, q)`` replaces ``E f`` by the
geometric mean ``sqrt(f_1 f_2)`` of a positive two-valued ``f``.  Both are
suprema of degree-0 homogeneous ratios of four nonnegative parameters
``(f1, f2, g1, g2)``; we maximise them with a seeded multi-start pattern
search and cross-check against an exhaustive grid scan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, optimize

from . import kernels
from .measure import FiniteProbSpace
from .mixed_norm import MixedNormChain, format_exponent, norm, parse_exponent
from .search import OptimizerConfig, pattern_search

GRID_BOX = 10.0
GRID_COARSE = 0.05

# L_p(mu; l_q^2) with mu uniform on {-1, 1}; coordinates (f1, g1, f2, g2)
_UNIFORM2 = FiniteProbSpace.uniform(2)
_COUNT2 = FiniteProbSpace.counting_measure(2)


@dataclass
class ConstantEstimate:
    kind: str
    p: float
    q: float
    value: float
    witness_params: tuple
    certified_ratio: float
    method: str
    config: OptimizerConfig = field(default_factory=OptimizerConfig)
    converged: bool = True

    def __post_init__(self):
        if self.certified_ratio > self.value + 1e-9:
            raise AssertionError("certified ratio exceeds the reported value")

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "p": format_exponent(self.p),
            "q": format_exponent(self.q),
            "value": self.value,
            "certified_ratio": self.certified_ratio,
            "witness_params": [float(v) for v in self.witness_params],
            "method": self.method,
            "seed": self.config.master_seed,
            "converged": self.converged,
        }


def _two_atom_chain(p, q) -> MixedNormChain:
    return MixedNormChain(((p, _UNIFORM2), (q, _COUNT2)))


def _pair(v, name):
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape != (2,):
        raise ValueError(f"{name} must be a pair of reals")
    return v


def projection_ratio(p, q, f, g) -> float:
    """``||(E f, g)|| / ||(f, g)||`` in ``L_p(mu; l_q^2)``."""
    p, q = parse_exponent(p), parse_exponent(q)
    f, g = _pair(f, "f"), _pair(g, "g")
    chain = _two_atom_chain(p, q)
    den = norm(chain, [f[0], g[0], f[1], g[1]])
    if den == 0:
        raise ValueError("(f, g) = 0 has no ratio")
    m = 0.5 * (f[0] + f[1])
    return norm(chain, [m, g[0], m, g[1]]) / den


def kappa_ratio(p, q, f, g) -> float:
    """The geometric-mean ratio defining kappa, for ``f >= 0`` on two half-arcs."""
    p, q = parse_exponent(p), parse_exponent(q)
    f, g = _pair(f, "f"), _pair(g, "g")
    if np.any(f < 0):
        raise ValueError("f must be nonnegative")
    chain = _two_atom_chain(p, q)
    den = norm(chain, [f[0], g[0], f[1], g[1]])
    if den == 0:
        raise ValueError("(f, g) = 0 has no ratio")
    m = math.sqrt(f[0] * f[1])
    return norm(chain, [m, g[0], m, g[1]]) / den


# plain-float closed forms used inside the search loop


def _lq2(x, y, q):
    if q == math.inf:
        return max(x, y)
    return (x**q + y**q) ** (1.0 / q)


def _lp_mu(u, v, p):
    if p == math.inf:
        return max(u, v)
    return (0.5 * u**p + 0.5 * v**p) ** (1.0 / p)


def _denominator(p, q, x):
    f1, f2, g1, g2 = x
    return _lp_mu(_lq2(f1, g1, q), _lq2(f2, g2, q), p)


def _objective(kind, p, q):
    mean = (lambda a, b: 0.5 * (a + b)) if kind == "c" else (lambda a, b: math.sqrt(a * b))

    def f(x):
        f1, f2, g1, g2 = (float(v) for v in x)
        den = _lp_mu(_lq2(f1, g1, q), _lq2(f2, g2, q), p)
        if den == 0:
            return -math.inf
        m = mean(f1, f2)
        return _lp_mu(_lq2(m, g1, q), _lq2(m, g2, q), p) / den

    return f


def _projector(p, q):
    def project(x):
        x = np.maximum(x, 0.0)
        d = _denominator(p, q, x)
        if d == 0 or not math.isfinite(d):
            return np.ones(4) / _denominator(p, q, np.ones(4))
        return x / d

    return project


def _certify(kind, p, q, x):
    fn = projection_ratio if kind == "c" else kappa_ratio
    return fn(p, q, x[:2], x[2:])


def _maximize(kind, p, q, cfg: OptimizerConfig) -> ConstantEstimate:
    objective = _objective(kind, p, q)
    project = _projector(p, q)
    # f constant gives ratio exactly 1 for both constants
    best_x = project(np.ones(4))
    best_v = objective(best_x)
    converged = True
    for r in range(cfg.restarts):
        rng = cfg.rng(r)
        x0 = rng.exponential(1.0, 4)
        res = pattern_search(
            objective, x0, rng,
            step_init=cfg.step_init, shrink=cfg.shrink, tol=cfg.tol,
            max_iters=cfg.max_iters, project=project,
        )
        if res.value > best_v:
            best_x, best_v, converged = res.x, res.value, res.converged
    return ConstantEstimate(
        kind=kind, p=p, q=q, value=float(best_v),
        witness_params=tuple(float(v) for v in best_x),
        certified_ratio=_certify(kind, p, q, best_x),
        method="optimizer", config=cfg, converged=converged,
    )


def compute_c(p, q, cfg: OptimizerConfig | None = None) -> ConstantEstimate:
    """Estimate ``c(p, q)``; accepts ``p = q`` (where the answer is 1)."""
    cfg = cfg or OptimizerConfig()
    return _maximize("c", parse_exponent(p), parse_exponent(q), cfg)


def _check_kappa_exponents(p, q):
    p, q = parse_exponent(p), parse_exponent(q)
    if math.isinf(p) or math.isinf(q):
        raise ValueError("kappa is only defined for finite exponents")
    if p == q:
        raise ValueError("kappa(p, p) is not a constant of interest: the ratio is <= 1 by AM-GM")
    return p, q


def compute_kappa(p, q, cfg: OptimizerConfig | None = None) -> ConstantEstimate:
    """Estimate ``kappa(p, q)`` for finite ``p != q``."""
    cfg = cfg or OptimizerConfig()
    p, q = _check_kappa_exponents(p, q)
    return _maximize("kappa", p, q, cfg)


def _grid_axis(lo, hi, step):
    n = int(round((hi - lo) / step))
    return np.linspace(lo, hi, n + 1) if n > 0 else np.array([lo])


def grid_oracle(kind: str, p, q, cfg: OptimizerConfig | None = None, n_candidates: int = 8) -> ConstantEstimate:
    """Exhaustive-scan estimate, independent of :func:`pattern_search`.

    ``f2`` is fixed to 1 by homogeneity and ``(f1, g1, g2)`` range over
    ``[0, 10]^3``.  The whole box is scanned at step 0.05 (or the configured
    resolution, if coarser); the best local maxima are then rescanned on
    nested boxes, each 10x finer, until the step reaches the configured
    resolution, and the winner gets one Nelder-Mead polish.
    """
    cfg = cfg or OptimizerConfig()
    p, q = parse_exponent(p), parse_exponent(q)
    if kind == "kappa":
        p, q = _check_kappa_exponents(p, q)
    elif kind != "c":
        raise ValueError(f"kind must be 'c' or 'kappa', not {kind!r}")
    k = 0 if kind == "c" else 1
    res = cfg.grid_resolution
    h = max(res, GRID_COARSE)
    axis = _grid_axis(0.0, GRID_BOX, h)
    vals = kernels.grid_ratios(k, p, q, axis, axis, axis)
    peaks = (vals == ndimage.maximum_filter(vals, size=3, mode="nearest"))
    idx = np.argwhere(peaks)
    order = np.argsort(-vals[peaks], kind="stable")[:n_candidates]
    best_v, best_x = -math.inf, None
    for i in order:
        x = axis[idx[i]].copy()
        v = vals[tuple(idx[i])]
        step = h
        while step > res * (1 + 1e-9):
            fine = max(step / 10.0, res)
            axes = [_grid_axis(max(0.0, c - 2 * step), min(GRID_BOX, c + 2 * step), fine) for c in x]
            sub = kernels.grid_ratios(k, p, q, *axes)
            j = np.unravel_index(np.argmax(sub), sub.shape)
            x = np.array([axes[d][j[d]] for d in range(3)])
            v = sub[j]
            step = fine
        if v > best_v:
            best_v, best_x = float(v), x

    def neg(z):
        z = np.clip(z, 0.0, GRID_BOX)
        return -float(kernels.grid_ratios(k, p, q, z[:1], z[1:2], z[2:])[0, 0, 0])

    pol = optimize.minimize(neg, best_x, method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000})
    if -pol.fun > best_v:
        best_v, best_x = float(-pol.fun), np.clip(pol.x, 0.0, GRID_BOX)
    params = np.array([best_x[0], 1.0, best_x[1], best_x[2]])
    params /= _denominator(p, q, params)
    certified = _certify(kind, p, q, params)
    return ConstantEstimate(
        kind=kind, p=p, q=q, value=max(best_v, certified),
        witness_params=tuple(float(v) for v in params),
        certified_ratio=certified, method="grid", config=cfg, converged=True,
    )


def divergence_diagnostic(seq, cfg: OptimizerConfig | None = None):
    """Partial products ``prod_{i<k} c(p_i, p_{i+1})`` for ``k = 1..len(seq)-1``.

    Equal neighbours contribute exactly 1.  Returns ``(products, estimates)``
    where ``estimates`` maps each distinct pair to its :class:`ConstantEstimate`.
    """
    cfg = cfg or OptimizerConfig()
    seq = [parse_exponent(p) for p in seq]
    cache = {}
    products = []
    acc = 1.0
    for a, b in zip(seq[:-1], seq[1:]):
        if a != b:
            if (a, b) not in cache:
                cache[(a, b)] = compute_c(a, b, cfg)
            acc *= cache[(a, b)].value
        products.append(acc)
    return products, cache


def gateaux_quotient(f, g, alpha: float, eps: float, weights) -> float:
    """``[int (eps|f| + |g|)^alpha - int |g|^alpha] / eps``."""
    f, g, w = (np.abs(np.asarray(a, dtype=float)) for a in (f, g, weights))
    return float((w @ (eps * f + g) ** alpha - w @ g**alpha) / eps)


def gateaux_derivative(f, g, alpha: float, weights) -> float:
    """The limit ``alpha * int |f| |g|^(alpha - 1)`` of :func:`gateaux_quotient`."""
    f, g, w = (np.abs(np.asarray(a, dtype=float)) for a in (f, g, weights))
    return float(alpha * (w @ (f * g ** (alpha - 1))))
