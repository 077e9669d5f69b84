"""Derivative-free multi-start maximisation.

A generalised pattern search: each iteration polls ``+-`` coordinate
directions plus a few random unit directions, accepts the first strict
improvement and otherwise shrinks the step.  Random directions keep the
poll set dense, which matters on the max-type kinks of the ratios we
maximise (``inf`` exponents, boundary optima).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

DEFAULT_SEED = 20130901


@dataclass(frozen=True)
class OptimizerConfig:
    master_seed: int = DEFAULT_SEED
    restarts: int = 8
    max_iters: int = 3000
    step_init: float = 0.25
    shrink: float = 0.5
    tol: float = 1e-10
    grid_resolution: float = 1e-3

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.tol <= 0 or self.step_init <= 0:
            raise ValueError("tol and step_init must be positive")
        if self.grid_resolution <= 0:
            raise ValueError("grid_resolution must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> OptimizerConfig:
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for k, v in d.items():
            if k not in types:
                raise ValueError(f"unknown optimizer option {k!r}")
            kw[k] = int(v) if types[k] in ("int", int) else float(v)
        return cls(**kw)

    def rng(self, restart: int) -> np.random.Generator:
        """Independent stream for one restart, a function of (master_seed, restart)."""
        return np.random.default_rng([self.master_seed, restart])


@dataclass
class SearchResult:
    x: np.ndarray
    value: float
    converged: bool
    iterations: int
    evaluations: int


def _poll_directions(n, rng, n_random):
    dirs = []
    if n_random:
        R = rng.standard_normal((n_random, n))
        R /= np.linalg.norm(R, axis=1, keepdims=True)
        for r in R:
            dirs.append(r)
            dirs.append(-r)
    eye = np.eye(n)
    for i in rng.permutation(n):
        dirs.append(eye[i])
        dirs.append(-eye[i])
    return dirs


def pattern_search(objective, x0, rng, *, step_init=0.25, shrink=0.5, tol=1e-10,
                   max_iters=3000, project=None, n_random=None) -> SearchResult:
    """Maximise ``objective`` starting from ``x0``."""
    project = project or (lambda z: z)
    n_random = max(2, len(x0) // 4) if n_random is None else n_random
    x = project(np.asarray(x0, dtype=float))
    fx = objective(x)
    evals = 1
    step = step_init
    it = 0
    while it < max_iters and step > tol:
        it += 1
        for d in _poll_directions(x.size, rng, n_random):
            y = project(x + step * d)
            fy = objective(y)
            evals += 1
            if fy > fx:
                x, fx = y, fy
                step = min(2.0 * step, step_init)
                break
        else:
            step *= shrink
    return SearchResult(x, float(fx), step <= tol, it, evals)
