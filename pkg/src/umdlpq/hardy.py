"""Hardy-space utilities on the discrete torus.

Fields live on the ``N``-th roots of unity ``z_j = exp(2 pi i j / N)`` with
uniform weight ``1/N``; spectra are indexed ``-N/2 .. N/2-1``.  The discrete
conjugate-function operator is the multiplier ``-i sign(k)`` with the
Nyquist bin ``-N/2`` set to zero, and outer functions are built as
``exp(u + i H u)`` with ``u = log |f|``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import kappa_ratio
from .mixed_norm import build_E_n, norms, parse_exponent

ILL_CONDITIONED = 1e-6


@dataclass(frozen=True)
class TorusGrid:
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4 or self.N % 2:
            raise ValueError("N must be an even integer >= 4")
        object.__setattr__(self, "N", int(self.N))

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.N) / self.N

    @property
    def points(self) -> np.ndarray:
        return np.exp(1j * self.theta)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.N, 1.0 / self.N)

    @property
    def frequencies(self) -> np.ndarray:
        """Frequencies in spectrum order ``-N/2 .. N/2-1``."""
        return np.arange(-self.N // 2, self.N // 2)

    def half_arcs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Masks of the open arcs ``A = (0, pi)``, ``B = (pi, 2 pi)`` and the two jump points."""
        j = np.arange(self.N)
        jump = (j == 0) | (j == self.N // 2)
        return (j < self.N // 2) & ~jump, (j > self.N // 2), jump

    def two_valued(self, on_a, on_b, at_jump) -> np.ndarray:
        A, B, J = self.half_arcs()
        out = np.empty(self.N)
        out[A], out[B], out[J] = on_a, on_b, at_jump
        return out


@dataclass(frozen=True)
class ComplexField:
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=complex).reshape(-1)
        if v.size != self.grid.N:
            raise ValueError("field length does not match the grid")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_spectrum(cls, grid: TorusGrid, spectrum) -> ComplexField:
        s = np.asarray(spectrum, dtype=complex)
        return cls(grid, np.fft.ifft(np.fft.ifftshift(s)) * grid.N)

    @property
    def spectrum(self) -> np.ndarray:
        """Fourier coefficients ``f^(k) = mean(f z^-k)`` for ``k = -N/2 .. N/2-1``."""
        return np.fft.fftshift(np.fft.fft(self.values)) / self.grid.N

    def mean(self) -> complex:
        return complex(self.values.mean())

    def l2_norm(self) -> float:
        return float(np.sqrt(np.mean(np.abs(self.values) ** 2)))


def analytic_project(f: ComplexField) -> ComplexField:
    """Keep frequencies ``k >= 0``; ``k < 0`` (including ``-N/2``) are zeroed."""
    s = f.spectrum.copy()
    s[f.grid.frequencies < 0] = 0
    return ComplexField.from_spectrum(f.grid, s)


def conjugate_function(grid: TorusGrid, u) -> np.ndarray:
    """Discrete conjugate function of a real field: multiplier ``-i sign(k)``, Nyquist zeroed."""
    u = np.asarray(u, dtype=float)
    mult = -1j * np.sign(grid.frequencies)
    mult[0] = 0  # Nyquist bin k = -N/2
    s = ComplexField(grid, u).spectrum * mult
    return ComplexField.from_spectrum(grid, s).values.real


def _check_modulus(modulus):
    m = np.asarray(modulus, dtype=float)
    if not np.all(np.isfinite(m)) or np.any(m <= 0):
        raise ValueError("modulus must be finite and strictly positive")
    return m


def geometric_mean(modulus) -> float:
    """``exp(mean(log modulus))``."""
    m = _check_modulus(modulus)
    return float(np.exp(np.log(m).mean()))


def outer_from_modulus(grid: TorusGrid, modulus) -> ComplexField:
    """The discrete outer function ``exp(u + i H u)``, ``u = log modulus``."""
    m = _check_modulus(modulus)
    if m.size != grid.N:
        raise ValueError("modulus length does not match the grid")
    if m.min() / m.max() < ILL_CONDITIONED:
        raise ValueError("modulus min/max ratio below 1e-6: log is ill-conditioned")
    u = np.log(m)
    return ComplexField(grid, np.exp(u + 1j * conjugate_function(grid, u)))


@dataclass(frozen=True)
class AumdBaseRatio:
    grid_value: float
    two_atom_value: float


def aumd_base_ratio(p, q, u, v, w, t, N: int = 256) -> AumdBaseRatio:
    """Analytic base ratio on ``l_p^2(l_q^2)`` from the swap construction.

    ``a = u 1_A + v 1_B``, ``c = v 1_A + u 1_B``, ``b = w 1_A + t 1_B``,
    ``d = t 1_A + w 1_B`` on contiguous half-arcs; ``a`` and ``c`` are
    replaced by their outer versions.  The grid value is

        int || (|E a|, b, |E c|, d) ||  /  sup_z || (a, b, c, d)(z) ||.

    At the two jump points ``a, c`` take the geometric midpoint ``sqrt(uv)``
    and ``b, d`` the arithmetic midpoint, the usual Fourier convention for
    ``log |a|`` and ``b``; neither raises the sup.
    """
    p, q = parse_exponent(p), parse_exponent(q)
    if u <= 0 or v <= 0:
        raise ValueError("u and v must be positive")
    if w < 0 or t < 0:
        raise ValueError("w and t must be nonnegative")
    grid = TorusGrid(N)
    g, h = np.sqrt(u * v), 0.5 * (w + t)
    a = outer_from_modulus(grid, grid.two_valued(u, v, g))
    c = outer_from_modulus(grid, grid.two_valued(v, u, g))
    b = grid.two_valued(w, t, h)
    d = grid.two_valued(t, w, h)
    chain = build_E_n(p, q, 1, "counting")
    # coordinates (i, j) row-major: a = (0,0), b = (0,1), c = (1,0), d = (1,1)
    top = np.column_stack([np.full(N, abs(a.mean())), b, np.full(N, abs(c.mean())), d])
    bottom = np.column_stack([np.abs(a.values), b, np.abs(c.values), d])
    grid_value = float(grid.weights @ norms(chain, top) / norms(chain, bottom).max())
    return AumdBaseRatio(grid_value, kappa_ratio(p, q, (u, v), (w, t)))
