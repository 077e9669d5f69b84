"""Hot numeric kernels, each with a numba loop version and a numpy version.

The public functions dispatch on :data:`BACKEND`, which defaults to numba
when available (see :mod:`umdlpq._accel`).  Chains are passed to the
kernels as four flat arrays ``(sizes, exps, weights, offsets)``: layer ``i``
has ``sizes[i]`` atoms with weights ``weights[offsets[i]:offsets[i+1]]`` and
exponent ``exps[i]`` (``inf`` allowed).  Layer 0 is outermost.
"""

from __future__ import annotations

import contextlib

import numpy as np

from ._accel import DEFAULT_BACKEND, HAVE_NUMBA, njit

BACKEND = DEFAULT_BACKEND
_CHUNK = 1 << 15


def set_backend(name: str) -> None:
    global BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable or disabled")
    BACKEND = name


@contextlib.contextmanager
def backend(name: str):
    old = BACKEND
    set_backend(name)
    try:
        yield
    finally:
        set_backend(old)


# ---------------------------------------------------------------------------
# iterated mixed norm of a batch of vectors


@njit(cache=True)
def _pow(x, p):
    # libm pow is the hot spot; small integer exponents use multiplication
    if p == 2.0:
        return x * x
    if p == 1.0:
        return x
    if p <= 16.0 and p == np.floor(p):
        n = int(p)
        r = 1.0
        while n:
            if n & 1:
                r *= x
            x *= x
            n >>= 1
        return r
    return x**p


@njit(cache=True)
def _root(x, p):
    if p == 2.0:
        return np.sqrt(x)
    if p == 1.0:
        return x
    return x ** (1.0 / p)


@njit(cache=True)
def _fold_norm(vec, buf, sizes, exps, weights, offsets):
    # vec holds |x|; buf is scratch of the same length, folded in place
    L = vec.shape[0]
    for j in range(L):
        buf[j] = vec[j]
    for i in range(sizes.shape[0] - 1, -1, -1):
        b = sizes[i]
        p = exps[i]
        off = offsets[i]
        G = L // b
        for g in range(G):
            base = g * b
            mx = 0.0
            for j in range(b):
                if buf[base + j] > mx:
                    mx = buf[base + j]
            if mx == 0.0 or np.isinf(p):
                buf[g] = mx
            else:
                acc = 0.0
                for j in range(b):
                    acc += weights[off + j] * _pow(buf[base + j] / mx, p)
                buf[g] = mx * _root(acc, p)
        L = G
    return buf[0]


@njit(cache=True)
def _chain_norms_numba(X, sizes, exps, weights, offsets):
    B, D = X.shape
    out = np.empty(B)
    vec = np.empty(D)
    buf = np.empty(D)
    for r in range(B):
        for d in range(D):
            vec[d] = abs(X[r, d])
        out[r] = _fold_norm(vec, buf, sizes, exps, weights, offsets)
    return out


def _chain_norms_numpy(X, sizes, exps, weights, offsets):
    B = X.shape[0]
    Y = np.abs(X).reshape((B,) + tuple(int(s) for s in sizes))
    for i in range(len(sizes) - 1, -1, -1):
        w = weights[offsets[i] : offsets[i + 1]]
        p = exps[i]
        mx = Y.max(axis=-1)
        if np.isinf(p):
            Y = mx
            continue
        safe = np.where(mx > 0, mx, 1.0)
        Y = mx * np.sum(w * (Y / safe[..., None]) ** p, axis=-1) ** (1.0 / p)
    return Y.reshape(B)


def chain_norms(X, args) -> np.ndarray:
    """Mixed norm of every row of ``X`` (shape ``(B, D)``)."""
    X = np.asarray(X)
    if X.ndim != 2:
        raise ValueError("expected a 2-d batch")
    if BACKEND == "numba" and not np.iscomplexobj(X):
        return _chain_norms_numba(np.ascontiguousarray(X, dtype=np.float64), *args)
    return _chain_norms_numpy(X, *args)


# ---------------------------------------------------------------------------
# sum_a w_a || sum_k c_{pk} F_k(a) ||^s for a batch of coefficient rows


@njit(cache=True)
def _combo_powers_numba(coeffs, fields, atom_w, s, sizes, exps, weights, offsets):
    P, K = coeffs.shape
    A = fields.shape[1]
    D = fields.shape[2]
    out = np.empty(P)
    vec = np.empty(D)
    buf = np.empty(D)
    for pi in range(P):
        acc = 0.0
        for a in range(A):
            for d in range(D):
                v = 0.0
                for k in range(K):
                    v += coeffs[pi, k] * fields[k, a, d]
                vec[d] = abs(v)
            acc += atom_w[a] * _pow(_fold_norm(vec, buf, sizes, exps, weights, offsets), s)
        out[pi] = acc
    return out


def _combo_powers_numpy(coeffs, fields, atom_w, s, sizes, exps, weights, offsets):
    P = coeffs.shape[0]
    K, A, D = fields.shape
    out = np.empty(P)
    step = max(1, _CHUNK // max(1, A))
    flat = fields.reshape(K, A * D)
    for lo in range(0, P, step):
        c = coeffs[lo : lo + step]
        S = (c @ flat).reshape(-1, D)
        nrm = _chain_norms_numpy(S, sizes, exps, weights, offsets).reshape(c.shape[0], A)
        out[lo : lo + step] = (nrm**s) @ atom_w
    return out


def combo_powers(coeffs, fields, atom_w, s, args) -> np.ndarray:
    """For each row ``c`` of ``coeffs``: sum over atoms of ``w * ||sum_k c_k F_k||^s``.

    ``fields`` has shape ``(K, A, D)``; the result has one entry per row.
    """
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    fields = np.ascontiguousarray(fields, dtype=np.float64)
    atom_w = np.ascontiguousarray(atom_w, dtype=np.float64)
    if BACKEND == "numba":
        return _combo_powers_numba(coeffs, fields, atom_w, float(s), *args)
    return _combo_powers_numpy(coeffs, fields, atom_w, float(s), *args)


def sign_matrix(n: int) -> np.ndarray:
    """All 2**n sign vectors; row r has sign -1 at bit positions set in r (MSB first)."""
    r = np.arange(2**n)[:, None]
    bits = (r >> np.arange(n - 1, -1, -1)[None, :]) & 1
    return 1.0 - 2.0 * bits


# ---------------------------------------------------------------------------
# streaming evaluation of an amplified witness
#
# Product atom index: outer atom slowest, then copies 1..N1 (last fastest).
# In E(F) the block at outer coordinate outer_basis[k] is theta_k(w') times
# the inner field at w_k, so its F-norm is |theta_k(w')| * inner_norm[w_k];
# the adapted field uses E theta_k(w') and the inner adapted norms.  Only the
# outer chain is folded per product atom.


@njit(cache=True)
def _stream_numba(outer_w, theta, etheta, outer_basis, inner_w, inner_norm, inner_enorm,
                  dim_outer, sizes, exps, weights, offsets, chunk):
    n_out = outer_w.shape[0]
    n0 = inner_w.shape[0]
    N1 = theta.shape[0]
    total = n_out * n0**N1
    n_chunks = (total + chunk - 1) // chunk
    partial = np.zeros(n_chunks)
    den = 0.0
    digits = np.empty(N1, dtype=np.int64)
    y = np.zeros(dim_outer)
    yt = np.zeros(dim_outer)
    buf = np.empty(dim_outer)
    for a in range(total):
        r = a
        for l in range(N1 - 1, -1, -1):
            digits[l] = r % n0
            r //= n0
        wo = r
        wt = outer_w[wo]
        for l in range(N1):
            wt *= inner_w[digits[l]]
        for k in range(N1):
            y[outer_basis[k]] = abs(theta[k, wo]) * inner_norm[digits[k]]
            yt[outer_basis[k]] = abs(etheta[k, wo]) * inner_enorm[digits[k]]
        ny = _fold_norm(y, buf, sizes, exps, weights, offsets)
        if ny > den:
            den = ny
        partial[a // chunk] += wt * _fold_norm(yt, buf, sizes, exps, weights, offsets)
    return partial, den


def _stream_numpy(outer_w, theta, etheta, outer_basis, inner_w, inner_norm, inner_enorm,
                  dim_outer, sizes, exps, weights, offsets, chunk):
    n_out = outer_w.shape[0]
    n0 = inner_w.shape[0]
    N1 = theta.shape[0]
    total = n_out * n0**N1
    radix = n0 ** np.arange(N1 - 1, -1, -1)
    partial = []
    den = 0.0
    for lo in range(0, total, chunk):
        a = np.arange(lo, min(lo + chunk, total))
        wo = a // n0**N1
        digits = (a[:, None] // radix[None, :]) % n0  # (c, N1)
        wt = outer_w[wo] * np.prod(inner_w[digits], axis=1)
        Y = np.zeros((a.size, dim_outer))
        Yt = np.zeros((a.size, dim_outer))
        Y[:, outer_basis] = np.abs(theta[:, wo].T) * inner_norm[digits]
        Yt[:, outer_basis] = np.abs(etheta[:, wo].T) * inner_enorm[digits]
        den = max(den, float(_chain_norms_numpy(Y, sizes, exps, weights, offsets).max()))
        partial.append(wt @ _chain_norms_numpy(Yt, sizes, exps, weights, offsets))
    return np.asarray(partial), den


def stream_amplified(outer_w, theta, etheta, outer_basis, inner_w, inner_norm, inner_enorm,
                     outer_args, chunk: int = 1 << 14):
    """Return ``(numerator, denominator)`` of an amplified witness ratio.

    ``inner_norm[w]`` / ``inner_enorm[w]`` are the F-norms of the inner
    field and of its adapted average at inner atom ``w``; ``outer_args`` are
    the kernel arrays of the outer chain E.
    """
    dim_outer = int(np.prod(outer_args[0])) if len(outer_args[0]) else 1
    arrs = [np.ascontiguousarray(a, dtype=np.float64)
            for a in (outer_w, theta, etheta, inner_w, inner_norm, inner_enorm)]
    ob = np.ascontiguousarray(outer_basis, dtype=np.int64)
    fn = _stream_numba if BACKEND == "numba" else _stream_numpy
    partial, den = fn(arrs[0], arrs[1], arrs[2], ob, arrs[3], arrs[4], arrs[5],
                      dim_outer, *outer_args, int(chunk))
    # pairwise summation over chunk partials
    return float(np.sum(partial)), float(den)


# ---------------------------------------------------------------------------
# closed-form two-atom ratios on a (f1, g1, g2) grid with f2 = 1
#
# kind 0: ||(E f, g)|| / ||(f, g)||      kind 1: same with sqrt(f1 f2) for E f
# norm of (a, b) in L_p(mu; l_q^2), mu uniform on two atoms.


# The ratio is ((A_j + B_l) / (C_j + D_l))^(1/p) with the four p-th powers
# depending on one grid axis each, so they are hoisted out of the 3-d loop.


@njit(cache=True)
def _lq2(x, y, q):
    if np.isinf(q):
        return max(x, y)
    return _root(_pow(x, q) + _pow(y, q), q)


@njit(cache=True)
def _grid_numba(kind, p, q, f1s, g1s, g2s):
    n1, n2 = g1s.shape[0], g2s.shape[0]
    out = np.empty((f1s.shape[0], n1, n2))
    A = np.empty(n1)
    C = np.empty(n1)
    B = np.empty(n2)
    D = np.empty(n2)
    pinf = np.isinf(p)
    for l in range(n2):
        D[l] = _lq2(1.0, g2s[l], q)
        if not pinf:
            D[l] = _pow(D[l], p)
    for i in range(f1s.shape[0]):
        f1 = f1s[i]
        m = 0.5 * (f1 + 1.0) if kind == 0 else np.sqrt(f1)
        for j in range(n1):
            A[j] = _lq2(m, g1s[j], q)
            C[j] = _lq2(f1, g1s[j], q)
            if not pinf:
                A[j] = _pow(A[j], p)
                C[j] = _pow(C[j], p)
        for l in range(n2):
            B[l] = _lq2(m, g2s[l], q)
            if not pinf:
                B[l] = _pow(B[l], p)
        for j in range(n1):
            for l in range(n2):
                if pinf:
                    out[i, j, l] = max(A[j], B[l]) / max(C[j], D[l])
                else:
                    out[i, j, l] = _root((A[j] + B[l]) / (C[j] + D[l]), p)
    return out


def _grid_numpy(kind, p, q, f1s, g1s, g2s):
    def lq2(x, y):
        return np.maximum(x, y) if np.isinf(q) else (x**q + y**q) ** (1.0 / q)

    out = np.empty((f1s.size, g1s.size, g2s.size))
    g1 = g1s[:, None]
    g2 = g2s[None, :]
    for i, f1 in enumerate(f1s):
        m = 0.5 * (f1 + 1.0) if kind == 0 else np.sqrt(f1)
        a, b, c, d = lq2(m, g1), lq2(m, g2), lq2(f1, g1), lq2(1.0, g2)
        if np.isinf(p):
            out[i] = np.maximum(a, b) / np.maximum(c, d)
        else:
            out[i] = ((a**p + b**p) / (c**p + d**p)) ** (1.0 / p)
    return out


def grid_ratios(kind: int, p: float, q: float, f1s, g1s, g2s) -> np.ndarray:
    f1s, g1s, g2s = (np.ascontiguousarray(a, dtype=np.float64) for a in (f1s, g1s, g2s))
    if BACKEND == "numba":
        return _grid_numba(int(kind), float(p), float(q), f1s, g1s, g2s)
    return _grid_numpy(int(kind), float(p), float(q), f1s, g1s, g2s)
