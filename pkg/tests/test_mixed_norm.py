import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from umdlpq import kernels
from umdlpq._accel import HAVE_NUMBA
from umdlpq.measure import FiniteProbSpace
from umdlpq.mixed_norm import (
    MixedNormChain,
    build_E_n,
    dual_exponent,
    format_exponent,
    norm,
    normalization_factor,
    norms,
    parse_exponent,
    reduce_monotone_runs,
)

EXPS = [1.0, 1.5, 2.0, 3.0, 4.0, math.inf]


def random_chain(rng, depth=None, counting=None):
    depth = rng.integers(0, 4) if depth is None else depth
    layers = []
    for _ in range(depth):
        n = int(rng.integers(1, 4))
        p = EXPS[rng.integers(len(EXPS))]
        c = rng.random() < 0.5 if counting is None else counting
        if c:
            s = FiniteProbSpace.counting_measure(n)
        else:
            w = rng.random(n) + 0.1
            s = FiniteProbSpace(w / w.sum())
        layers.append((p, s))
    return MixedNormChain(tuple(layers))


def test_exponents():
    assert parse_exponent("inf") == math.inf
    assert parse_exponent("2.5") == 2.5
    assert format_exponent(math.inf) == "inf"
    assert dual_exponent(2) == 2 and dual_exponent(1) == math.inf and dual_exponent(math.inf) == 1
    assert dual_exponent(4) == pytest.approx(4 / 3)
    for bad in ("0.5", "nan", "x", -1):
        with pytest.raises(ValueError):
            parse_exponent(bad)


def test_norm_examples():
    assert norm(MixedNormChain(()), [-3.0]) == 3.0
    ell2 = MixedNormChain(((2, FiniteProbSpace.counting_measure(3)),))
    assert norm(ell2, [1, 2, 2]) == pytest.approx(3.0, abs=1e-15)
    # the two-atom witness identity with a = (1, 0), b = 0
    E1 = build_E_n(2, 2, 1)
    f_plus = np.zeros(4)
    f_plus[E1.flat_index((0, 0))] = 1.0  # a(+1) e_1 (x) e_1
    f_minus = np.zeros(4)
    f_minus[E1.flat_index((1, 0))] = 1.0  # a(+1) e_2 (x) e_1 at eps = -1
    assert norm(E1, f_plus) == norm(E1, f_minus) == 1.0
    Lpmu = MixedNormChain(((2, FiniteProbSpace.uniform(2)), (2, FiniteProbSpace.counting_measure(2))))
    assert math.sqrt(2) * norm(Lpmu, [1, 0, 0, 0]) == pytest.approx(1.0, abs=1e-15)


def test_norm_rejects_bad_input():
    ch = build_E_n(2, 4, 1)
    with pytest.raises(ValueError):
        norm(ch, np.ones(3))
    with pytest.raises(ValueError):
        norm(ch, [1, np.nan, 0, 0])


def test_build_E_n():
    assert build_E_n(2, 4, 0).dim == 1
    E1 = build_E_n(2, 4, 1)
    assert len(E1.layers) == 2 and E1.dim == 4 and E1.exponents == (2, 4)
    E2 = build_E_n(1, 1, 2)
    assert E2.dim == 16
    assert norm(E2, np.ones(16)) == pytest.approx(16.0)
    assert build_E_n(2, 4, 1, "probability").layers[0][1] == FiniteProbSpace.uniform(2)
    with pytest.raises(ValueError):
        build_E_n(2, 4, 1, "other")


def test_index_roundtrip_and_compose():
    ch = build_E_n(2, 3, 2)
    for flat in range(ch.dim):
        assert ch.flat_index(ch.multi_index(flat)) == flat
    assert ch.flat_index((1, 0, 0, 0)) == 8  # first factor slowest
    assert build_E_n(2, 3, 1).compose(build_E_n(2, 3, 1)) == ch


@given(st.integers(0, 100_000))
def test_matches_recursive_oracle(seed):
    rng = np.random.default_rng(seed)
    ch = random_chain(rng)
    x = rng.standard_normal(ch.dim)
    assert norm(ch, x) == pytest.approx(oracles.chain_norm(ch, x), rel=1e-12, abs=1e-14)


@given(st.integers(0, 100_000))
def test_norm_axioms(seed):
    rng = np.random.default_rng(seed)
    ch = random_chain(rng, depth=int(rng.integers(1, 4)))
    x, y = rng.standard_normal((2, ch.dim))
    a = rng.standard_normal()
    assert norm(ch, x + y) <= norm(ch, x) + norm(ch, y) + 1e-10
    assert norm(ch, a * x) == pytest.approx(abs(a) * norm(ch, x), rel=1e-10)
    assert norm(ch, np.zeros(ch.dim)) == 0.0
    assert norm(ch, x) > 0


@given(st.integers(0, 100_000))
def test_lattice_monotone(seed):
    rng = np.random.default_rng(seed)
    ch = random_chain(rng, depth=int(rng.integers(1, 4)))
    y = rng.standard_normal(ch.dim)
    x = y * rng.random(ch.dim) * rng.choice([-1, 1], ch.dim)
    assert norm(ch, x) <= norm(ch, y) + 1e-12


@given(st.integers(0, 100_000))
def test_normalization_equivalence(seed):
    rng = np.random.default_rng(seed)
    ch = random_chain(rng, depth=int(rng.integers(1, 4)), counting=True)
    twin = ch.probability_twin()
    k = normalization_factor(ch)
    for x in rng.standard_normal((3, ch.dim)):
        assert norm(ch, x) / norm(twin, x) == pytest.approx(k, rel=1e-10)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_duality_spot_check(p):
    # single layer l_p^2: norm = max over the dual unit circle of <x, y>
    ch = MixedNormChain(((p, FiniteProbSpace.counting_measure(2)),))
    pd = dual_exponent(p)
    x = np.array([0.7, -1.3])
    t = np.linspace(0, 2 * np.pi, 20001)
    y = np.stack([np.cos(t), np.sin(t)], axis=1)
    y /= ((np.abs(y) ** pd).sum(axis=1) ** (1 / pd))[:, None]
    assert (y @ x).max() == pytest.approx(norm(ch, x), rel=1e-6)


def brute_runs(seq):
    """Keep i iff it is an endpoint or the sequence changes direction at i."""
    out = [seq[0]]
    prev_dir = 0
    for i in range(1, len(seq)):
        d = np.sign(seq[i] - seq[i - 1])
        if d != 0 and prev_dir != 0 and d != prev_dir:
            out.append(seq[i - 1])
        if d != 0:
            prev_dir = d
    out.append(seq[-1])
    return out


def test_reduce_examples():
    assert reduce_monotone_runs([2, 3, 4]) == [2, 4]
    assert reduce_monotone_runs([2]) == [2]
    assert reduce_monotone_runs([2, 2.5, 3, 4, 3, 2, 5]) == [2, 4, 2, 5]
    assert brute_runs([2, 2.5, 3, 4, 3, 2, 5]) == [2, 4, 2, 5]
    with pytest.raises(ValueError):
        reduce_monotone_runs([1, 2])
    with pytest.raises(ValueError):
        reduce_monotone_runs([2, "inf"])


@given(st.lists(st.sampled_from([1.5, 2.0, 2.5, 3.0, 4.0]), min_size=1, max_size=12))
def test_reduce_properties(seq):
    red = reduce_monotone_runs(seq)
    assert red == brute_runs(seq) if len(seq) > 2 else red == seq
    assert reduce_monotone_runs(red) == red
    it = iter(seq)
    assert all(v in it for v in red)  # order-preserving subsequence


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba backend unavailable")
@given(st.integers(0, 100_000))
def test_backend_parity_chain_norms(seed):
    rng = np.random.default_rng(seed)
    ch = random_chain(rng)
    X = rng.standard_normal((5, ch.dim)) * 10.0 ** rng.integers(-3, 4)
    with kernels.backend("numba"):
        a = norms(ch, X)
    with kernels.backend("numpy"):
        b = norms(ch, X)
    np.testing.assert_allclose(a, b, rtol=1e-13)


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba backend unavailable")
def test_backend_parity_combo_and_grid():
    rng = np.random.default_rng(7)
    ch = build_E_n(1.2, 8, 1)
    F = rng.standard_normal((4, 8, ch.dim))
    C = kernels.sign_matrix(4)
    w = np.full(8, 1 / 8)
    axis = np.linspace(0, 3, 7)
    out = {}
    for b in ("numba", "numpy"):
        with kernels.backend(b):
            out[b] = (kernels.combo_powers(C, F, w, 1.7, ch.kernel_args),
                      kernels.grid_ratios(1, 3.0, math.inf, axis, axis, axis))
    for x, y in zip(out["numba"], out["numpy"]):
        np.testing.assert_allclose(x, y, rtol=1e-13)


def test_sign_matrix():
    S = kernels.sign_matrix(3)
    assert S.shape == (8, 3)
    assert (S[0] == 1).all()
    assert {tuple(r) for r in S} == set(itertools.product((1.0, -1.0), repeat=3))


def test_complex_norm():
    ch = build_E_n(2, 2, 1)
    x = np.array([3j, 0, 0, 4])
    assert norm(ch, x) == pytest.approx(5.0)
