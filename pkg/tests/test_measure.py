import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from umdlpq.measure import (
    Filtration,
    FiniteProbSpace,
    Partition,
    conditional_expectation,
    dyadic_filtration,
    product,
    product_partition,
    tensor_filtration,
)


def test_space_validation():
    with pytest.raises(ValueError):
        FiniteProbSpace([0.5, 0.6])
    with pytest.raises(ValueError):
        FiniteProbSpace([1.0, 0.0])
    with pytest.raises(ValueError):
        FiniteProbSpace([1.0, 2.0], counting=True)
    assert FiniteProbSpace.counting_measure(3).n_atoms == 3
    assert FiniteProbSpace.counting_measure(3).normalized() == FiniteProbSpace.uniform(3)


def test_product_examples():
    u = FiniteProbSpace.uniform(2)
    assert product([u]) == u
    np.testing.assert_allclose(product([u, u]).weights, [0.25] * 4)
    a = FiniteProbSpace([0.3, 0.7])
    np.testing.assert_allclose(product([a, u]).weights, [0.15, 0.15, 0.35, 0.35], atol=1e-15)
    with pytest.raises(ValueError):
        product([])


def test_partition_canonical_and_blocks():
    p = Partition([5, 5, 2, 2])
    assert p.labels.tolist() == [0, 0, 1, 1]
    assert p.blocks == [[0, 1], [2, 3]]
    assert Partition.from_blocks([[2, 3], [0, 1]]) == p
    with pytest.raises(ValueError):
        Partition.from_blocks([[0, 1], [1, 2]])
    with pytest.raises(ValueError):
        Partition.from_blocks([[0], []])


def test_filtration_rejects_non_refining():
    with pytest.raises(ValueError):
        Filtration((Partition.finest(2), Partition.trivial(2)))
    with pytest.raises(ValueError):
        Filtration((Partition.trivial(2), Partition.trivial(3)))


def test_conditional_expectation_examples():
    u = FiniteProbSpace.uniform(2)
    f = np.array([3.0, 5.0])
    np.testing.assert_array_equal(conditional_expectation(f, u, Partition.finest(2)), f)
    np.testing.assert_allclose(conditional_expectation(f, u, Partition.trivial(2)), [4, 4])
    s = FiniteProbSpace([0.25, 0.75])
    np.testing.assert_allclose(conditional_expectation([4.0, 0.0], s, Partition.trivial(2)), [1, 1])
    with pytest.raises(ValueError):
        conditional_expectation(np.ones(3), u, Partition.trivial(2))


def test_conditional_expectation_vector_and_complex():
    u = FiniteProbSpace.uniform(4)
    f = np.arange(8.0).reshape(4, 2) + 1j
    out = conditional_expectation(f, u, Partition([0, 0, 1, 1]))
    np.testing.assert_allclose(out[0], [1 + 1j, 2 + 1j])
    np.testing.assert_allclose(out[3], [5 + 1j, 6 + 1j])


def test_dyadic_filtration():
    F = dyadic_filtration(3)
    assert len(F) == 4
    assert F[0].is_trivial() and F[3].is_finest()
    assert F[1].blocks == [[0, 1, 2, 3], [4, 5, 6, 7]]


def test_tensor_filtration_small():
    A = Filtration((Partition.trivial(2), Partition.finest(2)))
    B = Filtration((Partition.trivial(2), Partition.finest(2)))
    one = tensor_filtration(A, B, 1)
    # copies = 1: levels (1, 0), (1, 1) on 2 x 2 atoms
    assert len(one) == 2 and one.n_atoms == 4
    assert one[0].is_trivial()
    assert one[1].blocks == [[0, 2], [1, 3]]
    two = tensor_filtration(A, B, 2)
    assert len(two) == 4 and two.n_atoms == 8
    assert two[-1].is_finest()
    # level (2, 0): outer finest, copy 1 finest, copy 2 trivial -> 4 blocks of 2
    assert two[2].n_blocks == 4
    assert len(tensor_filtration(A, B, 0)) == 0
    with pytest.raises(ValueError):
        tensor_filtration(A, Filtration((Partition.finest(2),)), 1)
    with pytest.raises(ValueError):
        tensor_filtration(A, B, 3)


def _random_chain(rng, n, levels):
    """Random refining chain of partitions of range(n)."""
    labs = [np.zeros(n, dtype=int)]
    for _ in range(levels - 1):
        split = rng.integers(0, 2, n)
        labs.append(labs[-1] * 2 + split)
    return Filtration(tuple(Partition(lab) for lab in labs))


@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 3))
def test_tensor_filtration_refines_random(seed, n_outer_levels, copies):
    rng = np.random.default_rng(seed)
    outer = _random_chain(rng, 3, max(copies, n_outer_levels))
    inner = _random_chain(rng, 2, 2)
    filt = tensor_filtration(outer, inner, copies)  # validates refinement itself
    assert len(filt) == copies * len(inner)
    for k in range(len(filt) - 1):
        assert filt[k + 1].refines(filt[k])


def _space_and_partition(seed, n=7):
    rng = np.random.default_rng(seed)
    w = rng.random(n) + 0.05
    space = FiniteProbSpace(w / w.sum())
    fine = Partition(rng.integers(0, 4, n))
    coarse = Partition(fine.labels // 2)
    return rng, space, fine, coarse


@given(st.integers(0, 10_000))
def test_idempotent_tower_mass(seed):
    rng, space, fine, coarse = _space_and_partition(seed)
    f = rng.standard_normal(space.n_atoms)
    Ef = conditional_expectation(f, space, fine)
    np.testing.assert_allclose(conditional_expectation(Ef, space, fine), Ef, atol=1e-14)
    np.testing.assert_allclose(
        conditional_expectation(Ef, space, coarse), conditional_expectation(f, space, coarse), atol=1e-12
    )
    assert abs(space.weights @ Ef - space.weights @ f) < 1e-12


@given(st.integers(0, 10_000), st.sampled_from([1.0, 2.0, 3.7, np.inf]))
def test_contractive_in_Ls(seed, s):
    rng, space, fine, _ = _space_and_partition(seed)
    f = rng.standard_normal(space.n_atoms)
    Ef = conditional_expectation(f, space, fine)

    def ls(g):
        return np.abs(g).max() if np.isinf(s) else (space.weights @ np.abs(g) ** s) ** (1 / s)

    assert ls(Ef) <= ls(f) + 1e-12


@given(st.integers(0, 10_000))
def test_matches_loop_oracle(seed):
    rng, space, fine, _ = _space_and_partition(seed)
    f = rng.standard_normal(space.n_atoms)
    np.testing.assert_allclose(
        conditional_expectation(f, space, fine),
        oracles.cond_exp(f, space.weights.tolist(), fine.labels.tolist()),
        atol=1e-13,
    )


def test_product_partition_row_major():
    p = product_partition([Partition.finest(2), Partition.trivial(3)])
    assert p.blocks == [[0, 1, 2], [3, 4, 5]]
