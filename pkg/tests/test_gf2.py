"""Tests for bit-packed GF(2) linear algebra."""

import itertools

import numpy as np
import pytest
from scipy import stats

from qmpc.errors import InvalidDimensionError, SingularMatrixError
from qmpc.gf2 import (
    BitMatrix,
    BitVec,
    GLElement,
    LinearSystem,
    apply_to_basis,
    invert,
    random_invertible,
)


def brute_force_invertible_2x2() -> set[tuple[int, int]]:
    """Oracle: enumerate invertible 2x2 matrices by determinant over all 16."""
    out = set()
    for a, b, c, d in itertools.product((0, 1), repeat=4):
        det = (a * d) ^ (b * c)
        if det == 1:
            mat = BitMatrix.from_lists([[a, b], [c, d]])
            out.add(mat.rows)
    return out


def test_gl2_enumeration_oracle():
    # |GL(2, F_2)| = (2^2 - 1)(2^2 - 2) = 6.
    assert len(brute_force_invertible_2x2()) == 6


def test_random_invertible_support_and_uniformity():
    oracle = brute_force_invertible_2x2()
    rng = np.random.default_rng(7)
    counts: dict[tuple[int, ...], int] = {}
    draws = 60_000
    for _ in range(draws):
        g = random_invertible(2, rng)
        counts[g.matrix.rows] = counts.get(g.matrix.rows, 0) + 1
    assert set(counts) == oracle
    expected = draws / 6
    # Each frequency within 3 sigma of 1/6.
    sigma = np.sqrt(draws * (1 / 6) * (5 / 6))
    for c in counts.values():
        assert abs(c - expected) <= 3 * sigma
    chi2, p = stats.chisquare(list(counts.values()))
    assert p > 1e-4


def test_hand_worked_product():
    # [[1,1],[0,1]] @ (0,1)^T = (1,1)^T.
    g = GLElement.from_matrix(BitMatrix.from_lists([[1, 1], [0, 1]]))
    out = apply_to_basis(g, BitVec.from_list([0, 1]))
    assert out.to_list() == [1, 1]


def test_apply_preserves_nonzero():
    rng = np.random.default_rng(11)
    for m in (1, 2, 3, 5, 9):
        for _ in range(50):
            g = random_invertible(m, rng)
            x = BitVec(int(rng.integers(1, 1 << m)), m)
            assert not apply_to_basis(g, x).is_zero()


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_image_of_fixed_nonzero_vector_uniform(m):
    # Over random g, g@x is uniform on the 2^m - 1 nonzero vectors.
    rng = np.random.default_rng(23)
    x = BitVec(1, m)
    draws = 4000 * (2**m - 1) // 3
    counts = np.zeros(1 << m, dtype=int)
    for _ in range(draws):
        g = random_invertible(m, rng)
        counts[apply_to_basis(g, x).bits] += 1
    assert counts[0] == 0
    if m == 1:
        assert counts[1] == draws  # single nonzero vector
    else:
        chi2, p = stats.chisquare(counts[1:])
        assert p > 1e-4


def test_invert_roundtrip_and_cached_inverse():
    rng = np.random.default_rng(3)
    for m in (1, 2, 4, 8, 13):
        g = random_invertible(m, rng)
        assert invert(g.inverse_matrix).rows == g.matrix.rows
        prod = g.matrix.mat_mul(g.inverse_matrix)
        assert prod.rows == BitMatrix.identity(m).rows
        prod2 = g.inverse_matrix.mat_mul(g.matrix)
        assert prod2.rows == BitMatrix.identity(m).rows


def test_invert_singular_raises():
    sing = BitMatrix.from_lists([[1, 1], [1, 1]])
    with pytest.raises(SingularMatrixError):
        invert(sing)
    with pytest.raises(InvalidDimensionError):
        invert(BitMatrix.from_lists([[1, 0, 1], [0, 1, 0]]))


def test_random_invertible_rejects_zero_dimension():
    with pytest.raises(InvalidDimensionError):
        random_invertible(0, np.random.default_rng(0))


def test_rank_and_transpose():
    mat = BitMatrix.from_lists([[1, 0, 1], [0, 1, 1], [1, 1, 0]])
    assert mat.rank() == 2
    assert mat.transpose().to_lists() == [[1, 0, 1], [0, 1, 1], [1, 1, 0]]
    assert BitMatrix.identity(4).rank() == 4


def test_linear_system_uniform_solution_sampling():
    # x0 + x1 = 1, x2 = 0 over 4 variables: solution set has 2^2 = 4 elements.
    rng = np.random.default_rng(5)
    sys = LinearSystem(4)
    sys.add(BitVec.from_list([1, 1, 0, 0]), 1)
    sys.add(BitVec.from_list([0, 0, 1, 0]), 0)
    counts: dict[int, int] = {}
    for _ in range(8000):
        v = sys.sample_solution(rng)
        assert (v[0] ^ v[1]) == 1 and v[2] == 0
        counts[v.bits] = counts.get(v.bits, 0) + 1
    assert len(counts) == 4
    chi2, p = stats.chisquare(list(counts.values()))
    assert p > 1e-4


def test_linear_system_inconsistency_detected():
    sys = LinearSystem(2)
    sys.add(BitVec.from_list([1, 1]), 0)
    sys.add(BitVec.from_list([1, 1]), 1)
    assert not sys.consistent
    with pytest.raises(SingularMatrixError):
        sys.sample_solution(np.random.default_rng(0))
