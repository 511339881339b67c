import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blocktri import (BlockTridiagonalMatrix, DefectReport, EigendecompositionResult, NumericalError,
                      ScalarPolynomial, ValidationError, assemble_dense, commuting_fast_path, compute_spectrum,
                      decompose, eigenvector_matrix, find_zeros, generate_sequence, inverse_eigenvector_matrix,
                      matvec, nullspace_basis)
from blocktri.generators import commuting_basis, commuting_instance, random_instance, symmetric_instance
from blocktri.spectral import cluster_roots, eigenvectors_for, offblock_norm, p_last
from blocktri.spider import spider_matrix

from conftest import match_error


class TestFindZeros:
    def test_x2_minus_1(self):
        sp = find_zeros(ScalarPolynomial([-1.0, 0.0, 1.0]))
        assert np.allclose(sp.eigenvalues, [-1, 1])
        assert sp.multiplicities == (1, 1)

    def test_x3_minus_2x(self):
        sp = find_zeros(ScalarPolynomial([0.0, -2.0, 0.0, 1.0]))
        assert np.allclose(sp.eigenvalues, [-math.sqrt(2), 0, math.sqrt(2)])

    def test_multiple_root_is_clustered(self):
        # (x - 1)^2 (x + 2)
        sp = find_zeros(ScalarPolynomial(np.poly([1, 1, -2])[::-1]))
        assert sp.multiplicities == (1, 2)
        assert sp.eigenvalues[1] == pytest.approx(1, abs=1e-6)

    def test_sorted_by_real_then_imag(self):
        sp = find_zeros(ScalarPolynomial(np.poly([1j, -1j, 0.5, -3])[::-1]))
        z = sp.eigenvalues
        assert list(z.real) == sorted(z.real)
        assert z[1].imag < z[2].imag

    def test_constant_has_no_roots(self):
        with pytest.raises(ValueError):
            find_zeros(ScalarPolynomial([3.0]))

    def test_bad_cluster_tol(self):
        with pytest.raises(ValueError):
            find_zeros(ScalarPolynomial([-1.0, 0.0, 1.0]), cluster_tol=0.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_symmetric_instance_matches_eigvalsh(self, seed):
        a = symmetric_instance(2, 4, seed)
        sp = compute_spectrum(generate_sequence(a))
        ref = np.linalg.eigvalsh(assemble_dense(a).real)
        assert match_error(sp.expanded(), ref) <= 1e-7

    def test_cluster_roots_single_linkage(self):
        means, counts = cluster_roots(np.array([0.0, 1e-8, 2e-8, 1.0]), 1e-6)
        assert list(counts) == [3, 1]


class TestNullspace:
    def test_zero_matrix(self):
        h = nullspace_basis(np.zeros((2, 2)))
        assert h.dim == 2
        assert np.allclose(h.basis, np.eye(2))

    def test_diag_1_0(self):
        h = nullspace_basis(np.diag([1.0, 0.0]))
        assert h.dim == 1
        assert np.allclose(np.abs(h.basis[:, 0]), [0, 1])

    def test_full_rank(self, rng):
        assert nullspace_basis(rng.standard_normal((3, 3))).dim == 0

    def test_star_p1_at_zero(self):
        seq = generate_sequence(spider_matrix(3, 1))
        mat, _ = p_last(seq, 0.0)
        h = nullspace_basis(mat, 1e-8)
        assert h.dim == 1
        u = h.basis[:, 0]
        u = u * abs(u[1]) / u[1]
        assert np.allclose(u, np.array([0, 1, -1]) / math.sqrt(2))

    def test_basis_is_orthonormal(self, rng):
        m = rng.standard_normal((5, 2)) @ rng.standard_normal((2, 5))
        h = nullspace_basis(m)
        assert h.dim == 3
        assert np.allclose(h.basis.conj().T @ h.basis, np.eye(3))
        assert h.residual <= 1e-12 * np.linalg.norm(m)

    def test_scale_keeps_cancelled_matrix_rank_deficient(self):
        h = nullspace_basis(np.array([[1e-14]]), 1e-8, scale=1.0)
        assert h.dim == 1


class TestEigenvectorsFor:
    @pytest.mark.parametrize("lam,expected", [(1.0, [1, 1]), (-1.0, [1, -1])])
    def test_swap(self, swap2, lam, expected):
        seq = generate_sequence(swap2)
        h = nullspace_basis(np.array([[0.0]]), eigenvalue=lam)
        assert np.allclose(eigenvectors_for(seq, lam, h)[:, 0], expected)

    @pytest.mark.parametrize("seed", range(5))
    def test_columns_are_eigenvectors(self, seed):
        a = random_instance(2, 3, seed)
        res = eigenvector_matrix(a)
        for j, lam in enumerate(res.eigenvalues):
            v = res.V[:, j]
            assert np.linalg.norm(matvec(a, v) - lam * v) <= 1e-8 * np.linalg.norm(v)


class TestEigenvectorMatrix:
    def test_swap(self, swap2):
        res = eigenvector_matrix(swap2)
        assert isinstance(res, EigendecompositionResult)
        for lam, expected in ((1.0, [1, 1]), (-1.0, [1, -1])):
            j = int(np.argmin(np.abs(res.eigenvalues - lam)))
            v = res.V[:, j]
            assert np.allclose(v / v[0], expected)
        assert res.residual_AV <= 1e-15

    def test_nilpotent_is_defective(self, nilpotent2):
        res = eigenvector_matrix(nilpotent2)
        assert isinstance(res, DefectReport)
        assert res.deficient == ((0, 0j, 2, 1),)
        assert res.to_dict()["diagonalizable"] is False

    @pytest.mark.parametrize("seed", range(3))
    def test_symmetric_k3_l3(self, seed):
        res = eigenvector_matrix(symmetric_instance(3, 3, seed))
        assert res.residual_AV <= 1e-8

    def test_normalized_columns(self):
        res = eigenvector_matrix(random_instance(2, 3, seed=0)).normalized()
        assert np.allclose(np.linalg.norm(res.V, axis=0), 1)

    def test_to_dict_layout(self, swap2):
        d = eigenvector_matrix(swap2).to_dict()
        assert [g["multiplicity"] for g in d["eigenvalues"]] == [1, 1]
        assert len(d["eigenvalues"][0]["vectors"]) == 2

    def test_scalar_identity_block_gives_full_null_space(self):
        a = BlockTridiagonalMatrix.from_blocks(np.broadcast_to(2 * np.eye(3), (1, 3, 3)))
        res = eigenvector_matrix(a)
        assert res.spectrum.multiplicities == (3,)
        assert res.bases[0].dim == 3


class TestInverse:
    def test_swap(self, swap2):
        res = decompose(swap2, inverse=True)
        v, w = res.V, res.W
        assert np.allclose(w @ v, np.eye(2))
        # V = [[1, 1], [1, -1]] up to column order and scaling, so W is a row-scaled 1/2 [[1, 1], [1, -1]]
        for row in w:
            r = row / row[0]
            assert np.allclose(np.abs(r), [1, 1])
        assert np.allclose(np.linalg.inv(v), w)

    def test_symmetric_orthonormal(self):
        a = symmetric_instance(2, 4, seed=3)
        res = eigenvector_matrix(a).normalized(orthonormalize=True)
        w, rwv, off = inverse_eigenvector_matrix(a, res)
        assert rwv <= 1e-10
        assert np.allclose(w, res.V.conj().T, atol=1e-9)
        assert off <= 1e-8

    @pytest.mark.parametrize("seed", range(5))
    def test_random_nonsymmetric(self, seed):
        a = random_instance(2, 3, seed)
        res = decompose(a, inverse=True)
        assert res.residual_WV <= 1e-8
        assert res.offblock_W0V <= 1e-8

    def test_singular_sub_block(self):
        a = BlockTridiagonalMatrix.from_blocks([1.0, 2.0], [0.0], [1.0])
        with pytest.raises(ValidationError, match="C_0"):
            decompose(a, inverse=True)

    def test_offblock_norm(self):
        m = np.arange(9.0).reshape(3, 3)
        assert offblock_norm(m, [1, 2]) == pytest.approx(np.linalg.norm([1, 2, 3, 6]))


class TestCommutingFastPath:
    def test_scalar_blocks(self):
        k, l = 3, 4
        rng = np.random.default_rng(0)
        b, c, d = rng.standard_normal(l), rng.standard_normal(l - 1), rng.uniform(1, 2, l - 1)
        eye = np.eye(k)
        a = BlockTridiagonalMatrix.from_blocks(b[:, None, None] * eye, c[:, None, None] * eye, d[:, None, None] * eye)
        res = commuting_fast_path(a, eye)
        assert len(res.channels) == k
        scalar = BlockTridiagonalMatrix.from_blocks(b, c, d)
        ref = np.linalg.eigvals(assemble_dense(scalar))
        assert res.spectrum.multiplicities == (k,) * l
        assert match_error(res.spectrum.eigenvalues, ref) <= 1e-8

    def test_two_channels_hadamard(self):
        u = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
        rng = np.random.default_rng(1)
        l = 4
        conj = lambda vals: u @ np.diag(vals) @ u.T
        a = BlockTridiagonalMatrix.from_blocks([conj(rng.standard_normal(2)) for _ in range(l)],
                                               [conj(rng.standard_normal(2)) for _ in range(l - 1)],
                                               [conj(rng.uniform(1, 2, 2)) for _ in range(l - 1)])
        fast = commuting_fast_path(a, u)
        general = compute_spectrum(generate_sequence(a))
        assert match_error(fast.spectrum.expanded(), general.expanded()) <= 1e-8
        assert all(p.degree == l for p in fast.channels)

    def test_non_commuting(self):
        a = random_instance(2, 3, seed=0)
        with pytest.raises(ValueError, match="blocks do not commute under U"):
            commuting_fast_path(a, np.eye(2))

    @pytest.mark.parametrize("seed", range(4))
    def test_generated_instances(self, seed):
        a = commuting_instance(3, 3, seed)
        fast = commuting_fast_path(a, commuting_basis(a))
        general = compute_spectrum(generate_sequence(a))
        assert match_error(fast.spectrum.expanded(), general.expanded()) <= 1e-8


@settings(max_examples=40, deadline=None)
@given(k=st.integers(1, 3), l=st.integers(2, 5), seed=st.integers(0, 2**31), cplx=st.booleans())
def test_count_invariants(k, l, seed, cplx):
    a = random_instance(k, l, seed, complex_entries=cplx)
    seq = generate_sequence(a)
    sp = compute_spectrum(seq)
    assert sp.total == a.n
    assert sp.m >= math.ceil(a.n / k)
    assert max(sp.multiplicities) <= k
    res = eigenvector_matrix(a, seq=seq, spectrum=sp)
    for h, b in zip(res.bases, sp.multiplicities):
        assert 1 <= h.dim <= b


@settings(max_examples=30, deadline=None)
@given(k=st.integers(1, 3), l=st.integers(2, 5), seed=st.integers(0, 2**31))
def test_charpoly_matches_dense(k, l, seed):
    a = random_instance(k, l, seed)
    seq = generate_sequence(a)
    p = seq.determinant_polynomial(trim=False)
    c = np.zeros(a.n + 1, dtype=complex)
    c[:p.coeffs.size] = p.coeffs[:a.n + 1]
    c[a.n] = seq.determinant_leading()
    ours = c[::-1] / c[-1]
    ref = np.poly(np.linalg.eigvals(assemble_dense(a)))
    assert np.abs(ours - ref).max() <= 1e-7 * np.abs(ref).max()


@settings(max_examples=30, deadline=None)
@given(k=st.integers(1, 3), l=st.integers(2, 5), seed=st.integers(0, 2**31))
def test_residual_and_inverse(k, l, seed):
    a = random_instance(k, l, seed)
    res = decompose(a, inverse=True)
    tol = 1e-8 * math.sqrt(a.n)
    assert res.residual_AV <= tol
    assert res.residual_WV <= tol
    assert res.offblock_W0V <= 1e-8


def test_empty_null_space_raises():
    a = random_instance(2, 3, seed=0)
    seq = generate_sequence(a)
    sp = compute_spectrum(seq)
    shifted = type(sp)(sp.eigenvalues + 0.5, sp.multiplicities, sp.cluster_tol)
    with pytest.raises(NumericalError, match="empty null space"):
        eigenvector_matrix(a, seq=seq, spectrum=shifted)
