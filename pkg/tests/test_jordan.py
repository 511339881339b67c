import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blocktri import chain_via_derivatives, chain_via_powers, generate_sequence, jordan_analysis, matvec
from blocktri.generators import defective_instance, nilpotent_instance, random_instance
from blocktri.jordan import (PreconditionError, UnsupportedConfiguration, chains_agree, generalized_kernel,
                             power_residuals, root_polynomial_chains)
from blocktri.spectral import eigen_bases, compute_spectrum


def structure(report):
    return {round(e.eigenvalue.real, 6): sorted((c.length for c in e.chains), reverse=True)
            for e in report.entries}


def expected_structure(a):
    # eigenvalues appearing only in size-1 blocks are not deficient and produce no entry
    return {round(j["lambda"][0], 6): j["sizes"] for j in a.meta["jordan"] if max(j["sizes"]) > 1}


class TestChainViaDerivatives:
    def test_nilpotent_2x2(self, nilpotent2):
        ch = chain_via_derivatives(generate_sequence(nilpotent2), 0.0, [1.0], 2)
        assert ch.length == 2
        assert np.allclose(ch.vectors[:, 0], [1, 0])
        assert np.allclose(ch.vectors[:, 1], [0, 1])
        assert np.allclose(matvec(nilpotent2, ch.vectors[:, 1]), ch.vectors[:, 0])

    def test_diagonalizable_gives_length_one(self, swap2):
        ch = chain_via_derivatives(generate_sequence(swap2), 1.0, [1.0])
        assert ch.length == 1

    @pytest.mark.parametrize("u", [[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]])
    def test_block_nilpotent(self, u):
        a = nilpotent_instance(2, 2)
        ch = chain_via_derivatives(generate_sequence(a), 0.0, u)
        assert ch.length == 2
        assert max(ch.residuals) <= 1e-10

    def test_seed_outside_kernel(self, swap2):
        with pytest.raises(PreconditionError):
            chain_via_derivatives(generate_sequence(swap2), 0.5, [1.0])

    def test_r_max_caps_length(self):
        a = nilpotent_instance(1, 4)
        assert chain_via_derivatives(generate_sequence(a), 0.0, [1.0], r_max=2).length == 2

    def test_r_max_must_be_positive(self, nilpotent2):
        with pytest.raises(ValueError):
            chain_via_derivatives(generate_sequence(nilpotent2), 0.0, [1.0], 0)


class TestChainViaPowers:
    def test_nilpotent_filtered_candidate(self, nilpotent2):
        cand, _ = chain_via_powers(nilpotent2, 0.0, 1, previous=[1.0, 0.0])
        assert cand.shape[1] == 1
        assert np.allclose(cand[:, 0], [0, 1])

    def test_nilpotent_kernel_of_square_is_everything(self, nilpotent2):
        basis, _ = generalized_kernel(nilpotent2, 0.0, 1)
        assert basis.shape[1] == 2

    def test_nilpotent_new_direction(self, nilpotent2):
        cand, _ = chain_via_powers(nilpotent2, 0.0, 1)
        assert cand.shape[1] == 1
        assert np.allclose(np.abs(cand[:, 0]), [0, 1])

    def test_diagonalizable_has_no_new_vector(self, swap2):
        basis, _ = generalized_kernel(swap2, 1.0, 1)
        assert basis.shape[1] == 1
        cand, _ = chain_via_powers(swap2, 1.0, 1)
        assert cand.shape[1] == 0

    def test_structured_path_used_when_divisible(self):
        a = nilpotent_instance(1, 4)
        _, path = generalized_kernel(a, 0.0, 1, structured=True)
        assert path == "structured"

    def test_unsupported_without_dense(self):
        a = nilpotent_instance(1, 3)
        with pytest.raises(UnsupportedConfiguration):
            generalized_kernel(a, 0.0, 1, structured=True, dense=False)

    def test_negative_r(self, swap2):
        with pytest.raises(ValueError):
            chain_via_powers(swap2, 1.0, -1)


class TestJordanAnalysis:
    def test_nilpotent_one_chain_of_two(self, nilpotent2):
        rep = jordan_analysis(nilpotent2, powers=True)
        assert rep.defective
        (e,) = rep.entries
        assert [c.length for c in e.chains] == [2]
        assert e.single_seed_lengths == (2,)
        assert all(ok for ok, _, _ in e.agreement)

    def test_diagonalizable_is_empty(self, swap2):
        rep = jordan_analysis(swap2)
        assert not rep.defective and rep.entries == ()
        assert rep.spans()

    @pytest.mark.parametrize("k,l", [(1, 3), (2, 2), (3, 2), (2, 4)])
    def test_canonical_nilpotent(self, k, l):
        a = nilpotent_instance(k, l)
        rep = jordan_analysis(a, powers=True)
        assert structure(rep) == {0.0: [l] * k}
        assert rep.spans()
        for e in rep.entries:
            for c in e.chains:
                assert max(c.residuals) <= 1e-8
                assert max(power_residuals(a, e.eigenvalue, c.vectors)) <= 1e-8

    @pytest.mark.parametrize("k,seed", [(1, s) for s in range(3)] + [(2, s) for s in range(3)])
    def test_defective_by_construction(self, k, seed):
        a = defective_instance(k, 4, seed)
        rep = jordan_analysis(a, powers=True)
        assert structure(rep) == expected_structure(a)
        assert rep.spans()
        for e in rep.entries:
            assert e.complete
            for c, (ok, _, dev) in zip(e.chains, e.agreement):
                assert max(c.residuals) <= 1e-8
                assert max(power_residuals(a, e.eigenvalue, c.vectors)) <= 1e-8
                assert ok, dev

    def test_dense_power_path_agrees(self):
        a = defective_instance(2, 4, seed=7)
        rep = jordan_analysis(a)
        for e in rep.entries:
            for c in e.chains:
                ok, paths, _ = chains_agree(a, c, structured=False)
                assert ok and set(paths) == {"dense"}

    def test_report_dict(self, nilpotent2):
        d = jordan_analysis(nilpotent2).to_dict()
        assert d["defective"]
        assert d["defect"] == [{"lambda": [0.0, 0.0], "defect": 1}]
        assert d["eigenvalues"][0]["chains"][0]["length"] == 2

    def test_root_polynomial_chain_count(self):
        # two blocks of size 2 at the same eigenvalue: both seeds start a chain of length 2
        a = defective_instance(2, 2, layouts=[[0.5, 0.5], [0.5, 0.5]])
        seq = generate_sequence(a)
        chains = root_polynomial_chains(seq, 0.5, 4)
        assert sorted(c.length for c in chains) == [2, 2]

    def test_near_confluent_blocks(self):
        # blocks at 1.141 and 1.143 make P_L(lam) small in every direction; only
        # the true eigenvector may seed a chain
        a = defective_instance(1, 4, layouts=[[1.143, 1.141, 1.141, 1.143]])
        rep = jordan_analysis(a, powers=True)
        assert structure(rep) == {1.141: [2], 1.143: [2]}
        for e in rep.entries:
            assert max(max(c.residuals) for c in e.chains) <= 1e-8
        # the Jordan basis is genuinely ill-conditioned (relative sigma_min ~ 3e-9)
        assert rep.spans(tol=1e-10)

    def test_generator_separates_values(self):
        vals = [j["lambda"][0] for j in defective_instance(2, 4, seed=3).meta["jordan"]]
        assert np.diff(sorted(vals)).min() >= 0.1

    def test_mixed_block_sizes(self):
        a = defective_instance(2, 3, seed=1, layouts=[[1.0, 1.0, 1.0], [-1.0, -1.0, 0.25]])
        rep = jordan_analysis(a, powers=True)
        assert structure(rep) == {-1.0: [2], 1.0: [3]}
        assert rep.spans()


@settings(max_examples=15, deadline=None)
@given(k=st.integers(1, 2), l=st.integers(2, 4), seed=st.integers(0, 2**31))
def test_defective_property(k, l, seed):
    a = defective_instance(k, l, seed)
    rep = jordan_analysis(a)
    assert structure(rep) == expected_structure(a)
    assert rep.spans()
    for e in rep.entries:
        for c in e.chains:
            assert max(c.residuals) <= 1e-8


@settings(max_examples=15, deadline=None)
@given(k=st.integers(1, 3), l=st.integers(2, 4), seed=st.integers(0, 2**31))
def test_single_seed_chain_is_verified(k, l, seed):
    # random instances are diagonalizable; every kernel vector gives a verified chain of length 1
    a = random_instance(k, l, seed)
    seq = generate_sequence(a)
    sp = compute_spectrum(seq)
    for lam, h in zip(sp.eigenvalues, eigen_bases(seq, sp)):
        for u in h.basis.T:
            ch = chain_via_derivatives(seq, lam, u)
            assert ch.length == 1
            assert ch.residuals[0] <= 1e-8
