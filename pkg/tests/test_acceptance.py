"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python3 tests/test_acceptance.py``.
"""

import math
import os
import sys
import time

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from conftest import ACCEPTANCE, match_error  # noqa: E402

from blocktri import (DefectReport, assemble_dense, commuting_fast_path, compute_spectrum, decompose,  # noqa: E402
                      generate_sequence, jordan_analysis, validate)
from blocktri.dst import OpCounter  # noqa: E402
from blocktri.generators import (commuting_basis, commuting_instance, defective_instance,  # noqa: E402
                                 nilpotent_instance, random_instance, symmetric_instance)
from blocktri.spectral import eigen_bases  # noqa: E402
from blocktri.jordan import chain_residuals, power_residuals  # noqa: E402
from blocktri.spider import (build_plan, direct_alpha_ops, direct_expansion, expand_alpha,  # noqa: E402
                             fast_expansion, spider_determinant, spider_from_hub, spider_matrix,
                             spider_spectrum)


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def suite():
    """50 random validated instances, K in {1,2,3}, L in {2..6}, half with complex entries."""
    out = []
    for seed in range(50):
        a = random_instance(1 + seed % 3, 2 + (seed // 3) % 5, seed=1000 + seed, complex_entries=seed % 2 == 1)
        assert validate(a).passed
        out.append(a)
    return out


SUITE = suite()


def monic_relative_error(a, seq):
    p = seq.determinant_polynomial(trim=False)
    c = np.zeros(a.n + 1, dtype=complex)
    c[:p.coeffs.size] = p.coeffs[:a.n + 1]
    c[a.n] = seq.determinant_leading()
    ours = c[::-1] / c[-1]
    ref = np.poly(np.linalg.eigvals(assemble_dense(a)))
    return float(np.abs(ours - ref).max() / np.abs(ref).max())


def test_1_eigenvalue_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    for a in SUITE:
        sp = compute_spectrum(generate_sequence(a))
        worst = max(worst, match_error(sp.expanded(), np.linalg.eigvals(assemble_dense(a))))
    elapsed = time.perf_counter() - t0
    record(1, "eigenvalue equivalence", worst <= 1e-7 and elapsed < 30,
           f"{len(SUITE)} instances, max abs error {worst:.2e} (<= 1e-7), {elapsed:.2f}s (< 30s)")


def test_2_characteristic_polynomial():
    worst = max(monic_relative_error(a, generate_sequence(a)) for a in SUITE)
    record(2, "monic characteristic polynomial", worst <= 1e-7, f"max relative error {worst:.2e} (<= 1e-7)")


def test_3_eigenvector_residual():
    worst, checked = 0.0, 0
    for a in SUITE:
        res = decompose(a)
        if isinstance(res, DefectReport):
            continue
        checked += 1
        worst = max(worst, res.residual_AV / math.sqrt(a.n))
    record(3, "eigenvector residual", checked == len(SUITE) and worst <= 1e-8,
           f"{checked}/{len(SUITE)} diagonalizable, max ||AV-VL||_F/(||A||_F sqrt N) {worst:.2e} (<= 1e-8)")


def test_4_inverse():
    worst_wv = worst_off = 0.0
    checked = 0
    for a in SUITE:
        if not validate(a).sub_invertible:
            continue
        res = decompose(a, inverse=True)
        checked += 1
        worst_wv = max(worst_wv, res.residual_WV / math.sqrt(a.n))
        worst_off = max(worst_off, res.offblock_W0V)
    record(4, "inverse eigenvector matrix", checked > 0 and worst_wv <= 1e-8 and worst_off <= 1e-8,
           f"{checked} instances, max ||WV-I||_F/sqrt N {worst_wv:.2e}, max W0V off-block {worst_off:.2e} (<= 1e-8)")


def test_5_count_invariants():
    # a_m = dim ker P_L(lam_m), b_m = root multiplicity of lam_m in det P_L
    diagonalizable = list(SUITE)
    diagonalizable += [symmetric_instance(2, 4, s) for s in range(5)]
    diagonalizable += [commuting_instance(3, 3, s) for s in range(5)]
    diagonalizable += [spider_matrix(4, 5), spider_matrix(6, 3), spider_matrix(5, 4, "ring")]
    defective = [defective_instance(2, 4, s) for s in range(5)] + [nilpotent_instance(2, 3)]
    violations = 0
    for a in diagonalizable + defective:
        seq = generate_sequence(a)
        sp = compute_spectrum(seq)
        dims = [h.dim for h in eigen_bases(seq, sp)]
        violations += sp.total != a.n
        violations += max(dims) > a.k
        violations += any(d > b for d, b in zip(dims, sp.multiplicities))
        if a in diagonalizable:
            violations += sum(dims) != a.n
            violations += sp.m < math.ceil(a.n / a.k)
    record(5, "count invariants", violations == 0,
           f"{len(diagonalizable)} diagonalizable + {len(defective)} defective instances, {violations} violations")


def test_6_jordan_chains():
    instances = [nilpotent_instance(k, l) for k, l in ((1, 2), (1, 3), (1, 4), (2, 2), (2, 3), (2, 4))]
    instances += [defective_instance(1 + s % 2, 2 + s % 3, seed=s) for s in range(10)]
    worst41 = worst42 = 0.0
    chains = disagree = structure_bad = 0
    for a in instances:
        rep = jordan_analysis(a, powers=True)
        want = {round(j["lambda"][0], 6): j["sizes"] for j in a.meta["jordan"] if max(j["sizes"]) > 1}
        got = {round(e.eigenvalue.real, 6): sorted((c.length for c in e.chains), reverse=True) for e in rep.entries}
        structure_bad += got != want or not rep.spans()
        for e in rep.entries:
            for c, (ok, _, _) in zip(e.chains, e.agreement):
                chains += 1
                worst41 = max(worst41, max(chain_residuals(a, e.eigenvalue, c.vectors)))
                worst42 = max(worst42, max(power_residuals(a, e.eigenvalue, c.vectors)))
                disagree += not ok
    ok = worst41 <= 1e-8 and worst42 <= 1e-8 and disagree == 0 and structure_bad == 0
    record(6, "Jordan chains", ok,
           f"{len(instances)} instances, {chains} chains, max chain residual {worst41:.2e}, "
           f"max power residual {worst42:.2e}, {disagree} power/derivative disagreements, "
           f"{structure_bad} structure mismatches")


def test_7_commuting_fast_path():
    worst = 0.0
    bad = 0
    for s in range(10):
        k, l = 2 + s % 3, 2 + s % 4
        a = commuting_instance(k, l, seed=s)
        fast = commuting_fast_path(a, commuting_basis(a))
        general = compute_spectrum(generate_sequence(a))
        worst = max(worst, match_error(fast.spectrum.expanded(), general.expanded()))
        bad += len(fast.channels) != k or any(p.degree != l for p in fast.channels)
        bad += sorted(fast.spectrum.multiplicities) != sorted(general.multiplicities)
    record(7, "commuting fast path", worst <= 1e-8 and bad == 0,
           f"10 instances, max spectrum deviation {worst:.2e}, {bad} channel-count/degree/multiplicity mismatches")


def test_8_determinant_factorization():
    worst = 0.0
    rng = np.random.default_rng(8)
    for k in range(3, 9):
        for l in range(1, 17):
            xs = rng.uniform(-2.5, 2.5, 20) + 1j * rng.uniform(-0.5, 0.5, 20)
            ours = np.linalg.det(generate_sequence(spider_matrix(k, l)).values(xs)[-1])
            ref = spider_determinant(k, l, xs)
            worst = max(worst, float(np.max(np.abs(ours - ref) / np.abs(ref))))
    record(8, "spider determinant factorization", worst <= 1e-9,
           f"96 (K, L) pairs x 20 points, max pointwise relative error {worst:.2e} (<= 1e-9)")


def test_9_spider_spectrum_structure():
    cases = [(3, 1), (3, 10), (4, 32), (5, 100), (8, 16), (8, 64), (16, 32), (32, 16)]
    worst = 0.0
    pattern_bad = 0
    for k, l in cases:
        s = spider_spectrum(k, l)
        mult = sorted(s.spectrum.multiplicities)
        want = sorted([k - 2] * l + [1] * (2 * l)) if k > 3 else [1] * (3 * l)
        pattern_bad += mult != want
        ref = np.linalg.eigvalsh(assemble_dense(spider_matrix(k, l)).real)
        worst = max(worst, match_error(s.spectrum.expanded().real, ref))
    record(9, "spider spectrum structure", pattern_bad == 0 and worst <= 1e-7,
           f"{len(cases)} cases up to K*L=512, {pattern_bad} pattern mismatches, max dense deviation {worst:.2e}")


def test_10_fast_expansion_correctness():
    rng = np.random.default_rng(10)
    worst = 0.0
    for l in (8, 16, 32, 64):
        plan = build_plan(8, l)
        y = rng.standard_normal(8 * l)
        ref = direct_expansion(plan, y)
        worst = max(worst, float(np.linalg.norm(fast_expansion(plan, y) - ref) / np.linalg.norm(ref)))
    record(10, "fast expansion correctness", worst <= 1e-9, f"K=8, L in 8..64, max relative error {worst:.2e}")


def test_11_fast_expansion_complexity():
    ls = (15, 31, 63, 127)
    x, ops, direct = [], [], []
    for l in ls:
        plan = build_plan(8, l)
        c = OpCounter()
        expand_alpha(plan, np.ones(plan.n), c)
        x.append(plan.n * math.log2(l))
        ops.append(c.total)
        direct.append(direct_alpha_ops(8, l))
    x, ops = np.array(x), np.array(ops, dtype=float)
    r = ops / x
    # c minimizing the worst relative deviation max |r / c - 1|
    c_fit = float((r.min() + r.max()) / 2)
    dev = np.abs(r / c_fit - 1)
    per_l = ", ".join(f"{v:.2f}" for v in r)
    ratios = ", ".join(f"{o / d:.3f}" for o, d in zip(ops, direct))
    record(11, "fast expansion complexity", bool(dev.max() <= 0.25),
           f"ops/(N log2 L) = {per_l} for L = {ls}; c={c_fit:.2f}, max deviation {dev.max():.1%} (<= 25%); "
           f"fast/direct ops {ratios}")


def test_12_line_graph():
    worst = 0.0
    for l in (1, 2, 3, 5, 8, 16, 32, 64):
        s = spider_spectrum(2, l)
        dense = assemble_dense(spider_from_hub(np.array([[0.0, 1.0], [1.0, 0.0]]), l)).real
        worst = max(worst, match_error(s.spectrum.expanded().real, np.linalg.eigvalsh(dense)))
    record(12, "K=2 line graph", worst <= 1e-9, f"L in 1..64, max deviation from dense oracle {worst:.2e}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
