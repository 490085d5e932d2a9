"""Finite sections: assembly, connectivity, secular roots, full spectra."""

import numpy as np
import pytest

from spectral_forge.errors import PoleHit, RootCountMismatch
from spectral_forge.finite import (build_finite_section, cofactor_det_batch,
                                   convergence_table, factorization_crosscheck,
                                   finite_spectrum, secular_roots,
                                   secular_value, strongly_connected,
                                   tarjan_scc)
from spectral_forge.model import GroupUnionSpec, WeightSeq, union_values


def _setup(orders):
    spec = GroupUnionSpec(orders)
    return spec, WeightSeq.dyadic_single(spec.d)


def _multiset_gap(a, b):
    """Greedy matching distance between two eigenvalue multisets."""
    a = list(np.asarray(a, dtype=complex))
    b = list(np.asarray(b, dtype=complex))
    assert len(a) == len(b)
    worst = 0.0
    for z in a:
        i = int(np.argmin(np.abs(np.array(b) - z)))
        worst = max(worst, abs(b[i] - z))
        b.pop(i)
    return worst


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def test_smallest_section_is_the_swap():
    spec, w = _setup((1,))
    op = build_finite_section(spec, w, 1)
    assert np.array_equal(op.matrix, [[0.0, 1.0], [1.0, 0.0]])
    assert op.tilde_q[0] == 1.0


def test_column_sums_renormalized_and_raw():
    spec, w = _setup((2, 3))
    op = build_finite_section(spec, w, 10)
    assert np.abs(op.column_sums() - 1.0).max() < 1e-12
    raw = build_finite_section(spec, w, 10, renormalize=False)
    cols = raw.column_sums()
    assert cols[0] == pytest.approx(1.0 - 2.0 ** -10, abs=1e-15)
    assert np.abs(cols[1:] - 1.0).max() < 1e-15


def test_section_matches_operator_structure():
    spec, w = _setup((2,))
    op = build_finite_section(spec, w, 3, renormalize=False)
    q2 = w.value(2)
    block = op.matrix[3:5, 3:5]
    assert np.allclose(block, (1.0 - q2) * np.array([[0, 1], [1, 0]]))
    assert np.allclose(op.matrix[0, 3:5], q2)
    assert np.allclose(op.matrix[3:5, 0], q2)


def test_build_rejects_empty_section():
    spec, w = _setup((2,))
    with pytest.raises(ValueError):
        build_finite_section(spec, w, 0)


# ---------------------------------------------------------------------------
# strong connectivity
# ---------------------------------------------------------------------------

def test_tarjan_on_known_graphs():
    # two 2-cycles joined one-way: two components
    adj = [[1], [0], [3, 0], [2]]
    comps = tarjan_scc(adj)
    assert sorted(sorted(c) for c in comps) == [[0, 1], [2, 3]]
    # a single cycle through all vertices
    ring = [[(i + 1) % 5] for i in range(5)]
    assert len(tarjan_scc(ring)) == 1
    # DAG: every vertex its own component
    dag = [[1, 2], [2], []]
    assert len(tarjan_scc(dag)) == 3


def test_tarjan_handles_deep_paths_iteratively():
    n = 5000
    path = [[i + 1] for i in range(n - 1)] + [[]]
    assert len(tarjan_scc(path)) == n       # would overflow a recursive version


def test_sections_strongly_connected_and_control():
    for orders in [(1,), (2, 3), (4, 6)]:
        spec, w = _setup(orders)
        op = build_finite_section(spec, w, 4)
        assert strongly_connected(op.matrix)
        broken = op.matrix.copy()
        broken[0, :] = 0.0
        broken[:, 0] = 0.0
        assert not strongly_connected(broken)


# ---------------------------------------------------------------------------
# secular function and roots
# ---------------------------------------------------------------------------

def test_secular_value_simplest_case():
    # one block of size one, renormalised weight 1: phi = 1 - 1/lam^2
    spec, w = _setup((1,))
    for lam in (2.0, -2.0, 0.5 + 0.5j):
        assert secular_value(spec, w, 1, lam) == pytest.approx(
            1.0 - 1.0 / lam ** 2, abs=1e-14)


def test_secular_value_guards_poles():
    spec, w = _setup((1,))
    with pytest.raises(PoleHit):
        secular_value(spec, w, 3, 0.0)
    op = build_finite_section(spec, w, 3)
    with pytest.raises(PoleHit):
        secular_value(spec, w, 3, 1.0 - op.tilde_q[1])


def test_secular_roots_against_dense_oracle():
    # oracle: eigenvalues of the head chain matrix by a dense solver
    for orders, n_blocks in [((1,), 1), ((1,), 4), ((2,), 3), ((2, 3), 5)]:
        spec, w = _setup(orders)
        roots = secular_roots(spec, w, n_blocks)
        assert len(roots) == n_blocks + 1
        qs = build_finite_section(spec, w, n_blocks).tilde_q
        chain = np.zeros((n_blocks + 1, n_blocks + 1))
        chain[0, 1:] = spec.d * qs
        chain[1:, 0] = qs
        chain[1:, 1:][np.diag_indices(n_blocks)] = 1.0 - qs
        ref = np.sort(np.linalg.eigvals(chain).real)
        assert np.allclose(np.sort(roots.real), ref, atol=1e-9)
        assert np.abs(roots.imag).max() < 1e-9


def test_secular_roots_include_one_exactly():
    spec, w = _setup((2, 3))
    roots = secular_roots(spec, w, 6)
    assert np.min(np.abs(roots - 1.0)) < 1e-12


# ---------------------------------------------------------------------------
# full spectrum
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("orders,n_blocks", [
    ((1,), 1), ((1,), 5), ((2,), 4), ((3,), 3), ((2, 3), 4), ((4, 6), 2),
])
def test_finite_spectrum_matches_dense_eigensolver(orders, n_blocks):
    spec, w = _setup(orders)
    result = finite_spectrum(spec, w, n_blocks)
    assert len(result) == result.operator.dim
    assert result.max_residual() < 1e-9
    ref = np.linalg.eigvals(result.operator.matrix)
    assert _multiset_gap(result.values(), ref) < 1e-8


def test_finite_spectrum_block_multiplicities():
    # two cyclic factors: each block contributes the damped eigenvalue
    # (1 - q_n) itself once, from the difference of the fixed vectors
    spec, w = _setup((2, 3))
    result = finite_spectrum(spec, w, 3)
    for n in range(1, 4):
        damp = 1.0 - result.operator.tilde_q[n - 1]
        hits = [r for r in result.records
                if r.kind == "block" and abs(r.value - damp) < 1e-13]
        assert len(hits) == 1


def test_finite_spectrum_peripheral_only_at_one():
    spec, w = _setup((2, 3))
    result = finite_spectrum(spec, w, 8)
    vals = result.values()
    mods = np.abs(vals)
    assert mods.max() == pytest.approx(1.0, abs=1e-12)
    at_top = vals[mods > 1.0 - 1e-10]
    assert len(at_top) == 1
    assert abs(at_top[0] - 1.0) < 1e-10


def test_finite_spectrum_no_renormalize_variant():
    spec, w = _setup((2,))
    result = finite_spectrum(spec, w, 4, renormalize=False)
    assert len(result) == result.operator.dim
    assert result.max_residual() < 1e-9
    ref = np.linalg.eigvals(result.operator.matrix)
    assert _multiset_gap(result.values(), ref) < 1e-8


# ---------------------------------------------------------------------------
# cofactor determinant and cross-check
# ---------------------------------------------------------------------------

def test_cofactor_det_matches_numpy():
    rng = np.random.default_rng(41)
    for n in range(1, 8):
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        lams = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        mine = cofactor_det_batch(a, lams)
        ref = np.array([np.linalg.det(l * np.eye(n) - a) for l in lams])
        assert np.allclose(mine, ref, rtol=1e-10, atol=1e-10)


def test_cofactor_det_refuses_large_matrices():
    with pytest.raises(ValueError):
        cofactor_det_batch(np.eye(19), np.array([0.0j]))


def test_factorization_crosscheck_all_small_cases():
    for orders, n_blocks in [((1,), 3), ((2,), 3), ((3,), 2), ((5,), 3),
                             ((2, 3), 2), ((2, 3), 3)]:
        spec, w = _setup(orders)
        rep = factorization_crosscheck(spec, w, n_blocks)
        assert rep.passed, (orders, n_blocks, rep.max_rel_error)
        assert rep.max_rel_error < 1e-8
        assert rep.samples == 2 * rep.dim


def test_factorization_crosscheck_is_seeded():
    spec, w = _setup((2,))
    a = factorization_crosscheck(spec, w, 2, seed=5)
    b = factorization_crosscheck(spec, w, 2, seed=5)
    assert a.max_rel_error == b.max_rel_error


# ---------------------------------------------------------------------------
# convergence toward the target set
# ---------------------------------------------------------------------------

def test_convergence_rows_within_bound():
    spec, w = _setup((2, 3))
    rows = convergence_table(spec, w, 9)
    assert len(rows) == 9 * 4
    assert all(r.ok for r in rows)
    # the distance for u != 1 tracks the damping weight itself
    last = [r for r in rows if r.n_blocks == 9]
    for r in last:
        if r.angle != 0:
            assert r.distance == pytest.approx(r.bound / 2.0, rel=1e-6)
        else:
            assert r.distance < 1e-10


def test_convergence_distances_decrease():
    spec, w = _setup((2,))
    rows = convergence_table(spec, w, 8)
    half = [r.distance for r in rows if r.angle != 0]
    assert all(a > b for a, b in zip(half, half[1:]))
