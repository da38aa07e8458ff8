import math

import numpy as np
import pytest

from krrsolve.errors import InputError
from krrsolve.sketch import (
    apply_embedding,
    build_embedding,
    distortion_check,
    practical_params,
    theory_params,
)


class TestStructure:
    def test_single_row_embedding(self):
        phi = build_embedding(1, 10, 1, seed=0)
        dense = phi.matrix().toarray()
        assert set(np.abs(dense.ravel())) == {1.0}

    def test_full_columns_when_zeta_equals_d(self):
        phi = build_embedding(8, 100, 8, seed=1)
        dense = phi.matrix().toarray()
        assert (np.abs(dense) == 1 / math.sqrt(8)).all()

    @pytest.mark.parametrize("d,n,zeta", [(16, 200, 8), (5, 33, 2), (7, 64, 7)])
    def test_column_structure(self, d, n, zeta):
        phi = build_embedding(d, n, zeta, seed=2)
        csc = phi.matrix().tocsc()
        assert (np.diff(csc.indptr) == zeta).all()
        for j in range(n):
            rows = csc.indices[csc.indptr[j]:csc.indptr[j + 1]]
            assert np.unique(rows).size == zeta
        assert set(np.round(np.abs(csc.data), 12)) == {round(1 / math.sqrt(zeta), 12)}

    def test_determinism(self):
        a = build_embedding(16, 50, 4, seed=42)
        b = build_embedding(16, 50, 4, seed=42)
        np.testing.assert_array_equal(a.rows, b.rows)
        np.testing.assert_array_equal(a.values, b.values)

    def test_zeta_bounds(self):
        with pytest.raises(InputError):
            build_embedding(4, 10, 5, seed=0)
        with pytest.raises(InputError):
            build_embedding(4, 10, 0, seed=0)


class TestApply:
    def test_zero_matrix(self):
        phi = build_embedding(8, 30, 3, seed=3)
        out = apply_embedding(phi, np.zeros((30, 4)))
        np.testing.assert_array_equal(out, 0.0)

    def test_matches_dense_product(self):
        rng = np.random.default_rng(4)
        phi = build_embedding(12, 80, 5, seed=5)
        m = rng.standard_normal((80, 6))
        dense = phi.matrix().toarray() @ m
        np.testing.assert_allclose(apply_embedding(phi, m), dense, atol=1e-12)

    def test_dimension_mismatch(self):
        phi = build_embedding(8, 30, 3, seed=6)
        with pytest.raises(InputError):
            apply_embedding(phi, np.zeros((29, 2)))

    def test_isotropy_monte_carlo(self):
        # E ||Phi v||^2 = ||v||^2
        rng = np.random.default_rng(7)
        v = rng.standard_normal(40)
        total = 0.0
        n_draws = 10_000
        for seed in range(n_draws):
            phi = build_embedding(12, 40, 4, seed=seed)
            total += np.sum(apply_embedding(phi, v) ** 2)
        assert total / n_draws == pytest.approx(np.sum(v**2), rel=0.02)

    def test_gram_isotropy(self):
        # columns of E[Phi^T Phi] approach identity
        n, d, zeta, n_draws = 6, 8, 3, 4000
        acc = np.zeros((n, n))
        for seed in range(n_draws):
            dense = build_embedding(d, n, zeta, seed=seed).matrix().toarray()
            acc += dense.T @ dense
        acc /= n_draws
        # variance of each off-diagonal entry is at most 1/(zeta*n_draws)-ish;
        # allow 3 standard errors with a conservative scale
        assert np.abs(np.diag(acc) - 1.0).max() < 0.05
        off = acc - np.diag(np.diag(acc))
        assert np.abs(off).max() < 3.0 / math.sqrt(zeta * n_draws) + 0.02


class TestDistortion:
    def test_identity_embedding_stub(self):
        class IdentityStub:
            n = 5
            d = 5

            def matrix(self):
                import scipy.sparse as sp

                return sp.identity(5, format="csr")

        basis = np.linalg.qr(np.random.default_rng(8).standard_normal((5, 3)))[0]
        lo, hi = distortion_check(IdentityStub(), basis)
        assert lo == pytest.approx(1.0, abs=1e-12)
        assert hi == pytest.approx(1.0, abs=1e-12)

    def test_rank_one_matches_dense(self):
        phi = build_embedding(6, 20, 6, seed=9)
        b = np.zeros((20, 1))
        b[3, 0] = 1.0
        lo, hi = distortion_check(phi, b)
        dense = phi.matrix().toarray() @ b
        assert lo == pytest.approx(np.sum(dense**2), rel=1e-12)
        assert hi == pytest.approx(lo, rel=1e-12)

    def test_rejects_non_orthonormal_basis(self):
        phi = build_embedding(8, 10, 2, seed=10)
        with pytest.raises(InputError):
            distortion_check(phi, 2.0 * np.eye(10)[:, :3])

    def test_subspace_embedding_event_rate(self):
        # theory-scaled embedding keeps distortion within [1/2, 3/2] on a
        # fixed 10-dim subspace in at least 95 of 100 seeds
        k, n = 10, 2000
        d, zeta = theory_params(k)
        basis = np.linalg.qr(np.random.default_rng(11).standard_normal((n, k)))[0]
        hits = 0
        for seed in range(100):
            phi = build_embedding(d, n, zeta, seed=seed)
            lo, hi = distortion_check(phi, basis)
            hits += (lo >= 0.5) and (hi <= 1.5)
        assert hits >= 95


def test_parameter_helpers():
    assert practical_params(3) == (6, 6)
    assert practical_params(100) == (200, 8)
    d, zeta = theory_params(50)
    assert d == int(math.ceil(6 * 50 * math.log(50 / 0.05)))
    assert zeta == int(math.ceil(2 * math.log(50 / 0.05)))
    d1, z1 = theory_params(1)
    assert d1 >= 1 and 1 <= z1 <= d1
