import numpy as np
import pytest

from mzcg.geometry import (
    CGMap,
    DimensionMismatchError,
    RankDeficientError,
    build_cg_map,
    decompose,
    reconstruct,
)


def random_full_rank_selector(rng, max_cond=50.0):
    # float64 roundoff in the partition product grows like cond(phi) * eps,
    # so the 1e-12 property bound presumes a numerically full-rank ensemble.
    n = rng.integers(1, 9)
    m = rng.integers(1, n + 1)
    while True:
        phi = rng.normal(size=(m, n))
        svals = np.linalg.svd(phi, compute_uv=False)
        if svals[0] <= max_cond * svals[-1]:
            return phi


class TestBuildCGMap:
    def test_coordinate_selector(self):
        cg = build_cg_map([[1.0, 0.0]])
        assert cg.sigma == pytest.approx(np.array([[1.0]]))
        assert cg.phi_star.ravel() == pytest.approx([1.0, 0.0])
        # sign canonicalisation fixes psi = +(0, 1)
        assert cg.psi == pytest.approx(np.array([[0.0, 1.0]]))

    def test_identity_selector_has_empty_unresolved_block(self):
        cg = build_cg_map(np.eye(2))
        assert cg.psi.shape == (0, 2)
        assert cg.sigma == pytest.approx(np.eye(2))
        assert cg.phi_star @ cg.phi == pytest.approx(np.eye(2))

    def test_three_four_selector(self):
        # Oracle: direct matrix arithmetic on the 1x2 selector (3, 4).
        cg = build_cg_map([[3.0, 4.0]])
        assert cg.sigma == pytest.approx(np.array([[5.0]]))
        assert cg.phi_star.ravel() == pytest.approx([3.0 / 25.0, 4.0 / 25.0])
        assert cg.psi.ravel() == pytest.approx([0.8, -0.6])
        ident = cg.phi_star @ cg.phi + cg.psi.T @ cg.psi
        assert np.linalg.norm(ident - np.eye(2)) < 1e-12

    def test_rank_deficient_rejected(self):
        with pytest.raises(RankDeficientError):
            build_cg_map([[1.0, 2.0], [2.0, 4.0]])

    def test_wide_only(self):
        with pytest.raises(DimensionMismatchError):
            build_cg_map([[1.0], [0.0]])

    def test_map_is_frozen(self):
        cg = build_cg_map([[1.0, 0.0]])
        with pytest.raises(AttributeError):
            cg.phi = None

    def test_psi_sign_is_deterministic(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            phi = random_full_rank_selector(rng)
            a = build_cg_map(phi)
            b = build_cg_map(phi.copy())
            assert np.array_equal(a.psi, b.psi)
            for row in a.psi:
                nz = row[np.abs(row) > 1e-8]
                assert nz[0] > 0.0


class TestDecomposeReconstruct:
    def test_coordinate_split(self):
        cg = build_cg_map([[1.0, 0.0]])
        h, xt = decompose(cg, np.array([2.0, 5.0]))
        assert h == pytest.approx([2.0])
        assert xt == pytest.approx([5.0])
        assert reconstruct(cg, h, xt) == pytest.approx([2.0, 5.0])

    def test_identity_split(self):
        cg = build_cg_map(np.eye(2))
        h, xt = decompose(cg, np.array([1.0, 2.0]))
        assert h == pytest.approx([1.0, 2.0])
        assert xt.shape == (0,)
        assert reconstruct(cg, h, xt) == pytest.approx([1.0, 2.0])

    def test_three_four_split(self):
        cg = build_cg_map([[3.0, 4.0]])
        h, xt = decompose(cg, np.array([1.0, 1.0]))
        assert h == pytest.approx([7.0])
        assert xt == pytest.approx([0.2])
        assert reconstruct(cg, h, xt) == pytest.approx([1.0, 1.0])

    def test_shape_mismatch(self):
        cg = build_cg_map([[1.0, 0.0]])
        with pytest.raises(DimensionMismatchError):
            decompose(cg, np.array([1.0, 2.0, 3.0]))
        with pytest.raises(DimensionMismatchError):
            reconstruct(cg, np.array([1.0, 2.0]), np.array([0.0]))

    def test_round_trip_random_ensemble(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            phi = random_full_rank_selector(rng)
            cg = build_cg_map(phi)
            n = phi.shape[1]
            ident = cg.phi_star @ cg.phi + cg.psi.T @ cg.psi
            assert np.linalg.norm(ident - np.eye(n)) < 1e-12
            assert np.linalg.norm(cg.psi @ cg.phi_star) < 1e-12
            assert np.linalg.norm(cg.psi @ cg.psi.T - np.eye(n - phi.shape[0])) < 1e-12
            x = rng.normal(size=n)
            h, xt = decompose(cg, x)
            assert np.linalg.norm(reconstruct(cg, h, xt) - x) < 1e-10
