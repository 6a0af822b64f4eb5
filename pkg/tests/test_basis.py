import math

import numpy as np
import pytest

from gpswarm.basis import (
    EigenBasis,
    KernelParams,
    Workspace,
    basis_features,
    build_basis,
    kernel_eval,
    kernel_reconstruct,
    load_basis,
    save_basis,
)
from gpswarm.errors import BasisError


class TestKernelEval:
    def test_zero_distance_is_signal_variance(self, params):
        assert kernel_eval(params, (0.3, 0.3), (0.3, 0.3)) == pytest.approx(1.0)

    def test_known_scalar_values(self, params):
        # Independent scalar evaluation: exp(-0.5 * d^2 / 0.05) per axis.
        assert kernel_eval(params, (0.0, 0.0), (0.1, 0.0)) == pytest.approx(
            math.exp(-0.1), rel=1e-12
        )
        assert kernel_eval(params, (0.0, 0.0), (1.0, 1.0)) == pytest.approx(
            math.exp(-20.0), rel=1e-12
        )

    def test_symmetry_and_range(self, params):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a, b = rng.uniform(-1, 1, (2, 2))
            v1 = kernel_eval(params, a, b)
            v2 = kernel_eval(params, b, a)
            assert v1 == v2
            assert 0.0 < v1 <= params.signal_variance

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            KernelParams(signal_variance=0.0)
        with pytest.raises(ValueError):
            KernelParams(length_scale_sq=(0.05, -0.05))
        with pytest.raises(ValueError):
            KernelParams(noise_variance=-1.0)


class TestBuildBasis:
    def test_eigenvalues_positive_nonincreasing(self, basis):
        lam = basis.eigenvalues
        assert lam.shape == (40,)
        assert np.all(lam > 0)
        assert np.all(np.diff(lam) <= 0)

    def test_trace_identity(self, basis, params, workspace):
        # Oracle: trace(K_grid) * cell_area = P * sig_f^2 * cell_area = sig_f^2 * area.
        expected = params.signal_variance * workspace.area
        assert basis.spectrum_sum == pytest.approx(expected, abs=1e-6)

    def test_trace_identity_other_kernels(self):
        ws = Workspace(-0.5, -1.0, 1.5, 0.5)
        for sig, ls in ((0.7, (0.02, 0.08)), (2.5, (0.2, 0.2))):
            b = build_basis(KernelParams(sig, ls, 0.01), ws, grid_side=21, n_modes=20)
            assert b.spectrum_sum == pytest.approx(sig * ws.area, abs=1e-6)

    def test_reconstruction_error_nonincreasing_in_rank(self, basis80, params):
        rng = np.random.default_rng(11)
        p1 = rng.uniform(-1, 1, (1000, 2))
        p2 = rng.uniform(-1, 1, (1000, 2))
        truth = np.array([kernel_eval(params, p1[i], p2[i]) for i in range(1000)])
        errs = []
        for rank in (10, 20, 40, 80):
            b = basis80.truncate(rank)
            rec = np.sum(b.eigenvalues * b.features(p1) * b.features(p2), axis=1)
            errs.append(np.abs(rec - truth).mean())
        assert errs == sorted(errs, reverse=True)
        assert errs[2] < errs[0]  # E=40 beats E=10

    def test_requesting_too_many_modes_fails(self, params):
        with pytest.raises(BasisError):
            build_basis(params, Workspace(), grid_side=5, n_modes=26)
        with pytest.raises(BasisError):
            # far beyond the numerically positive rank of the SE Gram
            build_basis(params, Workspace(), grid_side=41, n_modes=1681)

    def test_full_rank_reduces_and_reports(self, full_basis):
        assert full_basis.n_modes < 41 * 41
        assert np.all(full_basis.eigenvalues > 0)


class TestBasisFeatures:
    def test_length(self, basis):
        assert basis_features(basis, np.array([0.1, -0.2])).shape == (40,)
        assert basis_features(basis, np.zeros((7, 2))).shape == (7, 40)

    def test_grid_node_consistency(self, basis):
        # At a grid node the extension must reproduce u_ej / sqrt(cell_area).
        scale = 1.0 / np.sqrt(basis.cell_area)
        for j in (0, 500, 840, 1680):
            feats = basis_features(basis, basis.grid_points[j])
            expected = basis.eigenvectors[:, j] * scale
            assert np.abs(feats - expected).max() <= 1e-6 * np.abs(expected).max()

    def test_diagonal_reconstruction_within_recorded_bound(self, basis, params):
        rng = np.random.default_rng(5)
        pts = rng.uniform(-1, 1, (500, 2))
        feats = basis.features(pts)
        recon = (feats * feats) @ basis.eigenvalues
        err = np.abs(params.signal_variance - recon)
        assert err.max() <= basis.diag_error_bound

    def test_deterministic(self, basis):
        x = np.array([[0.37, -0.81], [0.0, 0.0]])
        a = basis.features(x)
        b = basis.features(x)
        assert np.array_equal(a, b)


class TestKernelReconstruct:
    def test_full_rank_diagonal(self, full_basis):
        rng = np.random.default_rng(9)
        for x in rng.uniform(-1, 1, (20, 2)):
            assert kernel_reconstruct(full_basis, x, x) == pytest.approx(1.0, abs=1e-4)

    def test_symmetry_exact(self, basis):
        rng = np.random.default_rng(13)
        for _ in range(20):
            x1, x2 = rng.uniform(-1, 1, (2, 2))
            assert kernel_reconstruct(basis, x1, x2) == kernel_reconstruct(basis, x2, x1)

    def test_random_pairs_within_recorded_bound(self, basis, params):
        rng = np.random.default_rng(17)
        p1 = rng.uniform(-1, 1, (300, 2))
        p2 = rng.uniform(-1, 1, (300, 2))
        for i in range(300):
            err = abs(kernel_reconstruct(basis, p1[i], p2[i]) - kernel_eval(params, p1[i], p2[i]))
            assert err <= basis.pair_error_bound


class TestOrthonormality:
    def test_discrete_orthonormality(self, basis):
        feats = basis.features(basis.grid_points)  # (P, E)
        gram = feats.T @ feats * basis.cell_area
        assert np.abs(gram - np.eye(basis.n_modes)).max() < 1e-6


class TestSerialization:
    def test_roundtrip(self, basis, tmp_path):
        path = tmp_path / "basis.bin"
        save_basis(basis, path)
        loaded = load_basis(path)
        assert np.array_equal(loaded.eigenvalues, basis.eigenvalues)
        assert np.array_equal(loaded.eigenvectors, basis.eigenvectors)
        assert loaded.kernel == basis.kernel
        assert loaded.workspace == basis.workspace
        assert loaded.cell_area == basis.cell_area
        x = np.array([0.21, 0.43])
        assert np.array_equal(loaded.features(x), basis.features(x))

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(BasisError):
            load_basis(path)

    def test_truncate_bounds(self, basis):
        with pytest.raises(BasisError):
            basis.truncate(0)
        with pytest.raises(BasisError):
            basis.truncate(41)
        sub = basis.truncate(10)
        assert isinstance(sub, EigenBasis)
        assert sub.n_modes == 10
        assert np.array_equal(sub.eigenvalues, basis.eigenvalues[:10])
