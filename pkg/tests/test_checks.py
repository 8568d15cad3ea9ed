import json

import numpy as np
import pytest

from hypkernels.checks import (
    PsdReport,
    SweepReport,
    check_identities,
    check_isometry,
    check_psd,
    min_max_eigenvalues,
    psd_report,
    random_multiplier,
    sample_ball_points,
)
from hypkernels.geometry import Curvature
from hypkernels.kernels import KernelConfig, RadialCoeffs

C1 = Curvature(1.0)


class TestEigenvalues:
    def test_identity(self):
        lo, hi = min_max_eigenvalues(np.eye(4))
        assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)

    def test_known_hermitian(self):
        m = np.array([[2.0, 1j], [-1j, 2.0]])
        lo, hi = min_max_eigenvalues(m)
        assert lo == pytest.approx(1.0) and hi == pytest.approx(3.0)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            min_max_eigenvalues(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            min_max_eigenvalues(np.zeros((2, 3)))


class TestPsdReport:
    def test_pass_on_psd(self):
        rep = psd_report(np.eye(3), seed=7)
        assert rep.passed and rep.n == 3 and rep.seed == 7

    def test_fail_on_indefinite(self):
        rep = psd_report(np.diag([1.0, -0.5]))
        assert not rep.passed

    def test_threshold_scales_with_spectral_radius(self):
        # min_eig = -1e-5 passes only because max_eig = 1e4 rescales it.
        rep = psd_report(np.diag([1e4, -1e-5]), tol=1e-8)
        assert rep.passed

    def test_record_round_trip(self):
        rep = psd_report(np.eye(2), seed=1)
        blob = json.dumps(rep.to_record())
        assert PsdReport.from_record(json.loads(blob)) == rep


class TestCheckPsd:
    @pytest.mark.parametrize("variant,extra", [
        ("ahl", {}),
        ("ahpoly", {"offset": 1.0, "degree": 2}),
        ("ahrbf", {"bandwidth": 1.0}),
        ("ahlap", {"bandwidth": 1.0}),
    ])
    def test_variants_pass(self, variant, extra):
        rng = np.random.default_rng(0)
        points = sample_ball_points(rng, 16, 2, C1)
        params = random_multiplier(rng, 2, 2, C1)
        rep = check_psd(KernelConfig(variant, params=params, **extra), points)
        assert rep.passed, rep

    def test_ahrad_passes(self):
        rng = np.random.default_rng(1)
        points = sample_ball_points(rng, 16, 3, Curvature(0.5))
        params = random_multiplier(rng, 3, 3, Curvature(0.5))
        radial = RadialCoeffs(rng.uniform(0.1, 1.0, 11))
        rep = check_psd(KernelConfig("ahrad", params=params, radial=radial), points)
        assert rep.passed, rep


class TestIsometry:
    def test_sweep_passes(self):
        rep = check_isometry(C1, 3, 200, 1e-10, seed=0)
        assert rep.passed
        assert rep.max_abs_error < 1e-12

    def test_tight_tolerance_fails(self):
        rep = check_isometry(C1, 3, 200, 0.0, seed=0)
        assert not rep.passed

    def test_worst_case_recorded(self):
        rep = check_isometry(C1, 2, 50, 1e-10, seed=3)
        worst = json.loads(rep.worst_case_inputs)
        assert {"trial", "z_i", "z_j"} <= set(worst)

    def test_record_round_trip(self):
        rep = check_isometry(C1, 2, 20, 1e-10, seed=0)
        blob = json.dumps(rep.to_record())
        assert SweepReport.from_record(json.loads(blob)) == rep


class TestIdentities:
    def test_sweep_passes(self):
        rep = check_identities(300, 1e-11, seed=0)
        assert rep.passed
        assert rep.max_abs_error < 1e-12

    def test_near_boundary_passes_relaxed(self):
        rep = check_identities(150, 1e-8, seed=0, near_boundary=True)
        assert rep.passed

    def test_deterministic(self):
        a = check_identities(100, 1e-11, seed=5)
        b = check_identities(100, 1e-11, seed=5)
        assert a == b
