import numpy as np
import pytest

import tvtomo as tv
from tvtomo.errors import ParameterError, SolverFailureError
from tvtomo.pdip import PdipState, _step_to_boundary
from tvtomo.qp import split_variables

from conftest import make_tv_instance, projected_subgradient


class TestBuildQp:
    def test_zero_data_zero_objective(self, small_geom):
        A = tv.assemble_system_matrix(small_geom, 4)
        ops = tv.build_difference_operators(4)
        problem = tv.build_qp(A, tv.Sinogram(small_geom, np.zeros(small_geom.num_rays)), ops, 1.0)
        z = np.zeros(problem.z_dim)
        assert problem.objective(z) == 0.0

    def test_split_objective_matches_direct(self, rng):
        img, A, g, ops, problem = make_tv_instance(n=4, num_angles=6, alpha=0.37, seed=5)
        for _ in range(10):
            f = rng.uniform(size=16)
            z = split_variables(problem, f)
            direct = problem.objective_of_image(f)
            assert problem.objective(z) == pytest.approx(direct, rel=1e-12, abs=1e-12)

    def test_block_shapes(self):
        _, _, _, _, problem = make_tv_instance(n=3, num_angles=4, alpha=1.0, seed=1)
        N = 9
        assert problem.z_dim == 5 * N and problem.y_dim == 2 * N
        assert problem.B.shape == (2 * N, 5 * N)
        assert problem.c.size == 5 * N
        assert np.all(problem.b == 0)

    def test_equality_constraint_consistency(self, rng):
        _, _, _, _, problem = make_tv_instance(n=4, num_angles=5, alpha=2.0, seed=9)
        f = rng.normal(size=16)
        z = split_variables(problem, f)
        assert np.allclose(problem.B @ z, 0.0, atol=1e-14)

    def test_q_positive_semidefinite(self, rng):
        _, _, _, _, problem = make_tv_instance(n=4, num_angles=5, alpha=1.0, seed=2)
        for _ in range(50):
            z = rng.normal(size=problem.z_dim)
            assert z @ problem.apply_Q(z) >= -1e-12

    def test_nonpositive_alpha_rejected(self, small_geom):
        A = tv.assemble_system_matrix(small_geom, 4)
        ops = tv.build_difference_operators(4)
        g = tv.Sinogram(small_geom, np.zeros(small_geom.num_rays))
        for alpha in (0.0, -1.0):
            with pytest.raises(ParameterError):
                tv.build_qp(A, g, ops, alpha)


def assemble_full_kkt(problem, state):
    """Dense oracle: the full 3-block Newton matrix."""
    nz, ny = problem.z_dim, problem.y_dim
    N = problem.N
    A = problem.A.matrix.toarray()
    Q = np.zeros((nz, nz))
    Q[:N, :N] = A.T @ A
    B = problem.B.toarray()
    Z = np.diag(state.z)
    X = np.diag(state.x_tilde)
    K = np.zeros((2 * nz + ny, 2 * nz + ny))
    K[:nz, :nz] = -Q
    K[:nz, nz : nz + ny] = B.T
    K[:nz, nz + ny :] = np.eye(nz)
    K[nz : nz + ny, :nz] = B
    K[nz + ny :, :nz] = np.eye(nz)
    K[nz + ny :, nz + ny :] = np.linalg.inv(X) @ Z
    return K


class TestNewtonSystem:
    def test_diagonal_no_equalities_closed_form(self, rng):
        # Q = 0, B empty, barrier diag = 1: the reduced system is
        # -dz = p1 - p3 and dx = p3 - dz
        problem = tv.GenericQp(Q=np.zeros((5, 5)), c=rng.normal(size=5))
        state = PdipState(z=np.ones(5), y=np.zeros(0), x_tilde=np.ones(5))
        p1, p3 = rng.normal(size=5), rng.normal(size=5)
        dz, dy, dx = tv.solve_newton_system(problem, state, (p1, np.zeros(0), p3))
        assert np.allclose(dz, -(p1 - p3), atol=1e-12)
        assert np.allclose(dx, p3 - dz, atol=1e-12)
        assert dy.size == 0

    def test_full_system_residual_against_dense_oracle(self, rng):
        _, _, _, _, problem = make_tv_instance(n=2, num_angles=4, alpha=0.5, seed=3)
        nz, ny = problem.z_dim, problem.y_dim
        state = PdipState(
            z=rng.uniform(0.5, 2.0, nz), y=rng.normal(size=ny),
            x_tilde=rng.uniform(0.5, 2.0, nz),
        )
        p1, p2, p3 = rng.normal(size=nz), rng.normal(size=ny), rng.normal(size=nz)
        dz, dy, dx = tv.solve_newton_system(problem, state, (p1, p2, p3))
        K = assemble_full_kkt(problem, state)
        sol = np.concatenate([dz, dy, dx])
        rhs = np.concatenate([p1, p2, p3])
        residual = np.linalg.norm(K @ sol - rhs) / np.linalg.norm(rhs)
        assert residual <= 1e-10

    def test_one_newton_step_from_centered_point(self):
        # min 1/2(z1^2+z2^2) - z1 - z2 s.t. z1+z2=1: solution (0.5, 0.5).
        # From a centered interior point a single mu=0 Newton step lands on
        # the analytic KKT solution of the unperturbed problem.
        Q = np.eye(2)
        c = np.array([-1.0, -1.0])
        B = np.array([[1.0, 1.0]])
        b = np.array([1.0])
        problem = tv.GenericQp(Q=Q, c=c, B=B, b=b)
        # analytic: z*=(0.5,0.5), y*=-0.5, x*=0 -> take a strictly interior
        # state on the central path-ish and check the Newton direction
        # solves the full linearized system exactly (dense verification)
        state = PdipState(z=np.array([0.5, 0.5]), y=np.array([-0.5]),
                          x_tilde=np.array([1e-8, 1e-8]))
        p1 = c + Q @ state.z - B.T @ state.y - state.x_tilde
        p2 = b - B @ state.z
        p3 = -state.z
        dz, dy, dx = tv.solve_newton_system(problem, state, (p1, p2, p3))
        z_next = state.z + dz
        assert np.allclose(z_next, [0.5, 0.5], atol=1e-7)


class TestPdipSolve:
    def test_symmetric_qp(self):
        problem = tv.GenericQp(
            Q=np.eye(2), c=np.array([-1.0, -1.0]),
            B=np.array([[1.0, 1.0]]), b=np.array([1.0]),
        )
        z, report = tv.pdip_solve(problem)
        assert report.reason == "converged"
        assert np.allclose(z, [0.5, 0.5], atol=1e-9)

    def test_bound_active_scalar_qp(self):
        problem = tv.GenericQp(Q=np.array([[1.0]]), c=np.array([1.0]))
        z, report = tv.pdip_solve(problem)
        assert report.reason == "converged"
        assert abs(z[0]) <= 1e-9

    def test_small_tv_instance_beats_subgradient_oracle(self):
        _, _, _, _, problem = make_tv_instance(n=4, num_angles=6, alpha=0.1, seed=11)
        img, report = tv.pdip_solve(problem)
        assert report.reason == "converged"
        assert report.r_dual <= 1e-7 * (1 + np.linalg.norm(problem.c))
        assert report.r_primal <= 1e-7
        oracle = projected_subgradient(problem, iterations=3000)
        pdip_obj = problem.objective_of_image(img.values)
        assert pdip_obj <= oracle + 1e-5

    def test_strict_interiority_and_mu_decrease(self):
        _, _, _, _, problem = make_tv_instance(n=3, num_angles=5, alpha=1.0, seed=4)
        img, report = tv.pdip_solve(problem)
        mus = [row[1] for row in report.history]
        assert all(m > 0 for m in mus[:-1])
        # monotone complementarity: >=10x decrease over any 20 iterations
        for i in range(len(mus) - 21):
            assert mus[i + 20] <= mus[i] / 10 + 1e-16

    def test_kkt_certificate_at_termination(self):
        _, _, _, _, problem = make_tv_instance(n=4, num_angles=6, alpha=0.5, seed=8)
        cfg = tv.SolverConfig()
        img, report = tv.pdip_solve(problem, cfg)
        assert report.reason == "converged"
        assert report.r_primal / (1 + np.linalg.norm(problem.b)) <= 10 * cfg.tol_primal
        assert report.r_dual / (1 + np.linalg.norm(problem.c)) <= 10 * cfg.tol_dual
        assert report.mu <= 10 * cfg.tol_gap

    def test_never_returns_nan(self):
        _, _, _, _, problem = make_tv_instance(n=4, num_angles=4, alpha=10.0, seed=6)
        img, _ = tv.pdip_solve(problem)
        assert np.all(np.isfinite(img.values))
        assert np.all(img.values >= 0)

    def test_step_to_boundary(self):
        assert _step_to_boundary(np.array([1.0, 1.0]), np.array([1.0, 1.0])) == np.inf
        assert _step_to_boundary(np.array([1.0, 2.0]), np.array([-2.0, -1.0])) == 0.5


class TestReconstruct:
    def test_constant_image_large_alpha(self, small_geom):
        A = tv.assemble_system_matrix(small_geom, 6)
        c = 0.8
        g = tv.forward_project(A, tv.ImageGrid(6, np.full(36, c)))
        f, report = tv.reconstruct(A, g, alpha=100.0)
        assert report.reason == "converged"
        assert tv.tv_norm(f) <= 1e-6
        assert np.allclose(f.values, f.values.mean(), atol=1e-5)
        # a constant fits the data exactly: compare objective against the
        # true constant image
        problem = tv.build_qp(A, g, tv.build_difference_operators(6), 100.0)
        assert problem.objective_of_image(f.values) <= problem.objective_of_image(
            np.full(36, c)) + 1e-6

    def test_huge_alpha_kills_tv(self, small_geom):
        A = tv.assemble_system_matrix(small_geom, 8)
        img = tv.ImageGrid(8, np.random.default_rng(3).uniform(size=64))
        g = tv.forward_project(A, img)
        f, _ = tv.reconstruct(A, g, alpha=1e6)
        assert tv.tv_norm(f) <= 1e-6

    def test_disc_phantom_small_alpha_accuracy(self):
        phantom = tv.render_phantom(tv.Phantom.disc(r=0.25), 16)
        geom = tv.ScanGeometry(num_angles=24, num_detector_pixels=24)
        A = tv.assemble_system_matrix(geom, 16)
        g = tv.forward_project(A, phantom)
        f, report = tv.reconstruct(A, g, alpha=1e-3)
        assert report.reason == "converged"
        err = np.linalg.norm(f.values - phantom.values) / np.linalg.norm(phantom.values)
        assert err <= 0.10

    def test_alpha_monotone_tv(self, small_geom):
        A = tv.assemble_system_matrix(small_geom, 8)
        img = tv.render_phantom(tv.Phantom.disc(r=0.3), 8)
        g = tv.forward_project(A, img)
        tvs = []
        for alpha in (1e-3, 1e-2, 1e-1, 1.0, 10.0):
            f, _ = tv.reconstruct(A, g, alpha)
            tvs.append(tv.tv_norm(f))
        assert all(tvs[i + 1] <= tvs[i] + 1e-6 for i in range(len(tvs) - 1))

    def test_objective_optimality_vs_oracle_battery(self):
        for seed in range(5):
            _, _, _, _, problem = make_tv_instance(
                n=6, num_angles=8, alpha=10.0 ** (seed - 2), seed=100 + seed)
            img, _ = tv.pdip_solve(problem)
            oracle = projected_subgradient(problem, iterations=2000)
            assert problem.objective_of_image(img.values) <= oracle + 1e-6
