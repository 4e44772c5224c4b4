"""Mehrotra predictor-corrector primal-dual interior-point QP solver.

Solves  min 1/2 z^T Q z + c^T z + d  s.t.  B z = b, z >= 0  by following
the central path of the perturbed KKT map

    F(z, x~, y; mu) = [ Q z - B^T y - x~ + c ;  B z - b ;  Z X~ 1 - mu 1 ].

Each iteration solves the reduced saddle system

    [ -(Q + Z^-1 X~)  B^T ] [ dz ]   [ p1 - Z^-1 X~ p3 ]
    [       B          0  ] [ dy ] = [       p2        ]

twice (predictor with mu = 0, corrector with the Mehrotra target) and
recovers dx~ = Z^-1 X~ (p3 - dz).  For the TV problem the saddle system is
condensed onto the image block: eliminating the split variables and the
equality duals leaves an SPD system

    (A^T A + diag(d_f) + D_h^T W_h D_h + D_v^T W_v D_v) df = rhs

which is solved exactly (dense Cholesky) on small grids and by
preconditioned CG on large ones, where the preconditioner is an exact
sparse factorization of the banded part G + diag(A^T A); the full A^T A
is only ever applied matrix-free as f -> A^T (A f).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverFailureError
from .grid import ImageGrid, build_difference_operators
from .qp import QpProblem, build_qp

__all__ = [
    "SolverConfig",
    "PdipState",
    "ConvergenceReport",
    "GenericQp",
    "solve_newton_system",
    "pdip_solve",
    "reconstruct",
]

_NEGATIVE_CLAMP = -1e-12


@dataclass
class SolverConfig:
    tol_primal: float = 1e-8
    tol_dual: float = 1e-8
    tol_gap: float = 1e-8
    max_iterations: int = 100
    eta: float = 0.995  # fraction-to-boundary
    centering_exponent: float = 3.0
    backend: str = "auto"  # auto | dense | cg
    inner_tol: float = 1e-9
    cg_max_iterations: int = 2000

    def __post_init__(self):
        if min(self.tol_primal, self.tol_dual, self.tol_gap) <= 0:
            raise ValueError("tolerances must be positive")
        if not 0.0 < self.eta < 1.0:
            raise ValueError("fraction-to-boundary parameter must be in (0, 1)")
        if self.backend not in ("auto", "dense", "cg"):
            raise ValueError(f"unknown linear backend {self.backend!r}")


@dataclass
class PdipState:
    """One strictly interior iterate of the solver."""

    z: np.ndarray
    y: np.ndarray
    x_tilde: np.ndarray
    iteration: int = 0
    r_dual: float = np.inf
    r_primal: float = np.inf

    @property
    def mu(self):
        return float(self.z @ self.x_tilde) / self.z.size


@dataclass
class ConvergenceReport:
    iterations: int
    reason: str  # converged | max_iterations | solver_failure
    r_primal: float
    r_dual: float
    mu: float
    objective: float
    # rows of (iteration, mu, r_primal, r_dual, step_primal, step_dual)
    history: list = field(default_factory=list)


@dataclass(frozen=True)
class GenericQp:
    """Small dense QP in the same canonical form, for tests and toys."""

    Q: np.ndarray
    c: np.ndarray
    b: np.ndarray = None
    B: np.ndarray = None
    d: float = 0.0

    def __post_init__(self):
        nz = np.asarray(self.c).size
        if self.B is None:
            object.__setattr__(self, "B", np.zeros((0, nz)))
        if self.b is None:
            object.__setattr__(self, "b", np.zeros(np.asarray(self.B).shape[0]))

    @property
    def z_dim(self):
        return np.asarray(self.c).size

    @property
    def y_dim(self):
        return np.asarray(self.B).shape[0]

    def apply_Q(self, z):
        return np.asarray(self.Q) @ z

    def objective(self, z):
        return float(0.5 * z @ self.apply_Q(z) + np.asarray(self.c) @ z + self.d)


def _step_to_boundary(v, dv):
    """Largest step a with v + a*dv >= 0 (inf when unconstrained)."""
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


class _GenericNewton:
    """Dense factorization of the reduced saddle system."""

    def __init__(self, problem, z, x_tilde):
        self.problem = problem
        self.diag = x_tilde / z
        nz, ny = problem.z_dim, problem.y_dim
        Q = np.asarray(problem.Q, dtype=float) if not sp.issparse(problem.Q) else problem.Q.toarray()
        B = np.asarray(problem.B, dtype=float)
        K = np.zeros((nz + ny, nz + ny))
        K[:nz, :nz] = -(Q + np.diag(self.diag))
        K[:nz, nz:] = B.T
        K[nz:, :nz] = B
        self._lu = None
        self._K = K
        self.nz, self.ny = nz, ny

    def solve(self, p1, p2, p3):
        r1 = p1 - self.diag * p3
        rhs = np.concatenate([r1, p2])
        try:
            sol = np.linalg.solve(self._K, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolverFailureError(f"Newton system is singular: {exc}") from exc
        dz, dy = sol[: self.nz], sol[self.nz :]
        dx = self.diag * (p3 - dz)
        return dz, dy, dx


class _TvNewton:
    """Structured elimination for the split-variable TV problem.

    With d = x~/z split into blocks (d_f, d_hp, d_hm, d_vp, d_vm) and
    harmonic weights w = 1/(1/d+ + 1/d-), all split variables and equality
    duals reduce to closed forms around the image-block SPD solve.
    """

    def __init__(self, problem, z, x_tilde, backend, inner_tol, cg_max_iterations,
                 cache=None):
        self.problem = problem
        self.N = problem.N
        self.diag = x_tilde / z
        N = self.N
        d = self.diag
        self.d_f = d[:N]
        self.d_hp, self.d_hm = d[N : 2 * N], d[2 * N : 3 * N]
        self.d_vp, self.d_vm = d[3 * N : 4 * N], d[4 * N : 5 * N]
        self.w_h = 1.0 / (1.0 / self.d_hp + 1.0 / self.d_hm)
        self.w_v = 1.0 / (1.0 / self.d_vp + 1.0 / self.d_vm)
        self.backend = backend
        self.inner_tol = inner_tol
        self.cg_max_iterations = cg_max_iterations
        cache = cache if cache is not None else {}

        ops = problem.ops
        A = problem.A.matrix
        G = (
            sp.diags(self.d_f)
            + ops.d_h.T @ sp.diags(self.w_h) @ ops.d_h
            + ops.d_v.T @ sp.diags(self.w_v) @ ops.d_v
        ).tocsr()
        self._G = G
        self._A = A
        if backend == "dense":
            if "ata_dense" not in cache:
                cache["ata_dense"] = (A.T @ A).toarray()
            K = cache["ata_dense"] + G.toarray()
            try:
                self._chol = la.cho_factor(K)
            except la.LinAlgError:
                # K is positive definite in exact arithmetic but roundoff can
                # make it indefinite when the barrier weights span ~16 orders
                # of magnitude; a relative jitter restores factorability
                jitter = 1e-14 * np.trace(K) / K.shape[0]
                try:
                    self._chol = la.cho_factor(K + jitter * np.eye(K.shape[0]))
                except la.LinAlgError as exc:
                    raise SolverFailureError(
                        f"dense factorization failed: {exc}") from exc
        else:
            if "ata_diag" not in cache:
                cache["ata_diag"] = np.asarray(A.multiply(A).sum(axis=0)).ravel()
            # exact factorization of the banded part; A^T A enters the
            # preconditioner only through its diagonal
            P = (G + sp.diags(cache["ata_diag"])).tocsc()
            try:
                self._pre_lu = spla.splu(P)
            except RuntimeError as exc:
                raise SolverFailureError(f"preconditioner factorization failed: {exc}") from exc

    def _solve_image_block(self, rhs):
        if self.backend == "dense":
            return la.cho_solve(self._chol, rhs)
        A, G = self._A, self._G

        def matvec(v):
            return A.T @ (A @ v) + G @ v

        op = spla.LinearOperator((self.N, self.N), matvec=matvec)
        pre = spla.LinearOperator((self.N, self.N), matvec=self._pre_lu.solve)
        sol, info = spla.cg(
            op, rhs, rtol=self.inner_tol, atol=0.0,
            maxiter=self.cg_max_iterations, M=pre,
        )
        if info > 0:
            # accept the iterate; the caller verifies the overall residual
            warnings.warn(f"inner CG hit the iteration cap ({info})")
        elif info < 0:
            raise SolverFailureError(f"inner CG breakdown (info={info})")
        return sol

    def solve(self, p1, p2, p3):
        N = self.N
        problem = self.problem
        ops = problem.ops
        r1 = p1 - self.diag * p3
        r1_f = r1[:N]
        r1_hp, r1_hm = r1[N : 2 * N], r1[2 * N : 3 * N]
        r1_vp, r1_vm = r1[3 * N : 4 * N], r1[4 * N : 5 * N]
        r2_h, r2_v = p2[:N], p2[N:]

        rhs_h = r2_h - r1_hp / self.d_hp + r1_hm / self.d_hm
        rhs_v = r2_v - r1_vp / self.d_vp + r1_vm / self.d_vm
        rhs_f = -r1_f + ops.d_h.T @ (self.w_h * rhs_h) + ops.d_v.T @ (self.w_v * rhs_v)

        df = self._solve_image_block(rhs_f)
        dy_h = self.w_h * (rhs_h - ops.d_h @ df)
        dy_v = self.w_v * (rhs_v - ops.d_v @ df)
        dhp = -(r1_hp + dy_h) / self.d_hp
        dhm = -(r1_hm - dy_h) / self.d_hm
        dvp = -(r1_vp + dy_v) / self.d_vp
        dvm = -(r1_vm - dy_v) / self.d_vm

        dz = np.concatenate([df, dhp, dhm, dvp, dvm])
        dy = np.concatenate([dy_h, dy_v])
        dx = self.diag * (p3 - dz)
        return dz, dy, dx


_DENSE_MAX_N = 1024  # pixels; n <= 32


def _make_newton(problem, z, x_tilde, config, cache=None):
    if isinstance(problem, QpProblem):
        backend = config.backend
        if backend == "auto":
            backend = "dense" if problem.N <= _DENSE_MAX_N else "cg"
        return _TvNewton(
            problem, z, x_tilde, backend, config.inner_tol,
            config.cg_max_iterations, cache=cache,
        )
    return _GenericNewton(problem, z, x_tilde)


def _reduced_residual(problem, diag, dz, dy, r1, r2):
    res1 = -(problem.apply_Q(dz) + diag * dz) + np.asarray(problem.B.T @ dy) - r1
    res2 = np.asarray(problem.B @ dz) - r2
    num = np.sqrt(np.linalg.norm(res1) ** 2 + np.linalg.norm(res2) ** 2)
    den = 1.0 + np.sqrt(np.linalg.norm(r1) ** 2 + np.linalg.norm(r2) ** 2)
    return num / den


def solve_newton_system(problem, state, rhs, config=None, check_residual=True):
    """Solve the reduced KKT system for one rhs triple (p1, p2, p3).

    Returns (dz, dy, dx~) with dx~ recovered by back-substitution.  Raises
    SolverFailureError (carrying the achieved residual) when the linear
    solve does not reach the configured inner tolerance.
    """
    config = config or SolverConfig()
    p1, p2, p3 = (np.asarray(v, dtype=float) for v in rhs)
    newton = _make_newton(problem, state.z, state.x_tilde, config)
    dz, dy, dx = newton.solve(p1, p2, p3)
    if check_residual:
        rel = _reduced_residual(problem, newton.diag, dz, dy, p1 - newton.diag * p3, p2)
        if not np.isfinite(rel) or rel > max(config.inner_tol * 100, 1e-8):
            raise SolverFailureError(
                f"Newton solve residual {rel:.3e} above tolerance", residual=rel
            )
    return dz, dy, dx


def pdip_solve(problem, config=None):
    """Run the predictor-corrector iteration to optimality.

    Returns (solution, ConvergenceReport).  For the TV QpProblem the
    solution is the reconstructed ImageGrid (first N entries of z); for a
    GenericQp it is the full primal vector z.
    """
    config = config or SolverConfig()
    nz, ny = problem.z_dim, problem.y_dim

    if isinstance(problem, QpProblem):
        start = max(1.0, float(np.max(np.abs(problem.g))) if problem.g.size else 1.0)
    else:
        start = max(1.0, float(np.max(np.abs(problem.c))))
    z = np.full(nz, start)
    x = np.full(nz, start)
    y = np.zeros(ny)

    c = np.asarray(problem.c, dtype=float)
    b = np.asarray(problem.b, dtype=float)
    norm_b = 1.0 + np.linalg.norm(b)
    norm_c = 1.0 + np.linalg.norm(c)

    history = []
    cache = {}  # per-solve reusables (A^T A dense block / diagonal)
    reason = "max_iterations"
    mu = z @ x / nz
    r_primal = r_dual = np.inf
    it = 0

    for it in range(config.max_iterations + 1):
        Qz = problem.apply_Q(z)
        r_dual_vec = Qz + c - np.asarray(problem.B.T @ y) - x
        r_primal_vec = np.asarray(problem.B @ z) - b
        r_dual = float(np.linalg.norm(r_dual_vec))
        r_primal = float(np.linalg.norm(r_primal_vec))
        mu = float(z @ x) / nz

        if (
            r_primal / norm_b <= config.tol_primal
            and r_dual / norm_c <= config.tol_dual
            and mu <= config.tol_gap
        ):
            reason = "converged"
            history.append((it, mu, r_primal, r_dual, 0.0, 0.0))
            break
        if it == config.max_iterations:
            history.append((it, mu, r_primal, r_dual, 0.0, 0.0))
            break

        p1 = r_dual_vec  # c + Qz - B^T y - x~
        p2 = -r_primal_vec  # b - Bz

        try:
            newton = _make_newton(problem, z, x, config, cache=cache)
            # predictor: mu = 0, no second-order term
            dz_a, dy_a, dx_a = newton.solve(p1, p2, -z)
            a_p = min(1.0, _step_to_boundary(z, dz_a))
            a_d = min(1.0, _step_to_boundary(x, dx_a))
            mu_aff = float((z + a_p * dz_a) @ (x + a_d * dx_a)) / nz
            sigma = min(1.0, (max(mu_aff, 0.0) / mu) ** config.centering_exponent)
            # corrector with Mehrotra second-order term
            p3 = sigma * mu / x - z - dz_a * dx_a / x
            dz, dy, dx = newton.solve(p1, p2, p3)
            rel = _reduced_residual(problem, newton.diag, dz, dy, p1 - newton.diag * p3, p2)
            if not np.isfinite(rel) or rel > max(config.inner_tol * 1e3, 1e-6):
                raise SolverFailureError(
                    f"Newton solve residual {rel:.3e} above tolerance", residual=rel
                )
        except SolverFailureError as exc:
            exc.report = ConvergenceReport(
                iterations=it, reason="solver_failure", r_primal=r_primal,
                r_dual=r_dual, mu=mu, objective=problem.objective(z), history=history,
            )
            raise

        lam_p = min(1.0, config.eta * _step_to_boundary(z, dz))
        lam_d = min(1.0, config.eta * _step_to_boundary(x, dx))
        z = z + lam_p * dz
        y = y + lam_d * dy
        x = x + lam_d * dx
        history.append((it, mu, r_primal, r_dual, lam_p, lam_d))

        if not (np.all(z > 0) and np.all(x > 0) and np.all(np.isfinite(z))):
            raise SolverFailureError(
                "iterate left the strict interior",
                report=ConvergenceReport(
                    iterations=it, reason="solver_failure", r_primal=r_primal,
                    r_dual=r_dual, mu=mu, objective=float("nan"), history=history,
                ),
            )

    report = ConvergenceReport(
        iterations=it, reason=reason, r_primal=r_primal, r_dual=r_dual,
        mu=mu, objective=problem.objective(z), history=history,
    )

    if isinstance(problem, QpProblem):
        f = z[: problem.N].copy()
        worst = float(f.min()) if f.size else 0.0
        if worst < _NEGATIVE_CLAMP:
            raise SolverFailureError(
                f"reconstruction has negative pixel {worst:.3e}", report=report
            )
        np.clip(f, 0.0, None, out=f)
        return ImageGrid(problem.n, f), report
    return z, report


def reconstruct(A, g_tilde, alpha, config=None, ops=None):
    """Convenience composition build_qp -> pdip_solve on one system matrix."""
    if ops is None:
        ops = build_difference_operators(A.n)
    problem = build_qp(A, g_tilde, ops, alpha)
    return pdip_solve(problem, config)
