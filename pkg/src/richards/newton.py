"""Newton iteration, sparse direct solves, and the M-matrix analysis toolkit.

The nonlinear step problem is solved by plain Newton (no damping, line
search, or trust region) with the residual-based stopping rule
||F(tau^k)||_1 <= eps * dt.  The Jacobian of the scheme is a column-wise
(delta, Delta)-M-matrix for non-degenerate parametrizations, which yields
a uniform bound on ||J^{-1}||_1; the analysis utilities here verify the
conditions and compute the bound on concrete matrices.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh
from .scheme import StepProblem, jacobian, residual

__all__ = [
    "NewtonConfig",
    "NewtonReport",
    "MMatrixReport",
    "SingularJacobianError",
    "newton_solve",
    "linear_solve",
    "mmatrix_analyze",
    "jacobian_bounds",
    "inverse_norm_bound",
]


class SingularJacobianError(RuntimeError):
    """Raised when the direct factorization fails; carries the state."""

    def __init__(self, message, tau=None):
        super().__init__(message)
        self.tau = None if tau is None else np.array(tau)


@dataclass
class NewtonConfig:
    eps: float
    max_iter: int = 100

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class NewtonReport:
    iterations: int
    residual_history: list
    converged: bool
    final_residual: float


def linear_solve(A, b) -> np.ndarray:
    """Direct sparse LU solve; deterministic for fixed input."""
    try:
        lu = spla.splu(sp.csc_matrix(A))
        return lu.solve(np.asarray(b, dtype=float))
    except RuntimeError as exc:  # singular factorization
        raise SingularJacobianError(f"sparse LU factorization failed: {exc}") from exc


def newton_solve(problem: StepProblem, tau_init, config: NewtonConfig, callback=None):
    """Plain Newton on the step residual; returns (tau, NewtonReport).

    tau_init is the previous time-step solution.  The optional callback is
    invoked as callback(k, tau, res_norm, J) at every iterate where the
    Jacobian is assembled.  A non-converged step is reported, not raised;
    a singular linear solve raises SingularJacobianError with the state.
    """
    tau = np.array(tau_init, dtype=float)
    tol = config.eps * problem.dt
    f = residual(problem, tau)
    res = float(np.sum(np.abs(f)))  # raw 1-norm, no volume weights
    history = [res]
    for k in range(config.max_iter):
        if res <= tol:
            break
        if not np.isfinite(res):
            break
        J = jacobian(problem, tau)
        if callback is not None:
            callback(k, tau, res, J)
        try:
            delta = linear_solve(J, f)
        except SingularJacobianError as exc:
            raise SingularJacobianError(str(exc), tau=tau) from exc
        tau -= delta
        f = residual(problem, tau)
        res = float(np.sum(np.abs(f)))
        history.append(res)
    converged = bool(np.isfinite(res) and res <= tol)
    return tau, NewtonReport(
        iterations=len(history) - 1,
        residual_history=history,
        converged=converged,
        final_residual=res,
    )


# -- M-matrix analysis ---------------------------------------------------------


@dataclass
class MMatrixReport:
    is_column_wise: bool
    delta: float
    Delta: float
    delta_observed: float  # min diagonal entry
    Delta_observed: float  # max diagonal entry
    strong_columns: np.ndarray  # I_delta: columns with column sum >= delta
    path_lengths: dict  # column outside I_delta -> shortest path length (or None)
    path_cover: dict  # column outside I_delta -> node list of a transmissive path
    max_path_length: int  # script-L over covered columns (0 when I_delta covers all)
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.is_column_wise


def mmatrix_analyze(A, delta: float, Delta: float, atol_scale: float = 1e-9) -> MMatrixReport:
    """Check the column-wise (delta, Delta)-M-matrix conditions on A.

    Verifies sign pattern, diagonal bounds, nonnegative column sums, a
    nonempty strongly-dominant column set I_delta, and for every column
    outside I_delta a delta-transmissive path to I_delta (breadth-first
    search on the arcs i -> j with A[j, i] < -delta, i.e. paths in A^T).
    Small roundoff slack atol = atol_scale * Delta is allowed.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    atol = atol_scale * max(Delta, 1.0)
    violations = []

    diag = A.diagonal()
    d_obs, D_obs = float(diag.min()), float(diag.max())
    if d_obs < delta - atol:
        violations.append(f"diagonal entry {d_obs!r} below delta = {delta!r}")
    if D_obs > Delta + atol:
        violations.append(f"diagonal entry {D_obs!r} above Delta = {Delta!r}")

    coo = A.tocoo()
    off = coo.row != coo.col
    if np.any(coo.data[off] > atol):
        worst = float(coo.data[off].max())
        violations.append(f"positive off-diagonal entry {worst!r}")

    colsum = np.asarray(A.sum(axis=0)).ravel()
    if np.any(colsum < -atol):
        violations.append(f"negative column sum {float(colsum.min())!r}")

    strong = np.flatnonzero(colsum >= delta - atol)
    path_lengths: dict = {}
    path_cover: dict = {}
    max_len = 0
    if strong.size == 0:
        violations.append("I_delta is empty")
    else:
        # reverse BFS from I_delta along arcs i -> j with A[j, i] < -delta:
        # predecessors of j are columns i with A[j, i] < -delta, i.e. the
        # strictly sub-(-delta) entries of row j.
        At = A.tocsc()  # column i of A = row i of A^T
        dist = np.full(n, -1, dtype=int)
        parent = np.full(n, -1, dtype=int)
        dist[strong] = 0
        queue = deque(int(j) for j in strong)
        # adjacency: for node j, predecessors i with A[j, i] < -delta
        Arows = A.tocsr()
        while queue:
            j = queue.popleft()
            row = Arows.getrow(j)
            for i, val in zip(row.indices, row.data):
                if i != j and val < -(delta - atol) and dist[i] < 0:
                    dist[i] = dist[j] + 1
                    parent[i] = j
                    queue.append(int(i))
        for i in range(n):
            if colsum[i] >= delta - atol:
                continue
            if dist[i] < 0:
                path_lengths[i] = None
                path_cover[i] = None
                violations.append(f"column {i}: no delta-transmissive path to I_delta")
            else:
                path = [i]
                while parent[path[-1]] >= 0:
                    path.append(int(parent[path[-1]]))
                path_lengths[i] = int(dist[i])
                path_cover[i] = path
                max_len = max(max_len, int(dist[i]))

    return MMatrixReport(
        is_column_wise=not violations,
        delta=delta,
        Delta=Delta,
        delta_observed=d_obs,
        Delta_observed=D_obs,
        strong_columns=strong,
        path_lengths=path_lengths,
        path_cover=path_cover,
        max_path_length=max_len,
        violations=violations,
    )


def jacobian_bounds(mesh: Mesh, dt: float, alpha_low: float, alpha_high: float,
                    lam_prime_max: float, gravity=None) -> tuple[float, float]:
    """(delta, Delta) bracketing the scheme Jacobian's diagonal.

    delta = alpha_low * min(1, dt * min_K min_{sigma in E_K} A_sigma / m_K),
    Delta = alpha_high * max_K (1 + (dt/m_K) sum_{sigma in E_K}
            (m_sigma g+ lam_prime_max + A_sigma)).
    """
    if not alpha_low > 0:
        raise ValueError("alpha_low must be positive")
    g = np.zeros(mesh.dim) if gravity is None else np.asarray(gravity, dtype=float)
    min_ratio = np.inf
    max_load = 0.0
    for k in range(mesh.n_cells):
        eids = mesh.cell_edge_ids[k]
        a_min = min(mesh.edge_A[e] for e in eids)
        min_ratio = min(min_ratio, a_min / mesh.cell_volumes[k])
        load = 0.0
        for e in eids:
            gp = max(float(mesh.normal_wrt(e, k) @ g), 0.0)
            load += mesh.edge_measure[e] * gp * lam_prime_max + mesh.edge_A[e]
        max_load = max(max_load, 1.0 + dt / mesh.cell_volumes[k] * load)
    delta = alpha_low * min(1.0, dt * min_ratio)
    Delta = alpha_high * max_load
    return delta, Delta


def inverse_norm_bound(delta: float, Delta: float, path_length: int) -> float:
    """c_{L+1} = ((Delta/delta)^(L+1) - 1) / (Delta - delta).

    A valid bound on ||A^{-1}||_inf for row-wise (resp. ||A^{-1}||_1 for
    column-wise) (delta, Delta)-M-matrices whose transmissive paths have
    length at most L.  The degenerate case delta == Delta returns the
    limit (L+1)/Delta of c_{L+1}.
    """
    if not (0 < delta <= Delta):
        raise ValueError(f"need 0 < delta <= Delta, got {delta}, {Delta}")
    if path_length < 0:
        raise ValueError("path length must be >= 0")
    p = path_length + 1
    if delta == Delta:
        return p / Delta
    return ((Delta / delta) ** p - 1.0) / (Delta - delta)
