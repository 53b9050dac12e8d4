"""Implicit finite-volume residual and exact Jacobian for one time step.

The per-cell residual is kept in the dimensionless per-cell scaling

    f_K(tau) = (s(tau_K) - s_K^{n-1})
               + (dt / m_K) * sum_{sigma in E_K} F_{K,sigma}(tau),

with the two-point flux

    F_{K,sigma} = m_sigma (lam(s_K) g+ - lam(s_{K,sigma}) g-)
                  + A_sigma (u(tau_K) - u(tau_{K,sigma})),

where g = gravity . n_{K,sigma} and g+/g- are its positive/negative
parts (upwinded mobility).  No-flux boundary edges are simply omitted
from the sum; Dirichlet edges use the boundary value tau_{D,sigma}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .hydromodel import SPRIME_CAP, Parametrization, mobility, mobility_derivative
from .mesh import DIRICHLET, Mesh

__all__ = [
    "State",
    "StepProblem",
    "InitialField",
    "discretize_initial",
    "discretize_boundary",
    "edge_flux",
    "residual",
    "jacobian",
]


@dataclass
class State:
    """Per-cell tau vector at one time level plus Dirichlet boundary values."""

    tau: np.ndarray
    boundary_tau: dict  # edge id -> tau_D
    time_index: int = 0


@dataclass
class InitialField:
    """Piecewise-constant field: axis-aligned boxes with values plus a default.

    boxes is a list of (bounds, value) with bounds of shape (d, 2); boxes
    are assumed disjoint.
    """

    default: float
    boxes: list = field(default_factory=list)

    def cell_average(self, mesh: Mesh, k: int) -> float:
        if mesh.cell_boxes is None:
            # general meshes carry no polygon data; sample at the center
            x = mesh.cell_centers[k]
            for bounds, value in self.boxes:
                b = np.asarray(bounds, dtype=float)
                if np.all(x >= b[:, 0]) and np.all(x < b[:, 1]):
                    return value
            return self.default
        cb = mesh.cell_boxes[k]
        vol = mesh.cell_volumes[k]
        acc = self.default * vol
        for bounds, value in self.boxes:
            b = np.asarray(bounds, dtype=float)
            overlap = np.prod(
                np.clip(np.minimum(cb[:, 1], b[:, 1]) - np.maximum(cb[:, 0], b[:, 0]), 0.0, None)
            )
            acc += (value - self.default) * overlap
        return acc / vol


def discretize_initial(s0: InitialField | float, mesh: Mesh, param: Parametrization) -> State:
    """Cell-average s0 exactly over axis-aligned regions, then tau0 = s^{-1}(s0)."""
    if not isinstance(s0, InitialField):
        s0 = InitialField(default=float(s0))
    s_cells = np.array([s0.cell_average(mesh, k) for k in range(mesh.n_cells)])
    if np.any(s_cells < -1e-12) or np.any(s_cells > 1.0 + 1e-12):
        raise ValueError("initial saturation outside [0, 1]")
    s_cells = np.clip(s_cells, 0.0, 1.0)  # absorb intersection-area roundoff
    tau0 = np.asarray(param.sat_inverse(s_cells), dtype=float)
    return State(tau=tau0, boundary_tau={}, time_index=0)


def discretize_boundary(p_D: float, mesh: Mesh, param: Parametrization, t: float = 0.0) -> dict:
    """Dirichlet boundary values tau_{D,sigma} = p^{-1}(p_D) per Dirichlet edge.

    p_D is constant in the test cases, so the values are time-independent.
    """
    tau_d = float(param.tau_of_pressure(p_D))
    return {int(e): tau_d for e in mesh.dirichlet_edges}


@dataclass
class StepProblem:
    """Frozen data for one implicit step: mesh, laws, gravity, dt, history."""

    mesh: Mesh
    param: Parametrization
    gravity: np.ndarray
    dt: float
    s_prev: np.ndarray  # s(tau^{n-1}) per cell
    boundary_tau: dict  # Dirichlet edge id -> tau_D

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        self.gravity = np.asarray(self.gravity, dtype=float)
        mesh = self.mesh
        ie = mesh.interior_edges
        self._iK = mesh.edge_cells[ie, 0]
        self._iL = mesh.edge_cells[ie, 1]
        self._iA = mesh.edge_A[ie]
        self._im = mesh.edge_measure[ie]
        gK = mesh.edge_normal[ie] @ self.gravity  # g . n_{K,sigma}
        self._igp = np.clip(gK, 0.0, None)
        self._ign = np.clip(-gK, 0.0, None)

        de = np.array(sorted(self.boundary_tau), dtype=int)
        if de.size and not np.all(mesh.edge_tag[de] == DIRICHLET):
            raise ValueError("boundary_tau keys must be Dirichlet edges")
        self._dK = mesh.edge_cells[de, 0] if de.size else np.zeros(0, dtype=int)
        self._dA = mesh.edge_A[de] if de.size else np.zeros(0)
        self._dm = mesh.edge_measure[de] if de.size else np.zeros(0)
        gD = mesh.edge_normal[de] @ self.gravity if de.size else np.zeros(0)
        self._dgp = np.clip(gD, 0.0, None)
        self._dgn = np.clip(-gD, 0.0, None)
        tauD = np.array([self.boundary_tau[int(e)] for e in de])
        sD, uD, _, _ = self.param.eval(tauD) if de.size else (tauD,) * 4
        self._dtau = tauD
        self._ds = np.asarray(sD, dtype=float)
        self._du = np.asarray(uD, dtype=float)
        self._dlam = np.asarray(mobility(self.param.model, self._ds), dtype=float)

    def _cell_fields(self, tau):
        s, u, s_p, u_p = self.param.eval(np.asarray(tau, dtype=float))
        s_p = np.where(np.isfinite(s_p), np.minimum(s_p, SPRIME_CAP), SPRIME_CAP)
        lam = mobility(self.param.model, s)
        lamp = mobility_derivative(self.param.model, s)
        return s, u, s_p, u_p, lam, lamp


def edge_flux(problem: StepProblem, tau_K: float, tau_Ksig: float, edge_id: int, from_cell: int) -> float:
    """Flux F_{K,sigma} through one edge, outward w.r.t. from_cell."""
    mesh = problem.mesh
    n = mesh.normal_wrt(edge_id, from_cell)
    g = float(n @ problem.gravity)
    m = mesh.edge_measure[edge_id]
    A = mesh.edge_A[edge_id]
    model = problem.param.model
    sK, uK, _, _ = problem.param.eval(tau_K)
    sN, uN, _, _ = problem.param.eval(tau_Ksig)
    return float(
        m * (mobility(model, sK) * max(g, 0.0) - mobility(model, sN) * max(-g, 0.0))
        + A * (uK - uN)
    )


def residual(problem: StepProblem, tau) -> np.ndarray:
    """Per-cell residual vector f(tau)."""
    tau = np.asarray(tau, dtype=float)
    mesh = problem.mesh
    s, u, _, _, lam, _ = problem._cell_fields(tau)
    flux = np.zeros(mesh.n_cells)

    iK, iL = problem._iK, problem._iL
    F = problem._im * (lam[iK] * problem._igp - lam[iL] * problem._ign) + problem._iA * (
        u[iK] - u[iL]
    )
    np.add.at(flux, iK, F)
    np.add.at(flux, iL, -F)

    dK = problem._dK
    if dK.size:
        Fd = problem._dm * (lam[dK] * problem._dgp - problem._dlam * problem._dgn) + problem._dA * (
            u[dK] - problem._du
        )
        np.add.at(flux, dK, Fd)

    return (s - problem.s_prev) + problem.dt / mesh.cell_volumes * flux


def jacobian(problem: StepProblem, tau) -> sp.csr_matrix:
    """Exact sparse Jacobian of the residual (CSR layout).

    Diagonal: s'(tau_K) + (dt/m_K) sum_sigma (m_sigma g+ lam'(s_K) s'(s_K)
    + A_sigma u'(tau_K)); off-diagonal (row L, column K, sigma = K|L):
    -(dt/m_L)(m_sigma g+_{K,sigma} lam'(s_K) s'(tau_K) + A_sigma u'(tau_K)).
    Dirichlet edges contribute only to the diagonal.
    """
    tau = np.asarray(tau, dtype=float)
    mesh = problem.mesh
    n = mesh.n_cells
    _, _, s_p, u_p, _, lamp = problem._cell_fields(tau)
    w = lamp * s_p  # d lam(s(tau))/d tau

    diag = s_p.copy()
    rows, cols, vals = [], [], []

    iK, iL = problem._iK, problem._iL
    # derivative of F_{K,sigma} w.r.t. tau_K (upwind g+ side) and tau_L
    dFK = problem._im * problem._igp * w[iK] + problem._iA * u_p[iK]
    dFL = problem._im * problem._ign * w[iL] + problem._iA * u_p[iL]
    invK = problem.dt / mesh.cell_volumes[iK]
    invL = problem.dt / mesh.cell_volumes[iL]
    np.add.at(diag, iK, invK * dFK)
    np.add.at(diag, iL, invL * dFL)
    rows.append(iK)
    cols.append(iL)
    vals.append(-invK * dFL)
    rows.append(iL)
    cols.append(iK)
    vals.append(-invL * dFK)

    dKc = problem._dK
    if dKc.size:
        dFd = problem._dm * problem._dgp * w[dKc] + problem._dA * u_p[dKc]
        np.add.at(diag, dKc, problem.dt / mesh.cell_volumes[dKc] * dFd)

    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    J = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return J.tocsr()
