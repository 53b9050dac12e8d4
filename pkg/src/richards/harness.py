"""Experiment configuration, presets, time marching, sweeps, and file output.

The two presets reproduce the benchmark set-ups at desk scale:

* test1 — injection through part of the top boundary of the unit square
  under gravity (Dirichlet p_D = 1 on {x1 in (0, 0.3), x2 = 1}, no-flux
  elsewhere, s0 = 1e-6, T = 0.7, dt = 0.01);
* test2 — redistribution of a saturated quadrant with a fully no-flux
  boundary and no gravity (beta = 4, T = 1e5, dt = 1e3), used for the
  mass-conservation comparison.

Iteration-count comparisons against published figures are ordinal only:
the rectangular desk meshes replace the original Voronoi meshes.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import Trajectory, linf_l1_error, mass_error
from .hydromodel import BrooksCoreyModel, make_parametrization
from .mesh import DIRICHLET, Mesh, build_rect_mesh, load_mesh
from .newton import NewtonConfig, newton_solve
from .scheme import InitialField, StepProblem, discretize_boundary, discretize_initial
from .vtkio import write_vtk

__all__ = [
    "RunConfig",
    "RunResult",
    "ConfigError",
    "EPS_REF_TEST1",
    "EPS_REF_TEST2",
    "SUMMARY_HEADER",
    "preset_test1",
    "preset_test2",
    "build_mesh",
    "run",
    "sweep",
    "write_outputs",
    "fmt",
]

# Reference tolerances for in-process reference solutions.  The raw
# (unweighted) residual 1-norm on the 20x20 injection case has a
# double-precision floor near 1.3e-14, which eps = 1e-12 (tolerance
# eps*dt = 1e-14) sits below; 1e-10 is the tightest decade that
# converges at every step.
EPS_REF_TEST1 = 1e-10
EPS_REF_TEST2 = 1e-14

SUMMARY_HEADER = (
    "case,formulation,beta,p_b,eta_mode,eps,mesh,dt,steps,mean_newton_iters,"
    "total_newton_iters,err_s,err_u,mass_err,wall_ms"
)


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    case: str  # "test1" | "test2" | "custom"
    formulation: str  # "tau" | "u"
    beta: float
    dt: float
    t_end: float
    eps: float
    p_b: float = -1e-2
    eta_mode: str = "derived"
    mesh: str = "20x20"  # "NXxNY" or "file:PATH"
    gravity: tuple = (0.0, 0.0)
    s0_default: float = 1e-6
    s0_boxes: list = field(default_factory=list)  # [(bounds (d,2), value)]
    dirichlet_box: list | None = None  # bounds (d,2) selecting boundary x_sigma
    p_dirichlet: float | None = None
    adaptive_dt: bool = False
    snapshot_times: list = field(default_factory=list)
    out_dir: str | None = None

    def __post_init__(self):
        if self.formulation not in ("tau", "u"):
            raise ConfigError(f"unknown formulation {self.formulation!r}")
        if not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if not (self.dt > 0 and self.t_end >= 0):
            raise ConfigError(f"need dt > 0 and t_end >= 0, got {self.dt}, {self.t_end}")
        ratio = self.t_end / self.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError(f"t_end/dt = {ratio!r} is not integral")
        if (self.dirichlet_box is None) != (self.p_dirichlet is None):
            raise ConfigError("dirichlet_box and p_dirichlet must be given together")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class RunResult:
    config: RunConfig
    trajectory: Trajectory
    iters_per_step: list
    converged: bool
    failed_step: int | None
    wall_ms: float
    mass_err: float | None = None
    err_s: float | None = None
    err_u: float | None = None

    @property
    def total_iters(self) -> int:
        return int(sum(self.iters_per_step))

    @property
    def mean_iters(self) -> float:
        return self.total_iters / len(self.iters_per_step) if self.iters_per_step else 0.0


def preset_test1(beta: float, eps: float, formulation: str = "tau",
                 mesh_size: str = "20x20") -> RunConfig:
    """Gravity-driven injection into a dry unit square."""
    return RunConfig(
        case="test1",
        formulation=formulation,
        beta=beta,
        p_b=-1e-2,
        dt=0.01,
        t_end=0.7,
        eps=eps,
        mesh=mesh_size,
        gravity=(0.0, -1.0),
        s0_default=1e-6,
        dirichlet_box=[(0.0, 0.3), (1.0, 1.0)],
        p_dirichlet=1.0,
    )


def preset_test2(eps: float, formulation: str = "tau", mesh_size: str = "20x20") -> RunConfig:
    """Closed-box redistribution of a saturated quadrant, no gravity."""
    return RunConfig(
        case="test2",
        formulation=formulation,
        beta=4.0,
        p_b=-1e-2,
        dt=1e3,
        t_end=1e5,
        eps=eps,
        mesh=mesh_size,
        gravity=(0.0, 0.0),
        s0_default=1e-6,
        s0_boxes=[([(0.0, 0.5), (0.5, 1.0)], 0.5)],
    )


def build_mesh(config: RunConfig) -> Mesh:
    """Build or load the mesh and apply the Dirichlet boundary tagging."""
    spec = config.mesh
    if spec.startswith("file:"):
        mesh = load_mesh(spec[len("file:"):])
    else:
        try:
            nx, ny = (int(t) for t in spec.lower().split("x"))
        except ValueError as exc:
            raise ConfigError(f"bad mesh spec {spec!r}") from exc
        mesh = build_rect_mesh(nx, ny)
    if config.dirichlet_box is not None:
        box = np.asarray(config.dirichlet_box, dtype=float)
        if box.shape != (mesh.dim, 2):
            raise ConfigError(f"dirichlet_box shape {box.shape} does not match dim {mesh.dim}")
        tol = 1e-12

        def inside(x):
            return bool(np.all(x >= box[:, 0] - tol) and np.all(x <= box[:, 1] + tol))

        if mesh.retag_boundary(inside, DIRICHLET) == 0:
            raise ConfigError("dirichlet_box selects no boundary edges")
    return mesh


def run(config: RunConfig, mesh: Mesh | None = None, callback=None) -> RunResult:
    """March the implicit scheme over [0, t_end].

    In reproduction mode a non-converged Newton step aborts with the
    partial trajectory; with adaptive_dt the step is retried at dt/2
    (the time step doubles back after 5 consecutive converged steps,
    never above the configured dt).  The optional callback is forwarded
    to every Newton solve.
    """
    t0 = time.perf_counter()
    if mesh is None:
        mesh = build_mesh(config)
    model = BrooksCoreyModel(beta=config.beta, p_b=config.p_b, eta_mode=config.eta_mode)
    param = make_parametrization(config.formulation, model)
    s0 = InitialField(default=config.s0_default, boxes=list(config.s0_boxes))
    state = discretize_initial(s0, mesh, param)
    boundary_tau = (
        discretize_boundary(config.p_dirichlet, mesh, param)
        if config.p_dirichlet is not None
        else {}
    )
    gravity = np.asarray(config.gravity, dtype=float)[: mesh.dim]
    ncfg = NewtonConfig(eps=config.eps)

    times = [0.0]
    taus = [state.tau.copy()]
    reports = []
    iters = []
    converged, failed_step = True, None

    t, tau = 0.0, state.tau
    dt = config.dt
    easy_streak = 0
    step = 0
    while t < config.t_end - 1e-9 * config.dt:
        dt = min(dt, config.t_end - t)
        problem = StepProblem(
            mesh=mesh, param=param, gravity=gravity, dt=dt,
            s_prev=np.asarray(param.eval(tau)[0], dtype=float),
            boundary_tau=boundary_tau,
        )
        tau_new, report = newton_solve(problem, tau, ncfg, callback=callback)
        if not report.converged:
            if config.adaptive_dt and dt > 1e-12 * config.dt:
                dt *= 0.5
                easy_streak = 0
                continue
            reports.append(report)
            iters.append(report.iterations)
            converged, failed_step = False, step + 1
            break
        tau = tau_new
        t += dt
        step += 1
        times.append(t)
        taus.append(tau.copy())
        reports.append(report)
        iters.append(report.iterations)
        if config.adaptive_dt:
            easy_streak += 1
            if easy_streak >= 5 and dt < config.dt:
                dt = min(2.0 * dt, config.dt)
                easy_streak = 0

    # on failure the last report belongs to the aborted step and is not part
    # of the (shorter) trajectory
    traj = Trajectory(
        mesh=mesh, param=param,
        times=np.asarray(times), taus=taus,
        newton_reports=reports[: len(taus) - 1],
        boundary_tau=boundary_tau,
    )
    m_err = None
    if not boundary_tau and converged and len(taus) > 0:
        m_err = mass_error(traj)
    wall_ms = (time.perf_counter() - t0) * 1e3
    return RunResult(
        config=config, trajectory=traj, iters_per_step=iters,
        converged=converged, failed_step=failed_step,
        wall_ms=wall_ms, mass_err=m_err,
    )


def sweep(base_config: RunConfig, betas, epss, formulations,
          eps_ref: float = EPS_REF_TEST1, callback=None) -> list:
    """Reference run per beta (tau formulation at eps_ref), then the cross
    product over (beta, eps, formulation); failures are recorded rows, not
    exceptions.  Returns RunResults in deterministic order, references first.
    """
    results = []
    references = {}
    for beta in betas:
        ref_cfg = replace(base_config, beta=beta, eps=eps_ref, formulation="tau")
        mesh = build_mesh(ref_cfg)
        ref = run(ref_cfg, mesh=mesh, callback=callback)
        references[beta] = ref
        results.append(ref)
    for beta in betas:
        ref = references[beta]
        for formulation in formulations:
            for eps in epss:
                cfg = replace(base_config, beta=beta, eps=eps, formulation=formulation)
                res = run(cfg, mesh=build_mesh(cfg), callback=callback)
                if res.converged and ref.converged:
                    res.err_s = linf_l1_error(res.trajectory, ref.trajectory, "saturation")
                    res.err_u = linf_l1_error(res.trajectory, ref.trajectory, "kirchhoff")
                results.append(res)
    return results


def fmt(x) -> str:
    """17-significant-digit float formatting used in all CSV output."""
    if x is None:
        return ""
    return f"{x:.17g}"


def _config_echo(config: RunConfig) -> list:
    pairs = [
        ("case", config.case), ("formulation", config.formulation),
        ("beta", fmt(config.beta)), ("p_b", fmt(config.p_b)),
        ("eta_mode", config.eta_mode), ("eps", fmt(config.eps)),
        ("mesh", config.mesh), ("dt", fmt(config.dt)), ("t_end", fmt(config.t_end)),
        ("gravity", " ".join(fmt(g) for g in config.gravity)),
        ("s0_default", fmt(config.s0_default)),
        ("adaptive_dt", str(config.adaptive_dt).lower()),
    ]
    if config.p_dirichlet is not None:
        pairs.append(("p_dirichlet", fmt(config.p_dirichlet)))
        box = np.asarray(config.dirichlet_box, dtype=float)
        pairs.append(("dirichlet_box", " ".join(fmt(v) for v in box.ravel())))
    return [f"# {k} = {v}" for k, v in pairs]


def summary_row(result: RunResult) -> str:
    c = result.config
    return ",".join([
        c.case, c.formulation, fmt(c.beta), fmt(c.p_b), c.eta_mode, fmt(c.eps),
        c.mesh, fmt(c.dt), str(len(result.iters_per_step)),
        fmt(result.mean_iters), str(result.total_iters),
        fmt(result.err_s), fmt(result.err_u), fmt(result.mass_err),
        fmt(result.wall_ms),
    ])


def write_outputs(results, config: RunConfig, out_dir) -> list:
    """Write summary.csv, residuals.csv, and optional VTK snapshots.

    results may be a single RunResult or a list (sweep); residuals and
    snapshots are written for the first result only in the sweep case.
    Returns the list of created paths.
    """
    import os

    if isinstance(results, RunResult):
        results = [results]
    os.makedirs(out_dir, exist_ok=True)
    created = []

    path = os.path.join(out_dir, "summary.csv")
    with open(path, "w") as f:
        for ln in _config_echo(config):
            f.write(ln + "\n")
        f.write(SUMMARY_HEADER + "\n")
        for res in results:
            f.write(summary_row(res) + "\n")
    created.append(path)

    path = os.path.join(out_dir, "residuals.csv")
    with open(path, "w") as f:
        f.write("step,iter,residual\n")
        if results:
            for n, rep in enumerate(results[0].trajectory.newton_reports, start=1):
                for k, r in enumerate(rep.residual_history):
                    f.write(f"{n},{k},{fmt(r)}\n")
    created.append(path)

    if results and config.snapshot_times:
        traj = results[0].trajectory
        for t_snap in config.snapshot_times:
            idx = int(np.argmin(np.abs(traj.times - t_snap)))
            s, u, _, _ = traj.param.eval(traj.taus[idx])
            name = f"snapshot_t{t_snap:g}.vtk"
            vtk_path = os.path.join(out_dir, name)
            write_vtk(
                traj.mesh,
                {"saturation": np.asarray(s, dtype=float),
                 "kirchhoff_u": np.asarray(u, dtype=float)},
                vtk_path,
            )
            created.append(vtk_path)
    return created
