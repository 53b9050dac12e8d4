"""Admissible finite-volume meshes with two-point transmissibilities.

A mesh is admissible when the segment joining neighboring cell centers is
orthogonal to their shared edge, so that the two-point flux approximation
is consistent.  Transmissibilities are A_sigma = m_sigma / d_sigma for
interior edges and m_sigma / d_{K,sigma} for boundary edges.

Structured rectangular (and 1D interval) meshes are built in; general
orthogonal meshes (e.g. Voronoi) are loaded from a line-oriented text
format, see :func:`load_mesh`.  Meshes are immutable after construction
apart from boundary retagging, which must happen before any assembly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Cell",
    "Edge",
    "Mesh",
    "ValidationReport",
    "MeshError",
    "INTERIOR",
    "DIRICHLET",
    "NOFLUX",
    "build_rect_mesh",
    "build_interval_mesh",
    "load_mesh",
    "save_mesh",
    "validate_admissibility",
    "discrete_h1_inner",
]

INTERIOR, DIRICHLET, NOFLUX = 0, 1, 2
_TAG_NAMES = {INTERIOR: "interior", DIRICHLET: "dirichlet", NOFLUX: "noflux"}

ORTHO_TOL = 1e-10  # angle tolerance for the orthogonality condition [rad]
TILE_TOL = 1e-12  # relative tolerance for the tiling and closure identities


class MeshError(ValueError):
    """Raised on malformed mesh files or admissibility violations."""


@dataclass(frozen=True)
class Cell:
    id: int
    volume: float
    center: np.ndarray
    edge_ids: tuple[int, ...]


@dataclass(frozen=True)
class Edge:
    id: int
    measure: float
    tag: int  # INTERIOR | DIRICHLET | NOFLUX
    cells: tuple[int, ...]  # (K, L) interior, (K,) boundary
    d: tuple[float, ...]  # (d_K, d_L) interior, (d_K,) boundary
    A: float
    normal: np.ndarray  # unit normal outward w.r.t. cells[0]
    x_sigma: np.ndarray | None  # boundary only

    @property
    def is_boundary(self) -> bool:
        return self.tag != INTERIOR


@dataclass
class Mesh:
    """Array-oriented admissible mesh.

    Per-edge arrays are indexed by edge id; ``edge_cells[:, 1]`` is -1 for
    boundary edges and ``edge_x`` holds the projected center x_sigma there.
    ``cell_boxes`` carries the axis-aligned cell bounds for built
    structured meshes (None for loaded meshes).
    """

    dim: int
    cell_volumes: np.ndarray  # (n,)
    cell_centers: np.ndarray  # (n, d)
    edge_measure: np.ndarray  # (m,)
    edge_cells: np.ndarray  # (m, 2) int
    edge_d: np.ndarray  # (m, 2); d_L is nan on boundary edges
    edge_A: np.ndarray  # (m,)
    edge_normal: np.ndarray  # (m, d), outward w.r.t. edge_cells[:, 0]
    edge_x: np.ndarray  # (m, d); nan on interior edges
    edge_tag: np.ndarray  # (m,) int
    bbox: np.ndarray  # (d, 2)
    cell_boxes: np.ndarray | None = None  # (n, d, 2) for structured meshes
    cell_edge_ids: list = field(default_factory=list)

    def __post_init__(self):
        if not self.cell_edge_ids:
            n = len(self.cell_volumes)
            adj = [[] for _ in range(n)]
            for e in range(len(self.edge_measure)):
                adj[self.edge_cells[e, 0]].append(e)
                if self.edge_cells[e, 1] >= 0:
                    adj[self.edge_cells[e, 1]].append(e)
            self.cell_edge_ids = adj

    # -- basic queries -------------------------------------------------------

    @property
    def n_cells(self) -> int:
        return len(self.cell_volumes)

    @property
    def n_edges(self) -> int:
        return len(self.edge_measure)

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_tag == INTERIOR)

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_tag != INTERIOR)

    @property
    def dirichlet_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_tag == DIRICHLET)

    @property
    def domain_measure(self) -> float:
        return float(np.prod(self.bbox[:, 1] - self.bbox[:, 0]))

    def cell(self, i: int) -> Cell:
        return Cell(
            id=i,
            volume=float(self.cell_volumes[i]),
            center=self.cell_centers[i].copy(),
            edge_ids=tuple(self.cell_edge_ids[i]),
        )

    def edge(self, e: int) -> Edge:
        interior = self.edge_tag[e] == INTERIOR
        return Edge(
            id=e,
            measure=float(self.edge_measure[e]),
            tag=int(self.edge_tag[e]),
            cells=tuple(int(c) for c in self.edge_cells[e] if c >= 0),
            d=tuple(float(x) for x in self.edge_d[e][: 2 if interior else 1]),
            A=float(self.edge_A[e]),
            normal=self.edge_normal[e].copy(),
            x_sigma=None if interior else self.edge_x[e].copy(),
        )

    @property
    def cells(self) -> list[Cell]:
        return [self.cell(i) for i in range(self.n_cells)]

    @property
    def edges(self) -> list[Edge]:
        return [self.edge(e) for e in range(self.n_edges)]

    def normal_wrt(self, e: int, k: int) -> np.ndarray:
        """Unit normal of edge e outward w.r.t. cell k."""
        if self.edge_cells[e, 0] == k:
            return self.edge_normal[e]
        if self.edge_cells[e, 1] == k:
            return -self.edge_normal[e]
        raise ValueError(f"edge {e} is not incident to cell {k}")

    def retag_boundary(self, predicate, tag: int) -> int:
        """Tag boundary edges whose x_sigma satisfies predicate.

        Must be called before any assembly; returns the number of retagged
        edges.
        """
        count = 0
        for e in self.boundary_edges:
            if predicate(self.edge_x[e]):
                self.edge_tag[e] = tag
                count += 1
        return count


# -- constructors ------------------------------------------------------------


def build_rect_mesh(nx: int, ny: int, domain=((0.0, 1.0), (0.0, 1.0))) -> Mesh:
    """Uniform rectangular mesh of an axis-aligned box; boundary tagged NoFlux.

    Rectangles satisfy the orthogonality condition exactly, with centers at
    the centroids.
    """
    if nx < 1 or ny < 1:
        raise MeshError(f"nx and ny must be >= 1, got {nx}, {ny}")
    (x0, x1), (y0, y1) = domain
    if not (x1 > x0 and y1 > y0):
        raise MeshError(f"degenerate domain {domain}")
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny

    def cid(i, j):
        return j * nx + i

    n = nx * ny
    vol = np.full(n, hx * hy)
    centers = np.empty((n, 2))
    boxes = np.empty((n, 2, 2))
    for j in range(ny):
        for i in range(nx):
            c = cid(i, j)
            centers[c] = (x0 + (i + 0.5) * hx, y0 + (j + 0.5) * hy)
            boxes[c, 0] = (x0 + i * hx, x0 + (i + 1) * hx)
            boxes[c, 1] = (y0 + j * hy, y0 + (j + 1) * hy)

    measure, cells, dists, normals, xs, tags = [], [], [], [], [], []

    def add_interior(k, l, m, d_half, normal):
        measure.append(m)
        cells.append((k, l))
        dists.append((d_half, d_half))
        normals.append(normal)
        xs.append((np.nan, np.nan))
        tags.append(INTERIOR)

    def add_boundary(k, m, dk, x_sigma, normal):
        measure.append(m)
        cells.append((k, -1))
        dists.append((dk, np.nan))
        normals.append(normal)
        xs.append(x_sigma)
        tags.append(NOFLUX)

    for j in range(ny):  # vertical interior edges (normal +x)
        for i in range(nx - 1):
            add_interior(cid(i, j), cid(i + 1, j), hy, hx / 2, (1.0, 0.0))
    for j in range(ny - 1):  # horizontal interior edges (normal +y)
        for i in range(nx):
            add_interior(cid(i, j), cid(i, j + 1), hx, hy / 2, (0.0, 1.0))
    for j in range(ny):  # left/right boundary
        yc = y0 + (j + 0.5) * hy
        add_boundary(cid(0, j), hy, hx / 2, (x0, yc), (-1.0, 0.0))
        add_boundary(cid(nx - 1, j), hy, hx / 2, (x1, yc), (1.0, 0.0))
    for i in range(nx):  # bottom/top boundary
        xc = x0 + (i + 0.5) * hx
        add_boundary(cid(i, 0), hx, hy / 2, (xc, y0), (0.0, -1.0))
        add_boundary(cid(i, ny - 1), hx, hy / 2, (xc, y1), (0.0, 1.0))

    dists = np.asarray(dists)
    A = np.asarray(measure) / np.where(np.isnan(dists[:, 1]), dists[:, 0], dists.sum(axis=1))
    return Mesh(
        dim=2,
        cell_volumes=vol,
        cell_centers=centers,
        edge_measure=np.asarray(measure, dtype=float),
        edge_cells=np.asarray(cells, dtype=int),
        edge_d=dists,
        edge_A=A,
        edge_normal=np.asarray(normals, dtype=float),
        edge_x=np.asarray(xs, dtype=float),
        edge_tag=np.asarray(tags, dtype=int),
        bbox=np.array([[x0, x1], [y0, y1]]),
        cell_boxes=boxes,
    )


def build_interval_mesh(nx: int, domain=(0.0, 1.0)) -> Mesh:
    """Uniform 1D mesh; edges are points with measure 1."""
    if nx < 1:
        raise MeshError(f"nx must be >= 1, got {nx}")
    x0, x1 = domain
    if not x1 > x0:
        raise MeshError(f"degenerate domain {domain}")
    h = (x1 - x0) / nx
    centers = (x0 + (np.arange(nx) + 0.5) * h)[:, None]
    boxes = np.stack([centers[:, 0] - h / 2, centers[:, 0] + h / 2], axis=-1)[:, None, :]

    measure, cells, dists, normals, xs, tags = [], [], [], [], [], []
    for i in range(nx - 1):
        measure.append(1.0)
        cells.append((i, i + 1))
        dists.append((h / 2, h / 2))
        normals.append((1.0,))
        xs.append((np.nan,))
        tags.append(INTERIOR)
    for k, xsig, nrm in ((0, x0, -1.0), (nx - 1, x1, 1.0)):
        measure.append(1.0)
        cells.append((k, -1))
        dists.append((h / 2, np.nan))
        normals.append((nrm,))
        xs.append((xsig,))
        tags.append(NOFLUX)

    dists = np.asarray(dists)
    A = np.asarray(measure) / np.where(np.isnan(dists[:, 1]), dists[:, 0], dists.sum(axis=1))
    return Mesh(
        dim=1,
        cell_volumes=np.full(nx, h),
        cell_centers=centers,
        edge_measure=np.asarray(measure, dtype=float),
        edge_cells=np.asarray(cells, dtype=int),
        edge_d=dists,
        edge_A=A,
        edge_normal=np.asarray(normals, dtype=float),
        edge_x=np.asarray(xs, dtype=float),
        edge_tag=np.asarray(tags, dtype=int),
        bbox=np.array([[x0, x1]]),
        cell_boxes=boxes,
    )


# -- validation --------------------------------------------------------------


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, msg: str):
        self.violations.append(msg)

    def __str__(self):
        return "admissible" if self.ok else "\n".join(self.violations)


def validate_admissibility(mesh: Mesh) -> ValidationReport:
    """Check every admissibility invariant, reporting offending entities.

    Orthogonality is verified through the distance identities
    |x_K - x_L| = d_K + d_L and |x_K - x_sigma| = d_K (which fail when the
    center segment is not orthogonal to the edge) together with the
    per-cell closed-surface identity sum_sigma m_sigma n_{K,sigma} = 0.
    """
    rep = ValidationReport()
    for i, v in enumerate(mesh.cell_volumes):
        if not v > 0:
            rep.add(f"cell {i}: non-positive volume {v}")
    total = float(mesh.cell_volumes.sum())
    dom = mesh.domain_measure
    if abs(total - dom) > TILE_TOL * max(dom, 1.0):
        rep.add(f"cells do not tile the domain: sum m_K = {total!r}, box measure = {dom!r}")

    for e in range(mesh.n_edges):
        m = mesh.edge_measure[e]
        if not m > 0:
            rep.add(f"edge {e}: non-positive measure {m}")
            continue
        k, l = mesh.edge_cells[e]
        dk = mesh.edge_d[e, 0]
        if not dk > 0:
            rep.add(f"edge {e}: non-positive distance d_K = {dk}")
            continue
        if l >= 0:
            dl = mesh.edge_d[e, 1]
            if not dl > 0:
                rep.add(f"edge {e}: non-positive distance d_L = {dl}")
                continue
            gap = np.linalg.norm(mesh.cell_centers[k] - mesh.cell_centers[l])
            if abs(gap - (dk + dl)) > ORTHO_TOL * max(gap, 1.0):
                rep.add(
                    f"edge {e} = {k}|{l}: center distance {gap!r} != d_K + d_L = "
                    f"{dk + dl!r} (non-orthogonal center pair)"
                )
            a_ref = m / (dk + dl)
        else:
            gap = np.linalg.norm(mesh.cell_centers[k] - mesh.edge_x[e])
            if abs(gap - dk) > ORTHO_TOL * max(gap, 1.0):
                rep.add(
                    f"edge {e} (boundary of {k}): |x_K - x_sigma| = {gap!r} != d_K = {dk!r}"
                )
            a_ref = m / dk
        if abs(mesh.edge_A[e] - a_ref) > 1e-12 * a_ref:
            rep.add(
                f"edge {e}: transmissibility {mesh.edge_A[e]!r} != m_sigma/d = {a_ref!r}"
            )
        nrm = np.linalg.norm(mesh.edge_normal[e])
        if abs(nrm - 1.0) > 1e-12:
            rep.add(f"edge {e}: normal not unit (|n| = {nrm!r})")
        if l >= 0:
            direction = mesh.cell_centers[l] - mesh.cell_centers[k]
        else:
            direction = mesh.edge_x[e] - mesh.cell_centers[k]
        dn = np.linalg.norm(direction)
        if dn > 0:
            cross = np.linalg.norm(
                direction / dn - mesh.edge_normal[e] / max(nrm, 1e-300)
            )
            if cross > ORTHO_TOL:
                rep.add(f"edge {e}: normal not aligned with the center segment")

    # per-cell closed-surface identity (implies div-nulle for constant g)
    for kk in range(mesh.n_cells):
        acc = np.zeros(mesh.dim)
        scale = 0.0
        for e in mesh.cell_edge_ids[kk]:
            acc += mesh.edge_measure[e] * mesh.normal_wrt(e, kk)
            scale += mesh.edge_measure[e]
        if np.linalg.norm(acc) > TILE_TOL * scale:
            rep.add(
                f"cell {kk}: surface closure violated, |sum m_sigma n| = "
                f"{np.linalg.norm(acc)!r}"
            )
    return rep


# -- discrete H1 inner product ----------------------------------------------


def discrete_h1_inner(mesh: Mesh, v, w, v_bnd=None, w_bnd=None) -> float:
    """Edge-sum bilinear form of the discrete gradient reconstruction.

    sum over interior sigma=K|L of A_sigma (v_K - v_L)(w_K - w_L), plus
    A_sigma (v_K - v_sigma)(w_K - w_sigma) over boundary edges that carry a
    boundary value.  v_bnd/w_bnd map edge id -> value; edges absent from
    both contribute nothing (no-flux edges).
    """
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if v.shape != (mesh.n_cells,) or w.shape != (mesh.n_cells,):
        raise ValueError(
            f"expected cell vectors of length {mesh.n_cells}, got {v.shape} and {w.shape}"
        )
    v_bnd = v_bnd or {}
    w_bnd = w_bnd or {}
    if set(v_bnd) != set(w_bnd):
        raise ValueError("v and w must carry boundary values on the same edges")
    ie = mesh.interior_edges
    kk, ll = mesh.edge_cells[ie, 0], mesh.edge_cells[ie, 1]
    total = float(np.sum(mesh.edge_A[ie] * (v[kk] - v[ll]) * (w[kk] - w[ll])))
    for e, vb in v_bnd.items():
        k = mesh.edge_cells[e, 0]
        total += mesh.edge_A[e] * (v[k] - vb) * (w[k] - w_bnd[e])
    return total


# -- text format -------------------------------------------------------------


def save_mesh(mesh: Mesh, path):
    """Write the line-oriented ASCII format (see load_mesh)."""
    lines = [f"mesh d={mesh.dim} ncells={mesh.n_cells} nedges={mesh.n_edges}"]
    for i in range(mesh.n_cells):
        coords = " ".join(f"{c:.17g}" for c in mesh.cell_centers[i])
        lines.append(f"cell {i} {mesh.cell_volumes[i]:.17g} {coords}")
    for e in range(mesh.n_edges):
        k, l = mesh.edge_cells[e]
        m = mesh.edge_measure[e]
        if l >= 0:
            lines.append(
                f"edge {e} {m:.17g} interior {k} {l} "
                f"{mesh.edge_d[e, 0]:.17g} {mesh.edge_d[e, 1]:.17g}"
            )
        else:
            coords = " ".join(f"{c:.17g}" for c in mesh.edge_x[e])
            tag = _TAG_NAMES[int(mesh.edge_tag[e])]
            lines.append(f"edge {e} {m:.17g} boundary {k} {mesh.edge_d[e, 0]:.17g} {coords} {tag}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_mesh(path) -> Mesh:
    """Load and validate a mesh from the ASCII text format.

    Header ``mesh d=<1|2> ncells=<n> nedges=<m>``, then one line per cell
    ``cell <id> <volume> <center...>`` and one line per edge, either
    ``edge <id> <measure> interior <K> <L> <dK> <dL>`` or
    ``edge <id> <measure> boundary <K> <dK> <xsigma...> <dirichlet|noflux>``.

    Normals are reconstructed from the center geometry (the orthogonality
    condition makes them collinear with the center segments).  The domain
    bounding box is inferred from centers and boundary points; all
    admissibility invariants are validated on load.
    """
    with open(path) as f:
        raw = [ln.strip() for ln in f if ln.strip()]
    if not raw or not raw[0].startswith("mesh "):
        raise MeshError(f"{path}: missing 'mesh' header line")
    try:
        header = dict(tok.split("=") for tok in raw[0].split()[1:])
        dim, ncells, nedges = int(header["d"]), int(header["ncells"]), int(header["nedges"])
    except (KeyError, ValueError) as exc:
        raise MeshError(f"{path}: malformed header {raw[0]!r}") from exc
    if dim not in (1, 2):
        raise MeshError(f"{path}: unsupported dimension {dim}")

    centers = np.full((ncells, dim), np.nan)
    volumes = np.full(ncells, np.nan)
    measure = np.full(nedges, np.nan)
    cells = np.full((nedges, 2), -1, dtype=int)
    dists = np.full((nedges, 2), np.nan)
    xs = np.full((nedges, dim), np.nan)
    tags = np.full(nedges, -1, dtype=int)

    for ln in raw[1:]:
        tok = ln.split()
        try:
            if tok[0] == "cell":
                i = int(tok[1])
                volumes[i] = float(tok[2])
                centers[i] = [float(t) for t in tok[3 : 3 + dim]]
            elif tok[0] == "edge":
                e = int(tok[1])
                measure[e] = float(tok[2])
                if tok[3] == "interior":
                    cells[e] = (int(tok[4]), int(tok[5]))
                    dists[e] = (float(tok[6]), float(tok[7]))
                    tags[e] = INTERIOR
                elif tok[3] == "boundary":
                    cells[e] = (int(tok[4]), -1)
                    dists[e, 0] = float(tok[5])
                    xs[e] = [float(t) for t in tok[6 : 6 + dim]]
                    kind = tok[6 + dim]
                    tags[e] = {"dirichlet": DIRICHLET, "noflux": NOFLUX}[kind]
                else:
                    raise MeshError(f"{path}: unknown edge kind {tok[3]!r} in {ln!r}")
            else:
                raise MeshError(f"{path}: unknown record {tok[0]!r}")
        except MeshError:
            raise
        except (IndexError, ValueError, KeyError) as exc:
            raise MeshError(f"{path}: malformed line {ln!r}") from exc

    if np.any(np.isnan(volumes)) or np.any(tags < 0):
        raise MeshError(f"{path}: missing cell or edge records")

    normals = np.zeros((nedges, dim))
    for e in range(nedges):
        k, l = cells[e]
        vec = (centers[l] if l >= 0 else xs[e]) - centers[k]
        nrm = np.linalg.norm(vec)
        if nrm == 0:
            raise MeshError(f"{path}: edge {e} has coincident center geometry")
        normals[e] = vec / nrm

    pts = np.vstack([centers, xs[tags != INTERIOR]])
    bbox = np.stack([np.nanmin(pts, axis=0), np.nanmax(pts, axis=0)], axis=-1)
    A = measure / np.where(np.isnan(dists[:, 1]), dists[:, 0], dists.sum(axis=1))
    mesh = Mesh(
        dim=dim,
        cell_volumes=volumes,
        cell_centers=centers,
        edge_measure=measure,
        edge_cells=cells,
        edge_d=dists,
        edge_A=A,
        edge_normal=normals,
        edge_x=xs,
        edge_tag=tags,
        bbox=bbox,
    )
    report = validate_admissibility(mesh)
    if not report.ok:
        raise MeshError(f"{path}: mesh is not admissible:\n{report}")
    return mesh
