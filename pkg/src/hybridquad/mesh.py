"""Quadrilateral meshes: generation, bilinear-map geometry, edges, text I/O.

Node order inside an element is counterclockwise, starting at the corner
mapped from the reference point (-1, -1)::

    4 ---- 3
    |      |
    1 ---- 2

Every element is described by the bilinear map

    x = a0 + a1*xi + a2*eta + a12*xi*eta
    y = b0 + b1*xi + b2*eta + b12*xi*eta

whose coefficients are stored in :class:`ElementGeometry`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

__all__ = [
    "MeshError",
    "NonConvex",
    "DegenerateJacobian",
    "NonManifold",
    "ParseError",
    "BoundaryLabel",
    "INTERIOR",
    "DIRICHLET",
    "neumann",
    "Edge",
    "QuadMesh",
    "ElementGeometry",
    "COEFF_MATRIX",
    "REF_CORNERS",
    "compute_geometry",
    "map_ref_to_phys",
    "jacobian_and_inverse",
    "shape_diagnostics",
    "generate_regular",
    "generate_irregular",
    "refine_uniform",
    "build_edges",
    "beam_boundary",
    "mesh_io_write",
    "mesh_io_read",
    "mesh_to_text",
    "mesh_from_text",
    "IRREGULAR_BOTTOM_X",
    "IRREGULAR_TOP_X",
]


class MeshError(ValueError):
    pass


class NonConvex(MeshError):
    pass


class DegenerateJacobian(MeshError):
    pass


class NonManifold(MeshError):
    pass


class ParseError(MeshError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


# 1/4 * M @ corners gives rows (a0,b0), (a1,b1), (a2,b2), (a12,b12)
COEFF_MATRIX = 0.25 * np.array(
    [
        [1.0, 1.0, 1.0, 1.0],
        [-1.0, 1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0, -1.0],
    ]
)

REF_CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


# ---------------------------------------------------------------------------
# Boundary labels and edges
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryLabel:
    kind: str  # "interior" | "dirichlet" | "neumann"
    tag: str | None = None

    def __post_init__(self):
        if self.kind not in ("interior", "dirichlet", "neumann"):
            raise ValueError(f"unknown edge kind {self.kind!r}")

    def __str__(self) -> str:
        if self.kind == "neumann":
            return f"neumann:{self.tag}" if self.tag else "neumann"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "BoundaryLabel":
        kind, _, tag = text.partition(":")
        if kind == "neumann":
            return cls("neumann", tag or None)
        return cls(kind)


INTERIOR = BoundaryLabel("interior")
DIRICHLET = BoundaryLabel("dirichlet")


def neumann(tag: str | None = None) -> BoundaryLabel:
    return BoundaryLabel("neumann", tag)


@dataclass(frozen=True)
class Edge:
    """Mesh edge.

    ``nodes`` follow the counterclockwise order of the left element, so the
    outward normal of the left element is the clockwise rotation of
    ``nodes[1] - nodes[0]``. ``left_local``/``right_local`` are the local edge
    indices k (edge from corner k to corner k+1) inside each element.
    """

    nodes: tuple[int, int]
    left: int
    left_local: int
    right: int | None
    right_local: int | None
    label: BoundaryLabel
    length: float

    @property
    def is_interior(self) -> bool:
        return self.right is not None


BoundarySpec = Callable[[float, float], BoundaryLabel]


@dataclass(frozen=True, eq=False)
class QuadMesh:
    nodes: np.ndarray  # (N, 2)
    elements: np.ndarray  # (M, 4) counterclockwise
    edges: tuple[Edge, ...] = field(default=())

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        lo = self.nodes.min(axis=0)
        hi = self.nodes.max(axis=0)
        return float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1])

    def corners(self) -> np.ndarray:
        """Element corner coordinates, shape (M, 4, 2)."""
        return self.nodes[self.elements]

    def element_corners(self, k: int) -> np.ndarray:
        return self.nodes[self.elements[k]]

    def geometry(self, k: int) -> "ElementGeometry":
        return compute_geometry(self.element_corners(k))

    def boundary_labels(self) -> dict[tuple[int, int], BoundaryLabel]:
        return {e.nodes: e.label for e in self.edges if not e.is_interior}

    def dirichlet_nodes(self) -> np.ndarray:
        ids = {n for e in self.edges if e.label.kind == "dirichlet" for n in e.nodes}
        return np.array(sorted(ids), dtype=np.int64)


# ---------------------------------------------------------------------------
# Element geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ElementGeometry:
    a0: float
    a1: float
    a2: float
    a12: float
    b0: float
    b1: float
    b2: float
    b12: float
    h: float
    rho: float
    corners: tuple[tuple[float, float], ...] = field(repr=False, default=())

    @property
    def J0(self) -> float:
        return self.a1 * self.b2 - self.a2 * self.b1

    @property
    def J1(self) -> float:
        return self.a1 * self.b12 - self.a12 * self.b1

    @property
    def J2(self) -> float:
        return self.a12 * self.b2 - self.a2 * self.b12

    @property
    def d(self) -> float:
        """Distance between the midpoints of the two diagonals."""
        return 2.0 * math.hypot(self.a12, self.b12)

    @property
    def area(self) -> float:
        return 4.0 * self.J0

    def jacobian(self, xi, eta):
        return self.J0 + self.J1 * xi + self.J2 * eta

    def corner_jacobians(self) -> np.ndarray:
        return self.J0 + self.J1 * REF_CORNERS[:, 0] + self.J2 * REF_CORNERS[:, 1]

    def coefficients(self) -> np.ndarray:
        """Array [[a0, a1, a2, a12], [b0, b1, b2, b12]]."""
        return np.array(
            [[self.a0, self.a1, self.a2, self.a12], [self.b0, self.b1, self.b2, self.b12]]
        )


def _incircle_diameter(p, q, r) -> float:
    la = math.dist(q, r)
    lb = math.dist(p, r)
    lc = math.dist(p, q)
    area = 0.5 * abs((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    s = 0.5 * (la + lb + lc)
    return 2.0 * area / s


def compute_geometry(corners: Sequence[Sequence[float]]) -> ElementGeometry:
    """Bilinear-map coefficients and size metrics of one quadrilateral.

    Raises NonConvex if the Jacobian is non-positive at any reference corner
    (this also rejects clockwise input).
    """
    z = np.asarray(corners, dtype=float)
    if z.shape != (4, 2):
        raise MeshError(f"expected 4 corners, got array of shape {z.shape}")
    pts = [tuple(map(float, p)) for p in z]
    if len(set(pts)) != 4:
        raise MeshError("corners must be distinct")
    c = COEFF_MATRIX @ z
    h = max(math.dist(pts[i], pts[j]) for i in range(4) for j in range(i + 1, 4))
    rho = min(_incircle_diameter(pts[i - 1], pts[i], pts[(i + 1) % 4]) for i in range(4))
    g = ElementGeometry(
        a0=c[0, 0], a1=c[1, 0], a2=c[2, 0], a12=c[3, 0],
        b0=c[0, 1], b1=c[1, 1], b2=c[2, 1], b12=c[3, 1],
        h=h, rho=rho, corners=tuple(pts),
    )
    if g.corner_jacobians().min() <= 0.0:
        raise NonConvex(f"quadrilateral {pts} is not strictly convex and counterclockwise")
    return g


def map_ref_to_phys(g: ElementGeometry, xi, eta):
    x = g.a0 + g.a1 * xi + g.a2 * eta + g.a12 * xi * eta
    y = g.b0 + g.b1 * xi + g.b2 * eta + g.b12 * xi * eta
    return x, y


def jacobian_and_inverse(g: ElementGeometry, xi: float, eta: float) -> tuple[float, np.ndarray]:
    """Return J_K(xi, eta) and the matrix [[xi_x, xi_y], [eta_x, eta_y]]."""
    J = g.jacobian(xi, eta)
    if J <= 0.0:
        raise DegenerateJacobian(f"J_K({xi}, {eta}) = {J} <= 0")
    inv = np.array(
        [
            [g.b2 + g.b12 * xi, -g.a2 - g.a12 * xi],
            [-g.b1 - g.b12 * eta, g.a1 + g.a12 * eta],
        ]
    ) / J
    return J, inv


def shape_diagnostics(g: ElementGeometry) -> dict[str, float]:
    jc = g.corner_jacobians()
    return {
        "h_K": g.h,
        "rho_K": g.rho,
        "h_over_rho": g.h / g.rho,
        "d_over_h": g.d / g.h,
        "jac_ratio": float(jc.max() / jc.min()),
    }


# ---------------------------------------------------------------------------
# Edge topology
# ---------------------------------------------------------------------------


def _default_boundary(x: float, y: float) -> BoundaryLabel:
    return neumann("boundary")


def build_edges(
    nodes: np.ndarray,
    elements: np.ndarray,
    boundary_spec: BoundarySpec | Mapping[tuple[int, int], BoundaryLabel] | None = None,
) -> tuple[Edge, ...]:
    """Edge list of a mesh.

    ``boundary_spec`` is either a callable ``(x_mid, y_mid) -> BoundaryLabel``
    or a mapping from node pairs to labels (either orientation). Boundary
    edges missing from a mapping fall back to ``neumann("boundary")``.
    """
    seen: dict[frozenset, list[tuple[int, int]]] = {}
    order: list[frozenset] = []
    for k, elem in enumerate(elements):
        for loc in range(4):
            key = frozenset((int(elem[loc]), int(elem[(loc + 1) % 4])))
            if key not in seen:
                seen[key] = []
                order.append(key)
            seen[key].append((k, loc))

    if boundary_spec is None:
        boundary_spec = _default_boundary
    if callable(boundary_spec):
        label_of = lambda a, b, mid: boundary_spec(mid[0], mid[1])  # noqa: E731
    else:
        table = {frozenset(pair): lab for pair, lab in boundary_spec.items()}
        label_of = lambda a, b, mid: table.get(frozenset((a, b)), neumann("boundary"))  # noqa: E731

    edges = []
    for key in order:
        owners = seen[key]
        if len(owners) > 2:
            raise NonManifold(f"node pair {sorted(key)} shared by {len(owners)} elements")
        k, loc = owners[0]
        a = int(elements[k][loc])
        b = int(elements[k][(loc + 1) % 4])
        length = float(np.hypot(*(nodes[b] - nodes[a])))
        if len(owners) == 2:
            r, rloc = owners[1]
            edges.append(Edge((a, b), k, loc, r, rloc, INTERIOR, length))
        else:
            mid = 0.5 * (nodes[a] + nodes[b])
            edges.append(Edge((a, b), k, loc, None, None, label_of(a, b, mid), length))
    return tuple(edges)


def beam_boundary(dirichlet_sides: Sequence[str] = ("left",), x_range=(0.0, 10.0), y_range=(-1.0, 1.0), tol=1e-9) -> BoundarySpec:
    """Labeler for a rectangle: listed sides Dirichlet, the rest Neumann tagged by side."""
    x0, x1 = x_range
    y0, y1 = y_range

    def spec(x: float, y: float) -> BoundaryLabel:
        if abs(x - x0) < tol:
            side = "left"
        elif abs(x - x1) < tol:
            side = "right"
        elif abs(y - y0) < tol:
            side = "bottom"
        elif abs(y - y1) < tol:
            side = "top"
        else:
            raise MeshError(f"boundary midpoint ({x}, {y}) not on the rectangle")
        return DIRICHLET if side in dirichlet_sides else neumann(side)

    return spec


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def generate_regular(
    nx: int,
    ny: int,
    x_range: tuple[float, float] = (0.0, 10.0),
    y_range: tuple[float, float] = (-1.0, 1.0),
    boundary_spec: BoundarySpec | None = None,
) -> QuadMesh:
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be >= 1")
    xs = np.linspace(x_range[0], x_range[1], nx + 1)
    ys = np.linspace(y_range[0], y_range[1], ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    elems = []
    for j in range(ny):
        for i in range(nx):
            n0 = j * (nx + 1) + i
            elems.append((n0, n0 + 1, n0 + nx + 2, n0 + nx + 1))
    elements = np.array(elems, dtype=np.int64)
    return QuadMesh(nodes, elements, build_edges(nodes, elements, boundary_spec))


# x-coordinates of the 5x1 irregular beam mesh on [0,10]x[-1,1]
IRREGULAR_BOTTOM_X = (0.0, 1.0, 2.0, 4.0, 7.0, 10.0)
IRREGULAR_TOP_X = (0.0, 2.0, 4.0, 5.0, 6.0, 10.0)


def generate_irregular(level: int = 0, boundary_spec: BoundarySpec | None = None) -> QuadMesh:
    """Irregular beam mesh: 5x1 trapezoids refined ``level`` times."""
    if level < 0:
        raise MeshError("level must be >= 0")
    bottom = [(x, -1.0) for x in IRREGULAR_BOTTOM_X]
    top = [(x, 1.0) for x in IRREGULAR_TOP_X]
    nodes = np.array(bottom + top)
    elements = np.array([(k, k + 1, k + 7, k + 6) for k in range(5)], dtype=np.int64)
    mesh = QuadMesh(nodes, elements, build_edges(nodes, elements, boundary_spec))
    for _ in range(level):
        mesh = refine_uniform(mesh)
    return mesh


def refine_uniform(m: QuadMesh) -> QuadMesh:
    """Split each quad into four through edge midpoints and its center F_K(0,0).

    Boundary labels are inherited by the two halves of each boundary edge.
    """
    edges = m.edges or build_edges(m.nodes, m.elements)
    n_old = m.n_nodes
    mid_id: dict[frozenset, int] = {}
    new_nodes = [m.nodes]
    mids = []
    for i, e in enumerate(edges):
        a, b = e.nodes
        mid_id[frozenset(e.nodes)] = n_old + i
        mids.append(0.5 * (m.nodes[a] + m.nodes[b]))
    new_nodes.append(np.array(mids).reshape(-1, 2))
    centers = m.corners().mean(axis=1)
    new_nodes.append(centers)
    center0 = n_old + len(edges)
    nodes = np.vstack(new_nodes)

    elements = []
    for k, (n0, n1, n2, n3) in enumerate(m.elements):
        m01 = mid_id[frozenset((n0, n1))]
        m12 = mid_id[frozenset((n1, n2))]
        m23 = mid_id[frozenset((n2, n3))]
        m30 = mid_id[frozenset((n3, n0))]
        c = center0 + k
        elements += [(n0, m01, c, m30), (m01, n1, m12, c), (c, m12, n2, m23), (m30, c, m23, n3)]
    elements = np.array(elements, dtype=np.int64)

    labels = {}
    for e in edges:
        if not e.is_interior:
            a, b = e.nodes
            mm = mid_id[frozenset(e.nodes)]
            labels[(a, mm)] = e.label
            labels[(mm, b)] = e.label
    return QuadMesh(nodes, elements, build_edges(nodes, elements, labels))


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------


def mesh_to_text(mesh: QuadMesh) -> str:
    lines = ["quadmesh 1", f"nodes {mesh.n_nodes}"]
    lines += [f"{i} {x!r} {y!r}" for i, (x, y) in enumerate(mesh.nodes.tolist())]
    lines.append(f"elems {mesh.n_elements}")
    lines += [f"{k} " + " ".join(str(int(n)) for n in e) for k, e in enumerate(mesh.elements)]
    labels = mesh.boundary_labels()
    if labels:
        lines.append(f"labels {len(labels)}")
        lines += [f"{a} {b} {lab}" for (a, b), lab in labels.items()]
    return "\n".join(lines) + "\n"


def mesh_io_write(mesh: QuadMesh, path) -> None:
    Path(path).write_text(mesh_to_text(mesh))


def _read_section(lines, pos, name, width):
    if pos >= len(lines):
        raise ParseError(f"expected '{name} <count>', got end of file", pos + 1)
    head = lines[pos].split()
    if len(head) != 2 or head[0] != name:
        raise ParseError(f"expected '{name} <count>'", pos + 1)
    try:
        count = int(head[1])
    except ValueError:
        raise ParseError(f"bad count {head[1]!r}", pos + 1) from None
    rows = []
    for i in range(count):
        lineno = pos + 2 + i
        if pos + 1 + i >= len(lines):
            raise ParseError(f"{name}: expected {count} rows", lineno)
        parts = lines[pos + 1 + i].split()
        if len(parts) != width:
            raise ParseError(f"{name}: expected {width} fields, got {len(parts)}", lineno)
        rows.append((lineno, parts))
    return rows, pos + 1 + count


def mesh_io_read(path) -> QuadMesh:
    return mesh_from_text(Path(path).read_text())


def mesh_from_text(text: str) -> QuadMesh:
    lines = text.splitlines()
    if not lines or lines[0].split() != ["quadmesh", "1"]:
        raise ParseError("missing header 'quadmesh 1'", 1)
    node_rows, pos = _read_section(lines, 1, "nodes", 3)
    nodes = np.empty((len(node_rows), 2))
    for lineno, parts in node_rows:
        try:
            i = int(parts[0])
            nodes[i] = float(parts[1]), float(parts[2])
        except (ValueError, IndexError):
            raise ParseError("malformed node row", lineno) from None
    elem_rows, pos = _read_section(lines, pos, "elems", 5)
    elements = np.empty((len(elem_rows), 4), dtype=np.int64)
    for lineno, parts in elem_rows:
        try:
            k = int(parts[0])
            elements[k] = [int(p) for p in parts[1:]]
        except (ValueError, IndexError):
            raise ParseError("malformed element row", lineno) from None
        if elements[k].min() < 0 or elements[k].max() >= len(nodes):
            raise ParseError("element references unknown node", lineno)
    labels = {}
    while pos < len(lines) and not lines[pos].strip():
        pos += 1
    if pos < len(lines):
        label_rows, pos = _read_section(lines, pos, "labels", 3)
        for lineno, parts in label_rows:
            try:
                labels[(int(parts[0]), int(parts[1]))] = BoundaryLabel.parse(parts[2])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
    return QuadMesh(nodes, elements, build_edges(nodes, elements, labels))
