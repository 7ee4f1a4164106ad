"""Structured meshes for the bar, notched square and L-panel benchmarks.

Meshes are array-based: node coordinates in an ``(n_nodes, dim)`` float
array and element connectivity in an ``(n_elems, nodes_per_elem)`` int
array (counter-clockwise for quads).  Named boundary sets map tags to
node-index arrays.  The notch of the square specimens is a geometric
slit realised by duplicating the nodes on the notch line, so the two
crack faces share coordinates but are topologically disconnected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Node:
    id: int
    coords: np.ndarray


@dataclass(frozen=True)
class Element:
    id: int
    node_ids: np.ndarray


@dataclass
class Mesh:
    nodes: np.ndarray  # (n_nodes, dim)
    elements: np.ndarray  # (n_elems, nodes_per_elem)
    boundary_sets: dict[str, np.ndarray] = field(default_factory=dict)
    notch: dict | None = None

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elems(self) -> int:
        return self.elements.shape[0]

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def node(self, i: int) -> Node:
        return Node(id=i, coords=self.nodes[i])

    def element(self, e: int) -> Element:
        return Element(id=e, node_ids=self.elements[e])

    def validate(self) -> None:
        if not np.all(np.isfinite(self.nodes)):
            raise ValueError("non-finite node coordinates")
        if self.elements.min() < 0 or self.elements.max() >= self.n_nodes:
            raise ValueError("element references a missing node")
        for tag, idx in self.boundary_sets.items():
            if len(idx) and (idx.min() < 0 or idx.max() >= self.n_nodes):
                raise ValueError(f"boundary set {tag!r} references a missing node")


def select_boundary(mesh: Mesh, tag: str) -> np.ndarray:
    """Node indices registered under a boundary tag."""
    try:
        return mesh.boundary_sets[tag]
    except KeyError:
        known = ", ".join(sorted(mesh.boundary_sets))
        raise KeyError(f"unknown boundary tag {tag!r}; known tags: {known}") from None


def build_line_mesh(n_elems: int, length: float) -> Mesh:
    """Uniform 2-node line elements on [0, length]."""
    if n_elems < 2:
        raise ValueError("need at least 2 elements")
    if length <= 0.0:
        raise ValueError("length must be positive")
    x = np.linspace(0.0, length, n_elems + 1)
    nodes = x[:, None]
    elems = np.column_stack([np.arange(n_elems), np.arange(1, n_elems + 1)])
    bsets = {
        "left": np.array([0]),
        "right": np.array([n_elems]),
    }
    return Mesh(nodes=nodes, elements=elems.astype(np.int64), boundary_sets=bsets)


def build_notched_square(
    nx: int, ny: int, side: float, notch_from_left_to_center: bool = True
) -> Mesh:
    """Unit-square quad grid with a horizontal mid-height slit.

    The slit runs from the left edge to the centre.  Nodes on the slit
    (excluding the tip) are duplicated; elements above the slit reference
    the duplicates so the crack faces can separate.
    """
    if nx < 2 or ny < 2 or nx % 2 or ny % 2:
        raise ValueError("nx and ny must be even and >= 2 so the notch lies on edges")
    if side <= 0.0:
        raise ValueError("side must be positive")

    xs = np.linspace(0.0, side, nx + 1)
    ys = np.linspace(0.0, side, ny + 1)
    xg, yg = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([xg.ravel(), yg.ravel()])

    def nid(i, j):  # column i, row j
        return j * (nx + 1) + i

    elems = np.empty((nx * ny, 4), dtype=np.int64)
    e = 0
    for j in range(ny):
        for i in range(nx):
            elems[e] = (nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1))
            e += 1

    mid_j = ny // 2
    mid_i = nx // 2
    pairs = []
    notch_line = None
    if notch_from_left_to_center:
        extra = []
        dup_of = {}
        for i in range(mid_i):  # notch nodes left of the tip
            base = nid(i, mid_j)
            dup = len(nodes) + len(extra)
            extra.append(nodes[base])
            dup_of[base] = dup
            pairs.append((base, dup))
        nodes = np.vstack([nodes, np.array(extra)]) if extra else nodes
        # elements whose bottom edge lies on the notch use the top-face copies
        for i in range(mid_i):
            e_above = mid_j * nx + i
            conn = elems[e_above]
            for a in range(4):
                conn[a] = dup_of.get(conn[a], conn[a])
        notch_line = ((0.0, side / 2.0), (side / 2.0, side / 2.0))

    tol = 1e-12 * max(side, 1.0)
    bsets = {
        "bottom": np.flatnonzero(np.abs(nodes[:, 1]) < tol),
        "top": np.flatnonzero(np.abs(nodes[:, 1] - side) < tol),
        "left": np.flatnonzero(np.abs(nodes[:, 0]) < tol),
        "right": np.flatnonzero(np.abs(nodes[:, 0] - side) < tol),
    }
    notch = None
    if notch_line is not None:
        notch = {"line": notch_line, "pairs": pairs}
    return Mesh(nodes=nodes, elements=elems, boundary_sets=bsets, notch=notch)


L_PANEL_SIZE = 500.0  # outer square, mm
L_PANEL_CUTOUT = 250.0  # removed lower-right block, mm
L_LOAD_STRIP = 30.0  # loaded segment length at the arm tip, mm


def build_lshape_mesh(h: float) -> Mesh:
    """Structured quad mesh of the L-panel (lower-right block removed).

    Boundary sets: ``bottom_clamp`` (y = 0) and ``load_zone`` (arm lower
    edge near the tip, where the lift displacement is applied and the
    phase field is pinned to zero).
    """
    arm = L_PANEL_SIZE - L_PANEL_CUTOUT
    n_arm = arm / h
    if abs(n_arm - round(n_arm)) > 1e-9 or round(n_arm) < 1:
        raise ValueError(f"element size {h} does not divide the arm dimension {arm}")
    n = int(round(L_PANEL_SIZE / h))

    xs = np.linspace(0.0, L_PANEL_SIZE, n + 1)
    keep_node = np.full(((n + 1) * (n + 1),), False)
    node_id = np.full(((n + 1) * (n + 1),), -1, dtype=np.int64)

    def gid(i, j):
        return j * (n + 1) + i

    cells = []
    for j in range(n):
        for i in range(n):
            xc = 0.5 * (xs[i] + xs[i + 1])
            yc = 0.5 * (xs[j] + xs[j + 1])
            if xc > L_PANEL_CUTOUT and yc < L_PANEL_CUTOUT:
                continue  # cutout
            cells.append((i, j))
            for a, b in ((i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)):
                keep_node[gid(a, b)] = True

    kept = np.flatnonzero(keep_node)
    node_id[kept] = np.arange(len(kept))
    coords = np.column_stack([xs[kept % (n + 1)], xs[kept // (n + 1)]])

    elems = np.array(
        [
            (
                node_id[gid(i, j)],
                node_id[gid(i + 1, j)],
                node_id[gid(i + 1, j + 1)],
                node_id[gid(i, j + 1)],
            )
            for (i, j) in cells
        ],
        dtype=np.int64,
    )

    tol = 1e-9 * L_PANEL_SIZE
    bottom = np.flatnonzero(np.abs(coords[:, 1]) < tol)
    on_arm_edge = (np.abs(coords[:, 1] - L_PANEL_CUTOUT) < tol) & (
        coords[:, 0] > L_PANEL_CUTOUT + tol
    )
    near_tip = coords[:, 0] >= L_PANEL_SIZE - max(L_LOAD_STRIP, h) - tol
    load = np.flatnonzero(on_arm_edge & near_tip)
    bsets = {"bottom_clamp": bottom, "load_zone": load}
    return Mesh(nodes=coords, elements=elems, boundary_sets=bsets)
