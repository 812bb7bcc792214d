"""Structured simplicial meshes snapped to region breakpoints, and the P1 space."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import geometry as geo


@dataclass(frozen=True)
class Mesh:
    dim: int
    nodes: np.ndarray           # (N, dim)
    elements: np.ndarray        # (M, dim + 1), counter-clockwise in 2D
    h: float                    # largest grid spacing (element length in 1D, leg in 2D)
    diameter: float             # largest element diameter
    node_region: np.ndarray     # fine region per node (lower-id tie breaking)
    elem_region: np.ndarray     # fine region per element (by barycenter)
    elem_omega2J: np.ndarray    # barycenter inside Omega_2^J
    axes: tuple = field(repr=False)   # grid coordinates per axis
    decomp: Optional[geo.RegionDecomposition] = field(default=None, repr=False)

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    def barycenters(self) -> np.ndarray:
        return self.nodes[self.elements].mean(axis=1)

    def measures(self) -> np.ndarray:
        v = self.nodes[self.elements]
        if self.dim == 1:
            return np.abs(v[:, 1, 0] - v[:, 0, 0])
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        return 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _axis_grid(breaks: np.ndarray, target_h: float):
    widths = np.diff(breaks)
    if widths.min() < target_h * (1.0 - 1e-9):
        raise ValueError(
            f"target h={target_h:g} exceeds the thinnest region strip ({widths.min():g}); "
            "that region would contain no full element")
    pieces = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(1, int(math.ceil((b - a) / target_h - 1e-9)))
        pieces.append(np.linspace(a, b, n + 1)[:-1])
    pieces.append(breaks[-1:])
    return np.concatenate(pieces)


def build_mesh(decomp: geo.RegionDecomposition, target_h: float) -> Mesh:
    """Uniform-per-strip grid over Omega u I with every breakpoint a grid line."""
    if not target_h > 0:
        raise ValueError("target h must be positive")
    axes = tuple(_axis_grid(decomp.breakpoints(k), target_h) for k in range(decomp.dim))
    if decomp.dim == 1:
        x = axes[0]
        nodes = x.reshape(-1, 1)
        n = x.size
        elements = np.column_stack([np.arange(n - 1), np.arange(1, n)]).astype(np.int64)
        h = float(np.diff(x).max())
        diameter = h
    else:
        xs, ys = axes
        nx, ny = xs.size, ys.size
        cx = 0.5 * (xs[:-1] + xs[1:])
        cy = 0.5 * (ys[:-1] + ys[1:])
        CX, CY = np.meshgrid(cx, cy, indexing="ij")
        centers = np.column_stack([CX.ravel(), CY.ravel()])
        keep = geo.in_boxes(decomp.domain, centers).reshape(nx - 1, ny - 1)
        I, J = np.nonzero(keep)
        gid = lambda i, j: i * ny + j
        n00, n10, n01, n11 = gid(I, J), gid(I + 1, J), gid(I, J + 1), gid(I + 1, J + 1)
        tri = np.concatenate([np.column_stack([n00, n10, n11]),
                              np.column_stack([n00, n11, n01])])
        # interleave so the two halves of a cell are adjacent in memory
        order = np.argsort(np.concatenate([np.arange(I.size) * 2, np.arange(I.size) * 2 + 1]),
                           kind="stable")
        tri = tri[order]
        used = np.unique(tri)
        remap = np.full(nx * ny, -1, dtype=np.int64)
        remap[used] = np.arange(used.size)
        GX, GY = np.meshgrid(xs, ys, indexing="ij")
        allnodes = np.column_stack([GX.ravel(), GY.ravel()])
        nodes = allnodes[used]
        elements = remap[tri].astype(np.int64)
        dx, dy = np.diff(xs), np.diff(ys)
        h = float(max(dx.max(), dy.max()))
        diameter = float(np.sqrt(dx.max() ** 2 + dy.max() ** 2))
    bary = nodes[elements].mean(axis=1)
    elem_region = geo.regions_of(decomp, bary)
    if np.any(elem_region == geo.OUTSIDE):
        raise RuntimeError("element outside the decomposition; snapping failed")
    elem_o2j = geo.in_boxes(decomp.omega2J, bary, dim=decomp.dim)
    node_region = geo.regions_of(decomp, nodes)
    return Mesh(decomp.dim, nodes, elements, h, diameter, node_region, elem_region.astype(np.int64),
                elem_o2j, axes, decomp)


class FESpace:
    """Continuous P1 space with one dof per node.

    Node classes used by the constraint/lifting logic:

    * ``in_sub1`` / ``in_sub2``: node touches an element of Omega_i u I_i;
    * ``dirichlet``: node touches an element of a Dirichlet collar;
    * ``in_gamma``: node touches an element of the nonlocal interface;
    * ``overlap``: node carries both u_1 and u_2 (``in_sub1 & in_sub2``).
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        n = mesh.num_nodes
        self.in_sub1 = self._touching(geo.IN_SUB1)
        self.in_sub2 = self._touching(geo.IN_SUB2)
        self.touch_dir1 = self._touching((geo.DIR1_ONLY, geo.DIR_BOTH))
        self.touch_dir2 = self._touching((geo.DIR_BOTH, geo.DIR2_ONLY))
        self.dirichlet = self.touch_dir1 | self.touch_dir2
        self.in_gamma = self._touching(geo.GAMMA_REGIONS)
        self.overlap = self.in_sub1 & self.in_sub2
        self.free = np.flatnonzero(~self.dirichlet)
        self.fixed = np.flatnonzero(self.dirichlet)
        self.num_dofs = n

    def _touching(self, regions) -> np.ndarray:
        mask = np.isin(self.mesh.elem_region, list(regions))
        out = np.zeros(self.mesh.num_nodes, dtype=bool)
        out[np.unique(self.mesh.elements[mask])] = True
        return out

    @property
    def dim(self) -> int:
        return self.mesh.dim


def _affine(mesh: Mesh, element: int):
    v = mesh.nodes[mesh.elements[element]]
    if mesh.dim == 1:
        return v[0], np.array([[v[1, 0] - v[0, 0]]])
    return v[0], np.column_stack([v[1] - v[0], v[2] - v[0]])


def eval_basis(space: FESpace, element: int, ref_point):
    """Values and physical gradients of the local hat functions at a reference point."""
    mesh = space.mesh if isinstance(space, FESpace) else space
    xi = np.atleast_1d(np.asarray(ref_point, dtype=float))
    if mesh.dim == 1:
        vals = np.array([1.0 - xi[0], xi[0]])
        ref_grads = np.array([[-1.0], [1.0]])
    else:
        vals = np.array([1.0 - xi[0] - xi[1], xi[0], xi[1]])
        ref_grads = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    _, jac = _affine(mesh, element)
    grads = ref_grads @ np.linalg.inv(jac)
    return vals, grads


def element_gradients(mesh: Mesh) -> np.ndarray:
    """Gradients of the local hat functions, shape (M, dim + 1, dim)."""
    v = mesh.nodes[mesh.elements]
    if mesh.dim == 1:
        L = v[:, 1, 0] - v[:, 0, 0]
        g = np.empty((mesh.num_elements, 2, 1))
        g[:, 0, 0] = -1.0 / L
        g[:, 1, 0] = 1.0 / L
        return g
    J = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)   # columns are edge vectors
    Jinv = np.linalg.inv(J)
    ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    return np.einsum("ak,mkj->maj", ref, Jinv)


def _call_field(f, pts: np.ndarray) -> np.ndarray:
    out = f(pts)
    return np.broadcast_to(np.asarray(out, dtype=float), (pts.shape[0],)).copy()


def interpolate(space: FESpace, f) -> np.ndarray:
    """Nodal interpolation of a field (callable on an (n, dim) array)."""
    mesh = space.mesh if isinstance(space, FESpace) else space
    return _call_field(f, mesh.nodes)


def locate(mesh: Mesh, pts) -> tuple:
    """Containing element and reference coordinates for each point."""
    pts = geo.as_points(pts, mesh.dim)
    if mesh.dim == 1:
        x = mesh.axes[0]
        k = np.clip(np.searchsorted(x, pts[:, 0], side="right") - 1, 0, x.size - 2)
        ref = (pts[:, 0] - x[k]) / (x[k + 1] - x[k])
        return k, ref.reshape(-1, 1)
    bary = mesh.barycenters()
    xs, ys = mesh.axes
    i = np.clip(np.searchsorted(xs, pts[:, 0], side="right") - 1, 0, xs.size - 2)
    j = np.clip(np.searchsorted(ys, pts[:, 1], side="right") - 1, 0, ys.size - 2)
    # map grid cells to element indices through barycenter lookup
    key = {}
    bi = np.searchsorted(xs, bary[:, 0]) - 1
    bj = np.searchsorted(ys, bary[:, 1]) - 1
    for e, (a, b) in enumerate(zip(bi, bj)):
        key.setdefault((a, b), []).append(e)
    elem = np.empty(pts.shape[0], dtype=np.int64)
    ref = np.empty((pts.shape[0], 2))
    for p in range(pts.shape[0]):
        cands = key.get((int(i[p]), int(j[p])))
        if cands is None:
            raise ValueError(f"point {pts[p]} outside the mesh")
        for e in cands:
            v0, jac = _affine(mesh, e)
            r = np.linalg.solve(jac, pts[p] - v0)
            if r[0] >= -1e-12 and r[1] >= -1e-12 and r[0] + r[1] <= 1 + 1e-12:
                break
        elem[p] = e
        ref[p] = r
    return elem, ref


def evaluate(space: FESpace, coeffs: np.ndarray, pts) -> np.ndarray:
    """Point values of a P1 function."""
    mesh = space.mesh if isinstance(space, FESpace) else space
    elem, ref = locate(mesh, pts)
    c = coeffs[mesh.elements[elem]]
    if mesh.dim == 1:
        return c[:, 0] * (1 - ref[:, 0]) + c[:, 1] * ref[:, 0]
    return c[:, 0] * (1 - ref[:, 0] - ref[:, 1]) + c[:, 1] * ref[:, 0] + c[:, 2] * ref[:, 1]


def restrict(mesh: Mesh, regions) -> tuple:
    """Sub-mesh of elements in ``regions``; returns (mesh, old-node-index array)."""
    mask = np.isin(mesh.elem_region, list(regions))
    elems = mesh.elements[mask]
    used = np.unique(elems)
    remap = np.full(mesh.num_nodes, -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    sub = Mesh(mesh.dim, mesh.nodes[used], remap[elems], mesh.h, mesh.diameter,
               mesh.node_region[used], mesh.elem_region[mask], mesh.elem_omega2J[mask],
               mesh.axes, mesh.decomp)
    return sub, used


def dump_mesh(mesh: Mesh, path) -> None:
    """Plain-text listing: one ``node`` or ``element`` record per line."""
    with open(path, "w") as fh:
        fh.write(f"# dim {mesh.dim} nodes {mesh.num_nodes} elements {mesh.num_elements}\n")
        for i, p in enumerate(mesh.nodes):
            fh.write("node %d %s %d\n" % (i, " ".join("%.17g" % c for c in p),
                                           mesh.node_region[i]))
        for e, conn in enumerate(mesh.elements):
            fh.write("element %d %s %d\n" % (e, " ".join(str(int(c)) for c in conn),
                                              mesh.elem_region[e]))
