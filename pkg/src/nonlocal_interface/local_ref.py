"""P1 solver for the classical Laplace interface problem with jumps at Gamma_0.

Find u_i with -Laplace u_i = f_i on Omega_i, u_i = g_i on the outer boundary,
u_2 - u_1 = m and du_1/dn - du_2/dn = s on Gamma_0 (n pointing from Omega_1
into Omega_2). The weak form is

    sum_i int_{Omega_i} grad u_i . grad v = int f v + int_{Gamma_0} s v,

solved with the same one-dof-per-node lifting as the nonlocal problem.
"""
from __future__ import annotations

from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import geometry as geo
from .assembly import FieldPair, element_quadrature
from .data import LocalData
from .mesh import FESpace, Mesh, build_mesh, element_gradients, restrict
from .solve import SolverConfig, SolveReport, solve

LOCAL_REGIONS = (geo.OMEGA1, geo.JUMP2, geo.JUMP1, geo.OMEGA2)
SIDE1 = (geo.OMEGA1, geo.JUMP2)
SIDE2 = (geo.JUMP1, geo.OMEGA2)


def build_local_mesh(dim: int, h: float) -> Mesh:
    """Mesh of the closed subdomains with grid spacing h."""
    cfg = (geo.interval_config if dim == 1 else geo.rectangle_config)(h, h)
    mesh = build_mesh(geo.decompose(cfg), h)
    sub, _ = restrict(mesh, LOCAL_REGIONS)
    return sub


def _touching(mesh: Mesh, regions) -> np.ndarray:
    mask = np.isin(mesh.elem_region, list(regions))
    out = np.zeros(mesh.num_nodes, dtype=bool)
    out[np.unique(mesh.elements[mask])] = True
    return out


def _stiffness(mesh: Mesh, mask) -> sp.csr_matrix:
    G = element_gradients(mesh)[mask]
    meas = mesh.measures()[mask]
    loc = np.einsum("e,ead,ebd->eab", meas, G, G)
    elems = mesh.elements[mask]
    k = elems.shape[1]
    rows = np.repeat(elems, k, axis=1).ravel()
    cols = np.tile(elems, (1, k)).ravel()
    n = mesh.num_nodes
    return sp.csr_matrix((loc.ravel(), (rows, cols)), shape=(n, n))


def _gamma0_load(mesh: Mesh, decomp: geo.RegionDecomposition, s, on_gamma) -> np.ndarray:
    out = np.zeros(mesh.num_nodes)
    if mesh.dim == 1:
        idx = np.flatnonzero(on_gamma)
        out[idx] = s(mesh.nodes[idx])
        return out
    # edges of side-1 elements lying on Gamma_0, 5-point Gauss per edge
    k = decomp.normal_axis
    c = decomp.interface_coord
    t, w = np.polynomial.legendre.leggauss(5)
    t, w = 0.5 * (t + 1.0), 0.5 * w
    mask = np.isin(mesh.elem_region, SIDE1)
    for e in mesh.elements[mask]:
        on = [a for a in e if abs(mesh.nodes[a, k] - c) < 1e-12]
        if len(on) != 2:
            continue
        p, q = mesh.nodes[on[0]], mesh.nodes[on[1]]
        L = np.linalg.norm(q - p)
        pts = p[None, :] + t[:, None] * (q - p)[None, :]
        vals = s(pts) * w * L
        out[on[0]] += np.sum(vals * (1.0 - t))
        out[on[1]] += np.sum(vals * t)
    return out


def solve_local(local: LocalData, mesh: Mesh, solver: SolverConfig = SolverConfig(),
                order: Optional[int] = None):
    """Returns (FieldPair, SolveReport) on the closed-subdomain mesh."""
    if np.any(~np.isin(mesh.elem_region, LOCAL_REGIONS)):
        mesh, _ = restrict(mesh, LOCAL_REGIONS)
    decomp = mesh.decomp
    order = order or (7 if mesh.dim == 1 else 5)
    n = mesh.num_nodes
    side1 = _touching(mesh, SIDE1)
    side2 = _touching(mesh, SIDE2)
    on_gamma = side1 & side2
    m1 = np.isin(mesh.elem_region, SIDE1)
    m2 = np.isin(mesh.elem_region, SIDE2)
    A1 = _stiffness(mesh, m1)
    A2 = _stiffness(mesh, m2)
    A = (A1 + A2).tocsr()

    b = np.zeros(n)
    for mask, f in ((m1, local.f1), (m2, local.f2)):
        pts, W, lam, elems = element_quadrature(mesh, order, mask)
        vals = f(pts.reshape(-1, mesh.dim)).reshape(W.shape)
        np.add.at(b, elems.ravel(), np.einsum("eq,qa->ea", W * vals, lam).ravel())
    b += _gamma0_load(mesh, decomp, local.s, on_gamma)

    lift = np.zeros(n)
    lift[on_gamma] = local.m(mesh.nodes[on_gamma])
    rhs = b - A2 @ lift

    outer = geo.Box(np.minimum(decomp.config.omega1.lo, decomp.config.omega2.lo),
                    np.maximum(decomp.config.omega1.hi, decomp.config.omega2.hi))
    P = mesh.nodes
    on_bdry = np.zeros(n, dtype=bool)
    for k in range(mesh.dim):
        on_bdry |= np.isclose(P[:, k], outer.lo[k], atol=1e-12) | np.isclose(P[:, k], outer.hi[k], atol=1e-12)
    fixed = np.flatnonzero(on_bdry)
    free = np.flatnonzero(~on_bdry)
    wc = np.where(side1[fixed], local.g1(P[fixed]), local.g2(P[fixed]))
    Aff = A[free][:, free].tocsr()
    rhs_f = rhs[free] - A[free][:, fixed] @ wc
    rep: SolveReport = solve((Aff, rhs_f), solver)
    u = np.empty(n)
    u[free] = rep.solution
    u[fixed] = wc
    return FieldPair(FESpace(mesh), u, lift), rep
