"""Global assembly over element pairs, constraint elimination and jump lifting.

The bilinear form sums over the two subdomain kernels,

    a(u, v) = sum_s  int int (u_s(x) - u_s(y)) (v(x) - v(y)) gamma_s(x, y) dy dx,

with the region-pair weights of :class:`CompositeKernel`. Contributions of the
two kernels are kept in separate value arrays on one sparsity pattern so the
lifting of the solution jump can act on the second one only.

Element pairs are visited once as unordered pairs (K <= L). With the union
functions psi_a(x, y) = phi_a(x)[a in K] - phi_a(y)[a in L] the local matrix is
sum_q w_q psi_a psi_b, doubled for K != L. This makes the discrete matrix
symmetric and its rows sum to zero independently of the quadrature error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import geometry as geo
from ._jit import njit
from .fields import ZERO, Field
from .kernel import CompositeKernel
from .mesh import FESpace, Mesh, element_gradients
from .quadrature import (BUFFER_SIZE, PairQuadConfig, gauss_interval, gauss_triangle,
                         make_tables, rule_1d, rule_2d)

KERNEL1_ONLY = 1
KERNEL2_ONLY = 2
BOTH = 3
CATEGORY_NAMES = {KERNEL1_ONLY: "Kernel1Only", KERNEL2_ONLY: "Kernel2Only", BOTH: "Both"}

MODE_MATRIX = 0
MODE_LOAD = 1
MODE_ENERGY = 2
MODE_ERROR = 3


# --------------------------------------------------------------------------
# sparsity pattern

@njit
def _grid_cells(pts, cell):
    d = pts.shape[1]
    lo = np.empty(d)
    nc = np.empty(d, dtype=np.int64)
    for k in range(d):
        lo[k] = pts[:, k].min()
        nc[k] = int((pts[:, k].max() - lo[k]) / cell) + 1
    cid = np.empty((pts.shape[0], 2), dtype=np.int64)
    for i in range(pts.shape[0]):
        cid[i, 0] = int((pts[i, 0] - lo[0]) / cell)
        cid[i, 1] = int((pts[i, 1] - lo[1]) / cell) if d > 1 else 0
    ny = nc[1] if d > 1 else 1
    flat = cid[:, 0] * ny + cid[:, 1]
    ncell = nc[0] * ny
    start = np.zeros(ncell + 1, dtype=np.int64)
    for i in range(pts.shape[0]):
        start[flat[i] + 1] += 1
    for c in range(ncell):
        start[c + 1] += start[c]
    fill = start[:-1].copy()
    members = np.empty(pts.shape[0], dtype=np.int64)
    for i in range(pts.shape[0]):
        members[fill[flat[i]]] = i
        fill[flat[i]] += 1
    return cid, nc[0], ny, start, members


@njit
def _node_pattern_pass(pts, sub1, sub2, delta1, delta2, diam, cid, nx, ny, start, members,
                       counts, indices, fill, tol):
    n = pts.shape[0]
    d = pts.shape[1]
    count_only = indices.shape[0] == 0
    for i in range(n):
        ci = cid[i, 0]
        cj = cid[i, 1]
        for a in range(max(ci - 1, 0), min(ci + 2, nx)):
            for b in range(max(cj - 1, 0), min(cj + 2, ny)):
                c = a * ny + b
                for m in range(start[c], start[c + 1]):
                    j = members[m]
                    r2 = 0.0
                    for k in range(d):
                        r2 += (pts[i, k] - pts[j, k]) ** 2
                    R = diam
                    if sub2[i] and sub2[j]:
                        R = max(R, delta2 + 2.0 * diam)
                    if sub1[i] and sub1[j]:
                        R = max(R, delta1 + 2.0 * diam)
                    if r2 < (R + tol) ** 2:
                        if count_only:
                            counts[i + 1] += 1
                        else:
                            indices[fill[i]] = j
                            fill[i] += 1


@njit
def _node_pattern(pts, sub1, sub2, delta1, delta2, diam, cell):
    n = pts.shape[0]
    cid, nx, ny, start, members = _grid_cells(pts, cell)
    tol = 1e-12 * cell
    counts = np.zeros(n + 1, dtype=np.int64)
    empty = np.zeros(0, dtype=np.int64)
    _node_pattern_pass(pts, sub1, sub2, delta1, delta2, diam, cid, nx, ny, start, members,
                       counts, empty, empty, tol)
    for i in range(n):
        counts[i + 1] += counts[i]
    indices = np.empty(counts[n], dtype=np.int64)
    fill = counts[:-1].copy()
    _node_pattern_pass(pts, sub1, sub2, delta1, delta2, diam, cid, nx, ny, start, members,
                       counts, indices, fill, tol)
    for i in range(n):
        indices[counts[i]:counts[i + 1]] = np.sort(indices[counts[i]:counts[i + 1]])
    return counts, indices


@dataclass(frozen=True)
class SparsityPattern:
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def n(self) -> int:
        return self.indptr.size - 1

    @property
    def nnz(self) -> int:
        return int(self.indices.size)


def build_pattern(space: FESpace, ck: CompositeKernel) -> SparsityPattern:
    mesh = space.mesh
    if ck.single_domain:
        sub1 = np.ones(mesh.num_nodes, dtype=np.bool_)
        sub2 = np.zeros(mesh.num_nodes, dtype=np.bool_)
    else:
        sub1, sub2 = space.in_sub1, space.in_sub2
    cell = ck.max_delta + 2.0 * mesh.diameter
    indptr, indices = _node_pattern(np.ascontiguousarray(mesh.nodes), sub1, sub2,
                                    ck.kernel1.delta, ck.kernel2.delta, mesh.diameter, cell)
    return SparsityPattern(indptr, indices)


# --------------------------------------------------------------------------
# pair sweeps

@njit
def _find(indptr, indices, row, col):
    lo = indptr[row]
    hi = indptr[row + 1] - 1
    while lo <= hi:
        mid = (lo + hi) >> 1
        v = indices[mid]
        if v == col:
            return mid
        if v < col:
            lo = mid + 1
        else:
            hi = mid - 1
    raise ValueError("matrix entry missing from the sparsity pattern")


@njit
def _union(nK, nL, U, posK, posL):
    nU = 0
    for a in range(nK.shape[0]):
        U[nU] = nK[a]
        posK[a] = nU
        nU += 1
    for b in range(nL.shape[0]):
        found = -1
        for a in range(nK.shape[0]):
            if nK[a] == nL[b]:
                found = posK[a]
        if found < 0:
            U[nU] = nL[b]
            found = nU
            nU += 1
        posL[b] = found
    return nU


@njit
def _finish_pair(mode, sub, fac, nU, U, loc, indptr, indices, val1, val2, cat):
    bit = 1 if sub == 0 else 2
    for a in range(nU):
        for b in range(nU):
            p = _find(indptr, indices, U[a], U[b])
            if sub == 0:
                val1[p] += fac * loc[a, b]
            else:
                val2[p] += fac * loc[a, b]
            cat[p] |= bit


@njit
def _sweep_1d(mode, x, elems, elem_region, tk, tw, kp, ints, gjt, gjw, glx, glw,
              indptr, indices, val1, val2, cat, fn1, p1, fn2, p2, coef, out_vec, energy):
    M = elems.shape[0]
    a = np.empty(M)
    b = np.empty(M)
    for e in range(M):
        a[e] = min(x[elems[e, 0]], x[elems[e, 1]])
        b[e] = max(x[elems[e, 0]], x[elems[e, 1]])
    order = np.argsort(a, kind="mergesort")
    dmax = max(kp[0, 3], kp[1, 3])
    ox = np.empty(BUFFER_SIZE)
    oy = np.empty(BUFFER_SIZE)
    ow = np.empty(BUFFER_SIZE)
    U = np.empty(4, dtype=np.int64)
    posK = np.empty(2, dtype=np.int64)
    posL = np.empty(2, dtype=np.int64)
    loc = np.zeros((4, 4))
    psi = np.zeros(4)
    for iK in range(M):
        K = order[iK]
        aK, bK = a[K], b[K]
        nK = elems[K]
        for iL in range(iK, M):
            L = order[iL]
            if a[L] - bK >= dmax:
                break
            rK = elem_region[K]
            rL = elem_region[L]
            nL = elems[L]
            nU = _union(nK, nL, U, posK, posL)
            aL, bL = a[L], b[L]
            for t in range(2):
                sub = tk[rK, rL, t]
                if sub < 0:
                    continue
                fac = tw[rK, rL, t] * (1.0 if K == L else 2.0)
                n = rule_1d(aK, bK, aL, bL, kp[sub, 3], int(kp[sub, 0]), kp[sub, 1], kp[sub, 2],
                            ints[sub], glx, glw, gjt[sub], gjw[sub], ox, oy, ow)
                if n == 0:
                    continue
                if mode == MODE_MATRIX:
                    for i in range(nU):
                        for j in range(nU):
                            loc[i, j] = 0.0
                lK = bK - aK
                lL = bL - aL
                acc = 0.0
                for q in range(n):
                    xq = ox[q]
                    yq = oy[q]
                    for i in range(nU):
                        psi[i] = 0.0
                    # hat functions: node elems[e,0] sits at a or b
                    tx = (xq - aK) / lK
                    ty = (yq - aL) / lL
                    if x[nK[0]] <= x[nK[1]]:
                        fK0, fK1 = 1.0 - tx, tx
                    else:
                        fK0, fK1 = tx, 1.0 - tx
                    if x[nL[0]] <= x[nL[1]]:
                        fL0, fL1 = 1.0 - ty, ty
                    else:
                        fL0, fL1 = ty, 1.0 - ty
                    psi[posK[0]] += fK0
                    psi[posK[1]] += fK1
                    psi[posL[0]] -= fL0
                    psi[posL[1]] -= fL1
                    w = ow[q]
                    if mode == MODE_MATRIX:
                        for i in range(nU):
                            wi = w * psi[i]
                            for j in range(nU):
                                loc[i, j] += wi * psi[j]
                    elif mode == MODE_LOAD:
                        if sub == 0:
                            du = fn1(xq, 0.0, p1) - fn1(yq, 0.0, p1)
                        else:
                            du = fn2(xq, 0.0, p2) - fn2(yq, 0.0, p2)
                        for i in range(nU):
                            out_vec[U[i]] += fac * w * du * psi[i]
                    else:
                        vx = coef[sub, nK[0]] * fK0 + coef[sub, nK[1]] * fK1
                        vy = coef[sub, nL[0]] * fL0 + coef[sub, nL[1]] * fL1
                        if mode == MODE_ERROR:
                            if sub == 0:
                                vx = fn1(xq, 0.0, p1) - vx
                                vy = fn1(yq, 0.0, p1) - vy
                            else:
                                vx = fn2(xq, 0.0, p2) - vx
                                vy = fn2(yq, 0.0, p2) - vy
                        acc += w * (vx - vy) ** 2
                if mode == MODE_MATRIX:
                    _finish_pair(mode, sub, fac, nU, U, loc, indptr, indices, val1, val2, cat)
                elif mode >= MODE_ENERGY:
                    energy[sub] += fac * acc


@njit
def _sweep_2d(mode, nodes, elems, elem_region, grads, tk, tw, kp, ints, near_factor,
              gjt, gjw, glx, glw, obp, obw, odp, odw, lfp, lfw,
              indptr, indices, val1, val2, cat, fn1, p1, fn2, p2, coef, out_vec, energy,
              bufsize):
    M = elems.shape[0]
    cent = np.empty((M, 2))
    diam = 0.0
    for e in range(M):
        for k in range(2):
            cent[e, k] = (nodes[elems[e, 0], k] + nodes[elems[e, 1], k] + nodes[elems[e, 2], k]) / 3.0
        for i in range(3):
            for j in range(i + 1, 3):
                dd = math.sqrt((nodes[elems[e, i], 0] - nodes[elems[e, j], 0]) ** 2
                               + (nodes[elems[e, i], 1] - nodes[elems[e, j], 1]) ** 2)
                diam = max(diam, dd)
    dmax = max(kp[0, 3], kp[1, 3])
    cell = dmax + 2.0 * diam
    cid, nx, ny, start, members = _grid_cells(cent, cell)
    ox = np.empty((bufsize, 2))
    oy = np.empty((bufsize, 2))
    ow = np.empty(bufsize)
    U = np.empty(6, dtype=np.int64)
    posK = np.empty(3, dtype=np.int64)
    posL = np.empty(3, dtype=np.int64)
    loc = np.zeros((6, 6))
    psi = np.zeros(6)
    VK = np.empty((3, 2))
    VL = np.empty((3, 2))
    for K in range(M):
        nK = elems[K]
        for i in range(3):
            VK[i, 0] = nodes[nK[i], 0]
            VK[i, 1] = nodes[nK[i], 1]
        ci = cid[K, 0]
        cj = cid[K, 1]
        for ca in range(max(ci - 1, 0), min(ci + 2, nx)):
            for cb in range(max(cj - 1, 0), min(cj + 2, ny)):
                c = ca * ny + cb
                for m in range(start[c], start[c + 1]):
                    L = members[m]
                    if L < K:
                        continue
                    rK = elem_region[K]
                    rL = elem_region[L]
                    if tk[rK, rL, 0] < 0:
                        continue
                    nL = elems[L]
                    for i in range(3):
                        VL[i, 0] = nodes[nL[i], 0]
                        VL[i, 1] = nodes[nL[i], 1]
                    nU = _union(nK, nL, U, posK, posL)
                    for t in range(2):
                        sub = tk[rK, rL, t]
                        if sub < 0:
                            continue
                        fac = tw[rK, rL, t] * (1.0 if K == L else 2.0)
                        n = rule_2d(VK, VL, kp[sub, 3], int(kp[sub, 0]), kp[sub, 1], kp[sub, 2],
                                    ints[sub], near_factor, glx, glw, gjt[sub], gjw[sub],
                                    obp, obw, odp, odw, lfp, lfw, ox, oy, ow)
                        if n == 0:
                            continue
                        if mode == MODE_MATRIX:
                            for i in range(nU):
                                for j in range(nU):
                                    loc[i, j] = 0.0
                        acc = 0.0
                        for q in range(n):
                            for i in range(nU):
                                psi[i] = 0.0
                            vx = 0.0
                            vy = 0.0
                            for i in range(3):
                                lk = 1.0 if i == 0 else 0.0
                                lk += grads[K, i, 0] * (ox[q, 0] - VK[0, 0]) + grads[K, i, 1] * (ox[q, 1] - VK[0, 1])
                                ll = 1.0 if i == 0 else 0.0
                                ll += grads[L, i, 0] * (oy[q, 0] - VL[0, 0]) + grads[L, i, 1] * (oy[q, 1] - VL[0, 1])
                                psi[posK[i]] += lk
                                psi[posL[i]] -= ll
                                if mode >= MODE_ENERGY:
                                    vx += coef[sub, nK[i]] * lk
                                    vy += coef[sub, nL[i]] * ll
                            w = ow[q]
                            if mode == MODE_MATRIX:
                                for i in range(nU):
                                    wi = w * psi[i]
                                    for j in range(i, nU):
                                        loc[i, j] += wi * psi[j]
                            elif mode == MODE_LOAD:
                                if sub == 0:
                                    du = fn1(ox[q, 0], ox[q, 1], p1) - fn1(oy[q, 0], oy[q, 1], p1)
                                else:
                                    du = fn2(ox[q, 0], ox[q, 1], p2) - fn2(oy[q, 0], oy[q, 1], p2)
                                for i in range(nU):
                                    out_vec[U[i]] += fac * w * du * psi[i]
                            else:
                                if mode == MODE_ERROR:
                                    if sub == 0:
                                        vx = fn1(ox[q, 0], ox[q, 1], p1) - vx
                                        vy = fn1(oy[q, 0], oy[q, 1], p1) - vy
                                    else:
                                        vx = fn2(ox[q, 0], ox[q, 1], p2) - vx
                                        vy = fn2(oy[q, 0], oy[q, 1], p2) - vy
                                acc += w * (vx - vy) ** 2
                        if mode == MODE_MATRIX:
                            for i in range(nU):
                                for j in range(i + 1, nU):
                                    loc[j, i] = loc[i, j]
                            _finish_pair(mode, sub, fac, nU, U, loc, indptr, indices, val1, val2, cat)
                        elif mode >= MODE_ENERGY:
                            energy[sub] += fac * acc


class _SweepData:
    """Arrays shared by the compiled sweeps for one (space, kernel, config)."""

    def __init__(self, space: FESpace, ck: CompositeKernel, config: PairQuadConfig):
        mesh = space.mesh
        if config.dim != mesh.dim:
            raise ValueError("quadrature config dimension differs from the mesh")
        self.mesh = mesh
        self.config = config
        tabs = [make_tables(config, k) for k in ck.kernels]
        self.kp = np.ascontiguousarray(ck.kernel_params())
        self.ints = np.ascontiguousarray(np.stack([t.ints for t in tabs]))
        ng = max(t.gjt.size for t in tabs)
        self.gjt = np.zeros((2, ng))
        self.gjw = np.zeros((2, ng))
        for i, t in enumerate(tabs):
            self.gjt[i, :t.gjt.size] = t.gjt
            self.gjw[i, :t.gjw.size] = t.gjw
        self.glx, self.glw = tabs[0].glx, tabs[0].glw
        self.tri = tabs[0].tri
        self.tk = np.ascontiguousarray(ck.term_kernel)
        self.tw = np.ascontiguousarray(ck.term_weight)
        self.elem_region = np.ascontiguousarray(mesh.elem_region)
        self.elems = np.ascontiguousarray(mesh.elements)
        if mesh.dim == 2:
            self.grads = np.ascontiguousarray(element_gradients(mesh))

    def run(self, mode, pattern=None, val1=None, val2=None, cat=None, fn1=None, fn2=None,
            coef=None, out_vec=None, energy=None):
        mesh = self.mesh
        dummy_i = np.zeros(2, dtype=np.int64)
        indptr = pattern.indptr if pattern is not None else dummy_i
        indices = pattern.indices if pattern is not None else dummy_i
        val1 = val1 if val1 is not None else np.zeros(1)
        val2 = val2 if val2 is not None else np.zeros(1)
        cat = cat if cat is not None else np.zeros(1, dtype=np.uint8)
        fn1 = fn1 if fn1 is not None else ZERO
        fn2 = fn2 if fn2 is not None else ZERO
        coef = coef if coef is not None else np.zeros((2, 1))
        out_vec = out_vec if out_vec is not None else np.zeros(1)
        energy = energy if energy is not None else np.zeros(2)
        if fn1.fn is not fn2.fn:
            raise ValueError("both subdomain fields must share one field function")
        if mesh.dim == 1:
            _sweep_1d(mode, np.ascontiguousarray(mesh.nodes[:, 0]), self.elems, self.elem_region,
                      self.tk, self.tw, self.kp, self.ints, self.gjt, self.gjw, self.glx, self.glw,
                      indptr, indices, val1, val2, cat, fn1.fn, fn1.params, fn2.fn, fn2.params,
                      coef, out_vec, energy)
        else:
            ob, wb, od, wd, lf, wl = self.tri
            bufsize = BUFFER_SIZE
            while True:
                try:
                    _sweep_2d(mode, np.ascontiguousarray(mesh.nodes), self.elems, self.elem_region,
                              self.grads, self.tk, self.tw, self.kp, self.ints,
                              self.config.near_factor, self.gjt, self.gjw, self.glx, self.glw,
                              ob, wb, od, wd, lf, wl, indptr, indices, val1, val2, cat,
                              fn1.fn, fn1.params, fn2.fn, fn2.params, coef, out_vec, energy,
                              bufsize)
                    break
                except ValueError as err:
                    if "overflow" not in str(err) or bufsize > (1 << 22):
                        raise
                    # restart from scratch with a larger buffer
                    bufsize *= 4
                    for arr in (val1, val2, out_vec, energy):
                        arr[:] = 0.0
                    cat[:] = 0


# --------------------------------------------------------------------------
# public API

@dataclass
class AssembledMatrix:
    """Full (pre-elimination) operator split by subdomain kernel."""

    space: FESpace
    kernel: CompositeKernel
    config: PairQuadConfig
    pattern: SparsityPattern
    values1: np.ndarray
    values2: np.ndarray
    category: np.ndarray
    _sweep: Optional[_SweepData] = field(default=None, repr=False)

    def _csr(self, vals) -> sp.csr_matrix:
        n = self.pattern.n
        return sp.csr_matrix((vals, self.pattern.indices, self.pattern.indptr), shape=(n, n))

    def full(self) -> sp.csr_matrix:
        return self._csr(self.values1 + self.values2)

    def part(self, sub: int) -> sp.csr_matrix:
        return self._csr(self.values1 if sub == 0 else self.values2)

    def max_abs(self) -> float:
        return float(np.abs(self.values1 + self.values2).max())

    def category_of(self, i: int, j: int) -> int:
        lo, hi = self.pattern.indptr[i], self.pattern.indptr[i + 1]
        k = np.searchsorted(self.pattern.indices[lo:hi], j)
        if k < hi - lo and self.pattern.indices[lo + k] == j:
            return int(self.category[lo + k])
        return 0


def _default_config(space, config):
    return config if config is not None else PairQuadConfig(dim=space.dim)


def assemble_matrix(space: FESpace, ck: CompositeKernel,
                    config: Optional[PairQuadConfig] = None) -> AssembledMatrix:
    """Pre-elimination matrix with per-entry kernel category bits."""
    config = _default_config(space, config)
    if ck.decomp is not space.mesh.decomp and ck.decomp != space.mesh.decomp:
        raise ValueError("mesh was not built for this kernel's region decomposition")
    pattern = build_pattern(space, ck)
    sweep = _SweepData(space, ck, config)
    val1 = np.zeros(pattern.nnz)
    val2 = np.zeros(pattern.nnz)
    cat = np.zeros(pattern.nnz, dtype=np.uint8)
    sweep.run(MODE_MATRIX, pattern, val1, val2, cat)
    for v in (val1, val2):
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            row = int(np.searchsorted(pattern.indptr, bad, side="right") - 1)
            raise FloatingPointError(f"non-finite matrix entry at ({row}, {pattern.indices[bad]})")
    return AssembledMatrix(space, ck, config, pattern, val1, val2, cat, sweep)


def galerkin_load(matrix: AssembledMatrix, u1: Field, u2: Field) -> np.ndarray:
    """load_j = a(u_exact, phi_j) with the exact fields evaluated at quadrature points."""
    out = np.zeros(matrix.space.mesh.num_nodes)
    matrix._sweep.run(MODE_LOAD, fn1=u1, fn2=u2, out_vec=out)
    return out


def energy_by_pairs(matrix: AssembledMatrix, v: np.ndarray, v2: Optional[np.ndarray] = None) -> float:
    """[[v]]^2 evaluated from point values of v at the pair quadrature points.

    ``v2`` gives separate coefficients for the second subdomain field.
    """
    v = np.asarray(v, dtype=float)
    coef = np.ascontiguousarray(np.stack([v, v if v2 is None else np.asarray(v2, dtype=float)]))
    e = np.zeros(2)
    matrix._sweep.run(MODE_ENERGY, coef=coef, energy=e)
    return float(e.sum())


def error_energy_by_pairs(matrix: AssembledMatrix, u1: Field, u2: Field, c1: np.ndarray,
                          c2: np.ndarray) -> float:
    """[[u_exact - u_h]]^2 with the exact fields sampled at the quadrature points."""
    coef = np.ascontiguousarray(np.stack([np.asarray(c1, float), np.asarray(c2, float)]))
    e = np.zeros(2)
    matrix._sweep.run(MODE_ERROR, fn1=u1, fn2=u2, coef=coef, energy=e)
    return float(e.sum())


def _element_rule(mesh: Mesh, order: int):
    if mesh.dim == 1:
        r = gauss_interval(order)
        return r.points, r.weights
    r = gauss_triangle(order)
    return r.points, r.weights


def element_quadrature(mesh: Mesh, order: int = 5, mask=None):
    """Physical points, weights (with Jacobian) and hat values for chosen elements."""
    ref, w = _element_rule(mesh, order)
    elems = mesh.elements if mask is None else mesh.elements[mask]
    V = mesh.nodes[elems]                       # (E, d+1, d)
    if mesh.dim == 1:
        lam = np.column_stack([1.0 - ref[:, 0], ref[:, 0]])
    else:
        lam = np.column_stack([1.0 - ref[:, 0] - ref[:, 1], ref[:, 0], ref[:, 1]])
    pts = np.einsum("qa,ead->eqd", lam, V)
    meas = mesh.measures() if mask is None else mesh.measures()[mask]
    ref_meas = 1.0 if mesh.dim == 1 else 0.5
    W = np.outer(meas / ref_meas, w)
    return pts, W, lam, elems


def explicit_load(space: FESpace, zeta1, zeta2, nu, order: int = 5) -> np.ndarray:
    """load_j = int_Omega zeta phi_j + int_Gamma nu phi_j (nu vanishes on Omega_2^J)."""
    mesh = space.mesh
    out = np.zeros(mesh.num_nodes)
    parts = [((geo.OMEGA1, geo.JUMP2), zeta1), ((geo.JUMP1, geo.OMEGA2), zeta2),
             (tuple(geo.GAMMA_REGIONS), nu)]
    for regions, f in parts:
        if f is None:
            continue
        mask = np.isin(mesh.elem_region, regions)
        if not mask.any():
            continue
        pts, W, lam, elems = element_quadrature(mesh, order, mask)
        vals = f(pts.reshape(-1, mesh.dim)).reshape(W.shape)
        contrib = np.einsum("eq,qa->ea", W * vals, lam)
        np.add.at(out, elems.ravel(), contrib.ravel())
    return out


@dataclass
class AssembledSystem:
    """Reduced SPD system over the free dofs plus the data to rebuild u_1, u_2."""

    operator: AssembledMatrix
    matrix: sp.csr_matrix
    load: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    constrainedValues: np.ndarray   # values of the global dof at ``fixed``
    liftValues: np.ndarray          # u_2 - u (per node, zero off the overlap)

    @property
    def category(self) -> np.ndarray:
        return self.operator.category

    @property
    def space(self) -> FESpace:
        return self.operator.space


def lifting_vector(space: FESpace, kappa1, kappa2, mu) -> np.ndarray:
    """Per-node shift from the stored dof to u_2 on nodes carrying both fields."""
    mesh = space.mesh
    lift = np.zeros(mesh.num_nodes)
    ov = space.overlap
    gam = ov & space.in_gamma
    if gam.any():
        vals = np.asarray(mu(mesh.nodes[gam]), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("jump data undefined at some interface node")
        lift[gam] = vals
    rest = ov & ~space.in_gamma
    if rest.any():
        lift[rest] = kappa2(mesh.nodes[rest]) - kappa1(mesh.nodes[rest])
    return lift


def constrained_values(space: FESpace, kappa1, kappa2, lift) -> np.ndarray:
    mesh = space.mesh
    idx = space.fixed
    vals = np.empty(idx.size)
    pts = mesh.nodes[idx]
    d1 = space.touch_dir1[idx]
    if d1.any():
        vals[d1] = kappa1(pts[d1])
    if (~d1).any():
        vals[~d1] = kappa2(pts[~d1]) - lift[idx[~d1]]
    return vals


def apply_constraints(operator: AssembledMatrix, load: np.ndarray, kappa1, kappa2,
                      mu) -> AssembledSystem:
    """Fix Dirichlet dofs, lift the jump and reduce to the free dofs."""
    space = operator.space
    lift = lifting_vector(space, kappa1, kappa2, mu)
    A = operator.full()
    rhs = np.asarray(load, dtype=float) - operator.part(1) @ lift
    free, fixed = space.free, space.fixed
    wc = constrained_values(space, kappa1, kappa2, lift)
    Afc = A[free][:, fixed]
    rhs_f = rhs[free] - Afc @ wc
    Aff = A[free][:, free].tocsr()
    Aff.sort_indices()
    return AssembledSystem(operator, Aff, rhs_f, free, fixed, wc, lift)


@dataclass
class FieldPair:
    """Global coefficients u and the reconstruction u_1 = u, u_2 = u + lift."""

    space: FESpace
    u: np.ndarray
    lift: np.ndarray

    @property
    def u1(self) -> np.ndarray:
        return self.u

    @property
    def u2(self) -> np.ndarray:
        return self.u + self.lift

    def subdomain(self, sub: int) -> np.ndarray:
        return self.u1 if sub == 0 else self.u2

    def gamma_jump(self) -> np.ndarray:
        """u_2 - u_1 on the interface nodes."""
        m = self.space.in_gamma & self.space.overlap
        return (self.u2 - self.u1)[m]


def expand_solution(system: AssembledSystem, free_values: np.ndarray) -> FieldPair:
    u = np.empty(system.space.num_dofs)
    u[system.free] = free_values
    u[system.fixed] = system.constrainedValues
    return FieldPair(system.space, u, system.liftValues)


def dump_sparsity(operator: AssembledMatrix, path) -> int:
    """Write ``row col category`` for every nonzero; returns the line count."""
    p = operator.pattern
    rows = np.repeat(np.arange(p.n), np.diff(p.indptr))
    keep = operator.category > 0
    with open(path, "w") as fh:
        for r, c, k in zip(rows[keep], p.indices[keep], operator.category[keep]):
            fh.write(f"{r} {c} {CATEGORY_NAMES[int(k)]}\n")
    return int(keep.sum())
