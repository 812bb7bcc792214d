"""Linear solves, error norms and empirical convergence rates."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import geometry as geo
from .assembly import (AssembledMatrix, AssembledSystem, FieldPair, element_quadrature,
                       error_energy_by_pairs, expand_solution)
from .mesh import FESpace, element_gradients

DENSE_DIRECT = "DenseDirect"
CONJUGATE_GRADIENT = "ConjugateGradient"

SUBDOMAIN_REGIONS = ((geo.OMEGA1, geo.JUMP2), (geo.JUMP1, geo.OMEGA2))


class SolverError(RuntimeError):
    """Raised on pivot failure or CG non-convergence; carries diagnostics."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class SolverConfig:
    kind: str = "auto"            # auto | dense | cg
    dense_cap: int = 4000
    tol: float = 1e-12
    max_iter: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("auto", "dense", "cg"):
            raise ValueError("solver kind must be auto, dense or cg")


@dataclass
class SolveReport:
    solution: np.ndarray
    iterations: int
    residual: float
    kind: str


def _relative_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return float(r / nb) if nb > 0 else float(r)


def dense_solve(A, b) -> SolveReport:
    M = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    try:
        c, low = sla.cho_factor(M, lower=True, check_finite=True)
    except sla.LinAlgError as err:
        raise SolverError(f"Cholesky pivot failure: {err}", n=M.shape[0]) from err
    x = sla.cho_solve((c, low), b)
    return SolveReport(x, 1, _relative_residual(M, x, b), DENSE_DIRECT)


def cg_solve(A, b, tol=1e-12, max_iter=None, x0=None) -> SolveReport:
    """Jacobi-preconditioned conjugate gradients on the relative residual."""
    n = b.size
    A = sp.csr_matrix(A)
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise SolverError("non-positive diagonal entry; matrix is not SPD", n=n)
    inv_d = 1.0 / diag
    max_iter = int(max_iter if max_iter is not None else math.ceil(50 * math.sqrt(n)))
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return SolveReport(np.zeros(n), 0, 0.0, CONJUGATE_GRADIENT)
    z = inv_d * r
    p = z.copy()
    rz = float(r @ z)
    res = float(np.linalg.norm(r) / nb)
    it = 0
    while res > tol and it < max_iter:
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0:
            raise SolverError("CG breakdown: non-positive curvature", iteration=it, residual=res)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = inv_d * r
        rz_new = float(r @ z)
        p *= rz_new / rz
        p += z
        rz = rz_new
        it += 1
        res = float(np.linalg.norm(r) / nb)
    # recompute the true residual to guard against drift
    res = _relative_residual(A, x, b)
    if res > tol * 10:
        raise SolverError(f"CG did not converge: residual {res:.3e} after {it} iterations",
                          iterations=it, residual=res, n=n)
    return SolveReport(x, it, res, CONJUGATE_GRADIENT)


def solve(system, config: SolverConfig = SolverConfig()) -> SolveReport:
    """Solve an :class:`AssembledSystem` (or a raw (A, b) tuple)."""
    if isinstance(system, AssembledSystem):
        A, b = system.matrix, system.load
    else:
        A, b = system
        b = np.asarray(b, dtype=float)
    n = b.size
    kind = config.kind
    if kind == "auto":
        kind = "dense" if n <= config.dense_cap else "cg"
    if kind == "dense":
        return dense_solve(A, b)
    return cg_solve(A, b, config.tol, config.max_iter)


def solve_system(system: AssembledSystem, config: SolverConfig = SolverConfig()):
    """Solve and rebuild the subdomain fields; returns (FieldPair, SolveReport)."""
    rep = solve(system, config)
    return expand_solution(system, rep.solution), rep


# --------------------------------------------------------------------------
# errors

@dataclass
class ErrorReport:
    L2: Tuple[float, float]
    H1: Tuple[float, float]
    energy: Optional[float]
    reference: str

    def as_row(self) -> List[float]:
        return [self.L2[0], self.L2[1], self.H1[0], self.H1[1]]


def _subdomain_errors(space: FESpace, coeffs: np.ndarray, regions, exact, order: int):
    mesh = space.mesh
    mask = np.isin(mesh.elem_region, regions)
    if not mask.any():
        return 0.0, 0.0
    pts, W, lam, elems = element_quadrature(mesh, order, mask)
    c = coeffs[elems]                                   # (E, d+1)
    uh = np.einsum("ea,qa->eq", c, lam)
    flat = pts.reshape(-1, mesh.dim)
    ue = exact(flat).reshape(uh.shape)
    if not np.all(np.isfinite(ue)):
        raise ValueError("reference field undefined at a quadrature point")
    l2 = float(np.sqrt(np.sum(W * (uh - ue) ** 2)))
    G = element_gradients(mesh)[mask]                   # (E, d+1, d)
    guh = np.einsum("ea,ead->ed", c, G)                 # constant per element
    gue = exact.gradient(flat, mesh.dim).reshape(uh.shape + (mesh.dim,))
    h1 = float(np.sqrt(np.sum(W[..., None] * (guh[:, None, :] - gue) ** 2)))
    return l2, h1


def error_norms(solution: FieldPair, exact1, exact2, operator: Optional[AssembledMatrix] = None,
                reference: Optional[np.ndarray] = None, order: Optional[int] = None,
                label: str = "analytic") -> ErrorReport:
    """Per-subdomain L2 and H1-seminorm errors against analytic fields.

    If ``operator`` and a reference coefficient vector are given, ``energy`` is
    sqrt(e^T A e) of the coefficient difference.
    """
    space = solution.space
    if order is None:
        order = 7 if space.dim == 1 else 5
    out_l2, out_h1 = [], []
    for sub, exact in enumerate((exact1, exact2)):
        l2, h1 = _subdomain_errors(space, solution.subdomain(sub), SUBDOMAIN_REGIONS[sub],
                                   exact, order)
        out_l2.append(l2)
        out_h1.append(h1)
    energy = None
    if operator is not None and reference is not None:
        e = solution.u - np.asarray(reference, dtype=float)
        energy = float(math.sqrt(max(float(e @ (operator.full() @ e)), 0.0)))
    return ErrorReport(tuple(out_l2), tuple(out_h1), energy, label)


def energy_error(operator: AssembledMatrix, exact1, exact2, c1, c2) -> float:
    return math.sqrt(max(error_energy_by_pairs(operator, exact1, exact2, c1, c2), 0.0))


def interpolant_pair(space: FESpace, exact1, exact2) -> FieldPair:
    """Nodal interpolant in the solution layout (u on sub-1 nodes, u_2 elsewhere)."""
    nodes = space.mesh.nodes
    v1 = exact1(nodes)
    v2 = exact2(nodes)
    u = np.where(space.in_sub1, v1, v2)
    lift = np.where(space.overlap, v2 - v1, 0.0)
    return FieldPair(space, u, lift)


# --------------------------------------------------------------------------
# rates

def estimate_rates(pairs: Sequence[Tuple[float, float]]) -> List[Optional[float]]:
    """Successive slopes log(e_k/e_{k+1}) / log(p_k/p_{k+1}); None where undefined."""
    pairs = list(pairs)
    out: List[Optional[float]] = []
    for (p0, e0), (p1, e1) in zip(pairs[:-1], pairs[1:]):
        if not (p0 > p1 > 0):
            raise ValueError("parameters must be positive and strictly decreasing")
        if e0 <= 0 or e1 <= 0 or not np.isfinite(e0) or not np.isfinite(e1):
            out.append(None)
            continue
        out.append(math.log(e0 / e1) / math.log(p0 / p1))
    return out


def least_squares_slope(params, errors) -> float:
    """Slope of the least-squares line through (log p, log e)."""
    p = np.asarray(params, dtype=float)
    e = np.asarray(errors, dtype=float)
    ok = (p > 0) & (e > 0) & np.isfinite(e)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(p[ok]), np.log(e[ok]), 1)[0])
