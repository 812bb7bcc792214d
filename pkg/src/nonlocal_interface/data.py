"""Problem data: manufactured nonlocal solutions, local reference problems and
data compatible with the local limit, plus evaluation of the reduced
interface-flux operator."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.special import roots_jacobi

from . import geometry as geo
from .fields import ZERO, Field, PointwiseField, constant, trig
from .kernel import KernelSpec

PI = math.pi

NONLOCAL_CASES = ("sin1d", "sin2d", "patch1d", "patch2d")
LOCAL_CASES = ("local1d", "local2d")


def _norm_case(case: str) -> str:
    return str(case).strip().lower()


@dataclass
class ProblemData:
    """Nonlocal problem data. Fields are callables on (n, dim) point arrays."""

    name: str
    dim: int
    kappa1: Callable
    kappa2: Callable
    mu: Callable
    zeta1: Optional[Callable] = None
    zeta2: Optional[Callable] = None
    nu: Optional[Callable] = None
    exact1: Optional[Field] = None
    exact2: Optional[Field] = None
    local_exact1: Optional[Field] = None
    local_exact2: Optional[Field] = None
    load_mode: str = "explicit"

    def require(self, mode: str) -> None:
        if mode == "galerkin":
            if self.exact1 is None or self.exact2 is None:
                raise ValueError(f"{self.name}: Galerkin loads need exact nonlocal fields")
        elif mode == "explicit":
            missing = [n for n in ("zeta1", "zeta2", "nu") if getattr(self, n) is None]
            if missing:
                raise ValueError(f"{self.name}: explicit loads need {', '.join(missing)}")
        else:
            raise ValueError(f"unknown load mode {mode!r}")


@dataclass
class LocalData:
    name: str
    dim: int
    f1: Field
    f2: Field
    g1: Field
    g2: Field
    m: Field
    s: Field
    exact1: Field
    exact2: Field


# --------------------------------------------------------------------------
# reduced interface flux

def _legendre(n):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


def _radial_integral(t0, t1, g, kernel: KernelSpec, jac: int, n=30):
    """int_{t0}^{t1} g(t) gamma(t) t^jac dt for g vanishing linearly at 0.

    Rays starting at the singular point use Gauss-Jacobi; others are graded
    geometrically towards t0.
    """
    if t1 <= t0:
        return 0.0
    C = kernel.normConstant
    if kernel.family == "constant":
        x, w = _legendre(n)
        t = t0 + (t1 - t0) * x
        return float(np.sum(C * (t1 - t0) * w * g(t) * t ** jac))
    e = jac - kernel.exponent                       # weight exponent: -1 - 2s
    if t0 <= 1e-14 * t1:
        # int_0^t1 t^(e+1) (g/t) dt
        a = e + 1.0
        xj, wj = roots_jacobi(n, 0.0, a)
        t = 0.5 * t1 * (xj + 1.0)
        return float(C * (0.5 * t1) ** (a + 1.0) * np.sum(wj * g(t) / t))
    x, w = _legendre(20)
    total = 0.0
    lo = t0
    while lo < t1 * (1 - 1e-15):
        hi = min(2.0 * lo, t1)
        if t1 < 2.2 * lo:
            hi = t1
        t = lo + (hi - lo) * x
        total += float(np.sum(C * (hi - lo) * w * g(t) * t ** e))
        lo = hi
    return total


def _box_ball_1d(x, box: geo.Box, kernel, D):
    a = max(box.lo[0], x - kernel.delta)
    b = min(box.hi[0], x + kernel.delta)
    if b <= a:
        return 0.0
    total = 0.0
    if b > x:          # y = x + t
        t0 = max(a - x, 0.0)
        total += _radial_integral(t0, b - x, lambda t: D(x + t), kernel, 0)
    if a < x:          # y = x - t
        t0 = max(x - b, 0.0)
        total += _radial_integral(t0, x - a, lambda t: D(x - t), kernel, 0)
    return total


def _ray_box(px, py, ex, ey, box):
    lo, hi = box.lo, box.hi
    r0, r1 = 0.0, np.inf
    for p, e, l, h in ((px, ex, lo[0], hi[0]), (py, ey, lo[1], hi[1])):
        if abs(e) < 1e-15:
            if p < l or p > h:
                return 1.0, 0.0
            continue
        ta, tb = (l - p) / e, (h - p) / e
        if ta > tb:
            ta, tb = tb, ta
        r0, r1 = max(r0, ta), min(r1, tb)
    return r0, r1


def _box_ball_2d(x, box: geo.Box, kernel, D, n_theta=24):
    px, py = float(x[0]), float(x[1])
    delta = kernel.delta
    cx = min(max(px, box.lo[0]), box.hi[0])
    cy = min(max(py, box.lo[1]), box.hi[1])
    if math.hypot(cx - px, cy - py) >= delta:
        return 0.0
    angs = [-PI, PI]
    for X in (box.lo[0], box.hi[0]):
        for Y in (box.lo[1], box.hi[1]):
            if abs(X - px) + abs(Y - py) > 0:
                angs.append(math.atan2(Y - py, X - px))
        # circle crossings of vertical edge lines
        dx = X - px
        if abs(dx) < delta:
            dy = math.sqrt(delta * delta - dx * dx)
            angs += [math.atan2(dy, dx), math.atan2(-dy, dx)]
    for Y in (box.lo[1], box.hi[1]):
        dy = Y - py
        if abs(dy) < delta:
            dx = math.sqrt(delta * delta - dy * dy)
            angs += [math.atan2(dy, dx), math.atan2(dy, -dx)]
    brk = np.unique(np.array(angs))
    xg, wg = _legendre(n_theta)
    total = 0.0
    for a0, a1 in zip(brk[:-1], brk[1:]):
        if a1 - a0 < 1e-14:
            continue
        for xt, wt in zip(xg, wg):
            th = a0 + (a1 - a0) * xt
            ex, ey = math.cos(th), math.sin(th)
            r0, r1 = _ray_box(px, py, ex, ey, box)
            r1 = min(r1, delta)
            if r1 <= r0:
                continue
            g = lambda r: D(np.column_stack([px + r * ex, py + r * ey]))
            total += (a1 - a0) * wt * _radial_integral(r0, r1, g, kernel, 1)
    return total


def _box_ball(x, boxes: Sequence[geo.Box], kernel, D, dim):
    f = _box_ball_1d if dim == 1 else _box_ball_2d
    return sum(f(x, b, kernel, D) for b in boxes)


def eval_interface_flux(u1: Callable, u2: Callable, kernels: Tuple[KernelSpec, KernelSpec],
                        decomp: geo.RegionDecomposition, x) -> float:
    """Reduced interface flux (jump-kernel choice) at a point of Gamma u Omega_2^J."""
    dim = decomp.dim
    pt = geo.as_points(x, dim)
    region = int(geo.regions_of(decomp, pt)[0])
    if geo.in_boxes(decomp.omega2J, pt, closed=True, dim=dim)[0] and region == geo.OMEGA2:
        return 0.0
    if region == geo.JUMP1:
        i, j = 0, 1
    elif region == geo.JUMP2:
        i, j = 1, 0
    else:
        raise ValueError("flux evaluation point outside Gamma u Omega_2^J")
    us = (u1, u2)
    xs = pt[0] if dim == 2 else float(pt[0, 0])
    ux = [float(np.asarray(u(pt))[0]) for u in us]

    def diff(sub):
        if dim == 1:
            return lambda y: ux[sub] - us[sub](np.asarray(y, float).reshape(-1, 1))
        return lambda Y: ux[sub] - us[sub](Y)

    jump_of = (decomp.jumpCollar1, decomp.jumpCollar2)
    other_jump = jump_of[j]
    total = 0.0
    if i == 1 and decomp.omega2J:
        total += 2.0 * _box_ball(xs, decomp.omega2J, kernels[i], diff(i), dim)
    total += _box_ball(xs, other_jump, kernels[i], diff(i), dim)
    total -= _box_ball(xs, other_jump, kernels[j], diff(j), dim)
    return float(total)


# --------------------------------------------------------------------------
# catalogs

def _first_coordinate():
    return trig(D=1.0, name="x")


def manufactured_nonlocal(case: str, kernels: Optional[Tuple[KernelSpec, KernelSpec]] = None,
                          decomp: Optional[geo.RegionDecomposition] = None) -> ProblemData:
    """Exact nonlocal solutions with traces as Dirichlet data and u_2 - u_1 as jump.

    When ``kernels`` and ``decomp`` are given, the flux jump nu is attached as a
    field evaluated pointwise by :func:`eval_interface_flux`.
    """
    c = _norm_case(case)
    if c == "sin1d":
        u1 = trig(B1=1.0, name="sin(pi x)")
        u2 = trig(A=1.0, B1=-1.0, name="1-sin(pi x)")
        dim = 1
    elif c == "sin2d":
        u1 = trig(A=2.0, C=2.0, name="2+2sin(pi x1)sin(2pi x2)")
        u2 = trig(A=1.0, B=-1.0, name="1-sin(pi x1)sin(pi x2)")
        dim = 2
    elif c in ("patch1d", "patch2d"):
        dim = 1 if c == "patch1d" else 2
        lin = _first_coordinate()
        return ProblemData(c, dim, kappa1=lin, kappa2=lin, mu=ZERO, zeta1=ZERO, zeta2=ZERO,
                           nu=ZERO, exact1=lin, exact2=lin, load_mode="explicit")
    else:
        raise ValueError(f"unknown nonlocal case {case!r}; expected one of {NONLOCAL_CASES}")
    nu = None
    if kernels is not None and decomp is not None:
        def nu_fn(pts, _u1=u1, _u2=u2):
            out = np.zeros(pts.shape[0])
            inside = geo.in_boxes(decomp.gammaRegion, pts, closed=False, dim=dim)
            for k in np.flatnonzero(inside):
                out[k] = eval_interface_flux(_u1, _u2, kernels, decomp, pts[k])
            return out
        nu = PointwiseField(nu_fn, name="flux jump")
    return ProblemData(c, dim, kappa1=u1, kappa2=u2, mu=u2 - u1, nu=nu, exact1=u1, exact2=u2,
                       load_mode="galerkin")


def local_catalog(case: str) -> LocalData:
    c = _norm_case(case)
    if c == "local1d":
        u1 = trig(B1=1.0, name="sin(pi x)")
        u2 = trig(A=1.0, B1=-2.0, name="1-2sin(pi x)")
        return LocalData(c, 1, f1=trig(B1=PI ** 2), f2=trig(B1=-2 * PI ** 2), g1=u1, g2=u2,
                         m=constant(1.0), s=constant(-3 * PI), exact1=u1, exact2=u2)
    if c == "local2d":
        u1 = trig(A=2.0, C=2.0, name="2+2sin(pi x1)sin(2pi x2)")
        u2 = trig(A=1.0, B=-1.0, name="1-sin(pi x1)sin(pi x2)")
        return LocalData(c, 2, f1=trig(C=10 * PI ** 2), f2=trig(B=-2 * PI ** 2), g1=u1, g2=u2,
                         m=constant(-1.0), s=trig(G=-2 * PI, F=-PI, name="flux jump"),
                         exact1=u1, exact2=u2)
    raise ValueError(f"unknown local case {case!r}; expected one of {LOCAL_CASES}")


def project_points(decomp: geo.RegionDecomposition, pts) -> np.ndarray:
    """Vectorized projection onto Gamma_0 (a straight facet)."""
    pts = geo.as_points(pts, decomp.dim).copy()
    g = decomp.gamma0
    np.clip(pts, np.asarray(g.lo), np.asarray(g.hi), out=pts)
    return pts


def _tangential(field: Field, decomp: geo.RegionDecomposition) -> PointwiseField:
    return PointwiseField(lambda pts: field(project_points(decomp, pts)), name=f"{field.name} o proj")


def _clamped(field: Field, box: geo.Box) -> PointwiseField:
    lo, hi = np.asarray(box.lo), np.asarray(box.hi)
    return PointwiseField(lambda pts: field(np.clip(pts, lo, hi)), name=f"{field.name} o clamp")


def compatible_from_local(local: LocalData, delta1: float, delta2: float,
                          decomp: Optional[geo.RegionDecomposition] = None,
                          kappa_extension: str = "analytic",
                          mu_extension: str = "constant") -> ProblemData:
    """Nonlocal data whose solutions approach the local solution as the horizons vanish.

    zeta_i = f_i; nu = s(P x)/(delta_1 + delta_2) on Gamma and 0 on Omega_2^J,
    P the projection onto Gamma_0. ``mu_extension``: "constant" (m(P x)) or
    "exact" (u_2^0 - u_1^0). ``kappa_extension``: "analytic" (the local solution
    formula continued into the collar) or "projection" (g_i at the nearest
    point of the closed subdomain).
    """
    if decomp is None:
        cfg = (geo.interval_config if local.dim == 1 else geo.rectangle_config)(delta1, delta2)
        decomp = geo.decompose(cfg)
    elif abs(decomp.delta1 - delta1) > 1e-15 or abs(decomp.delta2 - delta2) > 1e-15:
        raise ValueError("decomposition horizons differ from the requested ones")
    dim = local.dim
    scale = 1.0 / (delta1 + delta2)
    s_on_gamma = local.s.scaled(scale) if dim == 1 else _tangential(local.s, decomp)

    def nu_fn(pts):
        inside = geo.in_boxes(decomp.gammaRegion, pts, closed=True, dim=dim)
        vals = np.asarray(s_on_gamma(pts), dtype=float)
        if dim == 2:
            vals = vals * scale
        return np.where(inside, vals, 0.0)

    if mu_extension == "constant":
        mu = local.m if dim == 1 else _tangential(local.m, decomp)
    elif mu_extension == "exact":
        mu = local.exact2 - local.exact1
    else:
        raise ValueError("mu_extension must be 'constant' or 'exact'")
    if kappa_extension == "analytic":
        k1, k2 = local.exact1, local.exact2
    elif kappa_extension == "projection":
        k1 = _clamped(local.g1, decomp.config.omega1)
        k2 = _clamped(local.g2, decomp.config.omega2)
    else:
        raise ValueError("kappa_extension must be 'analytic' or 'projection'")
    return ProblemData(f"{local.name}-compatible", dim, kappa1=k1, kappa2=k2, mu=mu,
                       zeta1=local.f1, zeta2=local.f2, nu=PointwiseField(nu_fn, "nu"),
                       local_exact1=local.exact1, local_exact2=local.exact2, load_mode="explicit")
