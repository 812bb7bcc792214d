"""Quadrature rules and element-pair rules for truncated radial kernels.

An element-pair rule is a list of point pairs (x_q, y_q) with weights w_q,
x_q in the outer element and y_q in the inner element, such that

    sum_q w_q F(x_q, y_q)  ~  int_K int_{L n B_delta(x)} F(x, y) gamma(|x - y|) dy dx

for integrands F that vanish quadratically on the diagonal (differences of
smooth or P1 functions). The kernel value, Jacobians and singular weights are
folded into w_q.

1D pairs are integrated in the separation variable z = y - x with the
z-interval split at every point where the x-range changes shape, at 0 and at
+-delta, so the ball is clipped exactly. Near z = 0 a Gauss-Jacobi rule absorbs
the |z|^(1-2s) weight.

2D pairs use outer Gauss points on K. For each outer point the inner element is
either fully inside the ball (plain Gauss rule) or handled in polar
coordinates around x, where the ball is simply r < delta; angular sectors break
at vertex directions and at the angles where an edge line crosses the circle.
The alternative ``cut_mode="subdivide"`` treats cut elements by recursive
subdivision with the ball indicator applied at leaf points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from ._jit import njit
from .kernel import CONSTANT, FRACTIONAL, KernelSpec

MAX_GAUSS = 32
BUFFER_SIZE = 1 << 15
MODE_POLAR = 0
MODE_SUBDIVIDE = 1


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray     # reference coordinates, (n, d)
    weights: np.ndarray    # sum to the reference measure
    order: int

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.points)))


INTERVAL_ORDERS = tuple(range(1, 2 * MAX_GAUSS))
TRIANGLE_ORDERS = tuple(range(1, 21))


def gauss_interval(order: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1] exact up to ``order``."""
    if order not in INTERVAL_ORDERS:
        raise ValueError(f"unsupported interval order {order}; supported: 1..{INTERVAL_ORDERS[-1]}")
    n = (order + 2) // 2
    t, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule((0.5 * (t + 1.0)).reshape(-1, 1), 0.5 * w, order)


def _sym3(a, w):
    b = 1.0 - 2.0 * a
    return [(a, a, w), (b, a, w), (a, b, w)]


def _dunavant(order):
    if order == 1:
        pts = [(1 / 3, 1 / 3, 1.0)]
    elif order == 2:
        pts = _sym3(1 / 6, 1 / 3)
    elif order in (3, 4):
        pts = _sym3(0.445948490915965, 0.223381589678011) + _sym3(0.091576213509771, 0.109951743655322)
    else:
        pts = ([(1 / 3, 1 / 3, 0.225)] + _sym3(0.470142064105115, 0.132394152788506)
               + _sym3(0.101286507323456, 0.125939180544827))
    arr = np.array(pts)
    return arr[:, :2], 0.5 * arr[:, 2] / arr[:, 2].sum()


def _collapsed(order):
    n = (order + 2) // 2
    # u with weight (1 - u) on [0, 1]; v plain Gauss on [0, 1]
    tu, wu = roots_jacobi(n, 1.0, 0.0)
    u = 0.5 * (tu + 1.0)
    wu = wu / 4.0
    tv, wv = np.polynomial.legendre.leggauss(n)
    v = 0.5 * (tv + 1.0)
    wv = 0.5 * wv
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv)
    pts = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
    return pts, W.ravel()


@lru_cache(maxsize=None)
def _triangle_cached(order):
    pts, w = _dunavant(order) if order <= 5 else _collapsed(order)
    return pts, w


def gauss_triangle(order: int) -> QuadratureRule:
    """Rule on the reference triangle (0,0),(1,0),(0,1) exact up to ``order``."""
    if order not in TRIANGLE_ORDERS:
        raise ValueError(f"unsupported triangle order {order}; supported: 1..{TRIANGLE_ORDERS[-1]}")
    pts, w = _triangle_cached(order)
    return QuadratureRule(pts.copy(), w.copy(), order)


def gauss_jacobi_unit(n: int, a: float):
    """Nodes/weights for int_0^1 t^a g(t) dt."""
    t, w = roots_jacobi(n, 0.0, a)
    return 0.5 * (t + 1.0), w * 0.5 ** (a + 1.0)


@lru_cache(maxsize=None)
def _legendre_tables():
    X = np.zeros((MAX_GAUSS + 1, MAX_GAUSS))
    W = np.zeros((MAX_GAUSS + 1, MAX_GAUSS))
    for n in range(1, MAX_GAUSS + 1):
        t, w = np.polynomial.legendre.leggauss(n)
        X[n, :n] = 0.5 * (t + 1.0)
        W[n, :n] = 0.5 * w
    X.setflags(write=False)
    W.setflags(write=False)
    return X, W


@dataclass(frozen=True)
class PairQuadConfig:
    """Pair-quadrature controls.

    base_order / diagonal_order: polynomial degrees of the regular and the
    near-diagonal rules. cut_depth: subdivision depth for ``cut_mode="subdivide"``.
    near_factor: in 2D, fractional inner elements closer than
    ``near_factor * diam`` to an outer point are integrated in polar form.
    """

    dim: int = 1
    base_order: int = 0
    diagonal_order: int = 8
    cut_depth: int = 4
    cut_mode: str = "polar"
    angular_points: int = 3
    radial_points: int = 3
    near_factor: float = 1.5

    def __post_init__(self):
        if self.base_order == 0:
            object.__setattr__(self, "base_order", 5 if self.dim == 1 else 4)
        for name in ("base_order", "diagonal_order", "cut_depth", "angular_points", "radial_points"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.cut_mode not in ("polar", "subdivide"):
            raise ValueError("cut_mode must be 'polar' or 'subdivide'")
        if self.cut_depth > 10:
            raise ValueError("cut_depth above 10 is not supported")

    @property
    def mode_code(self) -> int:
        return MODE_POLAR if self.cut_mode == "polar" else MODE_SUBDIVIDE


@dataclass
class QuadTables:
    """Arrays handed to the compiled pair rules for one kernel."""

    config: PairQuadConfig
    fam: int
    s: float
    C: float
    delta: float
    glx: np.ndarray
    glw: np.ndarray
    gjt: np.ndarray
    gjw: np.ndarray
    ints: np.ndarray = field(repr=False)
    tri: tuple = field(repr=False, default=())


def make_tables(config: PairQuadConfig, kernel: KernelSpec) -> QuadTables:
    glx, glw = _legendre_tables()
    n_gj = max(2, (config.diagonal_order + 2) // 2)
    a = 1.0 - 2.0 * kernel.s if kernel.family == "fractional" else 0.0
    gjt, gjw = gauss_jacobi_unit(n_gj, a)
    nx = (config.base_order + 2) // 2
    nd = (config.diagonal_order + 2) // 2
    ints = np.array([nx, nd, n_gj, config.angular_points, max(config.angular_points, nd),
                     config.radial_points, config.mode_code, config.cut_depth], dtype=np.int64)
    tri = ()
    if config.dim == 2:
        ob, wb = _triangle_cached(config.base_order)
        od, wd = _triangle_cached(max(config.diagonal_order, config.base_order))
        lf, wl = _triangle_cached(config.base_order)
        tri = (np.ascontiguousarray(ob), np.ascontiguousarray(wb), np.ascontiguousarray(od),
               np.ascontiguousarray(wd), np.ascontiguousarray(lf), np.ascontiguousarray(wl))
    return QuadTables(config, kernel.code, float(kernel.s), float(kernel.normConstant),
                      float(kernel.delta), glx, glw, gjt, gjw, ints, tri)


# --------------------------------------------------------------------------
# 1D pair rule

@njit
def _n_for_ratio(ratio, nmin, nmax):
    if ratio <= 1.0 + 1e-12:
        return nmin
    c = (ratio + 1.0) / (ratio - 1.0)
    rho = c + math.sqrt(c * c - 1.0)
    n = int(math.ceil(17.3 / math.log(rho)))
    if n < nmin:
        n = nmin
    if n > nmax:
        n = nmax
    return n


@njit
def _emit_x_1d(aK, bK, aL, bL, z, wz, nx, glx, glw, ox, oy, ow, cnt):
    xa = max(aK, aL - z)
    xb = min(bK, bL - z)
    if xb <= xa:
        return cnt
    L = xb - xa
    for j in range(nx):
        if cnt >= ox.shape[0]:
            raise ValueError("pair rule buffer overflow")
        x = xa + L * glx[nx, j]
        ox[cnt] = x
        oy[cnt] = x + z
        ow[cnt] = wz * L * glw[nx, j]
        cnt += 1
    return cnt


@njit
def rule_1d(aK, bK, aL, bL, delta, fam, s, C, ints, glx, glw, gjt, gjw, ox, oy, ow):
    """Fill (ox, oy, ow) with the pair rule of [aK,bK] x [aL,bL]; returns the count."""
    zlo = aL - bK
    zhi = bL - aK
    if zlo >= delta or zhi <= -delta:
        return 0
    nx = ints[0]
    lo = max(zlo, -delta)
    hi = min(zhi, delta)
    bp = np.empty(7)
    bp[0] = lo
    bp[1] = hi
    bp[2] = aL - aK
    bp[3] = bL - bK
    bp[4] = 0.0
    bp[5] = -delta
    bp[6] = delta
    bp.sort()
    scale = max(abs(lo), abs(hi))
    tol = 1e-14 * scale
    n_gj = ints[2]
    a = 1.0 - 2.0 * s
    cnt = 0
    prev = lo
    for k in range(7):
        z1 = bp[k]
        if z1 <= prev + tol:
            continue
        if z1 > hi:
            z1 = hi
        z0 = prev
        if z1 - z0 <= tol:
            continue
        prev = z1
        if fam == CONSTANT:
            L = z1 - z0
            for j in range(nx):
                z = z0 + L * glx[nx, j]
                cnt = _emit_x_1d(aK, bK, aL, bL, z, C * L * glw[nx, j], nx, glx, glw,
                                 ox, oy, ow, cnt)
            continue
        if z0 >= -tol:
            t0, t1, sg = max(z0, 0.0), z1, 1.0
        else:
            t0, t1, sg = -z1, -z0, -1.0
        if t0 <= tol:
            fac = C * t1 ** (a + 1.0)
            for j in range(n_gj):
                t = t1 * gjt[j]
                w = fac * gjw[j] / (t * t)
                cnt = _emit_x_1d(aK, bK, aL, bL, sg * t, w, nx, glx, glw, ox, oy, ow, cnt)
            continue
        p0 = t0
        while p0 < t1 - tol:
            p1 = 2.0 * p0
            if p1 > t1 or t1 < 2.2 * p0:
                p1 = t1
            n = _n_for_ratio(p1 / p0, nx + 1, MAX_GAUSS)
            L = p1 - p0
            for j in range(n):
                t = p0 + L * glx[n, j]
                w = C * t ** (-1.0 - 2.0 * s) * L * glw[n, j]
                cnt = _emit_x_1d(aK, bK, aL, bL, sg * t, w, nx, glx, glw, ox, oy, ow, cnt)
            p0 = p1
    return cnt


# --------------------------------------------------------------------------
# 2D geometry helpers

@njit
def _seg_dist2(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    L2 = dx * dx + dy * dy
    t = 0.0
    if L2 > 0.0:
        t = ((px - ax) * dx + (py - ay) * dy) / L2
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    qx = ax + t * dx - px
    qy = ay + t * dy - py
    return qx * qx + qy * qy


@njit
def point_triangle_distance(px, py, V):
    """Euclidean distance from a point to a (closed) triangle with vertices V (3, 2)."""
    inside = True
    area = ((V[1, 0] - V[0, 0]) * (V[2, 1] - V[0, 1]) - (V[1, 1] - V[0, 1]) * (V[2, 0] - V[0, 0]))
    for k in range(3):
        ax, ay = V[k, 0], V[k, 1]
        bx, by = V[(k + 1) % 3, 0], V[(k + 1) % 3, 1]
        cr = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        if cr * area < 0.0:
            inside = False
    if inside:
        return 0.0
    d2 = _seg_dist2(px, py, V[0, 0], V[0, 1], V[1, 0], V[1, 1])
    d2 = min(d2, _seg_dist2(px, py, V[1, 0], V[1, 1], V[2, 0], V[2, 1]))
    d2 = min(d2, _seg_dist2(px, py, V[2, 0], V[2, 1], V[0, 0], V[0, 1]))
    return math.sqrt(d2)


@njit
def _max_vertex_distance(px, py, V):
    m = 0.0
    for k in range(3):
        dx = V[k, 0] - px
        dy = V[k, 1] - py
        m = max(m, dx * dx + dy * dy)
    return math.sqrt(m)


@njit
def _tri_area(V):
    return 0.5 * abs((V[1, 0] - V[0, 0]) * (V[2, 1] - V[0, 1]) - (V[1, 1] - V[0, 1]) * (V[2, 0] - V[0, 0]))


@njit
def _kernel_weight(fam, s, C, r):
    if fam == CONSTANT:
        return C
    return C * r ** (-2.0 - 2.0 * s)


@njit
def _emit_gauss_tri(px, py, V, wx, pts, wts, fam, s, C, delta, indicator, ox, oy, ow, cnt):
    A2 = 2.0 * _tri_area(V)
    for q in range(wts.shape[0]):
        u = pts[q, 0]
        v = pts[q, 1]
        yx = V[0, 0] + u * (V[1, 0] - V[0, 0]) + v * (V[2, 0] - V[0, 0])
        yy = V[0, 1] + u * (V[1, 1] - V[0, 1]) + v * (V[2, 1] - V[0, 1])
        dx = yx - px
        dy = yy - py
        r = math.sqrt(dx * dx + dy * dy)
        if indicator and r >= delta:
            continue
        if cnt >= ox.shape[0]:
            raise ValueError("pair rule buffer overflow")
        ox[cnt, 0] = px
        ox[cnt, 1] = py
        oy[cnt, 0] = yx
        oy[cnt, 1] = yy
        ow[cnt] = wx * wts[q] * A2 * _kernel_weight(fam, s, C, r)
        cnt += 1
    return cnt


@njit
def _wrap(a):
    while a > math.pi:
        a -= 2.0 * math.pi
    while a <= -math.pi:
        a += 2.0 * math.pi
    return a


@njit
def _radial_product_weights(r0, r1, s, n, glx, wout, rout):
    """Interpolatory rule on [r0, r1] for the weight r^(-1-2s) with n Gauss nodes."""
    c = 0.5 * (r0 + r1)
    hw = 0.5 * (r1 - r0)
    # monomial moments in r
    mom_r = np.empty(n)
    for m in range(n):
        e = m - 2.0 * s
        mom_r[m] = (r1 ** e - r0 ** e) / e
    # moments of t^k, t = (r - c)/hw
    mom_t = np.zeros(n)
    for k in range(n):
        acc = 0.0
        binom = 1.0
        for m in range(k + 1):
            if m > 0:
                binom = binom * (k - m + 1) / m
            acc += binom * (-c) ** (k - m) * mom_r[m]
        mom_t[k] = acc / hw ** k
    V = np.empty((n, n))
    for j in range(n):
        t = 2.0 * glx[n, j] - 1.0
        rout[j] = c + hw * t
        p = 1.0
        for k in range(n):
            V[k, j] = p
            p *= t
    w = np.linalg.solve(V, mom_t)
    for j in range(n):
        wout[j] = w[j]


@njit
def _polar_inner(px, py, V, wx, fam, s, C, delta, n_theta, n_rad, n_gj,
                 glx, glw, gjt, gjw, ox, oy, ow, cnt):
    # edge lines of V in the form n_k . y <= c_k
    area = ((V[1, 0] - V[0, 0]) * (V[2, 1] - V[0, 1]) - (V[1, 1] - V[0, 1]) * (V[2, 0] - V[0, 0]))
    orient = 1.0 if area > 0 else -1.0
    nxk = np.empty(3)
    nyk = np.empty(3)
    dk = np.empty(3)
    scale = 0.0
    for k in range(3):
        ax, ay = V[k, 0], V[k, 1]
        bx, by = V[(k + 1) % 3, 0], V[(k + 1) % 3, 1]
        ex, ey = bx - ax, by - ay
        L = math.sqrt(ex * ex + ey * ey)
        scale = max(scale, L)
        nxk[k] = orient * ey / L
        nyk[k] = -orient * ex / L
        dk[k] = nxk[k] * (ax - px) + nyk[k] * (ay - py)
    tiny = 1e-13 * scale
    inside = dk[0] >= -tiny and dk[1] >= -tiny and dk[2] >= -tiny
    bp = np.empty(24)
    nb = 0
    if inside:
        base = 0.0
        lo = 0.0
        hi = 2.0 * math.pi
        for k in range(3):
            vx = V[k, 0] - px
            vy = V[k, 1] - py
            if vx * vx + vy * vy > tiny * tiny:
                bp[nb] = math.atan2(vy, vx) % (2.0 * math.pi)
                nb += 1
            # the exit edge changes role where its normal is perpendicular
            # to the ray; only matters for points on an edge
            if dk[k] <= tiny:
                phi = math.atan2(nyk[k], nxk[k])
                bp[nb] = (phi + 0.5 * math.pi) % (2.0 * math.pi)
                nb += 1
                bp[nb] = (phi - 0.5 * math.pi) % (2.0 * math.pi)
                nb += 1
    else:
        cx = (V[0, 0] + V[1, 0] + V[2, 0]) / 3.0 - px
        cy = (V[0, 1] + V[1, 1] + V[2, 1]) / 3.0 - py
        base = math.atan2(cy, cx)
        lo = 1e300
        hi = -1e300
        for k in range(3):
            a = _wrap(math.atan2(V[k, 1] - py, V[k, 0] - px) - base)
            lo = min(lo, a)
            hi = max(hi, a)
            bp[nb] = a
            nb += 1
    for k in range(3):
        ratio = dk[k] / delta
        if -1.0 < ratio < 1.0:
            phi = math.atan2(nyk[k], nxk[k])
            acs = math.acos(ratio)
            for sgn in (-1.0, 1.0):
                a = phi + sgn * acs
                if inside:
                    a = a % (2.0 * math.pi)
                else:
                    a = _wrap(a - base)
                if lo < a < hi:
                    bp[nb] = a
                    nb += 1
    bp[nb] = lo
    nb += 1
    bp[nb] = hi
    nb += 1
    brk = np.sort(bp[:nb])
    rw = np.empty(8)
    rr = np.empty(8)
    for sidx in range(nb - 1):
        t0 = brk[sidx]
        t1 = brk[sidx + 1]
        if t1 - t0 < 1e-13 or t0 < lo - 1e-15 or t1 > hi + 1e-15:
            continue
        for jt in range(n_theta):
            th = base + t0 + (t1 - t0) * glx[n_theta, jt]
            wth = (t1 - t0) * glw[n_theta, jt]
            ex = math.cos(th)
            ey = math.sin(th)
            r_in = 0.0
            r_out = delta
            empty = False
            for k in range(3):
                ne = nxk[k] * ex + nyk[k] * ey
                if ne > 1e-15:
                    r_out = min(r_out, dk[k] / ne)
                elif ne < -1e-15:
                    r_in = max(r_in, dk[k] / ne)
                elif dk[k] < 0.0:
                    empty = True
            if empty or r_out <= r_in:
                continue
            base_w = wx * wth
            if fam == CONSTANT:
                Lr = r_out - r_in
                for j in range(n_rad):
                    r = r_in + Lr * glx[n_rad, j]
                    if cnt >= ox.shape[0]:
                        raise ValueError("pair rule buffer overflow")
                    ox[cnt, 0] = px
                    ox[cnt, 1] = py
                    oy[cnt, 0] = px + r * ex
                    oy[cnt, 1] = py + r * ey
                    ow[cnt] = base_w * C * r * Lr * glw[n_rad, j]
                    cnt += 1
                continue
            if r_in <= 1e-12 * r_out:
                fac = C * r_out ** (2.0 - 2.0 * s)
                for j in range(n_gj):
                    r = r_out * gjt[j]
                    if cnt >= ox.shape[0]:
                        raise ValueError("pair rule buffer overflow")
                    ox[cnt, 0] = px
                    ox[cnt, 1] = py
                    oy[cnt, 0] = px + r * ex
                    oy[cnt, 1] = py + r * ey
                    ow[cnt] = base_w * fac * gjw[j] / (r * r)
                    cnt += 1
                continue
            if r_out <= 2.0 * r_in:
                n = _n_for_ratio(r_out / r_in, n_rad, 12)
                Lr = r_out - r_in
                for j in range(n):
                    r = r_in + Lr * glx[n, j]
                    if cnt >= ox.shape[0]:
                        raise ValueError("pair rule buffer overflow")
                    ox[cnt, 0] = px
                    ox[cnt, 1] = py
                    oy[cnt, 0] = px + r * ex
                    oy[cnt, 1] = py + r * ey
                    ow[cnt] = base_w * C * r ** (-1.0 - 2.0 * s) * Lr * glw[n, j]
                    cnt += 1
                continue
            n = n_rad + 1
            _radial_product_weights(r_in, r_out, s, n, glx, rw, rr)
            for j in range(n):
                r = rr[j]
                if cnt >= ox.shape[0]:
                    raise ValueError("pair rule buffer overflow")
                ox[cnt, 0] = px
                ox[cnt, 1] = py
                oy[cnt, 0] = px + r * ex
                oy[cnt, 1] = py + r * ey
                ow[cnt] = base_w * C * rw[j]
                cnt += 1
    return cnt


@njit
def _subdivide_inner(px, py, V, wx, fam, s, C, delta, depth, lpts, lwts, ox, oy, ow, cnt):
    stack = np.empty((4 * depth + 8, 3, 2))
    lev = np.empty(4 * depth + 8, dtype=np.int64)
    top = 0
    stack[0] = V
    lev[0] = 0
    top = 1
    while top > 0:
        top -= 1
        T = stack[top].copy()
        level = lev[top]
        dmin = point_triangle_distance(px, py, T)
        if dmin >= delta:
            continue
        rmax = _max_vertex_distance(px, py, T)
        if rmax <= delta:
            cnt = _emit_gauss_tri(px, py, T, wx, lpts, lwts, fam, s, C, delta, False,
                                  ox, oy, ow, cnt)
            continue
        if level >= depth:
            cnt = _emit_gauss_tri(px, py, T, wx, lpts, lwts, fam, s, C, delta, True,
                                  ox, oy, ow, cnt)
            continue
        m01 = 0.5 * (T[0] + T[1])
        m12 = 0.5 * (T[1] + T[2])
        m20 = 0.5 * (T[2] + T[0])
        for c in range(4):
            S = stack[top]
            if c == 0:
                S[0] = T[0]
                S[1] = m01
                S[2] = m20
            elif c == 1:
                S[0] = m01
                S[1] = T[1]
                S[2] = m12
            elif c == 2:
                S[0] = m20
                S[1] = m12
                S[2] = T[2]
            else:
                S[0] = m12
                S[1] = m20
                S[2] = m01
            lev[top] = level + 1
            top += 1
    return cnt


@njit
def rule_2d(VK, VL, delta, fam, s, C, ints, near_factor, glx, glw, gjt, gjw,
            obp, obw, odp, odw, lfp, lfw, ox, oy, ow):
    """Pair rule for triangles VK (outer) x VL (inner); returns the count."""
    cKx = (VK[0, 0] + VK[1, 0] + VK[2, 0]) / 3.0
    cKy = (VK[0, 1] + VK[1, 1] + VK[2, 1]) / 3.0
    cLx = (VL[0, 0] + VL[1, 0] + VL[2, 0]) / 3.0
    cLy = (VL[0, 1] + VL[1, 1] + VL[2, 1]) / 3.0
    rK = _max_vertex_distance(cKx, cKy, VK)
    rL = _max_vertex_distance(cLx, cLy, VL)
    dc = math.sqrt((cKx - cLx) ** 2 + (cKy - cLy) ** 2)
    if dc - rK - rL >= delta:
        return 0
    diamL = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            diamL = max(diamL, math.sqrt((VL[i, 0] - VL[j, 0]) ** 2 + (VL[i, 1] - VL[j, 1]) ** 2))
    touching = False
    for i in range(3):
        for j in range(3):
            if VK[i, 0] == VL[j, 0] and VK[i, 1] == VL[j, 1]:
                touching = True
    n_gj = ints[2]
    n_theta = ints[3]
    n_theta_near = ints[4]
    n_rad = ints[5]
    mode = ints[6]
    depth = ints[7]
    if touching and fam == FRACTIONAL:
        op = odp
        opw = odw
    else:
        op = obp
        opw = obw
    AK2 = 2.0 * _tri_area(VK)
    cnt = 0
    for q in range(opw.shape[0]):
        u = op[q, 0]
        v = op[q, 1]
        px = VK[0, 0] + u * (VK[1, 0] - VK[0, 0]) + v * (VK[2, 0] - VK[0, 0])
        py = VK[0, 1] + u * (VK[1, 1] - VK[0, 1]) + v * (VK[2, 1] - VK[0, 1])
        wx = opw[q] * AK2
        dmin = point_triangle_distance(px, py, VL)
        if dmin >= delta:
            continue
        rmax = _max_vertex_distance(px, py, VL)
        near = fam == FRACTIONAL and dmin < near_factor * diamL
        if near:
            nt = n_theta_near if dmin < 0.25 * diamL else n_theta
            cnt = _polar_inner(px, py, VL, wx, fam, s, C, delta, nt, n_rad, n_gj,
                               glx, glw, gjt, gjw, ox, oy, ow, cnt)
        elif rmax <= delta:
            cnt = _emit_gauss_tri(px, py, VL, wx, lfp, lfw, fam, s, C, delta, False,
                                  ox, oy, ow, cnt)
        elif mode == MODE_POLAR:
            cnt = _polar_inner(px, py, VL, wx, fam, s, C, delta, n_theta, n_rad, n_gj,
                               glx, glw, gjt, gjw, ox, oy, ow, cnt)
        else:
            cnt = _subdivide_inner(px, py, VL, wx, fam, s, C, delta, depth, lfp, lfw,
                                   ox, oy, ow, cnt)
    return cnt


# --------------------------------------------------------------------------
# Python-level access

class PairRuleBuilder:
    """Reusable buffers plus tables for generating pair rules of one kernel."""

    def __init__(self, config: PairQuadConfig, kernel: KernelSpec):
        if config.dim != kernel.dim:
            raise ValueError("quadrature and kernel dimensions differ")
        self.config = config
        self.kernel = kernel
        self.tables = make_tables(config, kernel)
        d = config.dim
        if d == 1:
            self._ox = np.empty(BUFFER_SIZE)
            self._oy = np.empty(BUFFER_SIZE)
        else:
            self._ox = np.empty((BUFFER_SIZE, 2))
            self._oy = np.empty((BUFFER_SIZE, 2))
        self._ow = np.empty(BUFFER_SIZE)

    def _grow(self):
        n = 2 * self._ow.shape[0]
        self._ox = np.empty((n,) + self._ox.shape[1:])
        self._oy = np.empty((n,) + self._oy.shape[1:])
        self._ow = np.empty(n)

    def rule(self, outer, inner):
        """Return (x, y, w) arrays for outer x inner element (vertex arrays)."""
        for _ in range(6):
            try:
                return self._rule(outer, inner)
            except ValueError as err:
                if "overflow" not in str(err):
                    raise
                self._grow()
        raise RuntimeError("pair rule needs an implausibly large number of points")

    def _rule(self, outer, inner):
        t = self.tables
        outer = np.asarray(outer, dtype=float)
        inner = np.asarray(inner, dtype=float)
        if self.config.dim == 1:
            aK, bK = sorted(outer.ravel()[:2])
            aL, bL = sorted(inner.ravel()[:2])
            n = rule_1d(aK, bK, aL, bL, t.delta, t.fam, t.s, t.C, t.ints, t.glx, t.glw,
                        t.gjt, t.gjw, self._ox, self._oy, self._ow)
            return (self._ox[:n].reshape(-1, 1).copy(), self._oy[:n].reshape(-1, 1).copy(),
                    self._ow[:n].copy())
        ob, wb, od, wd, lf, wl = t.tri
        n = rule_2d(np.ascontiguousarray(outer.reshape(3, 2)),
                    np.ascontiguousarray(inner.reshape(3, 2)), t.delta, t.fam, t.s, t.C,
                    t.ints, self.config.near_factor, t.glx, t.glw, t.gjt, t.gjw,
                    ob, wb, od, wd, lf, wl, self._ox, self._oy, self._ow)
        return self._ox[:n].copy(), self._oy[:n].copy(), self._ow[:n].copy()


def pair_integrate(elem_outer, elem_inner, integrand, delta, config: PairQuadConfig = None,
                   kernel: KernelSpec = None, pair_id=None) -> float:
    """Approximate  int_K int_{L n B_delta(x)} integrand(x, y) [gamma(x, y)] dy dx.

    Without ``kernel`` the integrand is integrated as given (unit constant
    kernel). ``integrand`` receives (n, d) arrays of x and y points.
    """
    elem_outer = np.asarray(elem_outer, dtype=float)
    dim = 1 if elem_outer.size == 2 else 2
    if config is None:
        config = PairQuadConfig(dim=dim)
    if kernel is None:
        kernel = _UnitKernel(dim, float(delta))
    elif abs(kernel.delta - delta) > 1e-15:
        raise ValueError("kernel horizon differs from delta")
    x, y, w = PairRuleBuilder(config, kernel).rule(elem_outer, elem_inner)
    if w.size == 0:
        return 0.0
    vals = np.asarray(integrand(x, y), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError(f"non-finite integrand on element pair {pair_id}")
    return float(np.dot(w, vals))


class _UnitKernel(KernelSpec):
    def __init__(self, dim, delta):
        super().__init__("constant", dim, delta)

    @property
    def normConstant(self) -> float:
        return 1.0
