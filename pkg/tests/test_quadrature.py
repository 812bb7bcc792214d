import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonlocal_interface.kernel import KernelSpec
from nonlocal_interface.quadrature import (PairQuadConfig, PairRuleBuilder, gauss_interval,
                                           gauss_jacobi_unit, gauss_triangle, pair_integrate)


# ---------------------------------------------------------------- element rules

def test_interval_examples():
    assert gauss_interval(3).integrate(lambda p: p[:, 0] ** 3) == pytest.approx(0.25, abs=1e-15)
    assert gauss_interval(1).integrate(lambda p: np.ones(len(p))) == pytest.approx(1.0)
    assert gauss_triangle(2).integrate(lambda p: np.ones(len(p))) == pytest.approx(0.5)


def test_unsupported_orders():
    with pytest.raises(ValueError, match="supported"):
        gauss_interval(0)
    with pytest.raises(ValueError, match="supported"):
        gauss_triangle(40)


@pytest.mark.parametrize("order", [1, 2, 3, 5, 8, 13, 20, 40])
def test_interval_exactness(order):
    rule = gauss_interval(order)
    assert np.all(rule.weights > 0)
    for k in range(order + 1):
        assert rule.integrate(lambda p: p[:, 0] ** k) == pytest.approx(1.0 / (k + 1), rel=1e-13)


@pytest.mark.parametrize("order", [1, 2, 3, 4, 5, 6, 9, 14, 20])
def test_triangle_exactness(order):
    rule = gauss_triangle(order)
    assert np.all(rule.weights > 0)
    for a in range(order + 1):
        for b in range(order + 1 - a):
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            got = rule.integrate(lambda p: p[:, 0] ** a * p[:, 1] ** b)
            assert got == pytest.approx(exact, rel=1e-10, abs=1e-14)


def test_gauss_jacobi_weight():
    t, w = gauss_jacobi_unit(6, 0.6)
    assert np.dot(w, t ** 2) == pytest.approx(1.0 / 3.6, rel=1e-13)


# ---------------------------------------------------------------- 1D pairs

def test_identical_elements_quadratic_moment():
    h = 0.1
    val = pair_integrate([0.0, h], [0.0, h], lambda x, y: (x[:, 0] - y[:, 0]) ** 2, 10.0)
    assert val == pytest.approx(h ** 4 / 6, rel=1e-12)


def test_far_pair_short_circuits():
    calls = []

    def f(x, y):
        calls.append(1)
        return np.ones(len(x))

    assert pair_integrate([0.0, 0.1], [0.5, 0.6], f, 0.2) == 0.0
    assert calls == []


def test_clipped_area():
    val = pair_integrate([0.0, 0.1], [0.15, 0.25], lambda x, y: np.ones(len(x)), 0.1)
    assert val == pytest.approx(0.00125, rel=1e-12)


def test_nan_integrand_reports_pair():
    with pytest.raises(FloatingPointError, match="pair 7"):
        pair_integrate([0.0, 0.1], [0.1, 0.2], lambda x, y: np.full(len(x), np.nan), 0.3, pair_id=7)


def _hat_difference(aK, bK, aL, bL):
    # phi = hat of the shared node at bK = aL (left neighbour of the right element)
    def phi(t):
        if aK <= t <= bK:
            return (t - aK) / (bK - aK)
        if aL <= t <= bL:
            return (bL - t) / (bL - aL)
        return 0.0
    return phi


@pytest.mark.parametrize("s", [0.2, 0.4])
@pytest.mark.parametrize("pair", [((0.0, 0.1), (0.0, 0.1)), ((0.0, 0.1), (0.1, 0.2)),
                                  ((0.0, 0.05), (0.12, 0.17))])
def test_fractional_pair_against_scipy(s, pair):
    from scipy import integrate
    (aK, bK), (aL, bL) = pair
    delta = 0.15
    k = KernelSpec("fractional", 1, delta, s=s)
    phi = _hat_difference(aK, bK, aL, bL)
    f = lambda x, y: np.array([(phi(a) - phi(b)) ** 2 for a, b in zip(x[:, 0], y[:, 0])])
    got = pair_integrate([aK, bK], [aL, bL], f, delta, kernel=k)

    def inner(x):
        lo, hi = max(aL, x - delta), min(bL, x + delta)
        if hi <= lo:
            return 0.0
        g = lambda y: (phi(x) - phi(y)) ** 2 * k.normConstant * abs(x - y) ** (-1 - 2 * s)
        pts = [p for p in (x,) if lo < p < hi]
        return integrate.quad(g, lo, hi, points=pts or None, limit=200, epsabs=1e-14,
                              epsrel=1e-12)[0]

    ref = integrate.quad(inner, aK, bK, limit=200, epsabs=1e-14, epsrel=1e-11,
                         points=[p for p in (aL, bL, aL - delta, bL - delta) if aK < p < bK]
                         or None)[0]
    assert got == pytest.approx(ref, rel=1e-7)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.0, 0.5), la=st.floats(0.01, 0.1), b=st.floats(0.0, 0.5),
       lb=st.floats(0.01, 0.1), delta=st.floats(0.05, 0.3))
def test_1d_swap_symmetry(a, la, b, lb, delta):
    f = lambda x, y: np.cos(x[:, 0] + y[:, 0]) + (x[:, 0] - y[:, 0]) ** 2
    v1 = pair_integrate([a, a + la], [b, b + lb], f, delta)
    v2 = pair_integrate([b, b + lb], [a, a + la], lambda x, y: f(y, x), delta)
    assert abs(v1 - v2) <= 1e-12 * max(1.0, abs(v1))


# ---------------------------------------------------------------- 2D pairs

def _tri(x0, y0, h, upper=False):
    if upper:
        return np.array([[x0, y0], [x0 + h, y0 + h], [x0, y0 + h]])
    return np.array([[x0, y0], [x0 + h, y0], [x0 + h, y0 + h]])


def _area_oracle(K, L, delta, n=8):
    """int_K |L n B_delta(x)| dx with shapely polygons and a high-order rule on K."""
    from shapely.geometry import Point, Polygon
    rule = gauss_triangle(min(2 * n, 20))
    J = np.column_stack([K[1] - K[0], K[2] - K[0]])
    area = 0.5 * abs(np.linalg.det(J))
    poly = Polygon(L)
    total = 0.0
    for p, w in zip(rule.points, rule.weights):
        x = K[0] + J @ p
        total += w * 2 * area * poly.intersection(Point(x).buffer(delta, 2048)).area
    return total


@pytest.mark.parametrize("offset", [(0.0, 0.0), (0.1, 0.0), (0.15, 0.05), (0.2, 0.1), (0.3, 0.0)])
def test_2d_polar_area(offset):
    h, delta = 0.1, 0.2
    K = _tri(0.0, 0.0, h)
    L = _tri(offset[0], offset[1], h, upper=True)
    got = pair_integrate(K, L, lambda x, y: np.ones(len(x)), delta)
    ref = _area_oracle(K, L, delta)
    assert got == pytest.approx(ref, rel=2e-3, abs=1e-9)


def test_2d_subdivide_converges_in_aggregate():
    """Raising the cut depth from 2 to 4 at least halves the total deviation."""
    rng = np.random.default_rng(11)
    delta, h = 0.2, 0.1
    f = lambda x, y: 1.0 + x[:, 0] * y[:, 1]
    cfg = {d: PairQuadConfig(dim=2, cut_mode="subdivide", cut_depth=d) for d in (2, 4, 8)}
    dev = {2: 0.0, 4: 0.0}
    n_cut = 0
    while n_cut < 30:
        K = _tri(0.0, 0.0, h)
        off = rng.uniform(-0.35, 0.35, 2)
        L = _tri(off[0], off[1], h, upper=bool(rng.integers(2)))
        dmin = min(np.linalg.norm(a - b) for a in K for b in L)
        dmax = max(np.linalg.norm(a - b) for a in K for b in L)
        if not (dmin < delta < dmax):
            continue
        ref = pair_integrate(K, L, f, delta, config=cfg[8])
        for d in (2, 4):
            dev[d] += abs(pair_integrate(K, L, f, delta, config=cfg[d]) - ref)
        n_cut += 1
    assert dev[4] <= 0.5 * dev[2]


def test_2d_fractional_touching_pair_refines():
    k = KernelSpec("fractional", 2, 0.2, s=0.4)
    K = _tri(0.0, 0.0, 0.05)
    L = _tri(0.05, 0.0, 0.05, upper=True)
    f = lambda x, y: (x[:, 0] - y[:, 0]) ** 2 + (x[:, 1] - y[:, 1]) ** 2
    coarse = pair_integrate(K, L, f, 0.2, kernel=k)
    fine = pair_integrate(K, L, f, 0.2, kernel=k,
                          config=PairQuadConfig(dim=2, base_order=10, diagonal_order=16,
                                                angular_points=8, radial_points=8))
    assert coarse == pytest.approx(fine, rel=2e-3)


def test_2d_swap_symmetry_within_quadrature_error():
    k = KernelSpec("constant", 2, 0.15)
    K = _tri(0.0, 0.0, 0.1)
    L = _tri(0.1, 0.05, 0.1, upper=True)
    f = lambda x, y: 1.0 + x[:, 0] ** 2 + y[:, 1] ** 2
    v1 = pair_integrate(K, L, f, 0.15, kernel=k)
    v2 = pair_integrate(L, K, lambda x, y: f(y, x), 0.15, kernel=k)
    assert v1 == pytest.approx(v2, rel=2e-3)


def test_builder_grows_buffer():
    cfg = PairQuadConfig(dim=2, base_order=20, diagonal_order=20, angular_points=16,
                         radial_points=16)
    b = PairRuleBuilder(cfg, KernelSpec("fractional", 2, 0.2, s=0.3))
    x, y, w = b.rule(_tri(0, 0, 0.1), _tri(0, 0, 0.1))
    assert w.size > 0 and np.all(np.isfinite(w))


def test_config_validation():
    with pytest.raises(ValueError):
        PairQuadConfig(dim=1, base_order=-1)
    with pytest.raises(ValueError):
        PairQuadConfig(dim=2, cut_mode="exact")
    assert PairQuadConfig(dim=1).base_order == 5
    assert PairQuadConfig(dim=2).base_order == 4
    assert PairQuadConfig(dim=2).diagonal_order == 8
    assert PairQuadConfig(dim=2).cut_depth == 4
