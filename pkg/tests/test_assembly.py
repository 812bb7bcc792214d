import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from nonlocal_interface import geometry as geo
from nonlocal_interface.assembly import (BOTH, KERNEL1_ONLY, KERNEL2_ONLY, apply_constraints,
                                         assemble_matrix, dump_sparsity, energy_by_pairs,
                                         explicit_load, galerkin_load)
from nonlocal_interface.fields import ZERO, constant, trig
from nonlocal_interface.kernel import CompositeKernel, KernelSpec, eval_composite
from nonlocal_interface.mesh import FESpace, build_mesh, evaluate
from nonlocal_interface.quadrature import pair_integrate
from nonlocal_interface.solve import SolverConfig, solve_system

LINEAR = trig(D=1.0)


def setup(k1, k2, d1, d2, h, dim=1, single=False):
    cfg = (geo.interval_config if dim == 1 else geo.rectangle_config)(d1, d2)
    decomp = geo.decompose(cfg)
    space = FESpace(build_mesh(decomp, h))
    return assemble_matrix(space, CompositeKernel(k1, k2, decomp, single_domain=single))


def kernels(kind, d1, d2, dim=1, s=(0.3, 0.3)):
    if kind == "constant":
        return KernelSpec("constant", dim, d1), KernelSpec("constant", dim, d2)
    return KernelSpec("fractional", dim, d1, s=s[0]), KernelSpec("fractional", dim, d2, s=s[1])


@pytest.fixture(scope="module")
def fig2():
    return setup(*kernels("constant", 0.2, 0.4), 0.2, 0.4, 2.5e-2)


@pytest.fixture(scope="module")
def mixed2d():
    k1 = KernelSpec("constant", 2, 0.1)
    k2 = KernelSpec("fractional", 2, 0.2, s=0.4)
    return setup(k1, k2, 0.1, 0.2, 0.1, dim=2)


def _check_structure(A):
    M = A.full()
    scale = A.max_abs()
    assert abs(M - M.T).max() <= 1e-12 * scale
    assert np.abs(M @ np.ones(M.shape[0])).max() <= 1e-10 * scale


def test_structure_1d(fig2):
    _check_structure(fig2)


def test_structure_2d(mixed2d):
    _check_structure(mixed2d)


@settings(max_examples=8, deadline=None)
@given(d1=st.sampled_from([0.1, 0.15, 0.2]), extra=st.sampled_from([0.0, 0.05, 0.2]),
       kind=st.sampled_from(["constant", "fractional"]), h=st.sampled_from([0.05, 0.04]))
def test_structure_property(d1, extra, kind, h):
    A = setup(*kernels(kind, d1, d1 + extra, s=(0.2, 0.4)), d1, d1 + extra, h)
    _check_structure(A)


@pytest.mark.parametrize("which", ["fig2", "mixed2d"])
def test_positive_definite_on_free_dofs(which, request):
    A = request.getfixturevalue(which)
    free = A.space.free
    Aff = A.full()[free][:, free].toarray()
    np.linalg.cholesky(Aff)


def test_energy_identity_matches_matrix(fig2):
    x = fig2.space.mesh.nodes[:, 0]
    v = np.sin(3 * x) + x ** 2
    quad = v @ (fig2.full() @ v)
    assert energy_by_pairs(fig2, v) == pytest.approx(quad, rel=1e-12)


def test_energy_identity_independent_route():
    """Double integral of the composite kernel times (v(x)-v(y))^2, pair by pair."""
    k1, k2 = kernels("constant", 0.2, 0.4)
    A = setup(k1, k2, 0.2, 0.4, 0.1)
    space, ck = A.space, A.kernel
    mesh = space.mesh
    v = np.cos(2 * mesh.nodes[:, 0])

    def f(X, Y):
        g = np.array([eval_composite(ck, [a], [b]) for a, b in zip(X[:, 0], Y[:, 0])])
        return g * (evaluate(space, v, X) - evaluate(space, v, Y)) ** 2

    ends = np.sort(mesh.nodes[mesh.elements][:, :, 0], axis=1)
    total = sum(pair_integrate(K, L, f, 0.4) for K in ends for L in ends)
    assert v @ (A.full() @ v) == pytest.approx(total, rel=1e-10)


def test_sparsity_support(fig2):
    M = fig2.full().tocoo()
    x = fig2.space.mesh.nodes[:, 0]
    far = np.abs(x[M.row] - x[M.col]) > 0.4 + 2 * 2.5e-2
    assert np.all(M.data[far] == 0)


def _category_matrix(A):
    p = A.pattern
    return sp.csr_matrix((A.category.astype(float), p.indices, p.indptr), shape=(p.n, p.n))


def test_fig2_categories(fig2):
    x = fig2.space.mesh.nodes[:, 0]
    h = 2.5e-2
    C = _category_matrix(fig2).tocoo()
    cat = C.data.astype(int)
    assert abs(C - C.T).max() == 0
    both = cat == BOTH
    assert both.any()
    # Both entries lie on dofs whose supports meet the Gamma band (0.6, 1.2)
    for idx in (C.row[both], C.col[both]):
        assert np.all((x[idx] >= 0.6 - h - 1e-12) & (x[idx] <= 1.2 + h + 1e-12))
    rows = np.unique(C.row[both])
    assert np.all(np.diff(rows) == 1)
    one = cat == KERNEL1_ONLY
    two = cat == KERNEL2_ONLY
    assert np.all(x[C.row[one]] <= 1.2 + h + 1e-12) and np.all(x[C.col[one]] <= 1.2 + h + 1e-12)
    assert np.all(x[C.row[two]] >= 0.6 - h - 1e-12) and np.all(x[C.col[two]] >= 0.6 - h - 1e-12)
    # Kernel-1 block upper left, Kernel-2 block lower right
    assert x[C.row[one]].mean() < 1.0 < x[C.row[two]].mean()


def test_category_values_follow_kernels(fig2):
    v1, v2, cat = fig2.values1, fig2.values2, fig2.category
    assert np.all(v2[cat == KERNEL1_ONLY] == 0)
    assert np.all(v1[cat == KERNEL2_ONLY] == 0)
    assert np.all((v1[cat == BOTH] != 0) & (v2[cat == BOTH] != 0))


def test_identical_kernels_keep_both_band():
    A = setup(*kernels("fractional", 0.2, 0.2), 0.2, 0.2, 0.025)
    C = _category_matrix(A)
    assert (A.category == BOTH).any()
    assert abs(C - C.T).max() == 0


def test_tiny_horizons_shrink_band():
    h = 0.01
    A = setup(*kernels("constant", 2 * h, 2 * h), 2 * h, 2 * h, h)
    C = _category_matrix(A).tocoo()
    rows = np.unique(C.row[C.data.astype(int) == BOTH])
    assert 0 < rows.size <= 4 * int(round(2 * h / h)) + 2


def test_dump_sparsity(fig2, tmp_path):
    path = tmp_path / "sparsity.txt"
    n = dump_sparsity(fig2, path)
    lines = path.read_text().splitlines()
    assert len(lines) == n
    names = {ln.split()[2] for ln in lines}
    assert names == {"Kernel1Only", "Kernel2Only", "Both"}


@pytest.mark.parametrize("kind", ["constant", "fractional"])
def test_single_domain_equivalence(kind):
    k = kernels(kind, 0.2, 0.2)[0]
    iface = setup(k, k, 0.2, 0.2, 0.01)
    single = setup(k, k, 0.2, 0.2, 0.01, single=True)
    assert iface.space.num_dofs >= 200
    diff = abs(iface.full() - single.full()).max()
    assert diff <= 1e-12 * single.max_abs()


def test_zero_data_gives_zero_load(fig2):
    space = fig2.space
    b = explicit_load(space, ZERO, ZERO, ZERO)
    assert np.all(b == 0)
    system = apply_constraints(fig2, b, ZERO, ZERO, ZERO)
    assert np.all(system.load == 0)


def test_zero_jump_matches_plain_elimination(fig2):
    space = fig2.space
    rng = np.random.default_rng(5)
    b = rng.standard_normal(space.num_dofs)
    kappa = trig(B1=1.0)
    system = apply_constraints(fig2, b, kappa, kappa, ZERO)
    A = fig2.full()
    free, fixed = space.free, space.fixed
    x = space.mesh.nodes
    rhs = b[free] - A[free][:, fixed] @ kappa(x[fixed])
    assert np.allclose(system.load, rhs, rtol=0, atol=1e-12 * np.abs(rhs).max())
    assert abs(system.matrix - A[free][:, free]).max() == 0


def test_galerkin_affine_patch():
    k1, k2 = kernels("constant", 0.2, 0.2)
    A = setup(k1, k2, 0.2, 0.2, 0.02)
    b = galerkin_load(A, LINEAR, LINEAR)
    system = apply_constraints(A, b, LINEAR, LINEAR, ZERO)
    sol, _ = solve_system(system, SolverConfig(kind="dense"))
    x = A.space.mesh.nodes[:, 0]
    assert np.abs(sol.u1 - x).max() <= 1e-10


def test_lifting_reproduces_unit_jump():
    k1, k2 = kernels("fractional", 0.2, 0.2)
    A = setup(k1, k2, 0.2, 0.2, 0.02)
    u2 = LINEAR + constant(1.0)
    b = galerkin_load(A, LINEAR, u2)
    system = apply_constraints(A, b, LINEAR, u2, constant(1.0))
    sol, _ = solve_system(system, SolverConfig(kind="dense"))
    jump = sol.gamma_jump()
    on_gamma = A.space.in_gamma & A.space.overlap
    assert jump.size > 0 and np.all(sol.lift[on_gamma] == 1.0)
    assert np.abs(jump - 1.0).max() <= 1e-14
    space = A.space
    x = space.mesh.nodes[:, 0]
    assert np.abs(sol.u1[space.in_sub1] - x[space.in_sub1]).max() <= 1e-9
    assert np.abs(sol.u2[space.in_sub2] - x[space.in_sub2] - 1).max() <= 1e-9


def test_rejects_foreign_decomposition(fig2):
    other = geo.decompose(geo.interval_config(0.1, 0.1))
    ck = CompositeKernel(*kernels("constant", 0.1, 0.1), other)
    with pytest.raises(ValueError):
        assemble_matrix(fig2.space, ck)
