"""Acceptance suite: one PASS/FAIL line per criterion at the documented tolerances.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are printed to the
terminal even under output capture) or directly with
``python tests/test_acceptance.py``. The full suite takes about an hour on one
core; the heavy pieces are the 2D fractional h-study and the 1D delta studies at
h = 2e-4. Sweep results are cached per process, so criteria that share runs
(5, 8 and 10 for instance) do not recompute them.
"""
from __future__ import annotations

import functools
import math
import sys
import time
from typing import Callable, Dict, List, Tuple

import numpy as np
import pytest

from nonlocal_interface import geometry as geo
from nonlocal_interface.assembly import assemble_matrix
from nonlocal_interface.kernel import CompositeKernel, KernelSpec, check_normalization
from nonlocal_interface.mesh import FESpace, build_mesh
from nonlocal_interface.solve import SolverConfig
from nonlocal_interface.study import (KernelSettings, StudyConfig, StudyResult, checks_pass,
                                      run_study, solve_point)

pytestmark = pytest.mark.acceptance

# (kernel on subdomain 1, kernel on subdomain 2) as (family, s)
COMBOS = {
    "frac/frac": (("fractional", 0.2), ("fractional", 0.4)),
    "const/const": (("constant", 0.0), ("constant", 0.0)),
    "const/frac": (("constant", 0.0), ("fractional", 0.4)),
}
DELTAS_1D = (0.1, 0.05, 0.025, 0.0125)
DELTAS_2D = (0.1, 0.05, 0.025)
H_DELTA_1D = 2e-4

# every configuration's invariant checks, for criterion 10
CHECKS: Dict[str, List[dict]] = {}


def _kernels(combo: str, d1: float, d2: float) -> Tuple[KernelSettings, KernelSettings]:
    (f1, s1), (f2, s2) = COMBOS[combo]
    return KernelSettings(f1, s1, d1), KernelSettings(f2, s2, d2)


def _record(label: str, result: StudyResult) -> StudyResult:
    CHECKS[label] = list(result.checks)
    return result


def _run(label: str, config: StudyConfig) -> StudyResult:
    return _record(label, run_study(config, outdir=f"acceptance-runs/{label}"))


def _fmt_slopes(result: StudyResult, norm: str) -> str:
    return "/".join(f"{result.slope(norm, s):.3f}" for s in (1, 2))


# --------------------------------------------------------------------------
# cached sweeps

@functools.lru_cache(maxsize=None)
def patch_run(family: str, solver: str):
    k = KernelSettings(family, 0.3 if family == "fractional" else 0.0, 0.2)
    cfg = StudyConfig(study="patch", case="patch1d", kernel1=k, kernel2=k, h=(1e-3,),
                      solver=SolverConfig(kind=solver, tol=1e-12, dense_cap=10 ** 6),
                      record_time=True)
    t0 = time.perf_counter()
    out = solve_point(cfg, 1e-3, 0.2, 0.2)
    CHECKS[f"patch-{family}-{solver}"] = [out.checks]
    return out.checks["max_nodal_deviation"], time.perf_counter() - t0


@functools.lru_cache(maxsize=None)
def h1d(combo: str) -> StudyResult:
    k1, k2 = _kernels(combo, 0.2, 0.4)
    cfg = StudyConfig(study="h", case="sin1d", kernel1=k1, kernel2=k2,
                      h=tuple(2.0 ** -k for k in range(4, 10)), record_time=False)
    return _run(f"h1d-{combo.replace('/', '-')}", cfg)


@functools.lru_cache(maxsize=None)
def h2d(combo: str) -> StudyResult:
    k1, k2 = _kernels(combo, 0.1, 0.2)
    cfg = StudyConfig(study="h", case="sin2d", kernel1=k1, kernel2=k2,
                      h=(1 / 16, 1 / 32, 1 / 64), solver=SolverConfig(kind="cg"),
                      record_time=False)
    return _run(f"h2d-{combo.replace('/', '-')}", cfg)


@functools.lru_cache(maxsize=None)
def delta1d(combo: str, ratio: float, mu_extension: str = "constant") -> StudyResult:
    k1, k2 = _kernels(combo, DELTAS_1D[0], ratio * DELTAS_1D[0])
    cfg = StudyConfig(study="delta", case="local1d", kernel1=k1, kernel2=k2, deltas=DELTAS_1D,
                      ratio=ratio, h=(H_DELTA_1D,), mu_extension=mu_extension,
                      solver=SolverConfig(kind="cg"), record_time=False)
    return _run(f"delta1d-{combo.replace('/', '-')}-r{ratio:g}-{mu_extension}", cfg)


@functools.lru_cache(maxsize=None)
def delta2d(combo: str, ratio: float) -> StudyResult:
    k1, k2 = _kernels(combo, DELTAS_2D[0], ratio * DELTAS_2D[0])
    cfg = StudyConfig(study="delta", case="local2d", kernel1=k1, kernel2=k2, deltas=DELTAS_2D,
                      ratio=ratio, h_factor=0.25, solver=SolverConfig(kind="cg"),
                      record_time=False)
    return _run(f"delta2d-{combo.replace('/', '-')}-r{ratio:g}", cfg)


# --------------------------------------------------------------------------
# criteria: each returns (passed, detail)

def criterion_1():
    parts, ok = [], True
    for family in ("constant", "fractional"):
        for solver, tol in (("dense", 1e-10), ("cg", 1e-8)):
            dev, secs = patch_run(family, solver)
            good = dev <= tol and secs < 30
            ok &= good
            parts.append(f"{family}/{solver} dev={dev:.1e} ({secs:.1f}s)")
    return ok, "; ".join(parts)


def criterion_2():
    parts, ok = [], True
    for family, s in (("constant", 0.0), ("fractional", 0.3)):
        decomp = geo.decompose(geo.interval_config(0.2, 0.2))
        space = FESpace(build_mesh(decomp, 0.01))
        k = KernelSpec(family, 1, 0.2, s)
        iface = assemble_matrix(space, CompositeKernel(k, k, decomp))
        single = assemble_matrix(space, CompositeKernel(k, k, decomp, single_domain=True))
        rel = abs(iface.full() - single.full()).max() / single.max_abs()
        M = iface.full()
        CHECKS[f"single-domain-{family}"] = [{
            "symmetry": float(abs(M - M.T).max() / iface.max_abs()),
            "row_sum": float(np.abs(M @ np.ones(M.shape[0])).max() / iface.max_abs()),
            "energy_identity": 0.0}]
        good = rel <= 1e-12 and space.num_dofs >= 200
        ok &= good
        parts.append(f"{family}: dofs={space.num_dofs} max|diff|/max|A|={rel:.1e}")
    return ok, "; ".join(parts)


def criterion_3():
    parts, ok = [], True
    for combo in COMBOS:
        r = h1d(combo)
        slopes = [r.slope("L2", s) for s in (1, 2)]
        good = r.ok and all(1.8 <= v <= 2.3 for v in slopes)
        ok &= good
        parts.append(f"{combo} L2 slopes {_fmt_slopes(r, 'L2')}")
    return ok, "; ".join(parts)


def criterion_4():
    parts, ok = [], True
    for combo in ("const/const", "frac/frac"):
        r = h2d(combo)
        slopes = [r.slope("L2", s) for s in (1, 2)]
        good = r.ok and all(1.7 <= v <= 2.4 for v in slopes)
        ok &= good
        parts.append(f"{combo} L2 slopes {_fmt_slopes(r, 'L2')}")
    return ok, "; ".join(parts)


def _delta_line(r: StudyResult, combo: str) -> str:
    return f"{combo} L2 {_fmt_slopes(r, 'L2')} H1 {_fmt_slopes(r, 'H1')}"


def criterion_5():
    parts, ok = [], True
    for combo in COMBOS:
        r = delta1d(combo, 2.0)
        h1 = [r.slope("H1", s) for s in (1, 2)]
        l2 = [r.slope("L2", s) for s in (1, 2)]
        good = r.ok and all(abs(v - 0.5) <= 0.15 for v in h1) and all(v >= 0.9 for v in l2)
        ok &= good
        parts.append(_delta_line(r, combo) + ("" if good else " [out of window]"))
    return ok, "; ".join(parts)


def criterion_6():
    parts, ok = [], True
    for combo in ("frac/frac", "const/const"):
        r = delta1d(combo, 1.0)
        h1 = [r.slope("H1", s) for s in (1, 2)]
        l2 = [r.slope("L2", s) for s in (1, 2)]
        good = (r.ok and all(abs(v - 1.5) <= 0.25 for v in l2)
                and all(abs(v - 0.5) <= 0.15 for v in h1))
        ok &= good
        parts.append(_delta_line(r, combo) + ("" if good else " [out of window]"))
    return ok, "; ".join(parts)


def criterion_7():
    r2 = delta2d("const/const", 2.0)
    r1 = delta2d("const/const", 1.0)
    h1 = [r2.slope("H1", s) for s in (1, 2)]
    l2 = [r2.slope("L2", s) for s in (1, 2)]
    l2_r1 = [r1.slope("L2", s) for s in (1, 2)]
    ok = (r2.ok and r1.ok and all(abs(v - 0.5) <= 0.2 for v in h1) and all(v >= 0.9 for v in l2)
          and all(v >= 1.3 for v in l2_r1))
    return ok, (f"const/const ratio 2: L2 {_fmt_slopes(r2, 'L2')} H1 {_fmt_slopes(r2, 'H1')}; "
                f"ratio 1: L2 {_fmt_slopes(r1, 'L2')}")


def criterion_8():
    parts, ok = [], True
    for combo in COMBOS:
        exact = delta1d(combo, 2.0, "exact")
        const = delta1d(combo, 2.0, "constant")
        good = exact.ok and const.ok
        rels = []
        for sub in (1, 2):
            e, c = exact.column(f"L2_{sub}"), const.column(f"L2_{sub}")
            good = good and bool(np.all(np.diff(e) < 0) and np.all(np.diff(c) < 0))
            rel = abs(e[-1] - c[-1]) / max(e[-1], c[-1])
            rels.append(rel)
            good = good and rel < 0.25
        ok &= good
        parts.append(f"{combo} rel. L2 difference at delta1=0.0125: "
                     + "/".join(f"{v:.3f}" for v in rels))
    return ok, "; ".join(parts)


def criterion_9():
    specs = []
    for delta in (0.05, 0.2, 0.4):
        specs += [KernelSpec("constant", 1, delta), KernelSpec("constant", 2, delta)]
    for s, delta in ((0.2, 0.2), (0.4, 0.4), (0.3, 0.1)):
        specs += [KernelSpec("fractional", 1, delta, s), KernelSpec("fractional", 2, delta, s)]
    worst = max(np.abs(check_normalization(k) - np.eye(k.dim)).max() for k in specs)
    return worst <= 1e-8, f"{len(specs)} kernels, worst |M - I| = {worst:.1e}"


def _run_criteria_1_to_8():
    for fn in (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
               criterion_7, criterion_8):
        fn()


def criterion_10():
    _run_criteria_1_to_8()
    bad, n, best = [], 0, 0
    worst = {"symmetry": 0.0, "row_sum": 0.0, "energy_identity": 0.0}
    for label, checks in sorted(CHECKS.items()):
        for c in checks:
            if not c:
                continue
            n += 1
            for k in worst:
                worst[k] = max(worst[k], c.get(k, 0.0))
            best += "best_approximation_gap" in c
            if not checks_pass(c):
                bad.append(label)
    detail = (f"{n} configurations; max symmetry {worst['symmetry']:.1e}, "
              f"row sum {worst['row_sum']:.1e}, energy identity {worst['energy_identity']:.1e}; "
              f"best-approximation checked on {best} (n/a for explicit-load delta studies)")
    if bad:
        detail += f"; failing: {sorted(set(bad))}"
    return not bad and n > 0, detail


def criterion_11():
    cfg = StudyConfig(study="h", case="local1d", h=tuple(2.0 ** -k for k in range(6, 10)),
                      record_time=False)
    r = run_study(cfg, outdir="acceptance-runs/local1d")
    l2 = [r.slope("L2", s) for s in (1, 2)]
    h1 = [r.slope("H1", s) for s in (1, 2)]
    ok = r.ok and all(abs(v - 2.0) <= 0.1 for v in l2) and all(abs(v - 1.0) <= 0.1 for v in h1)
    return ok, f"L2 {_fmt_slopes(r, 'L2')} H1 {_fmt_slopes(r, 'H1')}"


CRITERIA: Dict[int, Callable] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
    11: criterion_11,
}


def _evaluate(number: int) -> Tuple[bool, str]:
    t0 = time.perf_counter()
    try:
        ok, detail = CRITERIA[number]()
    except Exception as err:  # reported as a failing criterion
        ok, detail = False, f"{type(err).__name__}: {err}"
    return ok, f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}  " \
               f"[{time.perf_counter() - t0:.0f}s]"


@pytest.fixture(autouse=True)
def _run_in_tmp(tmp_path_factory, monkeypatch):
    monkeypatch.chdir(tmp_path_factory.getbasetemp())


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    ok, line = _evaluate(number)
    with capsys.disabled():
        print("\n" + line, flush=True)
    assert ok, line


if __name__ == "__main__":
    chosen = [int(a) for a in sys.argv[1:]] or sorted(CRITERIA)
    failed = 0
    for num in chosen:
        ok, line = _evaluate(num)
        failed += not ok
        print(line, flush=True)
    sys.exit(1 if failed else 0)
