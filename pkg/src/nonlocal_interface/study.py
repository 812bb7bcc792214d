"""Batch studies: single solves, h- and delta-sweeps and the patch test.

A study is described by a :class:`StudyConfig`, usually read from a TOML file::

    study = "h"                 # single | h | delta | patch
    case = "sin1d"
    out = "runs/sin1d-frac"

    [kernel1]
    family = "fractional"
    s = 0.2
    delta = 0.2

    [kernel2]
    family = "fractional"
    s = 0.4
    delta = 0.4

    [mesh]
    h = [0.0625, 0.03125]       # sweep values (h-study) or the mesh size
    h_factor = 0.25             # delta-study: h = h_factor * delta_1

    [delta]
    values = [0.1, 0.05]        # delta_1 sweep
    ratio = 2.0                 # delta_2 / delta_1
    mu_extension = "constant"   # or "exact"
    kappa_extension = "analytic"

    [solver]
    kind = "auto"
    tol = 1e-12

    [quad]
    base_order = 5

    [output]
    sparsity = true
    record_time = true
    solutions = false
    checks = true

:func:`run_study` writes ``results.csv``, ``results.dat`` and ``meta.txt`` into
the output directory, plus ``sparsity.txt`` and ``solution_NN.dat`` on request.
"""
from __future__ import annotations

import dataclasses
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from . import data as D
from . import geometry as geo
from ._jit import JIT_ENABLED
from .assembly import (AssembledMatrix, FieldPair, apply_constraints, assemble_matrix,
                       dump_sparsity, energy_by_pairs, explicit_load, galerkin_load)
from .kernel import CompositeKernel, KernelSpec
from .local_ref import build_local_mesh, solve_local
from .mesh import FESpace, build_mesh
from .quadrature import PairQuadConfig
from .solve import (ErrorReport, SolveReport, SolverConfig, energy_error, error_norms,
                    estimate_rates, interpolant_pair, solve_system)

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

STUDY_KINDS = ("single", "h", "delta", "patch")
_STUDY_ALIASES = {"h-study": "h", "delta-study": "delta", "hstudy": "h", "deltastudy": "delta"}

CSV_HEADER = ("param", "dofs", "L2_1", "L2_2", "H1_1", "H1_2", "slope_L2_1", "slope_L2_2",
              "slope_H1_1", "slope_H1_2", "seconds")

_QUAD_KEYS = ("base_order", "diagonal_order", "cut_depth", "cut_mode", "angular_points",
              "radial_points", "near_factor")


class ConfigError(ValueError):
    """Invalid or inconsistent study configuration."""


@dataclass(frozen=True)
class KernelSettings:
    family: str = "constant"
    s: float = 0.0
    delta: float = 0.2

    def spec(self, dim: int, delta: Optional[float] = None) -> KernelSpec:
        return KernelSpec(self.family, dim, float(self.delta if delta is None else delta),
                          float(self.s))


def case_dimension(case: str) -> int:
    c = case.strip().lower()
    if c.endswith("1d"):
        return 1
    if c.endswith("2d"):
        return 2
    raise ConfigError(f"cannot infer the dimension of case {case!r}")


def _is_local(case: str) -> bool:
    return case in D.LOCAL_CASES


@dataclass(frozen=True)
class StudyConfig:
    study: str = "single"
    case: str = "sin1d"
    kernel1: KernelSettings = KernelSettings()
    kernel2: KernelSettings = KernelSettings(delta=0.4)
    h: Tuple[float, ...] = (0.0625,)
    h_factor: Optional[float] = None
    deltas: Tuple[float, ...] = ()
    ratio: float = 2.0
    mu_extension: str = "constant"
    kappa_extension: str = "analytic"
    solver: SolverConfig = SolverConfig()
    quad: Tuple[Tuple[str, Any], ...] = ()
    out: str = "results"
    sparsity: Optional[bool] = None
    record_time: bool = True
    solutions: bool = False
    checks: bool = True

    def __post_init__(self):
        kind = _STUDY_ALIASES.get(self.study.strip().lower(), self.study.strip().lower())
        if kind not in STUDY_KINDS:
            raise ConfigError(f"unknown study kind {self.study!r}; expected one of {STUDY_KINDS}")
        object.__setattr__(self, "study", kind)
        case = self.case.strip().lower()
        object.__setattr__(self, "case", case)
        if case not in D.NONLOCAL_CASES + D.LOCAL_CASES:
            raise ConfigError(f"unknown case {self.case!r}")
        allowed = {
            "h": ("sin1d", "sin2d", "local1d", "local2d"),
            "delta": D.LOCAL_CASES,
            "patch": ("patch1d", "patch2d"),
            "single": D.NONLOCAL_CASES + D.LOCAL_CASES,
        }[kind]
        if case not in allowed:
            raise ConfigError(f"case {case!r} cannot be used in a {kind!r} study")
        hs = tuple(sorted((float(v) for v in self.h), reverse=True))
        deltas = tuple(sorted((float(v) for v in self.deltas), reverse=True))
        if any(not v > 0 for v in hs + deltas):
            raise ConfigError("mesh sizes and horizons must be positive")
        if len(set(hs)) != len(hs) or len(set(deltas)) != len(deltas):
            raise ConfigError("sweep values must be distinct")
        object.__setattr__(self, "h", hs)
        object.__setattr__(self, "deltas", deltas)
        if kind == "delta":
            if not deltas:
                raise ConfigError("a delta study needs [delta] values")
            if not self.ratio > 0:
                raise ConfigError("horizon ratio must be positive")
            if self.h_factor is None and not hs:
                raise ConfigError("a delta study needs mesh.h or mesh.h_factor")
        elif not hs:
            raise ConfigError("mesh.h must list at least one mesh size")
        if self.h_factor is not None and not self.h_factor > 0:
            raise ConfigError("mesh.h_factor must be positive")
        if self.mu_extension not in ("constant", "exact"):
            raise ConfigError("mu_extension must be 'constant' or 'exact'")
        if self.kappa_extension not in ("analytic", "projection"):
            raise ConfigError("kappa_extension must be 'analytic' or 'projection'")
        quad = dict(self.quad)
        unknown = set(quad) - set(_QUAD_KEYS)
        if unknown:
            raise ConfigError(f"unknown quad keys {sorted(unknown)}")
        object.__setattr__(self, "quad", tuple(sorted(quad.items())))
        self.quad_config()  # validates the values
        for k in (self.kernel1, self.kernel2):
            k.spec(self.dim)
        if self.sparsity and not (kind == "single" and self.dim == 1):
            raise ConfigError("the sparsity dump needs a 1D single-solve study")

    @property
    def dim(self) -> int:
        return case_dimension(self.case)

    @property
    def local_solver(self) -> bool:
        """True for h-studies of the classical local problem."""
        return self.study == "h" and _is_local(self.case)

    @property
    def write_sparsity(self) -> bool:
        if self.sparsity is None:
            return self.study == "single" and self.dim == 1
        return bool(self.sparsity)

    def quad_config(self) -> PairQuadConfig:
        return PairQuadConfig(dim=self.dim, **dict(self.quad))

    def points(self) -> List[Tuple[float, float, float, float]]:
        """Sweep as (param, h, delta_1, delta_2), param decreasing."""
        d1, d2 = self.kernel1.delta, self.kernel2.delta
        if self.study == "delta":
            out = []
            for delta in self.deltas:
                h = self.h_factor * delta if self.h_factor is not None else self.h[0]
                out.append((delta, h, delta, self.ratio * delta))
            return out
        if self.study == "single":
            return [(self.h[0], self.h[0], d1, d2)]
        return [(h, h, d1, d2) for h in self.h]

    def replace(self, **changes) -> "StudyConfig":
        return dataclasses.replace(self, **changes)

    # ------------------------------------------------------------------
    # file round trip

    def to_mapping(self) -> Dict[str, Any]:
        mesh: Dict[str, Any] = {"h": list(self.h)}
        if self.h_factor is not None:
            mesh["h_factor"] = self.h_factor
        solver = {"kind": self.solver.kind, "dense_cap": self.solver.dense_cap,
                  "tol": self.solver.tol}
        if self.solver.max_iter is not None:
            solver["max_iter"] = self.solver.max_iter
        output = {"record_time": self.record_time, "solutions": self.solutions,
                  "checks": self.checks}
        if self.sparsity is not None:
            output["sparsity"] = self.sparsity
        return {
            "study": self.study, "case": self.case, "out": self.out,
            "kernel1": dataclasses.asdict(self.kernel1),
            "kernel2": dataclasses.asdict(self.kernel2),
            "mesh": mesh,
            "delta": {"values": list(self.deltas), "ratio": self.ratio,
                      "mu_extension": self.mu_extension,
                      "kappa_extension": self.kappa_extension},
            "solver": solver,
            "quad": dict(self.quad),
            "output": output,
        }

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "StudyConfig":
        raw = dict(raw)
        top = {"study", "case", "out", "kernel1", "kernel2", "mesh", "delta", "solver", "quad",
               "output"}
        unknown = set(raw) - top
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")

        def table(name, keys):
            t = dict(raw.get(name, {}))
            bad = set(t) - set(keys)
            if bad:
                raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")
            return t

        kw: Dict[str, Any] = {}
        for key in ("study", "case", "out"):
            if key in raw:
                kw[key] = str(raw[key])
        for name in ("kernel1", "kernel2"):
            if name in raw:
                kw[name] = KernelSettings(**table(name, ("family", "s", "delta")))
        mesh = table("mesh", ("h", "h_factor"))
        if "h" in mesh:
            h = mesh["h"]
            kw["h"] = tuple(h) if isinstance(h, (list, tuple)) else (h,)
        if "h_factor" in mesh:
            kw["h_factor"] = float(mesh["h_factor"])
        delta = table("delta", ("values", "ratio", "mu_extension", "kappa_extension"))
        if "values" in delta:
            v = delta["values"]
            kw["deltas"] = tuple(v) if isinstance(v, (list, tuple)) else (v,)
        for key in ("ratio",):
            if key in delta:
                kw[key] = float(delta[key])
        for key in ("mu_extension", "kappa_extension"):
            if key in delta:
                kw[key] = str(delta[key])
        solver = table("solver", ("kind", "dense_cap", "tol", "max_iter"))
        if solver:
            kw["solver"] = SolverConfig(**solver)
        quad = table("quad", _QUAD_KEYS)
        if quad:
            kw["quad"] = tuple(quad.items())
        output = table("output", ("sparsity", "record_time", "solutions", "checks"))
        for key, val in output.items():
            kw[key] = bool(val)
        try:
            return cls(**kw)
        except (TypeError, ValueError) as err:
            if isinstance(err, ConfigError):
                raise
            raise ConfigError(str(err)) from err

    @classmethod
    def from_toml(cls, path) -> "StudyConfig":
        with open(path, "rb") as fh:
            return cls.from_mapping(tomllib.load(fh))


# --------------------------------------------------------------------------
# one sweep point

@dataclass
class PointOutcome:
    param: float
    h: float
    delta1: float
    delta2: float
    dofs: int
    errors: ErrorReport
    seconds: float
    solution: FieldPair
    report: SolveReport
    matrix: Optional[AssembledMatrix] = None
    checks: Dict[str, Any] = field(default_factory=dict)


def _kernels(config: StudyConfig, d1: float, d2: float) -> Tuple[KernelSpec, KernelSpec]:
    return config.kernel1.spec(config.dim, d1), config.kernel2.spec(config.dim, d2)


def problem_data(config: StudyConfig, decomp: geo.RegionDecomposition) -> D.ProblemData:
    if _is_local(config.case):
        return D.compatible_from_local(D.local_catalog(config.case), decomp.delta1,
                                       decomp.delta2, decomp,
                                       kappa_extension=config.kappa_extension,
                                       mu_extension=config.mu_extension)
    return D.manufactured_nonlocal(config.case)


def invariant_checks(matrix: AssembledMatrix, solution: FieldPair, report: SolveReport,
                     data: D.ProblemData) -> Dict[str, Any]:
    """Structural and variational checks on one assembled configuration.

    symmetry and row_sum are relative to max|A|; energy_identity compares the
    quadratic form with the pair-quadrature energy of the solution; the
    best-approximation gap is E(u_h) - E(I_h u) in the energy norm (must be
    <= 0 up to roundoff) and only applies when an exact nonlocal solution exists.
    The roundoff allowance scales with the energy norm of the solution, since
    both errors sit at roundoff when the exact solution lies in the FE space.
    """
    A = matrix.full()
    scale = matrix.max_abs()
    out: Dict[str, Any] = {}
    out["symmetry"] = float(abs(A - A.T).max() / scale) if A.nnz else 0.0
    out["row_sum"] = float(np.abs(A @ np.ones(A.shape[0])).max() / scale)
    out["spd_solve"] = report.kind
    u1, u2 = solution.u1, solution.u2
    quad_form = float(u1 @ (matrix.part(0) @ u1) + u2 @ (matrix.part(1) @ u2))
    by_pairs = energy_by_pairs(matrix, u1, u2)
    out["energy_identity"] = abs(quad_form - by_pairs) / max(abs(by_pairs), 1e-300)
    if data.exact1 is not None and data.exact2 is not None:
        interp = interpolant_pair(solution.space, data.exact1, data.exact2)
        e_h = energy_error(matrix, data.exact1, data.exact2, u1, u2)
        e_i = energy_error(matrix, data.exact1, data.exact2, interp.u1, interp.u2)
        out["energy_error"] = e_h
        out["interpolant_energy_error"] = e_i
        out["best_approximation_gap"] = e_h - e_i
        out["solution_energy_norm"] = math.sqrt(max(by_pairs, 0.0))
    return out


def checks_pass(checks: Mapping[str, Any], tol: float = 1e-10) -> bool:
    """True if every recorded invariant holds at the suite tolerances."""
    if not checks:
        return True
    ok = checks["symmetry"] <= 1e-12 and checks["row_sum"] <= 1e-10
    ok = ok and checks["energy_identity"] <= tol
    if "best_approximation_gap" in checks:
        slack = (1e-7 * checks["interpolant_energy_error"]
                 + tol * checks.get("solution_energy_norm", 0.0))
        ok = ok and checks["best_approximation_gap"] <= slack
    return bool(ok)


def solve_point(config: StudyConfig, h: float, delta1: float, delta2: float,
                param: Optional[float] = None, keep_matrix: bool = False) -> PointOutcome:
    """Assemble, solve and measure errors at one sweep point."""
    param = h if param is None else param
    t0 = time.perf_counter()
    if config.local_solver:
        local = D.local_catalog(config.case)
        mesh = build_local_mesh(config.dim, h)
        pair, rep = solve_local(local, mesh, config.solver)
        errors = error_norms(pair, local.exact1, local.exact2, label="local")
        return PointOutcome(param, h, 0.0, 0.0, int(rep.solution.size), errors,
                            time.perf_counter() - t0, pair, rep)

    cfg = (geo.interval_config if config.dim == 1 else geo.rectangle_config)(delta1, delta2)
    decomp = geo.decompose(cfg)
    space = FESpace(build_mesh(decomp, h))
    ck = CompositeKernel(*_kernels(config, delta1, delta2), decomp)
    data = problem_data(config, decomp)
    matrix = assemble_matrix(space, ck, config.quad_config())
    if data.load_mode == "galerkin":
        load = galerkin_load(matrix, data.exact1, data.exact2)
    else:
        load = explicit_load(space, data.zeta1, data.zeta2, data.nu)
    system = apply_constraints(matrix, load, data.kappa1, data.kappa2, data.mu)
    pair, rep = solve_system(system, config.solver)
    if data.local_exact1 is not None:
        errors = error_norms(pair, data.local_exact1, data.local_exact2, label="local")
    else:
        errors = error_norms(pair, data.exact1, data.exact2, label="nonlocal")
    seconds = time.perf_counter() - t0
    checks: Dict[str, Any] = {}
    if config.checks:
        checks = invariant_checks(matrix, pair, rep, data)
    if config.study == "patch":
        checks["max_nodal_deviation"] = float(np.max(np.abs(
            pair.u - data.exact1(space.mesh.nodes))))
    return PointOutcome(param, h, delta1, delta2, int(system.free.size), errors, seconds, pair,
                        rep, matrix if keep_matrix else None, checks)


# --------------------------------------------------------------------------
# sweeps and files

@dataclass
class StudyRow:
    param: float
    dofs: Optional[int]
    L2: Tuple[float, float]
    H1: Tuple[float, float]
    slope_L2: Tuple[Optional[float], Optional[float]] = (None, None)
    slope_H1: Tuple[Optional[float], Optional[float]] = (None, None)
    seconds: float = 0.0
    error: Optional[str] = None

    def values(self) -> List[Any]:
        return [self.param, self.dofs, *self.L2, *self.H1, *self.slope_L2, *self.slope_H1,
                self.seconds]


@dataclass
class StudyResult:
    config: StudyConfig
    rows: List[StudyRow] = field(default_factory=list)
    checks: List[Dict[str, Any]] = field(default_factory=list)
    error: Optional[str] = None
    files: Dict[str, Path] = field(default_factory=dict)
    outcomes: List[PointOutcome] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.error is None

    def column(self, name: str) -> np.ndarray:
        idx = CSV_HEADER.index(name)
        vals = [r.values()[idx] for r in self.rows if r.error is None]
        return np.array([np.nan if v is None else v for v in vals], dtype=float)

    def slope(self, norm: str, sub: int) -> float:
        """Least-squares slope of the error column through all successful rows."""
        from .solve import least_squares_slope
        return least_squares_slope(self.column("param"), self.column(f"{norm}_{sub}"))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _fmt_dat(v) -> str:
    if v is None:
        return "NaN"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.16e}"


def _update_slopes(rows: List[StudyRow]) -> None:
    good = [r for r in rows if r.error is None]
    for r in good:
        r.slope_L2 = (None, None)
        r.slope_H1 = (None, None)
    if len(good) < 2:
        return
    for name in ("L2", "H1"):
        per_sub = [estimate_rates([(r.param, getattr(r, name)[k]) for r in good]) for k in range(2)]
        for i, r in enumerate(good[1:]):
            setattr(r, f"slope_{name}", (per_sub[0][i], per_sub[1][i]))


def write_tables(result: StudyResult, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / "results.csv"
    with open(csv_path, "w") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for r in result.rows:
            fh.write(",".join(_fmt(v) for v in r.values()) + "\n")
    dat_path = outdir / "results.dat"
    with open(dat_path, "w") as fh:
        fh.write(f"# study={result.config.study} case={result.config.case}\n")
        fh.write("# " + " ".join(CSV_HEADER) + "\n")
        for r in result.rows:
            fh.write(" ".join(_fmt_dat(v) for v in r.values()) + "\n")
    result.files["csv"] = csv_path
    result.files["dat"] = dat_path


def _flatten(prefix: str, obj, out: List[str]) -> None:
    if isinstance(obj, Mapping):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], out)
    else:
        out.append(f"{prefix} = {obj!r}")


def write_meta(result: StudyResult, outdir: Path) -> None:
    import numba  # noqa: F401 - version only
    import scipy

    lines: List[str] = []
    _flatten("", result.config.to_mapping(), lines)
    lines += [
        f"library.version = {__version__!r}",
        f"library.python = {platform.python_version()!r}",
        f"library.numpy = {np.__version__!r}",
        f"library.scipy = {scipy.__version__!r}",
        f"library.numba = {sys.modules['numba'].__version__!r}",
        f"library.jit_enabled = {JIT_ENABLED!r}",
        f"status = {'ok' if result.ok else 'failed'!r}",
        f"rows = {len(result.rows)}",
    ]
    if result.error is not None:
        lines.append(f"error = {result.error!r}")
    for i, chk in enumerate(result.checks):
        for k in sorted(chk):
            lines.append(f"checks.{i}.{k} = {chk[k]!r}")
    path = outdir / "meta.txt"
    path.write_text("\n".join(lines) + "\n")
    result.files["meta"] = path


def write_solution(outcome: PointOutcome, path: Path) -> None:
    """Nodal values: coordinates, region id, u_1 and u_2 (NaN where undefined)."""
    space = outcome.solution.space
    nodes = space.mesh.nodes
    u1 = np.where(space.in_sub1, outcome.solution.u1, np.nan)
    u2 = np.where(space.in_sub2, outcome.solution.u2, np.nan)
    order = np.lexsort(nodes.T[::-1])
    cols = ["x", "y"][: space.dim] + ["region", "u1", "u2"]
    with open(path, "w") as fh:
        fh.write(f"# h={outcome.h!r} delta1={outcome.delta1!r} delta2={outcome.delta2!r}\n")
        fh.write("# " + " ".join(cols) + "\n")
        for i in order:
            coords = " ".join(f"{c:.16e}" for c in nodes[i])
            fh.write(f"{coords} {int(space.mesh.node_region[i])} {u1[i]:.16e} {u2[i]:.16e}\n")


def emit_sparsity(config: StudyConfig, path=None) -> Path:
    """Write the ``row col category`` dump for a 1D single-solve configuration."""
    if config.study != "single" or config.dim != 1:
        raise ConfigError("the sparsity dump needs a 1D single-solve study")
    _, h, d1, d2 = config.points()[0]
    decomp = geo.decompose(geo.interval_config(d1, d2))
    space = FESpace(build_mesh(decomp, h))
    matrix = assemble_matrix(space, CompositeKernel(*_kernels(config, d1, d2), decomp),
                             config.quad_config())
    path = Path(path) if path is not None else Path(config.out) / "sparsity.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    dump_sparsity(matrix, path)
    return path


def run_study(config: StudyConfig, outdir=None, keep_outcomes: bool = False) -> StudyResult:
    """Run the sweep sequentially, rewriting the tables after every point.

    A failing point appends an error row (NaN errors), records the message in
    ``meta.txt`` and stops the sweep; the partial tables stay on disk.
    """
    outdir = Path(outdir if outdir is not None else config.out)
    result = StudyResult(config)
    for k, (param, h, d1, d2) in enumerate(config.points()):
        t0 = time.perf_counter()
        try:
            outcome = solve_point(config, h, d1, d2, param=param,
                                  keep_matrix=keep_outcomes or config.write_sparsity)
        except Exception as err:  # flushed as an error row, then the sweep stops
            nan = (math.nan, math.nan)
            result.rows.append(StudyRow(param, None, nan, nan,
                                        seconds=time.perf_counter() - t0 if config.record_time else 0.0,
                                        error=f"{type(err).__name__}: {err}"))
            result.error = f"point {k} (param={param!r}): {type(err).__name__}: {err}"
            break
        e = outcome.errors
        result.rows.append(StudyRow(param, outcome.dofs, e.L2, e.H1,
                                    seconds=outcome.seconds if config.record_time else 0.0))
        result.checks.append(outcome.checks)
        _update_slopes(result.rows)
        if config.solutions:
            p = outdir / f"solution_{k:02d}.dat"
            outdir.mkdir(parents=True, exist_ok=True)
            write_solution(outcome, p)
            result.files[f"solution_{k:02d}"] = p
        if config.write_sparsity and outcome.matrix is not None:
            outdir.mkdir(parents=True, exist_ok=True)
            p = outdir / "sparsity.txt"
            dump_sparsity(outcome.matrix, p)
            result.files["sparsity"] = p
        if not keep_outcomes:
            outcome.matrix = None
        else:
            result.outcomes.append(outcome)
        write_tables(result, outdir)
        write_meta(result, outdir)
    write_tables(result, outdir)
    write_meta(result, outdir)
    return result


__all__ = [
    "CSV_HEADER", "ConfigError", "KernelSettings", "PointOutcome", "StudyConfig", "StudyResult",
    "StudyRow", "case_dimension", "checks_pass", "emit_sparsity", "invariant_checks",
    "problem_data", "run_study", "solve_point", "write_solution",
]
