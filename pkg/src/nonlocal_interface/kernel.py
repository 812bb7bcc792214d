"""Truncated radial kernels and the region-pair dispatch of the composite kernel."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from . import geometry as geo

CONSTANT = 0
FRACTIONAL = 1
_FAMILY_CODES = {"constant": CONSTANT, "fractional": FRACTIONAL}


@dataclass(frozen=True)
class KernelSpec:
    """gamma(x, y) = C |x-y|^(-d-2s) (fractional) or C (constant) for |x-y| < delta."""

    family: str
    dim: int
    delta: float
    s: float = 0.0
    allow_large_s: bool = False

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in _FAMILY_CODES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if self.dim not in (1, 2):
            raise ValueError("kernel dimension must be 1 or 2")
        if not self.delta > 0:
            raise ValueError("horizon must be positive")
        if fam == "fractional":
            if not 0.0 < self.s < 1.0:
                raise ValueError("fractional order must lie in (0, 1)")
            if self.s >= 0.5:
                if not self.allow_large_s:
                    raise ValueError("s >= 0.5 requires allow_large_s=True")
                warnings.warn("s >= 0.5: near-diagonal quadrature is not designed for this range")

    @property
    def code(self) -> int:
        return _FAMILY_CODES[self.family]

    @property
    def normConstant(self) -> float:
        d, s = self.dim, self.s
        if self.family == "constant":
            return 1.5 * self.delta ** -3 if d == 1 else 4.0 / math.pi * self.delta ** -4
        if d == 1:
            return (2.0 - 2.0 * s) / 2.0 * self.delta ** (2.0 * s - 2.0)
        return (2.0 - 2.0 * s) / math.pi * self.delta ** (2.0 * s - 2.0)

    @property
    def exponent(self) -> float:
        """Power p in gamma = C r^(-p) inside the ball."""
        return self.dim + 2.0 * self.s if self.family == "fractional" else 0.0

    def with_delta(self, delta: float) -> "KernelSpec":
        return KernelSpec(self.family, self.dim, float(delta), self.s, self.allow_large_s)

    def describe(self) -> str:
        if self.family == "constant":
            return f"constant(delta={self.delta:g})"
        return f"fractional(s={self.s:g}, delta={self.delta:g})"


def radial_value(spec: KernelSpec, r):
    r = np.asarray(r, dtype=float)
    inside = r < spec.delta
    if spec.family == "constant":
        return np.where(inside, spec.normConstant, 0.0)
    with np.errstate(divide="ignore"):
        return np.where(inside, spec.normConstant * r ** (-spec.exponent), 0.0)


def eval_raw(spec: KernelSpec, x, y) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r = float(np.sqrt(np.sum((x - y) ** 2)))
    if r >= spec.delta:
        return 0.0
    if spec.family == "fractional" and r == 0.0:
        raise ValueError("fractional kernel evaluated at x = y (singular point)")
    return float(radial_value(spec, r))


def check_normalization(spec: KernelSpec, n=24) -> np.ndarray:
    """Second-moment matrix  int z z^T gamma(z) dz  over the full ball."""
    from scipy.special import roots_jacobi
    d = spec.delta
    # radial part: int_0^d r^(d+1) gamma(r) dr = C int_0^d r^(a) dr with a = dim+1-p
    a = spec.dim + 1.0 - spec.exponent
    t, w = roots_jacobi(n, 0.0, a)
    radial = spec.normConstant * (d / 2.0) ** (a + 1.0) * np.sum(w)
    if spec.dim == 1:
        return np.array([[2.0 * radial]])
    th, wt = np.polynomial.legendre.leggauss(n)
    out = np.zeros((2, 2))
    for q in range(4):
        ang = 0.5 * math.pi * (q + 0.5 + 0.5 * th)
        ww = 0.25 * math.pi * wt
        e = np.stack([np.cos(ang), np.sin(ang)])
        out += (e * ww) @ e.T
    return out * radial


# --------------------------------------------------------------------------
# region-pair dispatch

def _role(sub: int, region: int):
    if sub == 0:
        if region in (geo.OMEGA1, geo.JUMP2):
            return "O"
        if region == geo.JUMP1:
            return "J"
        if region in (geo.DIR1_ONLY, geo.DIR_BOTH):
            return "D"
        return None
    if region in (geo.OMEGA2, geo.JUMP1):
        return "O"
    if region == geo.JUMP2:
        return "J"
    if region in (geo.DIR_BOTH, geo.DIR2_ONLY):
        return "D"
    return None


def stitched_weight(sub: int, rx: int, ry: int) -> float:
    """Multiple of gamma_i that the stitched kernel of subdomain ``sub`` takes on a region pair.

    Uses the jump-kernel choice: half the kernel between the two jump collars,
    the full kernel between the rest of Omega_i and the own jump collar.
    """
    a, b = _role(sub, rx), _role(sub, ry)
    if a is None or b is None:
        return 0.0
    if a == "O" and b == "O":
        return 1.0
    if {a, b} == {"O", "J"}:
        omega_pt = rx if a == "O" else ry
        other_jump = geo.JUMP2 if sub == 0 else geo.JUMP1
        return 0.5 if omega_pt == other_jump else 1.0
    if {a, b} == {"O", "D"}:
        return 1.0
    return 0.0


def _interface_table():
    kid = np.full((geo.NUM_REGIONS, geo.NUM_REGIONS, 2), -1, dtype=np.int64)
    wt = np.zeros((geo.NUM_REGIONS, geo.NUM_REGIONS, 2))
    for rx in range(geo.NUM_REGIONS):
        for ry in range(geo.NUM_REGIONS):
            n = 0
            for sub in (0, 1):
                w = stitched_weight(sub, rx, ry)
                if w != 0.0:
                    kid[rx, ry, n] = sub
                    wt[rx, ry, n] = w
                    n += 1
    return kid, wt


def _single_domain_table():
    kid = np.full((geo.NUM_REGIONS, geo.NUM_REGIONS, 2), -1, dtype=np.int64)
    wt = np.zeros((geo.NUM_REGIONS, geo.NUM_REGIONS, 2))
    collar = geo.DIRICHLET_REGIONS
    for rx in range(geo.NUM_REGIONS):
        for ry in range(geo.NUM_REGIONS):
            if rx in collar and ry in collar:
                continue
            kid[rx, ry, 0] = 0
            wt[rx, ry, 0] = 1.0
    return kid, wt


class CompositeKernel:
    """gamma = stitched_1 on (Omega_1 u I_1)^2 + stitched_2 on (Omega_2 u I_2)^2.

    ``single_domain=True`` instead builds the plain one-kernel operator on
    Omega u I (kernel1 everywhere, nothing between collar points), which is
    the reference for the equivalence check.
    """

    def __init__(self, kernel1: KernelSpec, kernel2: KernelSpec,
                 decomp: geo.RegionDecomposition, single_domain: bool = False):
        if kernel1.dim != decomp.dim or kernel2.dim != decomp.dim:
            raise ValueError("kernel dimension does not match the geometry")
        if abs(kernel1.delta - decomp.delta1) > 1e-14 or abs(kernel2.delta - decomp.delta2) > 1e-14:
            raise ValueError("kernel horizons must equal the decomposition horizons")
        self.kernel1 = kernel1
        self.kernel2 = kernel2
        self.decomp = decomp
        self.single_domain = single_domain
        self.term_kernel, self.term_weight = (_single_domain_table() if single_domain
                                              else _interface_table())

    @property
    def kernels(self) -> Tuple[KernelSpec, KernelSpec]:
        return (self.kernel1, self.kernel2)

    @property
    def max_delta(self) -> float:
        return max(self.kernel1.delta, self.kernel2.delta)

    def terms(self, rx: int, ry: int) -> List[Tuple[int, float]]:
        out = []
        for t in range(2):
            k = int(self.term_kernel[rx, ry, t])
            if k >= 0:
                out.append((k, float(self.term_weight[rx, ry, t])))
        return out

    def kernel_params(self) -> np.ndarray:
        """Rows (family code, s, C, delta) for the two subdomain kernels."""
        return np.array([[k.code, k.s, k.normConstant, k.delta] for k in self.kernels])


def eval_composite(ck: CompositeKernel, x, y) -> float:
    rx = int(geo.regions_of(ck.decomp, np.atleast_1d(np.asarray(x, float)).reshape(1, -1))[0])
    ry = int(geo.regions_of(ck.decomp, np.atleast_1d(np.asarray(y, float)).reshape(1, -1))[0])
    if rx == geo.OUTSIDE or ry == geo.OUTSIDE:
        return 0.0
    total = 0.0
    for k, w in ck.terms(rx, ry):
        total += w * eval_raw(ck.kernels[k], x, y)
    return total
