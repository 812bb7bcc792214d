"""Subdomains, horizons and the region decomposition they induce.

All regions are finite unions of axis-aligned boxes, so membership is decided
by coordinate comparisons only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

# Fine region ids. Together they tile Omega u I; the ordering doubles as the
# tie-breaking priority for points on shared boundaries (lower id wins).
OMEGA1 = 0       # Omega_1 minus the jump collar of subdomain 2
JUMP2 = 1        # I_2^J  (lies inside Omega_1)
JUMP1 = 2        # I_1^J  (lies inside Omega_2)
OMEGA2 = 3       # Omega_2 minus the jump collar of subdomain 1
DIR1_ONLY = 4    # I_1^D outside Omega_2 u I_2
DIR_BOTH = 5     # I_1^D n I_2^D (2D corners only)
DIR2_ONLY = 6    # I_2^D outside Omega_1 u I_1
OUTSIDE = -1
NUM_REGIONS = 7

REGION_NAMES = (
    "Omega1\\I2J", "I2J", "I1J", "Omega2\\I1J", "I1D\\I2D", "I1D&I2D", "I2D\\I1D",
)

# region membership of the subdomain fields u_1 (on Omega_1 u I_1) and u_2
IN_SUB1 = frozenset((OMEGA1, JUMP2, JUMP1, DIR1_ONLY, DIR_BOTH))
IN_SUB2 = frozenset((JUMP1, OMEGA2, JUMP2, DIR_BOTH, DIR2_ONLY))
DIRICHLET_REGIONS = frozenset((DIR1_ONLY, DIR_BOTH, DIR2_ONLY))
GAMMA_REGIONS = frozenset((JUMP2, JUMP1))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``prod_k [lo_k, hi_k]`` (open set, closed for tests)."""

    lo: Tuple[float, ...]
    hi: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("box corners of different dimension")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def measure(self) -> float:
        return float(np.prod([max(b - a, 0.0) for a, b in zip(self.lo, self.hi)]))

    def is_empty(self) -> bool:
        return any(b <= a for a, b in zip(self.lo, self.hi))

    def contains(self, pts, closed=True):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        if closed:
            return np.all((pts >= lo) & (pts <= hi), axis=1)
        return np.all((pts > lo) & (pts < hi), axis=1)

    def intersect(self, other: "Box") -> "Box":
        return Box(tuple(max(a, b) for a, b in zip(self.lo, other.lo)),
                   tuple(min(a, b) for a, b in zip(self.hi, other.hi)))

    def expand(self, r: float) -> "Box":
        return Box(tuple(a - r for a in self.lo), tuple(b + r for b in self.hi))

    def subtract(self, other: "Box") -> List["Box"]:
        """Boxes covering ``self \\ other`` (axis sweep, at most 2d pieces)."""
        cut = self.intersect(other)
        if cut.is_empty():
            return [] if self.is_empty() else [self]
        pieces = []
        lo, hi = list(self.lo), list(self.hi)
        for k in range(self.dim):
            if lo[k] < cut.lo[k]:
                plo, phi = list(lo), list(hi)
                phi[k] = cut.lo[k]
                pieces.append(Box(plo, phi))
            if cut.hi[k] < hi[k]:
                plo, phi = list(lo), list(hi)
                plo[k] = cut.hi[k]
                pieces.append(Box(plo, phi))
            lo[k], hi[k] = cut.lo[k], cut.hi[k]
        return [p for p in pieces if not p.is_empty()]


def _subtract_all(boxes: Sequence[Box], cutters: Sequence[Box]) -> List[Box]:
    out = [b for b in boxes if not b.is_empty()]
    for c in cutters:
        nxt = []
        for b in out:
            nxt.extend(b.subtract(c))
        out = nxt
    return out


def _intersect_all(boxes: Sequence[Box], other: Sequence[Box]) -> List[Box]:
    out = []
    for b in boxes:
        for c in other:
            x = b.intersect(c)
            if not x.is_empty():
                out.append(x)
    return out


def union_measure(boxes: Sequence[Box]) -> float:
    """Measure of a union of boxes (inclusion via disjoint re-splitting)."""
    disjoint: List[Box] = []
    for b in boxes:
        disjoint.extend(_subtract_all([b], disjoint))
    return sum(b.measure for b in disjoint)


@dataclass(frozen=True)
class GeometryConfig:
    dimension: int
    omega1: Box
    omega2: Box
    delta1: float
    delta2: float

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        for b in (self.omega1, self.omega2):
            if b.dim != self.dimension or b.is_empty():
                raise ValueError("subdomain boxes must be non-empty and match the dimension")
        if not (self.delta1 > 0 and self.delta2 > 0):
            raise ValueError("horizons must be positive")
        if self.delta1 > self.delta2:
            raise ValueError("delta1 must not exceed delta2 (relabel the subdomains)")


def interval_config(delta1, delta2, omega1=(0.0, 1.0), omega2=(1.0, 2.0)) -> GeometryConfig:
    return GeometryConfig(1, Box((omega1[0],), (omega1[1],)), Box((omega2[0],), (omega2[1],)),
                          float(delta1), float(delta2))


def rectangle_config(delta1, delta2, omega1=((0.0, 0.0), (1.0, 1.0)),
                     omega2=((1.0, 0.0), (2.0, 1.0))) -> GeometryConfig:
    return GeometryConfig(2, Box(*omega1), Box(*omega2), float(delta1), float(delta2))


@dataclass(frozen=True)
class RegionDecomposition:
    config: GeometryConfig
    normal_axis: int
    interface_coord: float
    side1: float                    # +1 if Omega_1 lies below the interface along the normal
    expanded1: Box                  # Omega_1 u I_1 (square collar)
    expanded2: Box
    interactionDomain1: List[Box]
    interactionDomain2: List[Box]
    dirichletCollar1: List[Box]
    dirichletCollar2: List[Box]
    jumpCollar1: List[Box]          # I_1^J = I_1 n Omega_2
    jumpCollar2: List[Box]          # I_2^J = I_2 n Omega_1
    gamma0: Box                     # degenerate box (zero width along the normal)
    gammaRegion: List[Box]          # I_1^J u I_2^J (u Gamma_0, measure zero)
    omega1J: List[Box]              # always empty
    omega2J: List[Box]
    fine: Tuple[Tuple[Box, ...], ...] = field(repr=False)

    @property
    def dim(self) -> int:
        return self.config.dimension

    @property
    def delta1(self) -> float:
        return self.config.delta1

    @property
    def delta2(self) -> float:
        return self.config.delta2

    @property
    def domain(self) -> List[Box]:
        return [self.expanded1, self.expanded2]

    def breakpoints(self, axis: int) -> np.ndarray:
        vals = []
        for boxes in tuple(self.fine) + (tuple(self.omega2J),):
            for b in boxes:
                vals.extend((b.lo[axis], b.hi[axis]))
        vals = np.unique(np.round(np.asarray(vals), 12))
        return vals


def _interface(o1: Box, o2: Box):
    d = o1.dim
    found = None
    for k in range(d):
        if o1.hi[k] == o2.lo[k]:
            cand = (k, o1.hi[k], 1.0)
        elif o2.hi[k] == o1.lo[k]:
            cand = (k, o1.lo[k], -1.0)
        else:
            continue
        others = [j for j in range(d) if j != k]
        if all(o1.lo[j] == o2.lo[j] and o1.hi[j] == o2.hi[j] for j in others):
            if found is not None:
                raise ValueError("subdomains share more than one facet")
            found = cand
    if found is None:
        raise ValueError("subdomains must be boxes sharing one full facet")
    return found


def decompose(config: GeometryConfig) -> RegionDecomposition:
    o1, o2 = config.omega1, config.omega2
    d1, d2 = config.delta1, config.delta2
    if not o1.intersect(o2).is_empty():
        raise ValueError("subdomains overlap")
    k, c, side = _interface(o1, o2)
    if o1.hi[k] - o1.lo[k] <= d2 or o2.hi[k] - o2.lo[k] <= d1:
        raise ValueError("horizon too large: a jump collar would cover a whole subdomain")
    e1, e2 = o1.expand(d1), o2.expand(d2)
    inter1 = e1.subtract(o1)
    inter2 = e2.subtract(o2)
    jump1 = _intersect_all(inter1, [o2])
    jump2 = _intersect_all(inter2, [o1])
    dir1 = _subtract_all(inter1, [o2])
    dir2 = _subtract_all(inter2, [o1])

    g0lo, g0hi = list(o1.lo), list(o1.hi)
    g0lo[k] = g0hi[k] = c
    gamma0 = Box(g0lo, g0hi)

    # Omega_2^J: points of Omega_2 \ I_1^J within delta_2 of I_2^J. Because the
    # jump collar spans the full facet it reduces to a slab along the normal.
    omega2J = []
    if d2 > d1:
        lo, hi = list(o2.lo), list(o2.hi)
        if side > 0:
            lo[k], hi[k] = c + d1, c + d2
        else:
            lo[k], hi[k] = c - d2, c - d1
        omega2J = [Box(lo, hi)]

    gamma_region = list(jump2) + list(jump1)
    fine = (
        tuple(_subtract_all([o1], jump2)),
        tuple(jump2),
        tuple(jump1),
        tuple(_subtract_all([o2], jump1)),
        tuple(_subtract_all(dir1, [e2])),
        tuple(_intersect_all(dir1, [e2])),
        tuple(_subtract_all(dir2, [e1])),
    )
    return RegionDecomposition(
        config=config, normal_axis=k, interface_coord=float(c), side1=side,
        expanded1=e1, expanded2=e2,
        interactionDomain1=inter1, interactionDomain2=inter2,
        dirichletCollar1=dir1, dirichletCollar2=dir2,
        jumpCollar1=jump1, jumpCollar2=jump2,
        gamma0=gamma0, gammaRegion=gamma_region, omega1J=[], omega2J=omega2J,
        fine=fine,
    )


def as_points(pts, dim: int) -> np.ndarray:
    """Coerce scalars / flat arrays into an (n, dim) array."""
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 0:
        return pts.reshape(1, 1)
    if pts.ndim == 1:
        return pts.reshape(-1, 1) if dim == 1 else pts.reshape(1, -1)
    return pts


def regions_of(decomp: RegionDecomposition, pts) -> np.ndarray:
    """Fine region id per point (closed boxes, lowest id wins; -1 outside)."""
    pts = as_points(pts, decomp.dim)
    out = np.full(pts.shape[0], OUTSIDE, dtype=np.int64)
    for rid, boxes in enumerate(decomp.fine):
        todo = out == OUTSIDE
        if not todo.any():
            break
        hit = np.zeros(pts.shape[0], dtype=bool)
        for b in boxes:
            hit |= b.contains(pts)
        out[todo & hit] = rid
    return out


def in_boxes(boxes: Sequence[Box], pts, closed=True, dim=None) -> np.ndarray:
    if dim is None:
        dim = boxes[0].dim if boxes else np.shape(pts)[-1] if np.ndim(pts) == 2 else 1
    pts = as_points(pts, dim)
    hit = np.zeros(pts.shape[0], dtype=bool)
    for b in boxes:
        hit |= b.contains(pts, closed=closed)
    return hit


@dataclass(frozen=True)
class PointClass:
    region: int
    tag: str
    overlays: frozenset

    @property
    def outside(self) -> bool:
        return self.region == OUTSIDE


_TAGS = {OMEGA1: "Omega1Interior", JUMP2: "Omega1Interior", JUMP1: "Omega2Interior",
         OMEGA2: "Omega2Interior", DIR1_ONLY: "I1D", DIR_BOTH: "I1D", DIR2_ONLY: "I2D",
         OUTSIDE: "Outside"}


def classify_point(decomp: RegionDecomposition, x) -> PointClass:
    """Region tag of a single point plus overlay flags (I1J, I2J, Omega2J, I2D)."""
    pt = np.asarray(x, dtype=float).reshape(1, -1)
    r = int(regions_of(decomp, pt)[0])
    overlays = set()
    if r == JUMP2:
        overlays.add("I2J")
    elif r == JUMP1:
        overlays.add("I1J")
    elif r == DIR_BOTH:
        overlays.add("I2D")
    if r == OMEGA2 and in_boxes(decomp.omega2J, pt, dim=decomp.dim)[0]:
        overlays.add("Omega2J")
    return PointClass(r, _TAGS[r], frozenset(overlays))


def project_to_gamma0(decomp: RegionDecomposition, x) -> np.ndarray:
    """Orthogonal projection onto the straight local interface."""
    p = np.array(x, dtype=float).reshape(-1)
    k = decomp.normal_axis
    p[k] = decomp.interface_coord
    g = decomp.gamma0
    for j in range(decomp.dim):
        if j != k:
            p[j] = min(max(p[j], g.lo[j]), g.hi[j])
    return p


def domain_measure(decomp: RegionDecomposition) -> float:
    return union_measure(decomp.domain)
