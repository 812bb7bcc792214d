"""Analytic scalar fields usable from numpy code and from compiled kernels.

A :class:`Field` wraps a scalar function ``fn(x0, x1, params) -> float`` that is
compiled with :func:`njit`, so assembly kernels can evaluate exact solutions at
quadrature points. The catalog uses one trigonometric family

    A + B1 sin(pi x0) + B sin(pi x0) sin(pi x1) + C sin(pi x0) sin(2 pi x1)
      + D x0 + E x1 + F sin(pi x1) + G sin(2 pi x1)

which covers every manufactured and local solution used in the studies. 1D
fields simply ignore ``x1`` (callers pass 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._jit import njit

PI = math.pi


@njit
def trig_value(x0, x1, p):
    s0 = math.sin(PI * x0)
    return (p[0] + p[1] * s0 + p[2] * s0 * math.sin(PI * x1) + p[3] * s0 * math.sin(2.0 * PI * x1)
            + p[4] * x0 + p[5] * x1 + p[6] * math.sin(PI * x1) + p[7] * math.sin(2.0 * PI * x1))


@njit
def trig_grad0(x0, x1, p):
    c0 = PI * math.cos(PI * x0)
    return (p[1] * c0 + p[2] * c0 * math.sin(PI * x1) + p[3] * c0 * math.sin(2.0 * PI * x1) + p[4])


@njit
def trig_grad1(x0, x1, p):
    s0 = math.sin(PI * x0)
    return (p[2] * s0 * PI * math.cos(PI * x1) + p[3] * s0 * 2.0 * PI * math.cos(2.0 * PI * x1)
            + p[5] + p[6] * PI * math.cos(PI * x1) + p[7] * 2.0 * PI * math.cos(2.0 * PI * x1))


@njit
def trig_laplacian(x0, x1, p):
    s0 = math.sin(PI * x0)
    pi2 = PI * PI
    return (-pi2 * p[1] * s0 - 2.0 * pi2 * p[2] * s0 * math.sin(PI * x1)
            - 5.0 * pi2 * p[3] * s0 * math.sin(2.0 * PI * x1)
            - pi2 * p[6] * math.sin(PI * x1) - 4.0 * pi2 * p[7] * math.sin(2.0 * PI * x1))


@njit
def _eval_many(fn, X0, X1, p):
    out = np.empty(X0.shape[0])
    for i in range(X0.shape[0]):
        out[i] = fn(X0[i], X1[i], p)
    return out


@dataclass(frozen=True)
class Field:
    """Scalar field with optional gradient; ``params`` is a float64 array."""

    fn: Callable
    params: np.ndarray
    grad: Optional[tuple] = None
    laplacian: Optional[Callable] = None
    name: str = "field"

    def _coords(self, pts):
        pts = np.asarray(pts, dtype=float)
        if pts.ndim <= 1:
            pts = pts.reshape(-1, 1)
        x0 = np.ascontiguousarray(pts[:, 0])
        x1 = np.ascontiguousarray(pts[:, 1]) if pts.shape[1] > 1 else np.zeros_like(x0)
        return x0, x1

    def __call__(self, pts) -> np.ndarray:
        x0, x1 = self._coords(pts)
        return _eval_many(self.fn, x0, x1, self.params)

    def gradient(self, pts, dim=None) -> np.ndarray:
        if self.grad is None:
            raise ValueError(f"field {self.name!r} has no gradient")
        x0, x1 = self._coords(pts)
        dim = dim or np.asarray(pts).reshape(x0.size, -1).shape[1]
        comps = [_eval_many(g, x0, x1, self.params) for g in self.grad[:dim]]
        return np.column_stack(comps)

    def neg_laplacian(self, pts) -> np.ndarray:
        if self.laplacian is None:
            raise ValueError(f"field {self.name!r} has no Laplacian")
        x0, x1 = self._coords(pts)
        return -_eval_many(self.laplacian, x0, x1, self.params)

    def __add__(self, other: "Field") -> "Field":
        if self.fn is not trig_value or other.fn is not trig_value:
            return NotImplemented
        return trig(*(self.params + other.params), name=f"{self.name}+{other.name}")

    def __sub__(self, other: "Field") -> "Field":
        if self.fn is not trig_value or other.fn is not trig_value:
            return NotImplemented
        return trig(*(self.params - other.params), name=f"{self.name}-{other.name}")

    def scaled(self, c: float) -> "Field":
        if self.fn is not trig_value:
            raise ValueError("scaling is only defined for catalog fields")
        return trig(*(c * self.params), name=f"{c:g}*{self.name}")


def trig(A=0.0, B1=0.0, B=0.0, C=0.0, D=0.0, E=0.0, F=0.0, G=0.0, name="trig") -> Field:
    p = np.array([A, B1, B, C, D, E, F, G], dtype=float)
    return Field(trig_value, p, (trig_grad0, trig_grad1), trig_laplacian, name)


def constant(c: float) -> Field:
    return trig(A=c, name=f"const({c:g})")


ZERO = constant(0.0)


class PointwiseField:
    """Python-only field from a vectorized callable (nodal data, extensions)."""

    def __init__(self, func, name="pointwise"):
        self.func = func
        self.name = name

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        if pts.ndim <= 1:
            pts = pts.reshape(-1, 1)
        return np.broadcast_to(np.asarray(self.func(pts), dtype=float), (pts.shape[0],)).copy()
