"""Rectangular grids, boundary bookkeeping and nodal fields.

The grid has ``N1 x N2`` nodes including the boundary.  Arrays are indexed
``[i, j]`` with ``i`` along the first axis and ``j`` along the second, and
flattened in C order (flat index ``i * N2 + j``).

Boundary nodes are listed counterclockwise starting at the lower-left corner:
bottom face left to right (both corners), right face bottom to top (no
corners), top face right to left (both corners), left face top to bottom (no
corners).  Corners therefore belong to the bottom or top face; their normal is
that face's normal, and their quadrature weight is ``(h1 + h2) / 2`` so that
the weights add up to the perimeter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

BOTTOM, RIGHT, TOP, LEFT = 0, 1, 2, 3
FACE_NORMALS = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True, eq=False)
class Domain2D:
    """Rectangle ``[x0, x0+L1] x [y0, y0+L2]`` with a uniform node grid."""

    L1: float
    L2: float
    N1: int
    N2: int
    w: float
    origin: tuple = (0.0, 0.0)

    # derived index structure, filled in __post_init__
    h1: float = field(init=False)
    h2: float = field(init=False)
    boundary: np.ndarray = field(init=False, repr=False)
    interior: np.ndarray = field(init=False, repr=False)
    interior_index: np.ndarray = field(init=False, repr=False)
    boundary_index: np.ndarray = field(init=False, repr=False)
    face: np.ndarray = field(init=False, repr=False)
    is_corner: np.ndarray = field(init=False, repr=False)
    normals: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    weighted_normals: np.ndarray = field(init=False, repr=False)
    collar: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)
        N1, N2 = self.N1, self.N2
        h1 = self.L1 / (N1 - 1)
        h2 = self.L2 / (N2 - 1)
        set_("h1", h1)
        set_("h2", h2)
        set_("origin", (float(self.origin[0]), float(self.origin[1])))

        ii, jj, faces = [], [], []
        for i in range(N1):
            ii.append(i); jj.append(0); faces.append(BOTTOM)
        for j in range(1, N2 - 1):
            ii.append(N1 - 1); jj.append(j); faces.append(RIGHT)
        for i in range(N1 - 1, -1, -1):
            ii.append(i); jj.append(N2 - 1); faces.append(TOP)
        for j in range(N2 - 2, 0, -1):
            ii.append(0); jj.append(j); faces.append(LEFT)
        ii = np.array(ii)
        jj = np.array(jj)
        boundary = ii * N2 + jj
        face = np.array(faces)
        corner = ((ii == 0) | (ii == N1 - 1)) & ((jj == 0) | (jj == N2 - 1))

        weights = np.where((face == BOTTOM) | (face == TOP), h1, h2).astype(float)
        weights[corner] = 0.5 * (h1 + h2)
        normals = FACE_NORMALS[face]
        # per-node flux weights: corners split between their two faces
        wn = normals * weights[:, None]
        for b in np.flatnonzero(corner):
            row = FACE_NORMALS[face[b]]
            col = FACE_NORMALS[LEFT if ii[b] == 0 else RIGHT]
            wn[b] = 0.5 * h1 * row + 0.5 * h2 * col

        mask = np.ones(N1 * N2, dtype=bool)
        mask[boundary] = False
        interior = np.flatnonzero(mask)
        interior_index = -np.ones(N1 * N2, dtype=np.int64)
        interior_index[interior] = np.arange(interior.size)
        boundary_index = -np.ones(N1 * N2, dtype=np.int64)
        boundary_index[boundary] = np.arange(boundary.size)

        X, Y = self.mesh()
        x0, y0 = self.origin
        dist = np.minimum.reduce([X - x0, x0 + self.L1 - X, Y - y0, y0 + self.L2 - Y])
        collar = dist < self.w

        for k, v in dict(boundary=boundary, interior=interior,
                         interior_index=interior_index, boundary_index=boundary_index,
                         face=face, is_corner=corner, normals=normals,
                         weights=weights, weighted_normals=wn, collar=collar).items():
            if isinstance(v, np.ndarray):
                v.setflags(write=False)
            set_(k, v)

    @property
    def shape(self):
        return (self.N1, self.N2)

    @property
    def size(self):
        return self.N1 * self.N2

    @property
    def n_interior(self):
        return self.interior.size

    @property
    def n_boundary(self):
        return self.boundary.size

    @property
    def h(self):
        return max(self.h1, self.h2)

    @property
    def cell_area(self):
        return self.h1 * self.h2

    @property
    def perimeter(self):
        return 2.0 * (self.L1 + self.L2)

    @property
    def center(self):
        return (self.origin[0] + 0.5 * self.L1, self.origin[1] + 0.5 * self.L2)

    def axes(self):
        x = self.origin[0] + self.h1 * np.arange(self.N1)
        y = self.origin[1] + self.h2 * np.arange(self.N2)
        return x, y

    def mesh(self):
        x, y = self.axes()
        return np.meshgrid(x, y, indexing="ij")

    def points(self):
        """Flat ``(N1*N2, 2)`` array of node coordinates."""
        X, Y = self.mesh()
        return np.column_stack([X.ravel(), Y.ravel()])

    def boundary_points(self):
        return self.points()[self.boundary]

    def interior_points(self):
        return self.points()[self.interior]

    def ij(self, flat):
        return np.divmod(np.asarray(flat), self.N2)

    def dist_to_boundary(self, x, y):
        x0, y0 = self.origin
        return np.minimum.reduce([x - x0, x0 + self.L1 - x, y - y0, y0 + self.L2 - y])

    def to_grid(self, interior_values, boundary_values=None):
        """Scatter interior (and optional boundary) vectors into a full grid."""
        interior_values = np.asarray(interior_values)
        out = np.zeros(self.size, dtype=np.result_type(interior_values, float))
        if boundary_values is not None:
            out = out.astype(np.result_type(out, np.asarray(boundary_values)))
            out[self.boundary] = boundary_values
        out[self.interior] = interior_values
        return out.reshape(self.shape)

    def l2_inner(self, u, v):
        """Discrete ``sum u conj(v) h1 h2`` over interior-node vectors."""
        return np.vdot(v, u) * self.cell_area


def build_domain(L1, L2, N1, N2, w, origin=(0.0, 0.0)) -> Domain2D:
    """Validate parameters and build a :class:`Domain2D`."""
    if not (np.isfinite(L1) and np.isfinite(L2)) or L1 <= 0 or L2 <= 0:
        raise ValueError(f"side lengths must be positive, got L1={L1}, L2={L2}")
    if int(N1) != N1 or int(N2) != N2:
        raise ValueError("grid counts must be integers")
    if N1 < 8 or N2 < 8:
        raise ValueError(f"grid too coarse: need N1, N2 >= 8, got {N1}x{N2}")
    if not (0 < w < 0.5 * min(L1, L2)):
        raise ValueError(f"collar width must satisfy 0 < w < min(L1, L2)/2, got w={w}")
    return Domain2D(float(L1), float(L2), int(N1), int(N2), float(w), tuple(origin))


def centered_domain(L1, L2, N1, N2, w) -> Domain2D:
    """Domain whose center sits at the coordinate origin."""
    return build_domain(L1, L2, N1, N2, w, origin=(-0.5 * L1, -0.5 * L2))


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal scalar values with an optional closed-form evaluator.

    ``sampler`` (if given) evaluates the underlying function off the grid;
    it exposes ``__call__(x, y)`` and ``gradient(x, y)``.
    """

    domain: Domain2D
    values: np.ndarray
    sampler: Optional[object] = None

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != self.domain.shape:
            raise ValueError(f"field shape {vals.shape} does not match grid {self.domain.shape}")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __add__(self, other):
        return ScalarField(self.domain, self.values + other.values,
                           _sum_sampler(self.sampler, other.sampler, 1.0))

    def __sub__(self, other):
        return ScalarField(self.domain, self.values - other.values,
                           _sum_sampler(self.sampler, other.sampler, -1.0))

    def sup(self):
        return float(np.max(np.abs(self.values)))

    def evaluate(self, x, y):
        if self.sampler is not None:
            return self.sampler(x, y)
        return _spline_eval(self.domain, self.values, x, y)


@dataclass(frozen=True, eq=False)
class VectorField2D:
    """Nodal real vector field ``(a1, a2)`` with an optional evaluator.

    The evaluator exposes ``__call__(x, y) -> (a1, a2)`` and
    ``jacobian(x, y) -> ((d1 a1, d2 a1), (d1 a2, d2 a2))``.
    """

    domain: Domain2D
    a1: np.ndarray
    a2: np.ndarray
    sampler: Optional[object] = None

    def __post_init__(self):
        for name in ("a1", "a2"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != self.domain.shape:
                raise ValueError(f"component {name} has shape {arr.shape}, grid is {self.domain.shape}")
            if np.iscomplexobj(arr):
                raise ValueError("vector potential must be real")
            arr = arr.astype(float, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __add__(self, other):
        return VectorField2D(self.domain, self.a1 + other.a1, self.a2 + other.a2,
                             _sum_sampler(self.sampler, other.sampler, 1.0))

    def __sub__(self, other):
        return VectorField2D(self.domain, self.a1 - other.a1, self.a2 - other.a2,
                             _sum_sampler(self.sampler, other.sampler, -1.0))

    def scaled(self, c):
        s = None if self.sampler is None else _ScaledSampler(self.sampler, c)
        return VectorField2D(self.domain, c * self.a1, c * self.a2, s)

    def sup(self):
        return float(np.max(np.hypot(self.a1, self.a2)))

    def evaluate(self, x, y):
        """Evaluate off-grid; falls back to cubic interpolation of samples."""
        if self.sampler is not None:
            return self.sampler(x, y)
        return (_spline_eval(self.domain, self.a1, x, y),
                _spline_eval(self.domain, self.a2, x, y))

    def jacobian(self, x, y):
        if self.sampler is not None:
            return self.sampler.jacobian(x, y)
        d = self.domain
        out = []
        for comp in (self.a1, self.a2):
            g1 = np.gradient(comp, d.h1, axis=0, edge_order=2)
            g2 = np.gradient(comp, d.h2, axis=1, edge_order=2)
            out.append((_spline_eval(d, g1, x, y), _spline_eval(d, g2, x, y)))
        return tuple(out)


def zero_vector(domain):
    z = np.zeros(domain.shape)
    from .presets import ZeroVector
    return VectorField2D(domain, z, z, ZeroVector())


def zero_scalar(domain):
    from .presets import ConstantScalar
    return ScalarField(domain, np.zeros(domain.shape), ConstantScalar(0.0))


def _spline_eval(domain, values, x, y):
    """Cubic-spline interpolation of nodal values; zero outside the grid."""
    from scipy.ndimage import map_coordinates

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ci = (x - domain.origin[0]) / domain.h1
    cj = (y - domain.origin[1]) / domain.h2
    coords = np.stack([ci.ravel(), cj.ravel()])
    vals = np.asarray(values)
    if np.iscomplexobj(vals):
        out = (map_coordinates(vals.real, coords, order=3, mode="constant")
               + 1j * map_coordinates(vals.imag, coords, order=3, mode="constant"))
    else:
        out = map_coordinates(vals, coords, order=3, mode="constant")
    return out.reshape(x.shape)


class _SumSampler:
    def __init__(self, a, b, sign):
        self.a, self.b, self.sign = a, b, sign

    def __call__(self, x, y):
        va, vb = self.a(x, y), self.b(x, y)
        if isinstance(va, tuple):
            return tuple(p + self.sign * q for p, q in zip(va, vb))
        return va + self.sign * vb

    def jacobian(self, x, y):
        ja, jb = self.a.jacobian(x, y), self.b.jacobian(x, y)
        return tuple(tuple(p + self.sign * q for p, q in zip(ra, rb)) for ra, rb in zip(ja, jb))

    def gradient(self, x, y):
        ga, gb = self.a.gradient(x, y), self.b.gradient(x, y)
        return tuple(p + self.sign * q for p, q in zip(ga, gb))

    @property
    def support(self):
        sa = getattr(self.a, "support", None)
        sb = getattr(self.b, "support", None)
        if sa is None or sb is None:
            return None
        return sa + sb


class _ScaledSampler:
    def __init__(self, s, c):
        self.s, self.c = s, c

    def __call__(self, x, y):
        v = self.s(x, y)
        return tuple(self.c * p for p in v) if isinstance(v, tuple) else self.c * v

    def jacobian(self, x, y):
        return tuple(tuple(self.c * p for p in row) for row in self.s.jacobian(x, y))

    @property
    def support(self):
        return getattr(self.s, "support", None)


def _sum_sampler(a, b, sign):
    if a is None or b is None:
        return None
    return _SumSampler(a, b, sign)


# ---------------------------------------------------------------------------
# boundary functions


@dataclass(frozen=True, eq=False)
class BoundaryFunction:
    """Complex values on the boundary nodes, in boundary order."""

    domain: Domain2D
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != (self.domain.n_boundary,):
            raise ValueError(f"expected {self.domain.n_boundary} boundary values, got {vals.shape}")
        vals = vals.astype(complex, copy=True)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def weights(self):
        return self.domain.weights

    def inner(self, other):
        """``sum w f conj(g)``."""
        g = other.values if isinstance(other, BoundaryFunction) else np.asarray(other)
        return complex(np.sum(self.domain.weights * self.values * np.conj(g)))

    def pair(self, other):
        """Un-conjugated ``sum w f g``."""
        g = other.values if isinstance(other, BoundaryFunction) else np.asarray(other)
        return complex(np.sum(self.domain.weights * self.values * g))

    def norm(self):
        return float(np.sqrt(np.sum(self.domain.weights * np.abs(self.values) ** 2)))

    def __sub__(self, other):
        return BoundaryFunction(self.domain, self.values - other.values)

    def __add__(self, other):
        return BoundaryFunction(self.domain, self.values + other.values)


def boundary_function(domain, func: Callable):
    """Sample ``func(x, y)`` at the boundary nodes."""
    pts = domain.boundary_points()
    return BoundaryFunction(domain, func(pts[:, 0], pts[:, 1]))


# ---------------------------------------------------------------------------
# differential operators


def curl(field: VectorField2D) -> ScalarField:
    """``d1 a2 - d2 a1`` with centered interior and one-sided edge stencils."""
    d = field.domain
    if field.a1.shape != d.shape:
        raise ValueError("field does not match its domain")
    da2 = np.gradient(field.a2, d.h1, axis=0, edge_order=2)
    da1 = np.gradient(field.a1, d.h2, axis=1, edge_order=2)
    return ScalarField(d, da2 - da1)


def gradient(p: ScalarField) -> VectorField2D:
    """Nodal gradient of a real scalar field (same stencils as :func:`curl`)."""
    d = p.domain
    vals = np.real(p.values)
    return VectorField2D(d, np.gradient(vals, d.h1, axis=0, edge_order=2),
                         np.gradient(vals, d.h2, axis=1, edge_order=2))


@dataclass(frozen=True)
class CollarReport:
    max_difference: float
    n_collar_nodes: int

    @property
    def passed(self):
        return self.max_difference == 0.0


def check_collar(A1: VectorField2D, A2: VectorField2D, domain: Domain2D) -> CollarReport:
    """Largest ``|A1 - A2|`` over collar nodes; passes only if exactly zero."""
    if A1.domain.shape != domain.shape or A2.domain.shape != domain.shape:
        raise ValueError("fields are not on the given domain")
    diff = np.hypot(A1.a1 - A2.a1, A1.a2 - A2.a2)[domain.collar]
    return CollarReport(float(diff.max()) if diff.size else 0.0, int(domain.collar.sum()))


def l2_norm_grid(domain, values, mask=None):
    """Trapezoid-free nodal L2 norm ``sqrt(sum |u|^2 h1 h2)`` over a mask."""
    v = np.abs(np.asarray(values)) ** 2
    if mask is not None:
        v = v[mask]
    return float(np.sqrt(np.sum(v) * domain.cell_area))


def trapezoid_weights(domain):
    """2D tensor trapezoid weights on the full node grid."""
    w1 = np.full(domain.N1, domain.h1)
    w1[[0, -1]] *= 0.5
    w2 = np.full(domain.N2, domain.h2)
    w2[[0, -1]] *= 0.5
    return np.outer(w1, w2)
