"""Exponentially growing/decaying test functions built along an Isozaki frame.

For a frequency ``xi`` and a scale ``tau > |xi|`` the frame fixes unit
vectors ``eta1, eta2`` with ``sqrt(lam) (eta1 - eta2) -> -xi`` where
``lam = (tau + i)^2``.  The two test functions are

    Phi1 = exp(i sqrt(lam) eta1.x) exp(i psi1),
    Phi2 = exp(-i sqrt(lam) eta2.x) b2 exp(-i psi2),

with phases ``psi_j`` solving transport equations along ``eta_j`` for
mollified potentials, and an amplitude ``b2`` that is constant along
``eta2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage
from scipy.signal import fftconvolve

from .domain import BoundaryFunction, Domain2D, VectorField2D
from .presets import _smooth_step

CHUNK = 2_000_000


# ---------------------------------------------------------------------------
# frame


@dataclass(frozen=True)
class IsozakiFrame:
    xi: np.ndarray
    tau: float
    orientation: int
    abs_xi: float
    eta: np.ndarray
    y: np.ndarray
    B: float
    eta1: np.ndarray
    eta2: np.ndarray
    lam: complex
    sqrt_lam: complex
    omega: np.ndarray
    delta: float

    def as_dict(self):
        return {"xi": self.xi.tolist(), "tau": self.tau, "orientation": self.orientation,
                "eta": self.eta.tolist(), "y": self.y.tolist(), "B": self.B,
                "eta1": self.eta1.tolist(), "eta2": self.eta2.tolist(),
                "lam": [self.lam.real, self.lam.imag], "delta": self.delta}


def isozaki_params(xi, tau, orientation=1) -> IsozakiFrame:
    """Frame parameters for frequency ``xi`` and scale ``tau``.

    ``eta = orientation * (xi2, -xi1) / |xi|`` and ``y = xi / |xi|``.
    """
    xi = np.asarray(xi, dtype=float)
    r = float(np.hypot(xi[0], xi[1]))
    if r == 0:
        raise ValueError("frame frequency must be nonzero")
    tau = float(tau)
    if tau <= r:
        raise ValueError(f"need tau > |xi| = {r!r}, got tau={tau!r}")
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    eta = orientation * np.array([xi[1], -xi[0]]) / r
    y = xi / r
    B = float(np.sqrt(1.0 - r**2 / (4 * tau**2)))
    eta1 = B * eta - xi / (2 * tau)
    eta2 = B * eta + xi / (2 * tau)
    lam = complex(tau, 1.0) ** 2
    omega = B * xi - r**2 * eta / (2 * tau)
    return IsozakiFrame(xi, tau, orientation, r, eta, y, B, eta1, eta2, lam,
                        complex(tau, 1.0), omega, tau ** (-1.0 / 3.0))


# ---------------------------------------------------------------------------
# extension and mollification


@dataclass(frozen=True, eq=False)
class GridVectorSampler:
    """Cubic-spline evaluation of a vector field tabulated on a regular grid."""

    x0: float
    y0: float
    hx: float
    hy: float
    a1: np.ndarray
    a2: np.ndarray
    jac: tuple  # ((d1 a1, d2 a1), (d1 a2, d2 a2)) as arrays
    bbox: Optional[tuple] = None
    _coef: dict = field(default_factory=dict, repr=False)

    def _c(self, key, arr):
        if key not in self._coef:
            self._coef[key] = ndimage.spline_filter(arr, order=3, mode="mirror")
        return self._coef[key]

    def _eval(self, key, arr, x, y):
        x = np.asarray(x, dtype=float)
        coords = np.stack([((x - self.x0) / self.hx).ravel(),
                           ((np.asarray(y, dtype=float) - self.y0) / self.hy).ravel()])
        out = ndimage.map_coordinates(self._c(key, arr), coords, order=3,
                                      mode="constant", cval=0.0, prefilter=False)
        return out.reshape(x.shape)

    def __call__(self, x, y):
        return self._eval("a1", self.a1, x, y), self._eval("a2", self.a2, x, y)

    def jacobian(self, x, y):
        (j11, j12), (j21, j22) = self.jac
        return ((self._eval("j11", j11, x, y), self._eval("j12", j12, x, y)),
                (self._eval("j21", j21, x, y), self._eval("j22", j22, x, y)))

    def axes(self):
        n1, n2 = self.a1.shape
        return self.x0 + self.hx * np.arange(n1), self.y0 + self.hy * np.arange(n2)

    def __sub__(self, other):
        if (self.a1.shape != other.a1.shape or self.x0 != other.x0 or self.y0 != other.y0
                or self.hx != other.hx or self.hy != other.hy):
            raise ValueError("grid samplers live on different grids")
        jac = tuple(tuple(p - q for p, q in zip(r1, r2)) for r1, r2 in zip(self.jac, other.jac))
        return GridVectorSampler(self.x0, self.y0, self.hx, self.hy, self.a1 - other.a1,
                                 self.a2 - other.a2, jac, _bbox_union(self.bbox, other.bbox))


def _bbox_union(a, b):
    if a is None or b is None:
        return None
    if len(a) == 0:
        return b
    if len(b) == 0:
        return a
    return (min(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), max(a[3], b[3]))


def support_bbox(sampler):
    """Bounding box ``(xmin, xmax, ymin, ymax)`` of a sampler's support, or None."""
    bb = getattr(sampler, "bbox", None)
    if bb is not None:
        return bb
    sup = getattr(sampler, "support", None)
    if sup is None:
        return None
    if len(sup) == 0:
        return ()
    xs0 = min(c[0] - r for c, r in sup)
    xs1 = max(c[0] + r for c, r in sup)
    ys0 = min(c[1] - r for c, r in sup)
    ys1 = max(c[1] + r for c, r in sup)
    return (xs0, xs1, ys0, ys1)


@dataclass(frozen=True, eq=False)
class ExtendedPotential:
    """Samples of a compactly supported extension of ``A`` on an enlarged grid."""

    domain: Domain2D
    x0: float
    y0: float
    a1: np.ndarray
    a2: np.ndarray
    margin: float
    method: str

    @property
    def hx(self):
        return self.domain.h1

    @property
    def hy(self):
        return self.domain.h2


def _reflect_axis(arr, m, width_nodes, axis):
    """C^1 extension ``3 f(-t) - 2 f(-2t)`` times a smooth cutoff, m ghost nodes."""
    arr = np.moveaxis(arr, axis, 0)
    n = arr.shape[0]
    out = np.zeros((n + 2 * m,) + arr.shape[1:])
    out[m:m + n] = arr
    for k in range(1, m + 1):
        if k >= width_nodes or 2 * k > n - 1:
            break
        cut = 1.0 - _smooth_step(k / width_nodes)[0]
        out[m - k] = cut * (3 * arr[k] - 2 * arr[2 * k])
        out[m + n - 1 + k] = cut * (3 * arr[n - 1 - k] - 2 * arr[n - 1 - 2 * k])
    return np.moveaxis(out, 0, axis)


def extend_potential(A: VectorField2D, margin: float) -> ExtendedPotential:
    """Extend ``A`` to the box dilated by ``margin`` on each side.

    Potentials with a closed form supported inside the domain are sampled
    directly (they vanish outside).  Otherwise the nodal values are extended
    by the C^1 reflection ``3 A(-t) - 2 A(-2t)`` across each face, damped
    by a smooth cutoff over half the collar width, so the extension only
    reads collar values: two potentials that agree on the collar get the
    same extension.
    """
    d = A.domain
    m1 = int(np.ceil(margin / d.h1))
    m2 = int(np.ceil(margin / d.h2))
    x0 = d.origin[0] - m1 * d.h1
    y0 = d.origin[1] - m2 * d.h2
    sampler = A.sampler
    sup = getattr(sampler, "support", None) if sampler is not None else None
    inside = sup is not None and all(
        r <= float(d.dist_to_boundary(c[0], c[1])) for c, r in sup)
    if inside:
        xs = x0 + d.h1 * np.arange(d.N1 + 2 * m1)
        ys = y0 + d.h2 * np.arange(d.N2 + 2 * m2)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        a1, a2 = sampler(X, Y)
        method = "closed-form"
    else:
        comps = []
        for a in (A.a1, A.a2):
            e = _reflect_axis(a, m1, 0.5 * d.w / d.h1, 0)
            e = _reflect_axis(e, m2, 0.5 * d.w / d.h2, 1)
            comps.append(e)
        a1, a2 = comps
        method = "reflection"
    return ExtendedPotential(d, x0, y0, np.asarray(a1, float), np.asarray(a2, float),
                             float(margin), method)


@dataclass(frozen=True, eq=False)
class MollifiedPotential:
    """Mollified extension on the enlarged box, usable as a field sampler."""

    sampler: GridVectorSampler
    delta: float
    extension: ExtendedPotential
    sup_distance: float  # max |A_sharp - A_ext| over the box
    sup_first: float  # max |first differences| / h
    sup_second: float  # max |second differences| / h^2

    def __call__(self, x, y):
        return self.sampler(x, y)

    def jacobian(self, x, y):
        return self.sampler.jacobian(x, y)

    @property
    def bbox(self):
        return self.sampler.bbox

    @property
    def values(self):
        return self.sampler.a1, self.sampler.a2

    def __sub__(self, other):
        return self.sampler - other.sampler


def mollifier_kernel(delta, hx, hy):
    """Normalized samples of ``(1 - |x/delta|^2)^4`` and of its gradient."""
    m1 = int(np.floor(delta / hx))
    m2 = int(np.floor(delta / hy))
    X, Y = np.meshgrid(hx * np.arange(-m1, m1 + 1), hy * np.arange(-m2, m2 + 1), indexing="ij")
    u = 1.0 - (X**2 + Y**2) / delta**2
    pos = u > 0
    K = np.where(pos, u, 0.0) ** 4
    norm = K.sum() * hx * hy
    dK = np.where(pos, u, 0.0) ** 3 * (-8.0 / delta**2)
    return K / norm, dK * X / norm, dK * Y / norm


def mollify(ext: ExtendedPotential, delta: float) -> MollifiedPotential:
    """Convolve the extension with the normalized polynomial mollifier.

    Derivatives of the result are obtained by convolving with the
    analytic kernel gradient, so they are as accurate as the values.
    """
    hx, hy = ext.hx, ext.hy
    if delta <= 2 * max(hx, hy):
        raise ValueError(f"mollifier scale {delta!r} not resolved by spacing {max(hx, hy)!r}")
    if ext.margin < delta:
        raise ValueError("extension margin smaller than the mollifier radius")
    K, K1, K2 = mollifier_kernel(delta, hx, hy)
    cell = hx * hy
    conv = lambda a, k: fftconvolve(a, k, mode="same") * cell

    n1, n2 = ext.a1.shape
    nz = (ext.a1 != 0) | (ext.a2 != 0)
    xs = ext.x0 + hx * np.arange(n1)
    ys = ext.y0 + hy * np.arange(n2)
    if nz.any():
        ix = np.flatnonzero(nz.any(axis=1))
        iy = np.flatnonzero(nz.any(axis=0))
        bbox = (xs[ix[0]] - delta, xs[ix[-1]] + delta, ys[iy[0]] - delta, ys[iy[-1]] + delta)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        keep = (X >= bbox[0]) & (X <= bbox[1]) & (Y >= bbox[2]) & (Y <= bbox[3])
    else:
        bbox = ()
        keep = np.zeros((n1, n2), dtype=bool)

    def clean(a):
        return np.where(keep, a, 0.0)

    a1 = clean(conv(ext.a1, K))
    a2 = clean(conv(ext.a2, K))
    jac = ((clean(conv(ext.a1, K1)), clean(conv(ext.a1, K2))),
           (clean(conv(ext.a2, K1)), clean(conv(ext.a2, K2))))
    samp = GridVectorSampler(ext.x0, ext.y0, hx, hy, a1, a2, jac, bbox)

    dist = float(max(np.max(np.abs(a1 - ext.a1)), np.max(np.abs(a2 - ext.a2))))
    first = max(float(np.max(np.abs(np.diff(a, axis=ax)))) / h
                for a in (a1, a2) for ax, h in ((0, hx), (1, hy)))
    second = max(float(np.max(np.abs(np.diff(a, n=2, axis=ax)))) / h**2
                 for a in (a1, a2) for ax, h in ((0, hx), (1, hy)))
    return MollifiedPotential(samp, float(delta), ext, dist, first, second)


# ---------------------------------------------------------------------------
# ray integrals


def _clip(pts, d, bbox, half):
    """Parameter interval of the ray ``p + s d`` inside ``bbox``."""
    m = pts.shape[0]
    lo = np.full(m, -np.inf)
    hi = np.full(m, np.inf)
    ok = np.ones(m, dtype=bool)
    for k, (b0, b1) in enumerate(((bbox[0], bbox[1]), (bbox[2], bbox[3]))):
        if d[k] != 0:
            t0 = (b0 - pts[:, k]) / d[k]
            t1 = (b1 - pts[:, k]) / d[k]
            lo = np.maximum(lo, np.minimum(t0, t1))
            hi = np.minimum(hi, np.maximum(t0, t1))
        else:
            ok &= (pts[:, k] >= b0) & (pts[:, k] <= b1)
    if half:
        hi = np.minimum(hi, 0.0)
    ok &= hi > lo
    return np.where(ok, lo, 0.0), np.where(ok, hi, 0.0), ok


def ray_integral(integrand, direction, pts, bbox, step, half=True):
    """``int g(x + s d) ds`` over ``s < 0`` (``half``) or all ``s``.

    ``integrand(x, y)`` returns real or complex values; the ray is clipped
    to ``bbox`` (outside of which the integrand vanishes) and integrated by
    composite Simpson with spacing at most ``step``.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    d = np.asarray(direction, dtype=float)
    out = np.zeros(pts.shape[0], dtype=complex)
    if bbox is None:
        raise ValueError("ray integrals need a compactly supported field")
    if len(bbox) == 0:
        return out
    lo, hi, ok = _clip(pts, d, bbox, half)
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return out
    n = int(np.ceil(np.max(hi[idx] - lo[idx]) / step))
    n += n % 2
    n = max(n, 2)
    t = np.linspace(0.0, 1.0, n + 1)
    wts = np.ones(n + 1)
    wts[1:-1:2] = 4.0
    wts[2:-1:2] = 2.0
    wts /= 3.0 * n
    chunk = max(1, CHUNK // (n + 1))
    for c0 in range(0, idx.size, chunk):
        sel = idx[c0:c0 + chunk]
        L = hi[sel] - lo[sel]
        s = lo[sel, None] + L[:, None] * t[None, :]
        xs = pts[sel, 0, None] + s * d[0]
        ys = pts[sel, 1, None] + s * d[1]
        vals = integrand(xs, ys)
        out[sel] = (vals @ wts) * L
    return out


def _dot_integrand(sampler, d):
    def g(x, y):
        a1, a2 = sampler(x, y)
        return d[0] * a1 + d[1] * a2
    return g


def _ydot_grad_integrand(sampler, d, y):
    def g(xx, yy):
        (j11, j12), (j21, j22) = sampler.jacobian(xx, yy)
        return d[0] * (j11 * y[0] + j12 * y[1]) + d[1] * (j21 * y[0] + j22 * y[1])
    return g


def default_step(h, delta=None):
    return h if delta is None else min(h, delta / 4.0)


def transport_phase(A_sharp, direction, x, step, bbox=None):
    """``psi(x) = -int_{-inf}^0 d . A_sharp(x + s d) ds`` (real)."""
    bbox = support_bbox(A_sharp) if bbox is None else bbox
    return -ray_integral(_dot_integrand(A_sharp, direction), direction, x, bbox, step).real


def limit_phase(A_diff, direction, x, step, bbox=None):
    """``psi(x) = +int_{-inf}^0 d . A(x + s d) ds`` for the unmollified difference."""
    bbox = support_bbox(A_diff) if bbox is None else bbox
    return ray_integral(_dot_integrand(A_diff, direction), direction, x, bbox, step).real


def _amplitude(field_sampler, d, y, w, x, step, bbox):
    """``(-i w.y - i int d.(y.grad)A ds) exp(-i int d.A ds)`` over full lines."""
    R = ray_integral(_dot_integrand(field_sampler, d), d, x, bbox, step, half=False).real
    Y = ray_integral(_ydot_grad_integrand(field_sampler, d, y), d, x, bbox, step, half=False).real
    return (-1j * float(np.dot(w, y)) - 1j * Y) * np.exp(-1j * R)


def amplitude_b2(frame: IsozakiFrame, A1s, A2s, x, step):
    """The amplitude ``b2`` at points ``x`` for the difference ``A2s - A1s``."""
    diff = A2s - A1s
    bbox = support_bbox(diff)
    return _amplitude(diff, frame.eta2, frame.y, frame.omega, np.atleast_2d(x), step, bbox)


def limit_amplitude(frame: IsozakiFrame, A_diff, x, step):
    """Limit amplitude ``b`` and phase ``psi`` for ``A_diff = A2 - A1`` (unmollified)."""
    x = np.atleast_2d(x)
    bbox = support_bbox(A_diff)
    b = _amplitude(A_diff, frame.eta, frame.y, frame.xi, x, step, bbox)
    psi = limit_phase(A_diff, frame.eta, x, step, bbox)
    return b, psi


# ---------------------------------------------------------------------------
# test functions


class Ansatz:
    """Evaluator for the pair ``Phi1, Phi2`` attached to a frame.

    ``mode="magnetic"`` uses the transported amplitude ``b2``;
    ``mode="electric"`` uses ``b2 = 1``.
    """

    def __init__(self, frame: IsozakiFrame, A1s, A2s, h, mode="magnetic", step=None):
        if mode not in ("magnetic", "electric"):
            raise ValueError(f"unknown ansatz mode {mode!r}")
        self.frame = frame
        self.A1s = A1s
        self.A2s = A2s
        self.mode = mode
        delta = getattr(A1s, "delta", None)
        self.step = default_step(h, delta) if step is None else step

    def psi1(self, x):
        return transport_phase(self.A1s, self.frame.eta1, np.atleast_2d(x), self.step)

    def psi2(self, x):
        return transport_phase(self.A2s, self.frame.eta2, np.atleast_2d(x), self.step)

    def b2(self, x):
        x = np.atleast_2d(x)
        if self.mode == "electric":
            return np.ones(x.shape[0], dtype=complex)
        return amplitude_b2(self.frame, self.A1s, self.A2s, x, self.step)

    def phi1(self, x, psi1=None):
        x = np.atleast_2d(x)
        psi1 = self.psi1(x) if psi1 is None else psi1
        return np.exp(1j * self.frame.sqrt_lam * (x @ self.frame.eta1)) * np.exp(1j * psi1)

    def phi2(self, x, psi2=None, b2=None):
        x = np.atleast_2d(x)
        psi2 = self.psi2(x) if psi2 is None else psi2
        b2 = self.b2(x) if b2 is None else b2
        return np.exp(-1j * self.frame.sqrt_lam * (x @ self.frame.eta2)) * b2 * np.exp(-1j * psi2)

    def grid_fields(self, domain: Domain2D):
        """``psi1, psi2, b2`` on the node grid with one ghost layer.

        Returns arrays of shape ``(N1 + 2, N2 + 2)``; index ``[1:-1, 1:-1]``
        is the node grid.
        """
        xs = domain.origin[0] + domain.h1 * np.arange(-1, domain.N1 + 1)
        ys = domain.origin[1] + domain.h2 * np.arange(-1, domain.N2 + 1)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        shape = X.shape
        return (self.psi1(pts).reshape(shape), self.psi2(pts).reshape(shape),
                self.b2(pts).reshape(shape), X, Y)


def evaluate_ansatz(ansatz: Ansatz, domain: Domain2D, which: int):
    """Boundary trace and interior values of ``Phi1`` (which=1) or ``Phi2`` (which=2)."""
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    fn = ansatz.phi1 if which == 1 else ansatz.phi2
    bvals = fn(domain.boundary_points())
    ivals = fn(domain.interior_points())
    return BoundaryFunction(domain, bvals), ivals


def mollified_pair(A1: VectorField2D, A2: VectorField2D, delta, margin=None):
    """Mollify both potentials on a common enlarged box (margin ``4 delta``)."""
    margin = 4 * delta if margin is None else margin
    e1 = extend_potential(A1, margin)
    e2 = extend_potential(A2, margin)
    return mollify(e1, delta), mollify(e2, delta)
