"""Closed-form coefficient families used by experiments and tests.

Every preset is described by a small dict such as::

    {"kind": "bump", "center": [0.1, 0.0], "radius": 0.3,
     "amplitude": 0.5, "direction": [1.0, 0.0]}

Vector kinds: ``zero``, ``bump`` (constant direction times a bump),
``swirl``, ``gradient`` (gradient of a scalar bump), ``rotation`` (windowed
``(-y, x)/2``) and ``sum`` (key ``terms``).  Scalar kinds: ``zero``,
``constant``, ``bump``, ``gaussian`` and ``sum``.

Samplers return exact values and derivatives so that ray integrals and
target integrals do not inherit interpolation error.
"""

from __future__ import annotations

import numpy as np

from .domain import Domain2D, ScalarField, VectorField2D


class RadialProfile:
    """Bump ``G(|x - c|^2 / R^2)`` supported in the closed disk of radius R.

    ``kind="smooth"`` uses ``exp(1 - 1/(1 - u))``; ``kind="power"`` uses
    ``(1 - u)^power`` which is only C^1 when ``1 < power < 2``.
    """

    def __init__(self, center, radius, kind="smooth", power=1.5):
        if radius <= 0:
            raise ValueError("bump radius must be positive")
        if kind not in ("smooth", "power"):
            raise ValueError(f"unknown bump profile {kind!r}")
        self.center = (float(center[0]), float(center[1]))
        self.radius = float(radius)
        self.kind = kind
        self.power = float(power)

    def _g(self, u, order):
        inside = u < 1.0
        v = np.where(inside, 1.0 - u, 1.0)
        if self.kind == "smooth":
            g = np.exp(1.0 - 1.0 / v)
            if order == 0:
                out = g
            elif order == 1:
                out = -g / v**2
            else:
                out = g * (1.0 / v**4 - 2.0 / v**3)
        else:
            p = self.power
            if order == 0:
                out = v**p
            elif order == 1:
                out = -p * v ** (p - 1)
            else:
                out = p * (p - 1) * v ** (p - 2)
        return np.where(inside, out, 0.0)

    def _offsets(self, x, y):
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        return dx, dy, (dx**2 + dy**2) / self.radius**2

    def value(self, x, y):
        return self._g(self._offsets(x, y)[2], 0)

    def gradient(self, x, y):
        dx, dy, u = self._offsets(x, y)
        k = 2.0 * self._g(u, 1) / self.radius**2
        return k * dx, k * dy

    def hessian(self, x, y):
        dx, dy, u = self._offsets(x, y)
        R2 = self.radius**2
        a = 2.0 * self._g(u, 1) / R2
        b = 4.0 * self._g(u, 2) / R2**2
        return (a + b * dx * dx, b * dx * dy), (b * dx * dy, a + b * dy * dy)

    @property
    def support(self):
        return [(self.center, self.radius)]


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, with its derivative."""
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, 1e-300, None)
    sc = np.clip(1.0 - t, 1e-300, None)
    f = np.where(t > 0, np.exp(-1.0 / tc), 0.0)
    g = np.where(t < 1, np.exp(-1.0 / sc), 0.0)
    s = f / (f + g)
    # f > 0 only once t exceeds about 1/745, so the divisions below are safe
    fp = np.divide(f, tc**2, out=np.zeros_like(f), where=f > 0)
    gp = np.divide(g, sc**2, out=np.zeros_like(g), where=g > 0)
    ds = (fp * g + f * gp) / (f + g) ** 2
    return s, ds


# ---------------------------------------------------------------------------
# vector samplers


class ZeroVector:
    support = []

    def __call__(self, x, y):
        z = np.zeros(np.shape(x))
        return z, z.copy()

    def jacobian(self, x, y):
        z = np.zeros(np.shape(x))
        return (z, z), (z, z)


class DirectedBump:
    """``A = beta(x) * alpha`` for a constant vector ``alpha``."""

    def __init__(self, profile, direction, amplitude):
        d = np.asarray(direction, dtype=float)
        self.profile = profile
        self.alpha = amplitude * d

    def __call__(self, x, y):
        b = self.profile.value(x, y)
        return self.alpha[0] * b, self.alpha[1] * b

    def jacobian(self, x, y):
        g1, g2 = self.profile.gradient(x, y)
        a1, a2 = self.alpha
        return (a1 * g1, a1 * g2), (a2 * g1, a2 * g2)

    @property
    def support(self):
        return self.profile.support


class SwirlBump:
    """``A = amplitude * beta(x) * (-(y - c2), x - c1) / R``."""

    def __init__(self, profile, amplitude):
        self.profile = profile
        self.amp = amplitude / profile.radius

    def __call__(self, x, y):
        b = self.profile.value(x, y)
        c1, c2 = self.profile.center
        return -self.amp * b * (y - c2), self.amp * b * (x - c1)

    def jacobian(self, x, y):
        b = self.profile.value(x, y)
        g1, g2 = self.profile.gradient(x, y)
        c1, c2 = self.profile.center
        dx, dy = x - c1, y - c2
        a = self.amp
        return (-a * g1 * dy, -a * (g2 * dy + b)), (a * (g1 * dx + b), a * g2 * dx)

    @property
    def support(self):
        return self.profile.support


class GradientBump:
    """``A = amplitude * grad beta`` (curl free)."""

    def __init__(self, profile, amplitude):
        self.profile = profile
        self.amp = amplitude

    def potential(self, x, y):
        return self.amp * self.profile.value(x, y)

    def __call__(self, x, y):
        g1, g2 = self.profile.gradient(x, y)
        return self.amp * g1, self.amp * g2

    def jacobian(self, x, y):
        (h11, h12), (h21, h22) = self.profile.hessian(x, y)
        a = self.amp
        return (a * h11, a * h12), (a * h21, a * h22)

    @property
    def support(self):
        return self.profile.support


class WindowedRotation:
    """``(-(y - c2), x - c1) / 2`` times a window equal to 1 inside ``r_in``."""

    def __init__(self, center, r_in, r_out):
        if not 0 < r_in < r_out:
            raise ValueError("rotation window needs 0 < r_in < r_out")
        self.center = (float(center[0]), float(center[1]))
        self.r_in, self.r_out = float(r_in), float(r_out)

    def window(self, x, y):
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        r = np.hypot(dx, dy)
        s, ds = _smooth_step((self.r_out - r) / (self.r_out - self.r_in))
        dr = -ds / (self.r_out - self.r_in)
        rs = np.where(r > 0, r, 1.0)
        return s, dr * dx / rs, dr * dy / rs, dx, dy

    def __call__(self, x, y):
        s, _, _, dx, dy = self.window(x, y)
        return -0.5 * s * dy, 0.5 * s * dx

    def jacobian(self, x, y):
        s, w1, w2, dx, dy = self.window(x, y)
        return (-0.5 * w1 * dy, -0.5 * (w2 * dy + s)), (0.5 * (w1 * dx + s), 0.5 * w2 * dx)

    @property
    def support(self):
        return [(self.center, self.r_out)]


class VectorSum:
    def __init__(self, terms):
        self.terms = list(terms)

    def __call__(self, x, y):
        a1 = np.zeros(np.shape(x))
        a2 = np.zeros(np.shape(x))
        for t in self.terms:
            p, q = t(x, y)
            a1 = a1 + p
            a2 = a2 + q
        return a1, a2

    def jacobian(self, x, y):
        acc = [[np.zeros(np.shape(x)) for _ in range(2)] for _ in range(2)]
        for t in self.terms:
            jac = t.jacobian(x, y)
            for r in range(2):
                for c in range(2):
                    acc[r][c] = acc[r][c] + jac[r][c]
        return tuple(tuple(row) for row in acc)

    @property
    def support(self):
        out = []
        for t in self.terms:
            s = getattr(t, "support", None)
            if s is None:
                return None
            out.extend(s)
        return out


# ---------------------------------------------------------------------------
# scalar samplers


class ConstantScalar:
    def __init__(self, value):
        self.value = float(value)

    def __call__(self, x, y):
        return np.full(np.shape(x), self.value)

    def gradient(self, x, y):
        z = np.zeros(np.shape(x))
        return z, z.copy()

    @property
    def support(self):
        return [] if self.value == 0.0 else None


class ScalarBump:
    def __init__(self, profile, amplitude):
        self.profile = profile
        self.amp = float(amplitude)

    def __call__(self, x, y):
        return self.amp * self.profile.value(x, y)

    def gradient(self, x, y):
        g1, g2 = self.profile.gradient(x, y)
        return self.amp * g1, self.amp * g2

    def hessian(self, x, y):
        (h11, h12), (h21, h22) = self.profile.hessian(x, y)
        a = self.amp
        return (a * h11, a * h12), (a * h21, a * h22)

    @property
    def support(self):
        return self.profile.support


class Gaussian:
    def __init__(self, center, sigma, amplitude):
        self.center = (float(center[0]), float(center[1]))
        self.sigma = float(sigma)
        self.amp = float(amplitude)

    def __call__(self, x, y):
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        return self.amp * np.exp(-(dx**2 + dy**2) / (2 * self.sigma**2))

    def gradient(self, x, y):
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        g = self(x, y) / self.sigma**2
        return -g * dx, -g * dy

    support = None


class ScalarSum:
    def __init__(self, terms):
        self.terms = list(terms)

    def __call__(self, x, y):
        out = np.zeros(np.shape(x))
        for t in self.terms:
            out = out + t(x, y)
        return out

    def gradient(self, x, y):
        g1 = np.zeros(np.shape(x))
        g2 = np.zeros(np.shape(x))
        for t in self.terms:
            p, q = t.gradient(x, y)
            g1, g2 = g1 + p, g2 + q
        return g1, g2

    @property
    def support(self):
        out = []
        for t in self.terms:
            s = getattr(t, "support", None)
            if s is None:
                return None
            out.extend(s)
        return out


# ---------------------------------------------------------------------------
# parsing

VECTOR_KINDS = ("zero", "bump", "swirl", "gradient", "rotation", "sum")
SCALAR_KINDS = ("zero", "constant", "bump", "gaussian", "sum")


def _profile(spec):
    return RadialProfile(spec.get("center", (0.0, 0.0)), spec["radius"],
                         spec.get("profile", "smooth"), spec.get("power", 1.5))


def _normalize(spec):
    if spec is None:
        return {"kind": "zero"}
    if isinstance(spec, str):
        return {"kind": spec}
    if isinstance(spec, (list, tuple)):
        return {"kind": "sum", "terms": list(spec)}
    if "kind" not in spec:
        raise ValueError(f"preset {spec!r} has no 'kind'")
    return spec


def vector_sampler(spec):
    spec = _normalize(spec)
    kind = spec["kind"]
    if kind == "zero":
        return ZeroVector()
    if kind == "bump":
        return DirectedBump(_profile(spec), spec.get("direction", (1.0, 0.0)),
                            spec.get("amplitude", 1.0))
    if kind == "swirl":
        return SwirlBump(_profile(spec), spec.get("amplitude", 1.0))
    if kind == "gradient":
        return GradientBump(_profile(spec), spec.get("amplitude", 1.0))
    if kind == "rotation":
        return WindowedRotation(spec.get("center", (0.0, 0.0)), spec["r_in"], spec["r_out"])
    if kind == "sum":
        return VectorSum(vector_sampler(t) for t in spec["terms"])
    raise ValueError(f"unknown vector preset {kind!r}; expected one of {VECTOR_KINDS}")


def scalar_sampler(spec):
    spec = _normalize(spec)
    kind = spec["kind"]
    if kind == "zero":
        return ConstantScalar(0.0)
    if kind == "constant":
        return ConstantScalar(spec["value"])
    if kind == "bump":
        return ScalarBump(_profile(spec), spec.get("amplitude", 1.0))
    if kind == "gaussian":
        return Gaussian(spec.get("center", (0.0, 0.0)), spec["sigma"], spec.get("amplitude", 1.0))
    if kind == "sum":
        return ScalarSum(scalar_sampler(t) for t in spec["terms"])
    raise ValueError(f"unknown scalar preset {kind!r}; expected one of {SCALAR_KINDS}")


def support_clear_of_collar(domain: Domain2D, support) -> bool:
    """True if every support disk stays outside the collar."""
    if support is None:
        return False
    for (c, r) in support:
        if r > float(domain.dist_to_boundary(c[0], c[1])) - domain.w:
            return False
    return True


def sample_vector(domain: Domain2D, spec, require_collar=False) -> VectorField2D:
    s = vector_sampler(spec)
    if require_collar and not support_clear_of_collar(domain, s.support):
        raise ValueError(f"vector preset {spec!r} reaches the collar (width {domain.w})")
    X, Y = domain.mesh()
    a1, a2 = s(X, Y)
    return VectorField2D(domain, a1, a2, s)


def sample_scalar(domain: Domain2D, spec) -> ScalarField:
    s = scalar_sampler(spec)
    X, Y = domain.mesh()
    return ScalarField(domain, s(X, Y), s)


def sample_preset(domain: Domain2D, preset, require_collar=False):
    """Sample a ``{"A": ..., "V": ...}`` preset (or ``"zero"``) on the grid.

    With ``require_collar`` the magnetic part must vanish on the collar;
    otherwise a ``ValueError`` is raised.
    """
    if preset is None or preset == "zero":
        preset = {"A": "zero", "V": "zero"}
    if not isinstance(preset, dict) or not set(preset) <= {"A", "V"}:
        raise ValueError(f"preset must be 'zero' or a dict with keys A and V, got {preset!r}")
    A = sample_vector(domain, preset.get("A"), require_collar)
    V = sample_scalar(domain, preset.get("V"))
    return A, V
