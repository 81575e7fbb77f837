"""Fourier-domain recovery of ``curl(A1 - A2)`` and ``V1 - V2``.

Each frequency ``xi`` of a square lattice receives one complex number,
either the exact limit value computed from known coefficients (``oracle``)
or the limit functional measured along a ``tau`` ladder (``spectral`` from
boundary spectral data, ``direct`` from DtN solves).  The magnetic limit is
``T(xi) = 2i|xi| F[eta.(A2 - A1)](xi)``, which is the same number as
``2 F[curl(A1 - A2)](xi)`` for ``eta = (xi2, -xi1)/|xi|``.  A direct
inverse Fourier sum over the lattice then gives the field.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ansatz import (_amplitude, _dot_integrand, isozaki_params, limit_phase, ray_integral,
                     support_bbox)
from .domain import Domain2D, ScalarField, VectorField2D, curl
from .gauge import compare_spectral_data, gauge_function, relative_l2
from .hamiltonian import BoundarySpectralData, MagneticOperator, assemble, eigensolve
from .representation import (RESOLUTION, electric_limit_target, field_sampler,
                             magnetic_limit_target, tau_sweep)

# ---------------------------------------------------------------------------
# ray-transform identity


def _simpson(n):
    if n < 3 or n % 2 == 0:
        raise ValueError("Simpson rule needs an odd number of points >= 3")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def ray_transform_identity(xi, A_diff, n=129, step=None):
    """Both sides of ``int eta.A e^{-i xi.x} b e^{i psi} dx = -i int [e^{iR} - 1] b e^{-i xi.x'} dx'``.

    ``A_diff`` is a compactly supported field (``VectorField2D`` or sampler),
    ``psi`` its half-line integral along ``eta``, ``R`` the full-line
    integral and ``b`` the limit amplitude, constant along ``eta``-lines.
    The left side is a tensor Simpson rule over the support box, the right
    side a Simpson rule over the lines crossing it.
    """
    sampler = field_sampler(A_diff) if isinstance(A_diff, VectorField2D) else A_diff
    bbox = support_bbox(sampler)
    if bbox is not None and len(bbox) == 0:
        return 0j, 0j
    if bbox is None:
        raise ValueError("ray-transform identity needs a compactly supported field")
    xi = np.asarray(xi, dtype=float)
    r = float(np.hypot(*xi))
    frame = isozaki_params(xi, 2 * r + 1)
    eta, y = frame.eta, frame.y
    x0, x1, y0, y1 = bbox
    step = min(x1 - x0, y1 - y0) / (n - 1) if step is None else step

    # volume side
    gx = np.linspace(x0, x1, n)
    gy = np.linspace(y0, y1, n)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    a1, a2 = sampler(pts[:, 0], pts[:, 1])
    ea = eta[0] * a1 + eta[1] * a2
    psi = limit_phase(sampler, eta, pts, step, bbox)
    b = _amplitude(sampler, eta, y, xi, pts, step, bbox)
    wv = np.outer(_simpson(n) * (x1 - x0) / (n - 1), _simpson(n) * (y1 - y0) / (n - 1)).ravel()
    lhs = complex(np.sum(wv * ea * np.exp(-1j * pts @ xi) * b * np.exp(1j * psi)))

    # line side: base points s*y on the line through 0 orthogonal to eta
    corners = np.array([[x0, y0], [x0, y1], [x1, y0], [x1, y1]])
    proj = corners @ y
    m = 2 * int(np.ceil((proj.max() - proj.min()) / step / 2)) + 1
    s = np.linspace(proj.min(), proj.max(), max(m, 3))
    base = s[:, None] * y[None, :]
    R = ray_integral(_dot_integrand(sampler, eta), eta, base, bbox, step, half=False).real
    bl = _amplitude(sampler, eta, y, xi, base, step, bbox)
    ws = _simpson(s.size) * (s[1] - s[0])
    rhs = complex(-1j * np.sum(ws * (np.exp(1j * R) - 1.0) * bl * np.exp(-1j * r * s)))
    return lhs, rhs


# ---------------------------------------------------------------------------
# Fourier lattice


@dataclass
class FourierGrid:
    """Lattice ``xi = 2 pi (m, n) / P`` for ``|m|, |n| <= half``.

    ``values[m + half, n + half]`` holds the recovered transform.  The slot
    ``xi = 0`` is never measured; it is filled from probes at ``|xi| = eps``.
    """

    period: float
    half: int
    values: np.ndarray = field(default=None, repr=False)
    raw: np.ndarray = field(default=None, repr=False)
    asymmetry: float = float("nan")

    def __post_init__(self):
        if self.half < 1:
            raise ValueError("lattice needs half >= 1")
        if self.period <= 0:
            raise ValueError("lattice period must be positive")
        n = 2 * self.half + 1
        if self.values is None:
            self.values = np.zeros((n, n), dtype=complex)

    @property
    def step(self):
        return 2 * np.pi / self.period

    @property
    def modes(self):
        return np.arange(-self.half, self.half + 1)

    def frequencies(self):
        """All nonzero lattice frequencies with their index pairs."""
        out = []
        for i, m in enumerate(self.modes):
            for j, n in enumerate(self.modes):
                if m == 0 and n == 0:
                    continue
                out.append(((i, j), self.step * np.array([m, n], dtype=float)))
        return out

    def symmetrize(self):
        """Enforce ``F(-xi) = conj F(xi)``; record the relative asymmetry first."""
        v = self.values
        mirror = np.conj(v[::-1, ::-1])
        scale = float(np.max(np.abs(v)))
        self.raw = v.copy()
        self.asymmetry = float(np.max(np.abs(v - mirror))) / scale if scale > 0 else 0.0
        self.values = 0.5 * (v + mirror)
        return self

    def inverse(self, domain: Domain2D):
        """``(1/P^2) sum_xi F(xi) exp(i xi.x)`` at the grid nodes (real part)."""
        k = self.step * self.modes
        x, y = domain.axes()
        E1 = np.exp(1j * np.outer(k, x))
        E2 = np.exp(1j * np.outer(k, y))
        f = E1.T @ self.values @ E2 / self.period**2
        return f.real, float(np.max(np.abs(f.imag)))


def fourier_grid(domain: Domain2D, half=8, period=None) -> FourierGrid:
    """Lattice whose period is the longer side of ``domain`` unless given."""
    P = max(domain.L1, domain.L2) if period is None else float(period)
    return FourierGrid(P, int(half))


# ---------------------------------------------------------------------------
# sources of per-frequency values


@dataclass
class RecoverySource:
    """Where per-frequency values come from.

    ``mode`` is ``oracle`` (exact limits from the coefficients), ``spectral``
    (``tau`` ladder evaluated from boundary spectral data) or ``direct``
    (``tau`` ladder evaluated from DtN solves).  With ``fit`` the ladder is
    extrapolated linearly in ``1/tau``; the last raw value is kept as well.
    """

    op1: MagneticOperator
    op2: MagneticOperator
    mode: str = "oracle"
    spec1: Optional[BoundarySpectralData] = None
    spec2: Optional[BoundarySpectralData] = None
    taus: Optional[list] = None
    K: Optional[int] = None
    fit: bool = True
    threads: int = 1
    probe: float = 0.1

    def __post_init__(self):
        if self.mode not in ("oracle", "spectral", "direct"):
            raise ValueError(f"unknown recovery mode {self.mode!r}")
        if self.mode == "spectral" and (self.spec1 is None or self.spec2 is None):
            raise ValueError("spectral recovery needs both spectral data sets")

    def ladder(self, xi):
        tmax = RESOLUTION / self.op1.domain.h
        taus = self.taus if self.taus is not None else [tmax / 4, tmax / 2, tmax]
        r = float(np.hypot(*xi))
        ok = [float(t) for t in taus if t > 1.2 * r]
        if not ok:
            raise ValueError(f"|xi| = {r:.3g} too large for the admissible tau ladder {taus}; "
                             "use a smaller lattice or a finer grid")
        return ok


@dataclass
class FrequencyValue:
    xi: tuple
    value: complex
    raw: complex
    fitted: Optional[complex] = None
    taus: tuple = ()
    tail: float = 0.0

    def as_dict(self):
        d = {"xi": list(self.xi), "value": [self.value.real, self.value.imag],
             "raw": [self.raw.real, self.raw.imag], "taus": list(self.taus), "tail": self.tail}
        if self.fitted is not None:
            d["fitted"] = [self.fitted.real, self.fitted.imag]
        return d


def _fit_inverse_tau(taus, vals):
    t = np.asarray(taus, dtype=float)
    if t.size < 2:
        return complex(vals[-1])
    M = np.column_stack([np.ones_like(t), 1.0 / t])
    coef, *_ = np.linalg.lstsq(M, np.asarray(vals, dtype=complex), rcond=None)
    return complex(coef[0])


def _measure(source: RecoverySource, xi, kind):
    xi = np.asarray(xi, dtype=float)
    op1, op2 = source.op1, source.op2
    if source.mode == "oracle":
        if kind == "curl":
            frame = isozaki_params(xi, 2 * float(np.hypot(*xi)) + 1)
            v = 0.5 * magnetic_limit_target(frame, op1.A, op2.A)
        else:
            v = electric_limit_target(xi, op1.V, op2.V, op1.A, op2.A)
        return FrequencyValue(tuple(xi.tolist()), v, v)
    taus = source.ladder(xi)
    mode = "magnetic" if kind == "curl" else "electric"
    route = "spectral" if source.mode == "spectral" else "direct"
    tab = tau_sweep(op1, op2, xi, taus, mode=mode, source=route, spec1=source.spec1,
                    spec2=source.spec2, K=source.K, target=0.0)
    meas = np.array(tab.measured)
    if kind == "curl":
        meas = 0.5 * meas
    raw = complex(meas[-1])
    fitted = _fit_inverse_tau(taus, meas) if len(taus) > 1 else None
    tail = 0.0
    if route == "spectral":
        tail = float(tab.meta["tail_indicator"][-1]) * (0.5 if kind == "curl" else 1.0)
    value = fitted if (source.fit and fitted is not None) else raw
    return FrequencyValue(tuple(xi.tolist()), value, raw, fitted, tuple(taus), tail)


@dataclass
class RecoveryReport:
    kind: str
    mode: str
    grid: FourierGrid
    estimate: ScalarField
    reference: ScalarField
    rel_l2_error: float
    imag_residual: float
    per_xi: list = field(repr=False, default_factory=list)

    @property
    def asymmetry(self):
        return self.grid.asymmetry

    def estimate_norm(self):
        d = self.estimate.domain
        return float(np.sqrt(np.sum(self.estimate.values**2) * d.cell_area))

    def as_dict(self):
        return {"kind": self.kind, "mode": self.mode, "period": self.grid.period,
                "half": self.grid.half, "rel_l2_error": self.rel_l2_error,
                "asymmetry": self.grid.asymmetry, "imag_residual": self.imag_residual,
                "estimate_l2": self.estimate_norm(),
                "per_xi": [v.as_dict() for v in self.per_xi]}


def _recover(source: RecoverySource, grid: FourierGrid, kind, reference):
    freqs = grid.frequencies()
    eps = source.probe * grid.step
    probes = [np.array(p) for p in ((eps, 0.0), (-eps, 0.0), (0.0, eps), (0.0, -eps))]
    jobs = [xi for _, xi in freqs] + probes
    job = lambda xi: _measure(source, xi, kind)
    if source.threads > 1:
        with ThreadPoolExecutor(max_workers=source.threads) as ex:
            res = list(ex.map(job, jobs))
    else:
        res = [job(xi) for xi in jobs]
    for ((i, j), _), r in zip(freqs, res):
        grid.values[i, j] = r.value
    c = grid.half
    # symmetric probes cancel the linear term of the expansion at xi = 0
    grid.values[c, c] = np.mean([r.value for r in res[len(freqs):]])
    grid.symmetrize()
    d = source.op1.domain
    f, imag = grid.inverse(d)
    est = ScalarField(d, f)
    err = relative_l2(d, f, reference)
    return RecoveryReport(kind, source.mode, grid, est, ScalarField(d, reference), err, imag,
                          res)


def recover_curl(source: RecoverySource, grid: FourierGrid) -> RecoveryReport:
    """Reconstruct ``curl(A1 - A2)`` on the grid of ``source.op1``."""
    ref = curl(source.op1.A - source.op2.A).values
    return _recover(source, grid, "curl", ref)


def recover_potential(source: RecoverySource, grid: FourierGrid) -> RecoveryReport:
    """Reconstruct ``V1 - V2``; the vector potentials must coincide."""
    A1, A2 = source.op1.A, source.op2.A
    if not (np.array_equal(A1.a1, A2.a1) and np.array_equal(A1.a2, A2.a2)):
        raise ValueError("potential recovery requires identical vector potentials")
    ref = np.real(np.asarray(source.op1.V.values) - np.asarray(source.op2.V.values))
    return _recover(source, grid, "potential", ref)


# ---------------------------------------------------------------------------
# end-to-end uniqueness sweep


@dataclass
class SweepConfig:
    half: int = 1
    period: Optional[float] = None
    taus: Optional[list] = None
    K: Optional[int] = None
    source: str = "spectral"
    fit: bool = True
    curl_tol: float = 5e-2
    potential_tol: float = 5e-2
    verify_gauge_data: bool = True
    threads: int = 1


@dataclass
class SweepStage:
    name: str
    passed: bool
    metrics: dict

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, **self.metrics}


@dataclass
class SweepReport:
    stages: list

    @property
    def passed(self):
        return all(s.passed for s in self.stages)

    def as_dict(self):
        return {"passed": self.passed, "stages": [s.as_dict() for s in self.stages]}


def _relative_size(domain, est, scale_fields):
    scale = sum(float(np.sqrt(np.sum(np.asarray(f) ** 2) * domain.cell_area)) for f in scale_fields)
    num = float(np.sqrt(np.sum(np.asarray(est) ** 2) * domain.cell_area))
    return num / scale if scale > 0 else num


def uniqueness_sweep(op1: MagneticOperator, op2: MagneticOperator,
                     spec1: BoundarySpectralData, spec2: BoundarySpectralData,
                     config: SweepConfig = SweepConfig()) -> SweepReport:
    """Run the uniqueness argument on a pair of operators.

    (i) compare boundary spectral data; (ii) recover ``curl(A1 - A2)`` from
    the ``tau`` limits and require it to be small; (iii) build the gauge
    function of ``A2 - A1`` and the operator ``(A1, V2)``, whose boundary
    spectral data are those of operator 2; (iv) recover ``V1 - V2`` from the
    pair ``(A1, V1)``, ``(A1, V2)`` and require it to be small.
    """
    from .domain import check_collar

    d = op1.domain
    collar = check_collar(op1.A, op2.A, d)
    if not collar.passed:
        raise ValueError(f"vector potentials differ on the collar (max {collar.max_difference:.3g})")
    stages = []

    cmp = compare_spectral_data(spec1, spec2)
    stages.append(SweepStage("spectral_data", True, cmp.as_dict()))

    grid = fourier_grid(d, config.half, config.period)
    src = RecoverySource(op1, op2, config.source, spec1, spec2, config.taus, config.K,
                         config.fit, config.threads)
    rc = recover_curl(src, grid)
    scale = [curl(op1.A).values, curl(op2.A).values]
    size = _relative_size(d, rc.estimate.values, scale)
    stages.append(SweepStage("curl", size <= config.curl_tol,
                             {"relative_curl": size, "asymmetry": rc.asymmetry,
                              "reference_rel_error": rc.rel_l2_error}))
    if size > config.curl_tol:
        return SweepReport(stages)

    gf = gauge_function(op2.A - op1.A)
    op3 = assemble(d, op1.A, op2.V)
    metrics = {"certificate": gf.certificate, "boundary_spread": gf.boundary_spread,
               "p_max": float(np.max(np.abs(gf.p.values)))}
    if config.verify_gauge_data:
        s3 = eigensolve(op3, spec2.K)
        c32 = compare_spectral_data(s3, spec2)
        metrics.update({"h3_vs_h2_rel_trace": c32.max_rel_trace_distance,
                        "h3_vs_h2_rel_eigen_gap": c32.max_rel_eigen_gap})
    stages.append(SweepStage("gauge", True, metrics))

    src3 = RecoverySource(op1, op3, config.source, spec1, spec2, config.taus, config.K,
                          config.fit, config.threads)
    rv = recover_potential(src3, fourier_grid(d, config.half, config.period))
    vsize = _relative_size(d, rv.estimate.values, [np.real(op1.V.values), np.real(op2.V.values)])
    stages.append(SweepStage("potential", vsize <= config.potential_tol,
                             {"relative_potential": vsize, "asymmetry": rv.asymmetry,
                              "reference_rel_error": rv.rel_l2_error}))
    return SweepReport(stages)
