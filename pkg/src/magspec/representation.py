"""Scattering functionals of the DtN maps and their volume representations.

``S_j = sum_b w_b (L_j Phi1)(b) Phi2(b)`` pairs the DtN map of operator
``j`` applied to ``Phi1`` with ``Phi2`` (no complex conjugation).  Green's
formula rewrites ``S_j`` as volume integrals over the coefficients, a
boundary flux and one resolvent term; :func:`identity_residual` evaluates all
of them independently and compares with the direct value.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ansatz import (Ansatz, GridVectorSampler, IsozakiFrame, isozaki_params,
                     limit_amplitude, mollified_pair)
from .domain import BoundaryFunction, Domain2D, ScalarField, VectorField2D, trapezoid_weights
from .hamiltonian import BoundarySpectralData, MagneticOperator
from .resolvent import dtn, factorize, g_star, local_dtn, resolvent_bound_sum, solve_dirichlet
from .tables import ConvergenceTable

RESOLUTION = 0.5


def check_resolution(domain: Domain2D, tau):
    """Refuse ``tau`` with ``tau * h > 0.5`` (fewer than ~12 nodes per wavelength)."""
    tmax = RESOLUTION / domain.h
    if tau > tmax * (1 + 1e-12):
        raise ValueError(f"tau={tau!r} too large for this grid: need tau*h <= {RESOLUTION}, "
                         f"admissible tau_max={tmax!r}")


def field_sampler(A: VectorField2D):
    """Closed-form sampler of ``A`` if known, else a spline sampler of the nodes."""
    if A.sampler is not None:
        return A.sampler
    d = A.domain
    jac = tuple((np.gradient(c, d.h1, axis=0, edge_order=2),
                 np.gradient(c, d.h2, axis=1, edge_order=2)) for c in (A.a1, A.a2))
    x0, y0 = d.origin
    bbox = (x0, x0 + d.L1, y0, y0 + d.L2)
    return GridVectorSampler(x0, y0, d.h1, d.h2, np.asarray(A.a1), np.asarray(A.a2), jac, bbox)


def difference_sampler(A2: VectorField2D, A1: VectorField2D):
    """Sampler of ``A2 - A1`` extended by zero outside the domain."""
    if A1.sampler is not None and A2.sampler is not None:
        return (A2 - A1).sampler
    return field_sampler(A2 - A1)


def build_ansatz(op1: MagneticOperator, op2: MagneticOperator, frame: IsozakiFrame,
                 mode="magnetic", margin=None) -> Ansatz:
    A1s, A2s = mollified_pair(op1.A, op2.A, frame.delta, margin)
    return Ansatz(frame, A1s, A2s, op1.domain.h, mode)


def boundary_traces(ansatz: Ansatz, domain: Domain2D):
    pts = domain.boundary_points()
    p1 = ansatz.phi1(pts)
    p2 = ansatz.phi2(pts)
    return BoundaryFunction(domain, p1), BoundaryFunction(domain, p2)


def scattering_pair(op1: MagneticOperator, op2: MagneticOperator, frame: IsozakiFrame,
                    ansatz: Ansatz = None, traces=None):
    """``(S1, S2)`` from direct DtN solves."""
    check_resolution(op1.domain, frame.tau)
    if traces is None:
        ansatz = build_ansatz(op1, op2, frame) if ansatz is None else ansatz
        traces = boundary_traces(ansatz, op1.domain)
    f, g = traces
    S1 = dtn(op1, frame.lam, f).pair(g)
    S2 = S1 if op2 is op1 else dtn(op2, frame.lam, f).pair(g)
    return S1, S2


# ---------------------------------------------------------------------------
# term-by-term representation


@dataclass
class RepresentationTerms:
    """Terms of the volume representation of ``S_j`` for ``j = 1, 2``."""

    terms: dict  # j -> {"volume_A", "volume_V", "boundary", "resolvent"}
    q: dict  # "q11", "q12", "q21", "q22" -> nodal complex arrays
    S: dict  # j -> direct value
    resolvent_bound: dict = field(default_factory=dict)
    frame: dict = field(default_factory=dict)

    def rhs(self, j):
        t = self.terms[j]
        return t["volume_A"] + t["volume_V"] + t["boundary"] + t["resolvent"]

    def abs_residual(self, j):
        return abs(self.S[j] - self.rhs(j))

    def rel_residual(self, j):
        return self.abs_residual(j) / abs(self.S[j])

    def as_dict(self):
        c = lambda z: [float(np.real(z)), float(np.imag(z))]
        out = {"frame": self.frame}
        for j in (1, 2):
            out[f"S{j}"] = {
                "direct": c(self.S[j]), "rhs": c(self.rhs(j)),
                "terms": {k: c(v) for k, v in self.terms[j].items()},
                "abs_residual": float(self.abs_residual(j)),
                "rel_residual": float(self.rel_residual(j)),
                "resolvent_bound": float(self.resolvent_bound[j]),
            }
        return out


def _grad_lap(F, h1, h2):
    """Centered gradient and 5-point Laplacian on the inner part of a ghosted array."""
    g1 = (F[2:, 1:-1] - F[:-2, 1:-1]) / (2 * h1)
    g2 = (F[1:-1, 2:] - F[1:-1, :-2]) / (2 * h2)
    lap = ((F[2:, 1:-1] - 2 * F[1:-1, 1:-1] + F[:-2, 1:-1]) / h1**2
           + (F[1:-1, 2:] - 2 * F[1:-1, 1:-1] + F[1:-1, :-2]) / h2**2)
    return g1, g2, lap


def identity_residual(op1: MagneticOperator, op2: MagneticOperator, frame: IsozakiFrame,
                    ansatz: Ansatz = None) -> RepresentationTerms:
    """Evaluate every term of the representation of ``S1`` and ``S2``."""
    d = op1.domain
    check_resolution(d, frame.tau)
    ansatz = build_ansatz(op1, op2, frame) if ansatz is None else ansatz
    psi1g, psi2g, b2g, Xg, Yg = ansatz.grid_fields(d)
    h1, h2 = d.h1, d.h2
    X, Y = Xg[1:-1, 1:-1], Yg[1:-1, 1:-1]
    psi1, psi2, b2 = psi1g[1:-1, 1:-1], psi2g[1:-1, 1:-1], b2g[1:-1, 1:-1]
    p1x, p1y, lap1 = _grad_lap(psi1g, h1, h2)
    p2x, p2y, lap2 = _grad_lap(psi2g, h1, h2)
    bx, by, lapb = _grad_lap(b2g, h1, h2)

    sl = frame.sqrt_lam
    e1, e2v = frame.eta1, frame.eta2
    dot1 = e1[0] * X + e1[1] * Y
    dot2 = e2v[0] * X + e2v[1] * Y
    Phi1 = np.exp(1j * sl * dot1 + 1j * psi1)
    Wb = np.exp(-1j * sl * dot2 - 1j * psi2)  # Phi2 / b2
    E = Phi1 * Wb
    A1s = ansatz.A1s(X, Y)
    A2s = ansatz.A2s(X, Y)
    tw = trapezoid_weights(d)
    wn = d.weighted_normals
    bsel = d.boundary
    I = d.interior

    terms, q, S, bound = {}, {}, {}, {}
    f = BoundaryFunction(d, Phi1.ravel()[bsel])
    g = BoundaryFunction(d, (Wb * b2).ravel()[bsel])
    for j, op in ((1, op1), (2, op2)):
        a1, a2 = op.A.a1, op.A.a2
        V = np.real(np.asarray(op.V.values))
        div = (np.gradient(a1, h1, axis=0, edge_order=2)
               + np.gradient(a2, h2, axis=1, edge_order=2))
        AA = a1**2 + a2**2
        qj1 = (-1j * div + AA + V + 2 * (a1 * p1x + a2 * p1y) - 1j * lap1
               + p1x**2 + p1y**2)
        qj2 = (lapb - 2j * (p2x * bx + p2y * by) - 2j * (bx * a1 + by * a2)
               + (-1j * lap2 - (p2x**2 + p2y**2) - 2 * (p2x * a1 + p2y * a2)
                  - 1j * div - AA) * b2)
        q[f"q{j}1"], q[f"q{j}2"] = qj1, qj2

        src = (2 * sl * (e1[0] * (a1 - A1s[0]) + e1[1] * (a2 - A1s[1])) + qj1) * Phi1
        wA = 2 * sl * (e2v[0] * (a1 - A2s[0]) + e2v[1] * (a2 - A2s[1])) * b2
        weight = (wA + V * b2 - qj2) * Wb

        vol_A = complex(np.sum(tw * wA * E))
        vol_V = complex(np.sum(tw * (V * b2 - qj2) * E))
        flux1 = sl * b2 * e2v[0] + b2 * p2x + 1j * bx + b2 * a1
        flux2 = sl * b2 * e2v[1] + b2 * p2y + 1j * by + b2 * a2
        fb = (flux1.ravel()[bsel] * wn[:, 0] + flux2.ravel()[bsel] * wn[:, 1])
        boundary = complex(-1j * np.sum(E.ravel()[bsel] * fb))
        r, _ = factorize(op, frame.lam).solve(src.ravel()[I])
        resolvent = complex(-np.sum(r * weight.ravel()[I]) * d.cell_area)
        terms[j] = {"volume_A": vol_A, "volume_V": vol_V, "boundary": boundary,
                    "resolvent": resolvent}
        nrm = lambda v: np.sqrt(np.sum(np.abs(v) ** 2) * d.cell_area)
        bound[j] = float(nrm(src.ravel()[I]) * nrm(weight.ravel()[I]) / abs(frame.lam.imag))
        S[j] = dtn(op, frame.lam, f).pair(g)
    return RepresentationTerms(terms, q, S, bound, frame.as_dict())


def dtn_two_route(op: MagneticOperator, frame: IsozakiFrame, ansatz: Ansatz):
    """Compare the DtN map of ``Phi1`` computed two ways.

    Route 1 solves the Dirichlet problem with datum ``Phi1``.  Route 2 writes
    the solution as ``Phi1 - R (H - lam) Phi1`` using the discrete residual of
    ``Phi1`` as source.  Returns the relative difference of the two boundary
    traces, plus the difference obtained when the residual is replaced by the
    closed-form source ``(2 sqrt(lam) eta1.(A - A1s) + q11) Phi1``, which only
    agrees up to discretization error.
    """
    d = op.domain
    pts = d.points()
    phi = ansatz.phi1(pts)
    f = BoundaryFunction(d, phi[d.boundary])
    direct = dtn(op, frame.lam, f).values
    fac = factorize(op, frame.lam)
    res = op.apply_full(phi) - frame.lam * phi[d.interior]
    u, _ = fac.solve(res)
    u = phi[d.interior] - u
    route2 = op.boundary_trace(u).values + local_dtn(op, frame.lam, f)
    rel = float(np.max(np.abs(direct - route2)) / np.max(np.abs(direct)))
    return rel


# ---------------------------------------------------------------------------
# limit targets


def _target_points(domain, mask):
    pts = domain.points()
    return pts[mask.ravel()], mask


def magnetic_limit_target(frame: IsozakiFrame, A1: VectorField2D, A2: VectorField2D,
                          step=None) -> complex:
    """``2 int eta.(A1 - A2) exp(-i xi.x) b exp(i psi) dx`` (tensor trapezoid).

    ``b`` and ``psi`` are the limit amplitude and phase of ``A2 - A1``.
    """
    d = A1.domain
    diff = difference_sampler(A2, A1)
    eta = frame.eta
    X, Y = d.mesh()
    ea = eta[0] * (A1.a1 - A2.a1) + eta[1] * (A1.a2 - A2.a2)
    mask = ea != 0
    if not mask.any():
        return 0j
    step = d.h if step is None else step
    pts = np.column_stack([X[mask], Y[mask]])
    b, psi = limit_amplitude(frame, diff, pts, step)
    tw = trapezoid_weights(d)[mask]
    phase = np.exp(-1j * (frame.xi[0] * pts[:, 0] + frame.xi[1] * pts[:, 1]))
    return complex(2 * np.sum(tw * ea[mask] * phase * b * np.exp(1j * psi)))


def electric_limit_target(xi, V1: ScalarField, V2: ScalarField, A1=None, A2=None) -> complex:
    """``int (V1 - V2) exp(-i xi.x) dx`` by the tensor trapezoid rule."""
    if A1 is not None and A2 is not None:
        if not (np.array_equal(A1.a1, A2.a1) and np.array_equal(A1.a2, A2.a2)):
            raise ValueError("electric target requires identical vector potentials")
    d = V1.domain
    X, Y = d.mesh()
    xi = np.asarray(xi, dtype=float)
    dv = np.real(np.asarray(V1.values) - np.asarray(V2.values))
    return complex(np.sum(trapezoid_weights(d) * dv * np.exp(-1j * (xi[0] * X + xi[1] * Y))))


# ---------------------------------------------------------------------------
# tau sweeps


@dataclass
class SweepRow:
    tau: float
    measured: complex
    gstar_tail: float = float("nan")
    bound_sum: float = float("nan")
    boundary_local: complex = 0j


def _frame_row(op1, op2, spec1, spec2, xi, tau, mode, source, K, orientation, margin):
    frame = isozaki_params(xi, tau, orientation)
    ansatz = build_ansatz(op1, op2, frame, mode, margin)
    f, g = boundary_traces(ansatz, op1.domain)
    norm = frame.sqrt_lam if mode == "magnetic" else 1.0
    if source == "direct":
        S1, S2 = scattering_pair(op1, op2, frame, traces=(f, g))
        return SweepRow(tau, (S1 - S2) / norm)
    gs = g_star(spec1, spec2, frame.lam, f, g, K)
    # local boundary parts of the two DtN maps differ only where V differs on the boundary
    loc = complex(np.sum(op1.domain.weights * (local_dtn(op1, frame.lam, f)
                                               - local_dtn(op2, frame.lam, f)) * g.values))
    bsum = max(resolvent_bound_sum(spec1, frame.lam, f, K), resolvent_bound_sum(spec2, frame.lam, f, K))
    return SweepRow(tau, (gs.value + loc) / norm, gs.tail_indicator / abs(norm), bsum, loc / norm)


def tau_sweep(op1: MagneticOperator, op2: MagneticOperator, xi, taus, mode="magnetic",
              source="direct", spec1: BoundarySpectralData = None,
              spec2: BoundarySpectralData = None, K=None, orientation=1, threads=1,
              margin=None, target=None) -> ConvergenceTable:
    """Measured limit functional along a ladder of ``tau``.

    ``mode="magnetic"`` reports ``(S1 - S2)/sqrt(lam)`` against the magnetic
    target; ``mode="electric"`` reports ``S1 - S2`` (with ``b2 = 1``) against
    the Fourier transform of ``V1 - V2``.  ``source`` selects direct DtN
    solves or the boundary-spectral-data series.
    """
    if mode not in ("magnetic", "electric"):
        raise ValueError(f"unknown mode {mode!r}")
    if source not in ("direct", "spectral"):
        raise ValueError(f"unknown source {source!r}")
    taus = [float(t) for t in taus]
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("tau ladder must be strictly increasing")
    for t in taus:
        check_resolution(op1.domain, t)
    if source == "spectral" and (spec1 is None or spec2 is None):
        raise ValueError("spectral source needs both spectral data sets")
    margin = 4 * taus[0] ** (-1.0 / 3.0) if margin is None else margin

    frame0 = isozaki_params(xi, taus[0], orientation)
    if target is None:
        if mode == "magnetic":
            target = magnetic_limit_target(frame0, op1.A, op2.A)
        else:
            target = electric_limit_target(xi, op1.V, op2.V, op1.A, op2.A)

    job = lambda t: _frame_row(op1, op2, spec1, spec2, xi, t, mode, source, K, orientation, margin)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(job, taus))
    else:
        rows = [job(t) for t in taus]

    table = ConvergenceTable(meta={"xi": list(map(float, xi)), "eta": frame0.eta.tolist(),
                                   "y": frame0.y.tolist(), "mode": mode, "source": source,
                                   "tau_max_admissible": RESOLUTION / op1.domain.h})
    for r in rows:
        table.add(r.tau, r.measured, target)
    if source == "spectral":
        table.meta["tail_indicator"] = [r.gstar_tail for r in rows]
        table.meta["bound_sum"] = [r.bound_sum for r in rows]
        table.meta["boundary_local"] = [[r.boundary_local.real, r.boundary_local.imag] for r in rows]
    return table
