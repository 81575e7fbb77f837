"""Inhomogeneous Dirichlet problems, the DtN map and eigen-series formulas.

The Dirichlet datum ``f`` is imposed on the boundary nodes and moved to the
right-hand side: ``(H - lam) u_I = -H_IB f``.  One sparse LU factorization
per ``(operator, lam)`` is cached and reused for every datum.

The DtN map at a face node ``b`` with inner neighbour ``i`` and normal
spacing ``h_n`` is the second-order covariant formula

    Lf(b) = (f(b) - U(b->i) u(i)) / h_n + (h_n / 2) ((V(b) - lam) f(b) - T f(b))

where ``T`` is the covariant second difference along the face.  It follows
from a Taylor expansion of the transported solution combined with the
equation itself.  The first part equals :meth:`MagneticOperator.boundary_trace`
of ``u_I`` plus a purely local term in ``f``; this split is what makes the
spectral series below exact at the discrete level.  At a corner the value is
the weight-averaged flux of its two faces, each computed from boundary data
along the adjacent edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import BOTTOM, LEFT, RIGHT, TOP, BoundaryFunction, check_collar, l2_norm_grid
from .hamiltonian import BoundarySpectralData, MagneticOperator
from .tables import ConvergenceTable

RESIDUAL_TOL = 1e-10
SPECTRUM_GAP = 1e-8


class SpectrumError(ValueError):
    """Raised when the spectral parameter is too close to an eigenvalue."""


class ShiftedFactor:
    """LU factorization of ``H - lam`` with residual-checked solves."""

    def __init__(self, op: MagneticOperator, lam: complex):
        self.op = op
        self.lam = complex(lam)
        n = op.n
        self.matrix = (op.H - self.lam * sp.identity(n, dtype=complex, format="csr")).tocsc()
        self.lu = spla.splu(self.matrix)

    def solve(self, rhs, tol=RESIDUAL_TOL, max_refine=3):
        rhs = np.asarray(rhs, dtype=complex)
        nb = np.linalg.norm(rhs)
        if nb == 0:
            return np.zeros_like(rhs), 0.0
        x = self.lu.solve(rhs)
        res = np.linalg.norm(self.matrix @ x - rhs) / nb
        k = 0
        while res > tol and k < max_refine:
            x = x + self.lu.solve(rhs - self.matrix @ x)
            res = np.linalg.norm(self.matrix @ x - rhs) / nb
            k += 1
        if res > tol:
            raise RuntimeError(f"linear solve residual {res:.3e} exceeds {tol:.1e}")
        return x, float(res)


@lru_cache(maxsize=4)
def factorize(op: MagneticOperator, lam: complex) -> ShiftedFactor:
    check_off_spectrum(op, lam)
    return ShiftedFactor(op, lam)


def check_off_spectrum(op: MagneticOperator, lam: complex):
    """Refuse ``lam`` closer than ``1e-8`` to the discrete spectrum."""
    lam = complex(lam)
    if abs(lam.imag) > SPECTRUM_GAP:
        return
    if lam.real < float(np.min(np.real(op.V.values))) - SPECTRUM_GAP:
        return  # below the Gershgorin bound of the interior matrix
    try:
        w = spla.eigsh(op.H, k=1, sigma=lam.real, which="LM", return_eigenvectors=False,
                       v0=np.ones(op.n, dtype=complex))
    except RuntimeError:
        raise SpectrumError(f"lam={lam} is numerically an eigenvalue (factorization failed)")
    gap = float(np.min(np.abs(w - lam.real)))
    if gap <= SPECTRUM_GAP:
        raise SpectrumError(f"lam={lam} is within {gap:.2e} of the eigenvalue {w[0]!r}")


@dataclass(frozen=True, eq=False)
class DirichletSolution:
    op: MagneticOperator
    lam: complex
    f: BoundaryFunction
    u: np.ndarray  # interior values
    residual: float
    alphas: Optional[np.ndarray] = None

    def grid(self):
        return self.op.domain.to_grid(self.u, self.f.values)

    def norm(self):
        return l2_norm_grid(self.op.domain, self.u)


def _as_boundary(op, f):
    if isinstance(f, BoundaryFunction):
        return f
    return BoundaryFunction(op.domain, np.asarray(f))


def solve_dirichlet(op: MagneticOperator, lam, f) -> DirichletSolution:
    """Solve ``(H - lam) u = 0`` inside with ``u = f`` on the boundary."""
    f = _as_boundary(op, f)
    fac = factorize(op, complex(lam))
    u, res = fac.solve(-(op.H_IB @ f.values))
    return DirichletSolution(op, complex(lam), f, u, res)


def series_solution(spec: BoundarySpectralData, lam, f) -> DirichletSolution:
    """``u = sum_k alpha_k / (lam - lam_k) phi_k`` with ``alpha_k = <f, h_k>``."""
    f = f if isinstance(f, BoundaryFunction) else BoundaryFunction(spec.domain, f)
    alpha = spec.coefficients(f)
    u = spec.vectors @ (alpha / (lam - spec.eigenvalues))
    return DirichletSolution(None, complex(lam), f, u, float("nan"), alpha)


# ---------------------------------------------------------------------------
# DtN map


def _transporter(op, p, q):
    """Link transporter from node p to the adjacent node q (flat indices)."""
    N2 = op.domain.N2
    (ip, jp), (iq, jq) = divmod(int(p), N2), divmod(int(q), N2)
    if iq == ip + 1 and jq == jp:
        return op.U1[ip, jp]
    if iq == ip - 1 and jq == jp:
        return np.conj(op.U1[iq, jq])
    if jq == jp + 1 and iq == ip:
        return op.U2[ip, jp]
    if jq == jp - 1 and iq == ip:
        return np.conj(op.U2[iq, jq])
    raise ValueError("nodes are not adjacent")


@lru_cache(maxsize=32)
def _local_dtn_parts(op: MagneticOperator):
    """Sparse ``M0`` and vector ``c`` with local DtN part ``(M0 - lam diag(c)) f``."""
    d = op.domain
    N1, N2 = d.shape
    nb = d.n_boundary
    bidx = d.boundary_index
    ii, jj = d.ij(d.boundary)
    V = np.real(np.asarray(op.V.values)).ravel()
    rows, cols, vals = [], [], []
    c = np.zeros(nb)

    def add(r, node, v):
        rows.append(r)
        cols.append(int(bidx[node]))
        vals.append(v)

    steps = {BOTTOM: (0, 1), TOP: (0, -1), LEFT: (1, 0), RIGHT: (-1, 0)}
    for b in range(nb):
        node = int(d.boundary[b])
        i, j = int(ii[b]), int(jj[b])
        if not d.is_corner[b]:
            fc = int(d.face[b])
            hn = d.h2 if fc in (BOTTOM, TOP) else d.h1
            ht = d.h1 if fc in (BOTTOM, TOP) else d.h2
            tang = (1, 0) if fc in (BOTTOM, TOP) else (0, 1)
            add(b, node, 1.0 / hn + 0.5 * hn * (V[node] + 2.0 / ht**2))
            for s in (1, -1):
                nbr = (i + s * tang[0]) * N2 + (j + s * tang[1])
                add(b, nbr, -0.5 * hn / ht**2 * _transporter(op, node, nbr))
            c[b] = 0.5 * hn
            continue
        # corner: average the fluxes of the two faces meeting here
        row_face = BOTTOM if j == 0 else TOP
        col_face = LEFT if i == 0 else RIGHT
        total = d.h1 + d.h2
        for fc, weight in ((row_face, d.h1 / total), (col_face, d.h2 / total)):
            # outward derivative of this face, taken along the other edge
            di, dj = steps[fc]
            h = d.h2 if fc in (BOTTOM, TOP) else d.h1
            n1 = (i + di) * N2 + (j + dj)
            n2 = (i + 2 * di) * N2 + (j + 2 * dj)
            t1 = _transporter(op, node, n1)
            t2 = t1 * _transporter(op, n1, n2)
            # nu . D u = -(d . D u) with d the inward direction
            add(b, node, weight * 3.0 / (2 * h))
            add(b, n1, -weight * 4.0 * t1 / (2 * h))
            add(b, n2, weight * t2 / (2 * h))
    M0 = sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(nb, nb))
    M0.sum_duplicates()
    c.setflags(write=False)
    return M0, c


def local_dtn(op: MagneticOperator, lam, f) -> np.ndarray:
    """The part of the DtN map that only involves boundary data."""
    M0, c = _local_dtn_parts(op)
    fv = f.values if isinstance(f, BoundaryFunction) else np.asarray(f)
    return M0 @ fv - complex(lam) * c * fv


def dtn(op: MagneticOperator, lam, f, solution: Optional[DirichletSolution] = None) -> BoundaryFunction:
    """Magnetic DtN map ``f -> (d_nu + i A.nu) u`` on the boundary nodes."""
    f = _as_boundary(op, f)
    if solution is None:
        solution = solve_dirichlet(op, lam, f)
    vals = op.boundary_trace(solution.u).values + local_dtn(op, lam, f)
    return BoundaryFunction(op.domain, vals)


def dtn_series(spec: BoundarySpectralData, op: MagneticOperator, lam, f) -> BoundaryFunction:
    """DtN map from the eigen-expansion plus the local boundary part."""
    f = _as_boundary(op, f)
    alpha = spec.coefficients(f)
    vals = spec.traces @ (alpha / (lam - spec.eigenvalues)) + local_dtn(op, lam, f)
    return BoundaryFunction(op.domain, vals)


# ---------------------------------------------------------------------------
# lemma-level checks


def gradient_bound_check(op: MagneticOperator, lam, f, domain=None) -> float:
    """``|grad u|_{L2(away from collar)} / |u|_{L2(collar)}`` for real ``lam``.

    Requires ``lam < -|V|_inf - 6 |A|_inf^2``.
    """
    d = op.domain if domain is None else domain
    vmax, amax = op.potential_bounds()
    lam = complex(lam)
    if lam.imag != 0 or lam.real >= -vmax - 6 * amax**2:
        raise ValueError(f"gradient bound needs real lam < {-vmax - 6 * amax**2!r}, got {lam}")
    f = _as_boundary(op, f)
    if not np.any(f.values):
        return 0.0
    u = solve_dirichlet(op, lam, f).grid()
    g1 = np.gradient(u, d.h1, axis=0, edge_order=2)
    g2 = np.gradient(u, d.h2, axis=1, edge_order=2)
    inner = ~d.collar
    num = np.sqrt(l2_norm_grid(d, g1, inner) ** 2 + l2_norm_grid(d, g2, inner) ** 2)
    den = l2_norm_grid(d, u, d.collar)
    return float(num / den)


@dataclass(frozen=True)
class SeriesResult:
    values: BoundaryFunction
    tail_indicator: float


def v_normal_series(spec: BoundarySpectralData, lam, mu, f, K=None) -> SeriesResult:
    """``sum_k (mu - lam) alpha_k h_k / ((lam - lam_k)(mu - lam_k))`` over ``K`` terms."""
    K = spec.K if K is None else int(K)
    if not 1 <= K <= spec.K:
        raise ValueError(f"K must be in [1, {spec.K}]")
    lam, mu = complex(lam), complex(mu)
    ev = spec.eigenvalues[:K]
    if np.min(np.abs(ev - lam)) <= SPECTRUM_GAP or np.min(np.abs(ev - mu)) <= SPECTRUM_GAP:
        raise SpectrumError("lam or mu lies on the spectrum")
    alpha = spec.coefficients(f)[:K]
    coef = (mu - lam) * alpha / ((lam - ev) * (mu - ev))
    vals = spec.traces[:, :K] @ coef
    hK = BoundaryFunction(spec.domain, spec.traces[:, K - 1]).norm()
    tail = abs(mu - lam) * abs(alpha[-1]) * hK / (abs(lam - ev[-1]) * abs(mu - ev[-1]))
    return SeriesResult(BoundaryFunction(spec.domain, vals), float(tail))


def u_norm_decay(op: MagneticOperator, lams, f) -> ConvergenceTable:
    """``|u_lam|_{L2}`` along a decreasing ladder of real ``lam``."""
    table = ConvergenceTable(increasing=False, meta={"quantity": "|u_lam|_L2"})
    for lam in lams:
        table.add(lam, solve_dirichlet(op, lam, f).norm(), 0.0)
    return table


def z_mu(op1: MagneticOperator, op2: MagneticOperator, mu, f) -> np.ndarray:
    """Interior values of ``u_{1,mu} - u_{2,mu}``.

    Solved directly from ``(H1 - mu) z = (H2 - H1) u_2`` with ``z = 0`` on the
    boundary, which avoids the cancellation of subtracting two nearly equal
    solutions when ``|mu|`` is large.
    """
    u2 = solve_dirichlet(op2, mu, f).grid()
    src = op2.apply_full(u2) - op1.apply_full(u2)
    z, _ = factorize(op1, complex(mu)).solve(src)
    return z


def z_mu_decay(op1: MagneticOperator, op2: MagneticOperator, mus, f) -> ConvergenceTable:
    """``|d_nu z_mu|_{L2(boundary)}`` along a ladder of ``mu``."""
    report = check_collar(op1.A, op2.A, op1.domain)
    if not report.passed:
        raise ValueError(f"vector potentials differ on the collar by {report.max_difference:.3e}")
    f = _as_boundary(op1, f)
    table = ConvergenceTable(increasing=False, meta={"quantity": "|d_nu z_mu|_L2(boundary)"})
    for mu in mus:
        z = z_mu(op1, op2, mu, f)
        table.add(mu, op1.boundary_trace(z).norm(), 0.0)
    return table


# ---------------------------------------------------------------------------
# spectral functionals


@dataclass(frozen=True)
class GStarResult:
    value: complex  # truncated mu -> -infinity limit
    finite_mu: Optional[complex]  # G(lam, mu) for the supplied mu
    tail_indicator: float
    K: int


def _pairings(spec, K, phi1, phi2):
    w = spec.domain.weights
    t = spec.traces[:, :K]
    a = (w * phi1) @ np.conj(t)  # <Phi1, h_k>
    b = (w * phi2) @ t  # <h_k, conj(Phi2)>
    return a, b


def g_star(spec1: BoundarySpectralData, spec2: BoundarySpectralData, lam, phi1, phi2,
           K=None, mu=None) -> GStarResult:
    """Boundary-spectral-data expression for ``S1 - S2``.

    ``sum_k <Phi1,h1k><h1k,conj Phi2>/(lam - lam1k) - (same for 2)``, truncated
    at ``K`` terms.  With ``mu`` given, the finite-``mu`` functional
    ``G(lam, mu)`` (each term times ``(mu - lam)/(mu - lam_k)``) is returned too.
    The tail indicator is the largest deviation from the returned value of
    the partial sums cut at spectral gaps in ``[lam_K / 2, lam_K)``, where
    a cut at ``c`` keeps the eigenpairs of both operators below ``c``.
    Index cuts inside eigenvalue clusters jump wildly because the two
    spectra interleave; gap cuts do not.
    """
    p1 = phi1.values if isinstance(phi1, BoundaryFunction) else np.asarray(phi1)
    p2 = phi2.values if isinstance(phi2, BoundaryFunction) else np.asarray(phi2)
    K = min(spec1.K, spec2.K) if K is None else int(K)
    if K < 1 or K > spec1.K or K > spec2.K:
        raise ValueError(f"K={K} exceeds available eigenpairs ({spec1.K}, {spec2.K})")
    lam = complex(lam)
    terms = []
    fin = []
    for spec in (spec1, spec2):
        a, b = _pairings(spec, K, p1, p2)
        ev = spec.eigenvalues[:K]
        t = a * b / (lam - ev)
        terms.append(t)
        if mu is not None:
            fin.append(t * (mu - lam) / (mu - ev))
    value = complex(np.sum(terms[0]) - np.sum(terms[1]))
    finite = None if mu is None else complex(np.sum(fin[0]) - np.sum(fin[1]))
    if K == spec1.vectors.shape[0]:
        tail = 0.0  # complete eigenbasis: the identity is exact
    else:
        tail = _gap_cut_spread(spec1.eigenvalues[:K], spec2.eigenvalues[:K],
                               terms[0], terms[1], value)
    return GStarResult(value, finite, tail, K)


def _gap_cut_spread(e1, e2, t1, t2, value):
    top = min(e1[-1], e2[-1])
    ev = np.sort(np.concatenate([e1, e2]))
    mids = 0.5 * (ev[1:] + ev[:-1])
    # a cut must sit in a real gap: a quarter of the mean level spacing
    gap = np.diff(ev) > 0.125 * abs(top) / e1.size
    cuts = mids[gap & (mids < top) & (mids >= 0.5 * top)]
    if cuts.size == 0:
        return float("inf") if e1.size < 2 else 0.0
    c1 = np.concatenate([[0], np.cumsum(t1)])
    c2 = np.concatenate([[0], np.cumsum(t2)])
    part = c1[np.searchsorted(e1, cuts)] - c2[np.searchsorted(e2, cuts)]
    return float(np.max(np.abs(part - value)))


def parseval_norm(spec: BoundarySpectralData, lam, f) -> float:
    """``sqrt(sum |alpha_k|^2 / |lam - lam_k|^2)``, the series form of ``|u_lam|``."""
    alpha = spec.coefficients(f)
    return float(np.sqrt(np.sum(np.abs(alpha / (lam - spec.eigenvalues)) ** 2)))


def resolvent_bound_sum(spec: BoundarySpectralData, lam, phi1, K=None) -> float:
    """``sum_k |<Phi1, h_k> / (lam_k - lam)|^2`` over ``K`` terms."""
    K = spec.K if K is None else K
    p1 = phi1.values if isinstance(phi1, BoundaryFunction) else np.asarray(phi1)
    a = (spec.domain.weights * p1) @ np.conj(spec.traces[:, :K])
    return float(np.sum(np.abs(a / (spec.eigenvalues[:K] - lam)) ** 2))
