"""Gauge functions, gauge transformations and gauge-obstruction checks.

A gauge transformation ``A -> A + grad p`` with ``p = 0`` near the
boundary leaves the magnetic field, the Dirichlet spectrum and the boundary
traces of eigenfunctions unchanged.  The helpers below build ``p`` from a
curl-free difference, apply transformations and compare boundary spectral
data with eigenvalue clusters handled as subspaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import ScalarField, VectorField2D, curl, l2_norm_grid
from .hamiltonian import BoundarySpectralData, MagneticOperator, assemble, eigensolve

GL_NODES = 256


@dataclass(frozen=True, eq=False)
class GaugeFunction:
    p: ScalarField
    grad: VectorField2D
    boundary_trace: np.ndarray
    certificate: float  # max |grad_h p - A| over the grid
    boundary_spread: float  # max - min of p on the boundary before normalization


class GradientOf:
    """Vector sampler ``grad p`` of a scalar sampler with ``gradient``/``hessian``."""

    def __init__(self, scalar):
        self.scalar = scalar

    def __call__(self, x, y):
        return self.scalar.gradient(x, y)

    def jacobian(self, x, y):
        return self.scalar.hessian(x, y)

    @property
    def support(self):
        return getattr(self.scalar, "support", None)


def _curl_ratio(A: VectorField2D):
    """``max |curl A| / max |dA|`` from exact derivatives when available."""
    d = A.domain
    if A.sampler is not None and hasattr(A.sampler, "jacobian"):
        X, Y = d.mesh()
        (_, d2a1), (d1a2, _) = A.sampler.jacobian(X, Y)
        c = np.abs(d1a2 - d2a1)
        scale = float(max(np.max(np.abs(d1a2)), np.max(np.abs(d2a1))))
    else:
        c = np.abs(curl(A).values)
        scale = 0.0
        for comp, h, ax in ((A.a2, d.h1, 0), (A.a1, d.h2, 1)):
            scale = max(scale, float(np.max(np.abs(np.gradient(comp, h, axis=ax, edge_order=2)))))
    return float(c.max()) / scale if scale > 0 else 0.0


def gauge_function(A_diff: VectorField2D, curl_tol=1e-2, nodes=GL_NODES) -> GaugeFunction:
    """``p(x) = int_0^1 (x - c).A(c + t (x - c)) dt`` about the domain center ``c``.

    The constant is fixed by making the boundary mean of ``p`` zero; for a
    compactly supported closed form ``p`` is then zero near the boundary.
    Refuses fields whose curl exceeds ``curl_tol`` times the size of their
    first derivatives (exact derivatives for closed forms, centered
    differences otherwise).
    """
    ratio = _curl_ratio(A_diff)
    if ratio > curl_tol:
        raise ValueError(f"field is not curl free (relative curl {ratio:.3g} > {curl_tol}); "
                         "no gauge function exists")
    d = A_diff.domain
    c = d.center
    X, Y = d.mesh()
    dx, dy = X - c[0], Y - c[1]
    t, w = np.polynomial.legendre.leggauss(nodes)
    t, w = 0.5 * (t + 1.0), 0.5 * w
    p = np.zeros(d.shape)
    for tk, wk in zip(t, w):
        a1, a2 = A_diff.evaluate(c[0] + tk * dx, c[1] + tk * dy)
        p += wk * (dx * a1 + dy * a2)
    pb = p.ravel()[d.boundary]
    spread = float(pb.max() - pb.min())
    p -= pb.mean()
    P = ScalarField(d, p)
    g1 = np.gradient(p, d.h1, axis=0, edge_order=2)
    g2 = np.gradient(p, d.h2, axis=1, edge_order=2)
    cert = float(max(np.max(np.abs(g1 - A_diff.a1)), np.max(np.abs(g2 - A_diff.a2))))
    return GaugeFunction(P, VectorField2D(d, g1, g2), p.ravel()[d.boundary].copy(), cert, spread)


def gauge_transform(A: VectorField2D, V: ScalarField, p: ScalarField):
    """``(A + grad p, V)``; exact gradients are used when ``p`` has a sampler."""
    d = A.domain
    s = p.sampler
    if s is not None and hasattr(s, "gradient"):
        X, Y = d.mesh()
        g1, g2 = s.gradient(X, Y)
        gs = GradientOf(s) if hasattr(s, "hessian") else None
        G = VectorField2D(d, g1, g2, gs)
    else:
        vals = np.real(p.values)
        G = VectorField2D(d, np.gradient(vals, d.h1, axis=0, edge_order=2),
                          np.gradient(vals, d.h2, axis=1, edge_order=2))
    return A + G, V


# ---------------------------------------------------------------------------
# comparison of boundary spectral data


def eigen_clusters(e1, e2, rel_tol=1e-6):
    """Index ranges of eigenvalue clusters shared by two sorted spectra.

    Neighbours ``k, k+1`` belong to one cluster when either spectrum has
    them within ``rel_tol * |lambda|``.  A trailing cluster that may be cut
    by the truncation is dropped (unless it is the only one).
    """
    K = min(e1.size, e2.size)
    e1, e2 = e1[:K], e2[:K]
    out = []
    start = 0
    for k in range(1, K + 1):
        if k < K:
            close1 = abs(e1[k] - e1[k - 1]) <= rel_tol * max(abs(e1[k]), 1.0)
            close2 = abs(e2[k] - e2[k - 1]) <= rel_tol * max(abs(e2[k]), 1.0)
            if close1 or close2:
                continue
        out.append((start, k))
        start = k
    if len(out) > 1:
        out.pop()  # the unseen eigenvalue K + 1 may belong to the last cluster
    return out


def _procrustes(H1, H2, w):
    """``min_U |H1 - H2 U|_w`` over unitary ``U`` and the principal-angle sines."""
    M = H2.conj().T @ (w[:, None] * H1)
    U, s, Vh = np.linalg.svd(M)
    R = H1 - H2 @ (U @ Vh)
    dist = float(np.sqrt(np.real(np.sum(w[:, None] * np.abs(R) ** 2))))
    # largest principal angle between the spans: the sine is the norm of the
    # part of span(H1) orthogonal to span(H2), which avoids cancellation in 1 - cos^2
    Q1 = _w_orth(H1, w)
    Q2 = _w_orth(H2, w)
    P = Q1 - Q2 @ (Q2.conj().T @ (w[:, None] * Q1))
    sin = float(np.linalg.norm(np.sqrt(w)[:, None] * P, 2)) if P.size else 0.0
    return dist, min(sin, 1.0)


def _w_orth(H, w):
    q, _ = np.linalg.qr(np.sqrt(w)[:, None] * H)
    return q / np.sqrt(w)[:, None]


@dataclass
class SpectralComparison:
    n_pairs: int
    max_eigen_gap: float
    max_rel_eigen_gap: float
    trace_distances: np.ndarray = field(repr=False)  # per eigenpair, cluster-aligned
    max_rel_trace_distance: float = 0.0
    max_angle_sine: float = 0.0
    partial_sum: float = 0.0  # sum |h1k - h2k|^2 after alignment
    n_clusters: int = 0

    def as_dict(self):
        return {"n_pairs": self.n_pairs, "max_eigen_gap": self.max_eigen_gap,
                "max_rel_eigen_gap": self.max_rel_eigen_gap,
                "max_rel_trace_distance": self.max_rel_trace_distance,
                "max_angle_sine": self.max_angle_sine, "partial_sum": self.partial_sum,
                "n_clusters": self.n_clusters}


def compare_spectral_data(spec1: BoundarySpectralData, spec2: BoundarySpectralData,
                          rel_tol=1e-6) -> SpectralComparison:
    """Eigenvalue gaps and cluster-aligned boundary-trace distances."""
    w = spec1.domain.weights
    clusters = eigen_clusters(spec1.eigenvalues, spec2.eigenvalues, rel_tol)
    n = clusters[-1][1] if clusters else 0
    e1, e2 = spec1.eigenvalues[:n], spec2.eigenvalues[:n]
    gaps = np.abs(e1 - e2)
    dists = np.zeros(n)
    rel = 0.0
    sin_max = 0.0
    for s, e in clusters:
        H1, H2 = spec1.traces[:, s:e], spec2.traces[:, s:e]
        dist, sin = _procrustes(H1, H2, w)
        dists[s:e] = dist / np.sqrt(e - s)
        nrm = float(np.sqrt(np.real(np.sum(w[:, None] * np.abs(H1) ** 2))))
        rel = max(rel, dist / nrm if nrm > 0 else 0.0)
        sin_max = max(sin_max, sin)
    return SpectralComparison(n, float(gaps.max()) if n else 0.0,
                              float(np.max(gaps / np.abs(e1))) if n else 0.0,
                              dists, rel, sin_max, float(np.sum(dists**2)), len(clusters))


# ---------------------------------------------------------------------------
# obstruction


@dataclass
class ObstructionReport:
    potential_difference: float  # max |A - A'| over the grid
    p_boundary_max: float
    comparison: SpectralComparison
    K: int

    def as_dict(self):
        return {"potential_difference": self.potential_difference,
                "p_boundary_max": self.p_boundary_max, "K": self.K,
                **self.comparison.as_dict()}


def obstruction_check(op: MagneticOperator, p: ScalarField, K=20,
                      rel_tol=1e-6) -> ObstructionReport:
    """Compare ``op`` with its gauge transform by ``p``.

    ``p`` must vanish on the collar.  The report shows that the vector
    potentials differ pointwise while eigenvalues and boundary traces agree
    up to discretization error.
    """
    d = op.domain
    pv = np.real(np.asarray(p.values))
    if np.any(pv[d.collar] != 0):
        raise ValueError("gauge function must vanish on the collar")
    A2, V2 = gauge_transform(op.A, op.V, p)
    op2 = assemble(d, A2, V2)
    s1 = eigensolve(op, K)
    s2 = eigensolve(op2, K)
    cmp = compare_spectral_data(s1, s2, rel_tol)
    diff = float(np.max(np.hypot(A2.a1 - op.A.a1, A2.a2 - op.A.a2)))
    return ObstructionReport(diff, float(np.max(np.abs(pv.ravel()[d.boundary]))), cmp, K)


def relative_l2(domain, est, ref):
    """``|est - ref| / |ref|`` in the nodal L2 norm (absolute if ``ref = 0``)."""
    num = l2_norm_grid(domain, np.asarray(est) - np.asarray(ref))
    den = l2_norm_grid(domain, ref)
    return num / den if den > 0 else num
