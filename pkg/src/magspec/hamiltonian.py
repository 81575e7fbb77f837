"""Gauge-covariant finite differences for ``(-i grad + A)^2 + V``.

The operator acts on interior nodes with homogeneous Dirichlet data.  Each
grid link ``p -> p + h e_j`` carries the parallel transporter
``U = exp(i h A_j(mid))`` where ``A_j(mid)`` is the average of the two nodal
values, so that ``(U u(p + h e_j) - u(p)) / h`` approximates the covariant
derivative ``(d_j + i A_j) u``.  The matrix row of ``p`` then holds
``-U / h_j^2`` in the column of ``p + h e_j`` and ``-conj(U) / h_j^2`` in the
column of ``p - h e_j``; Hermiticity is exact because the reverse link stores
the conjugate of the very same number.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import BoundaryFunction, Domain2D, ScalarField, VectorField2D

DENSE_LIMIT = 1600


@dataclass(frozen=True, eq=False)
class MagneticOperator:
    domain: Domain2D
    A: VectorField2D
    V: ScalarField
    H: sp.csr_matrix  # interior x interior
    H_IB: sp.csr_matrix  # interior x boundary coupling
    H_full: sp.csr_matrix  # all nodes (rows of boundary nodes unused by solves)
    U1: np.ndarray  # transporters on links (i, j) -> (i + 1, j)
    U2: np.ndarray  # transporters on links (i, j) -> (i, j + 1)
    scheme: str = "peierls-midpoint"

    @property
    def n(self):
        return self.H.shape[0]

    def dense(self):
        return self.H.toarray()

    def apply_full(self, u_grid):
        """Interior rows of the operator applied to a full-grid function."""
        return self.H_full[self.domain.interior] @ np.asarray(u_grid).ravel()

    def boundary_trace(self, u_interior) -> BoundaryFunction:
        """Covariant normal derivative of a function vanishing on the boundary.

        This is the adjoint of the Dirichlet lifting: for a face node ``b``
        with inner neighbour ``i`` it equals ``-U(b -> i) u(i) / h_n`` and it
        vanishes at corners.  With this trace the eigen-expansions of the
        Dirichlet problem and of the DtN map hold exactly at the discrete
        level.
        """
        d = self.domain
        vals = (d.cell_area / d.weights) * (self.H_IB.conj().T @ np.asarray(u_interior))
        return BoundaryFunction(d, vals)

    def potential_bounds(self):
        v = np.asarray(self.V.values, dtype=float)
        return float(np.max(np.abs(v))), float(self.A.sup())


def _check_fields(domain, A, V):
    if A.a1.shape != domain.shape or np.shape(V.values) != domain.shape:
        raise ValueError("coefficient fields do not match the grid")
    if not (np.all(np.isfinite(A.a1)) and np.all(np.isfinite(A.a2))):
        raise ValueError("vector potential has non-finite values")
    vals = np.asarray(V.values)
    if np.iscomplexobj(vals) and np.any(vals.imag != 0):
        raise ValueError("electric potential must be real")
    if not np.all(np.isfinite(vals)):
        raise ValueError("electric potential has non-finite values")


def assemble(domain: Domain2D, A: VectorField2D, V: ScalarField) -> MagneticOperator:
    """Assemble the Dirichlet magnetic Laplacian plus potential."""
    _check_fields(domain, A, V)
    N1, N2 = domain.shape
    h1, h2 = domain.h1, domain.h2
    idx = np.arange(N1 * N2).reshape(N1, N2)

    U1 = np.exp(0.5j * h1 * (A.a1[:-1, :] + A.a1[1:, :]))
    U2 = np.exp(0.5j * h2 * (A.a2[:, :-1] + A.a2[:, 1:]))

    p1, q1 = idx[:-1, :].ravel(), idx[1:, :].ravel()
    p2, q2 = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    fw1 = -U1.ravel() / h1**2
    fw2 = -U2.ravel() / h2**2
    diag = 2.0 / h1**2 + 2.0 / h2**2 + np.real(np.asarray(V.values)).ravel()

    rows = np.concatenate([idx.ravel(), p1, q1, p2, q2])
    cols = np.concatenate([idx.ravel(), q1, p1, q2, p2])
    vals = np.concatenate([diag.astype(complex), fw1, np.conj(fw1), fw2, np.conj(fw2)])
    H_full = sp.csr_matrix((vals, (rows, cols)), shape=(N1 * N2, N1 * N2))
    H_full.sort_indices()

    I, B = domain.interior, domain.boundary
    H_rows = H_full[I]
    H = H_rows[:, I].tocsr()
    H_IB = H_rows[:, B].tocsr()
    return MagneticOperator(domain, A, V, H, H_IB, H_full, U1, U2)


def expanded_apply(domain: Domain2D, A: VectorField2D, V: ScalarField, u_grid):
    """Centered-difference form ``-lap u - 2i A.grad u + (-i div A + |A|^2 + V) u``.

    Used only as an independent cross-check of :func:`assemble`; returns
    values at interior nodes.
    """
    h1, h2 = domain.h1, domain.h2
    u = np.asarray(u_grid, dtype=complex).reshape(domain.shape)
    lap = np.zeros_like(u)
    lap[1:-1, 1:-1] = ((u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / h1**2
                       + (u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]) / h2**2)
    d1u = np.gradient(u, h1, axis=0)
    d2u = np.gradient(u, h2, axis=1)
    div = np.gradient(A.a1, h1, axis=0) + np.gradient(A.a2, h2, axis=1)
    out = (-lap - 2j * (A.a1 * d1u + A.a2 * d2u)
           + (-1j * div + A.a1**2 + A.a2**2 + np.real(V.values)) * u)
    return out.ravel()[domain.interior]


# ---------------------------------------------------------------------------
# spectral data


@dataclass(frozen=True, eq=False)
class BoundarySpectralData:
    """Lowest ``K`` Dirichlet eigenpairs with boundary traces.

    ``vectors[:, k]`` is normalized in the discrete ``L2`` product
    (node values times ``h1 h2``); ``traces[:, k]`` is the covariant normal
    derivative of ``vectors[:, k]`` in boundary-node order.
    """

    domain: Domain2D
    eigenvalues: np.ndarray
    vectors: np.ndarray
    traces: np.ndarray
    residuals: np.ndarray = field(repr=False)

    @property
    def K(self):
        return self.eigenvalues.size

    def trace(self, k) -> BoundaryFunction:
        return BoundaryFunction(self.domain, self.traces[:, k])

    def coefficients(self, f):
        """``alpha_k = <f, h_k>_Gamma = sum w f conj(h_k)``."""
        fv = f.values if isinstance(f, BoundaryFunction) else np.asarray(f)
        return (self.domain.weights * fv) @ np.conj(self.traces)

    def gram(self):
        V = self.vectors
        return (V.conj().T @ V) * self.domain.cell_area

    def truncated(self, K):
        if K > self.K:
            raise ValueError(f"requested {K} eigenpairs, only {self.K} available")
        return BoundarySpectralData(self.domain, self.eigenvalues[:K], self.vectors[:, :K],
                                    self.traces[:, :K], self.residuals[:K])

    def csv_rows(self):
        """Rows ``k, lambda, Re h(b0), Im h(b0), ...`` in boundary order."""
        header = ["k", "lambda"]
        for b in range(self.domain.n_boundary):
            header += [f"h{b}_re", f"h{b}_im"]
        rows = []
        for k in range(self.K):
            row = [k + 1, float(self.eigenvalues[k])]
            for v in self.traces[:, k]:
                row += [float(v.real), float(v.imag)]
            rows.append(row)
        return header, rows


def _fix_phase(vecs):
    out = vecs.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        m = int(np.argmax(np.abs(col)))
        ph = col[m] / abs(col[m])
        out[:, k] = col / ph
        out[m, k] = abs(col[m])
    return out


def _rayleigh_ritz(H, Q):
    Q, _ = np.linalg.qr(Q)
    Hq = Q.conj().T @ (H @ Q)
    Hq = 0.5 * (Hq + Hq.conj().T)
    w, S = sla.eigh(Hq)
    return w, Q @ S


def eigensolve(op: MagneticOperator, K: int, method: str = "auto", tol: float = 1e-8):
    """Lowest ``K`` eigenpairs of ``op`` with boundary traces.

    Small problems use dense ``eigh``.  Larger ones use shift-invert Lanczos
    (ARPACK) below the spectrum, followed by a Rayleigh-Ritz pass that makes
    the returned basis orthonormal to machine precision.
    """
    n = op.n
    if not 1 <= K <= n:
        raise ValueError(f"K must be in [1, {n}], got {K}")
    d = op.domain
    if method == "auto":
        method = "dense" if (n <= DENSE_LIMIT or K > n // 3) else "sparse"
    if method == "dense":
        w, vecs = sla.eigh(op.dense(), subset_by_index=(0, K - 1))
    elif method == "sparse":
        vmin = float(np.min(np.real(op.V.values)))
        sigma = vmin - 1.0
        v0 = np.random.default_rng(12345).standard_normal(n).astype(complex)
        ncv = min(n, max(2 * K + 1, K + 40))
        try:
            _, vecs = spla.eigsh(op.H, k=K, sigma=sigma, which="LM", v0=v0, ncv=ncv, tol=tol * 1e-2)
        except spla.ArpackNoConvergence as exc:
            raise RuntimeError(f"eigensolver did not converge: {exc}") from exc
        w, vecs = _rayleigh_ritz(op.H, vecs)
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")

    res = np.linalg.norm(op.H @ vecs - vecs * w, axis=0)
    scale = np.maximum(np.abs(w), 1.0)
    if np.any(res > tol * scale):
        raise RuntimeError(f"eigenpairs not converged, residual norms {res[res > tol * scale]}")
    vecs = _fix_phase(vecs) / np.sqrt(d.cell_area)
    traces = (d.cell_area / d.weights)[:, None] * (op.H_IB.conj().T @ vecs)
    for arr in (w, vecs, traces, res):
        arr.setflags(write=False)
    return BoundarySpectralData(d, w, vecs, traces, res)


def normal_derivative(domain: Domain2D, phi) -> BoundaryFunction:
    """Three-point one-sided outward normal derivative of ``phi``.

    ``phi`` is either a full grid array or a vector of interior values; it
    is taken to vanish on the boundary.  At a face node ``x`` the formula is
    ``(4 phi(x - h nu) - phi(x - 2h nu)) / (-2h)``; at corners both adjacent
    faces carry the zero Dirichlet value and the result is zero.
    """
    phi = np.asarray(phi)
    if phi.ndim == 1:
        if phi.size != domain.n_interior:
            raise ValueError("interior vector has the wrong length")
        phi = domain.to_grid(phi)
    if phi.shape != domain.shape:
        raise ValueError("grid function has the wrong shape")
    if min(domain.shape) < 4:
        raise ValueError("grid too coarse for the one-sided normal stencil")
    out = np.zeros(domain.n_boundary, dtype=complex)
    ii, jj = domain.ij(domain.boundary)
    for b in range(domain.n_boundary):
        if domain.is_corner[b]:
            continue
        nu = domain.normals[b].astype(int)
        i, j = ii[b], jj[b]
        h = domain.h1 if nu[0] != 0 else domain.h2
        p1 = phi[i - nu[0], j - nu[1]]
        p2 = phi[i - 2 * nu[0], j - 2 * nu[1]]
        out[b] = (4 * p1 - p2) / (-2 * h)
    return BoundaryFunction(domain, out)
