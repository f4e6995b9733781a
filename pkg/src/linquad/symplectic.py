"""Real and complex symplectic linear algebra on phase space.

Phase-space vectors are stored as length-2n arrays in (P_1..P_n, Q_1..Q_n)
block order.  Subspaces are stored as column bases of shape (2n, m).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import null_space

RANK_RTOL = 1e-10


def standard_form(n: int) -> np.ndarray:
    """Matrix J with omega(x, y) = x^T J y."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def symplectic_form(x, y):
    """omega(x, y) = sum_j (P_j Q'_j - P'_j Q_j); bilinear, no conjugation."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape[0] != y.shape[0] or x.shape[0] % 2:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    n = x.shape[0] // 2
    return x[:n] @ y[n:] - y[:n] @ x[n:]


def omega_matrix(X, Y) -> np.ndarray:
    """Matrix of omega(X[:, a], Y[:, b]) for two column bases."""
    X = np.atleast_2d(np.asarray(X))
    Y = np.atleast_2d(np.asarray(Y))
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"dimension mismatch: {X.shape} vs {Y.shape}")
    n = X.shape[0] // 2
    return X[:n].T @ Y[n:] - X[n:].T @ Y[:n]


def numerical_rank(M, rtol: float = RANK_RTOL) -> int:
    M = np.atleast_2d(np.asarray(M))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def _orthonormalize(vectors, rtol: float = RANK_RTOL):
    """QR-orthonormalize the columns; returns (Q, |det R|)."""
    V = np.asarray(vectors)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[1] == 0:
        return V.copy(), 1.0
    Q, R = np.linalg.qr(V)
    d = np.abs(np.diag(R))
    if d.min() <= rtol * max(d.max(), np.abs(V).max()):
        raise ValueError("rank-deficient basis")
    return Q, float(np.prod(d))


def spans_equal(U, V, rtol: float = 1e-9) -> bool:
    """True when the column spans of U and V coincide."""
    U = np.asarray(U)
    V = np.asarray(V)
    if U.shape[1] == 0 or V.shape[1] == 0:
        return U.shape[1] == V.shape[1] == 0 or (
            numerical_rank(U, rtol) == 0 and numerical_rank(V, rtol) == 0)
    ru = numerical_rank(U, rtol)
    rv = numerical_rank(V, rtol)
    return ru == rv == numerical_rank(np.hstack([U, V]), rtol)


def span_distance(U, V) -> float:
    """Sine of the largest principal angle between two equal-dimension spans."""
    Qu, _ = np.linalg.qr(np.asarray(U))
    Qv, _ = np.linalg.qr(np.asarray(V))
    resid = Qv - Qu @ (Qu.conj().T @ Qv)
    return float(np.linalg.norm(resid, 2)) if resid.size else 0.0


@dataclass(frozen=True)
class Subspace:
    """Subspace of R^{2n} or C^{2n} with an invariant measure.

    ``basis`` is Euclidean-orthonormal; ``measure_scale`` is the density J of
    the invariant measure in the coordinates of that basis.
    """

    basis: np.ndarray
    measure_scale: float = 1.0

    @classmethod
    def from_vectors(cls, vectors, measure_scale: float = 1.0, n: int | None = None):
        """Build from arbitrary independent vectors (rows or a 2-D list of rows).

        ``measure_scale`` refers to the coordinates of the given vectors and is
        converted to the orthonormalized basis.
        """
        rows = np.asarray(vectors)
        if rows.size == 0:
            if n is None and rows.ndim == 2 and rows.shape[1]:
                n = rows.shape[1] // 2
            if n is None:
                raise ValueError("ambient dimension needed for an empty subspace")
            # a point carries unit mass
            return cls(np.zeros((2 * n, 0)), 1.0)
        rows = np.atleast_2d(rows)
        Q, detR = _orthonormalize(rows.T)
        return cls(Q, float(measure_scale) / detR)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def n(self) -> int:
        return self.basis.shape[0] // 2

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.basis) or np.allclose(self.basis.imag, 0.0)

    def contains(self, v, rtol: float = 1e-9) -> bool:
        v = np.asarray(v)
        if v.ndim == 1:
            v = v[:, None]
        return spans_equal(self.basis, np.hstack([self.basis, v]), rtol) if self.dim else \
            numerical_rank(v, rtol) == 0


@dataclass(frozen=True)
class ConstraintPlane(Subspace):
    """Real isotropic k-plane generating the constraints Omega(X^(a))."""

    def __post_init__(self):
        if np.iscomplexobj(self.basis) and not np.allclose(self.basis.imag, 0.0):
            raise ValueError("constraint plane must be real")
        object.__setattr__(self, "basis", np.real(self.basis).astype(float))
        if self.dim > self.n:
            raise ValueError(f"isotropic plane of dim {self.dim} cannot exist for n={self.n}")
        bad = isotropy_violations(self.basis)
        if bad:
            a, b, val = bad[0]
            raise ValueError(f"constraint vectors {a} and {b} are not isotropic: omega={val:.3g}")

    @classmethod
    def empty(cls, n: int) -> "ConstraintPlane":
        return cls(np.zeros((2 * n, 0)), 1.0)


def isotropy_violations(basis, tol: float = 1e-10):
    """List of (a, b, omega) for basis pairs with |omega| > tol."""
    W = omega_matrix(basis, basis)
    out = []
    for a in range(W.shape[0]):
        for b in range(a + 1, W.shape[1]):
            if abs(W[a, b]) > tol:
                out.append((a, b, W[a, b]))
    return out


def is_isotropic(s, tol: float = 1e-10) -> bool:
    basis = s.basis if isinstance(s, Subspace) else np.asarray(s)
    if basis.ndim == 1:
        return True
    return not isotropy_violations(basis, tol)


def skew_complement(s) -> Subspace:
    """{Y : omega(Y, s) = 0}, of dimension 2n - dim s."""
    basis = s.basis if isinstance(s, Subspace) else np.asarray(s)
    dim2n = basis.shape[0]
    m = basis.shape[1]
    if m == 0:
        return Subspace(np.eye(dim2n, dtype=basis.dtype))
    if numerical_rank(basis) < m:
        raise ValueError("rank-deficient basis")
    n = dim2n // 2
    # omega(b, Y) = b^T J Y
    constraint = basis.T @ standard_form(n)
    N = null_space(constraint, rcond=RANK_RTOL)
    return Subspace(N)


@dataclass(frozen=True)
class GaugeSurface:
    """Isotropic k-plane G with omega(X^(a), Y^(b)) = delta_ab.

    ``basis`` columns are the dual vectors Y^(b) for the plane's stored basis.
    """

    plane: ConstraintPlane
    basis: np.ndarray
    measure_scale: float = 1.0

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def pairing(self) -> np.ndarray:
        return omega_matrix(self.plane.basis, self.basis)


def find_gauge_surface(L: ConstraintPlane) -> GaugeSurface:
    """Gauge surface J^T L: isotropic, Euclidean-orthonormal and exactly dual.

    With X orthonormal, Y = J^T X gives omega(X_a, Y_b) = X_a . X_b = delta_ab and
    omega(Y_a, Y_b) = omega(X_a, X_b) = 0.
    """
    if not isinstance(L, ConstraintPlane):
        L = ConstraintPlane(L.basis, L.measure_scale)
    X = L.basis
    G = np.linalg.solve(X.T @ X, np.eye(X.shape[1])) if X.shape[1] else np.zeros((0, 0))
    Y = standard_form(L.n).T @ X @ G
    return GaugeSurface(L, Y, 1.0)


class Decomposition(NamedTuple):
    l: np.ndarray
    g: np.ndarray
    w: np.ndarray
    l_coords: np.ndarray
    g_coords: np.ndarray
    w_coords: np.ndarray


def transverse_basis(G: GaugeSurface) -> np.ndarray:
    """Orthonormal basis of (L + G)^{perp omega}."""
    LG = np.hstack([G.plane.basis, G.basis])
    return skew_complement(LG).basis


def triple_decompose(v, L: ConstraintPlane, G: GaugeSurface) -> Decomposition:
    """Unique split v = l + g + w with l in L, g in G, w in (L+G)^{perp omega}."""
    v = np.asarray(v)
    W = transverse_basis(G)
    B = np.hstack([L.basis, G.basis, W])
    coords = np.linalg.solve(B, v)
    k = L.dim
    lc, gc, wc = coords[:k], coords[k:2 * k], coords[2 * k:]
    return Decomposition(L.basis @ lc, G.basis @ gc, W @ wc, lc, gc, wc)


def linear_map_jacobian(P, scale_in: float = 1.0, scale_out: float = 1.0) -> float:
    """Delta(P) = |det P| |J'| / |J| for a map between measured spaces."""
    P = np.atleast_2d(np.asarray(P))
    if P.shape[0] != P.shape[1]:
        raise ValueError(f"map must be square, got {P.shape}")
    if P.shape[0] == 0:
        return abs(scale_out) / abs(scale_in)
    det = np.linalg.det(P)
    if abs(det) <= RANK_RTOL * max(1.0, np.abs(P).max()) ** P.shape[0]:
        raise ValueError("singular map has no Jacobian")
    return float(abs(det) * abs(scale_out) / abs(scale_in))


def pairing_constant(L: ConstraintPlane, G: GaugeSurface) -> float:
    """Delta with int dmu(X) int dsigma(Y) rho(Y) e^{i omega(X,Y)} = rho(0) Delta.

    With coordinates X = X s, Y = Y t and omega(X, Y) = s^T W t, the inner integral
    yields (2 pi)^k delta(W^T s), hence Delta = (2 pi)^k J_L J_G / |det W|.
    """
    k = L.dim
    if G.dim != k:
        raise ValueError("gauge surface dimension differs from the plane")
    if k == 0:
        return 1.0
    W = omega_matrix(L.basis, G.basis)
    det = np.linalg.det(W)
    if abs(det) < 1e-10:
        raise ValueError("omega is degenerate on L + G: bases are not dual")
    return float((2 * np.pi) ** k * L.measure_scale * G.measure_scale / abs(det))
