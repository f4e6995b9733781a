"""Complex germs of Gaussian states.

The S-germ r(A) = {Y : Omega(Y) psi_A = 0} is the graph {(A Q, Q)}.  With constraints,
the H-germ is r_perp(A) + L^C where r_perp(A) = r(A) cap (L^C)^{perp omega}.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .symplectic import (
    ConstraintPlane,
    GaugeSurface,
    find_gauge_surface,
    numerical_rank,
    omega_matrix,
    spans_equal,
    transverse_basis,
)
from .states import GaussianState


class GermError(ValueError):
    pass


@dataclass(frozen=True)
class GermProjectors:
    B: np.ndarray
    C: np.ndarray


@dataclass(frozen=True)
class ComplexGerm:
    """n-dimensional subspace of C^{2n}; ``flavor`` is "S" or "H"."""

    basis: np.ndarray
    flavor: str = "S"
    plane: ConstraintPlane | None = None

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=complex)
        if basis.ndim == 1:
            basis = basis[:, None]
        object.__setattr__(self, "basis", basis)
        if self.flavor not in ("S", "H"):
            raise ValueError(f"unknown germ flavor {self.flavor!r}")

    @property
    def n(self) -> int:
        return self.basis.shape[0] // 2

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projectors(self) -> GermProjectors:
        n = self.n
        return GermProjectors(self.basis[:n], self.basis[n:])

    def conjugate(self) -> "ComplexGerm":
        return ComplexGerm(self.basis.conj(), self.flavor, self.plane)

    def same_span(self, other, rtol: float = 1e-9) -> bool:
        other_basis = other.basis if isinstance(other, ComplexGerm) else other
        return spans_equal(self.basis, other_basis, rtol)


def positivity_matrix(basis) -> np.ndarray:
    """Hermitian matrix M_ij = (1/i) omega(b_i, conj b_j)."""
    basis = np.asarray(basis)
    return -1j * omega_matrix(basis, basis.conj())


def s_germ(A) -> ComplexGerm:
    """r(A) = span{(A e_j, e_j)}."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    n = A.shape[0]
    return ComplexGerm(np.vstack([A, np.eye(n)]), "S")


def germ_to_matrix(r: ComplexGerm, tol: float = 1e-10):
    """A = B C^{-1} for a germ satisfying isotropy and positivity."""
    proj = r.projectors()
    n = r.n
    if r.dim != n or numerical_rank(proj.C, tol) < n:
        raise GermError("coordinate projector C is singular: not a positive Lagrangian germ")
    A = np.linalg.solve(proj.C.T, proj.B.T).T
    scale = max(1.0, np.abs(A).max())
    if np.abs(A - A.T).max() > 1e3 * tol * scale:
        raise GermError("B C^{-1} is not symmetric: germ is not isotropic")
    A = 0.5 * (A + A.T)
    if np.linalg.eigvalsh(A.imag).min() <= tol * scale:
        raise GermError("Im(B C^{-1}) is not positive definite: germ fails positivity")
    return A, proj


@dataclass
class GermReport:
    flavor: str
    isotropy_residual: float
    positivity_eigenvalues: np.ndarray
    degenerate_matches_plane: bool | None = None
    passed: bool = False
    messages: list = field(default_factory=list)


def check_germ(r: ComplexGerm, tol: float = 1e-9) -> GermReport:
    """Check isotropy and (strict or H-type) positivity of a germ."""
    basis = r.basis
    scale = max(1.0, float(np.abs(basis).max()) ** 2)
    W = omega_matrix(basis, basis)
    iso = float(np.abs(W).max()) / scale if W.size else 0.0
    Hm = positivity_matrix(basis)
    Hm = 0.5 * (Hm + Hm.conj().T)
    eigs, vecs = np.linalg.eigh(Hm)
    report = GermReport(r.flavor, iso, eigs)
    ok = True
    if iso > tol:
        ok = False
        report.messages.append(f"isotropy violated: residual {iso:.3g}")
    if numerical_rank(basis) != r.n or r.dim != r.n:
        ok = False
        report.messages.append("germ is not n-dimensional")
    zero = tol * scale
    if r.flavor == "S":
        if eigs.min() <= zero:
            ok = False
            report.messages.append(f"positivity violated: smallest eigenvalue {eigs.min():.3g}")
    else:
        L = r.plane
        k = 0 if L is None else L.dim
        if L is not None and k and not spans_equal(basis, np.hstack([basis, L.basis])):
            ok = False
            report.messages.append("H-germ does not contain L^C")
        null = np.abs(eigs) <= zero
        if eigs.min() < -zero:
            ok = False
            report.messages.append(f"positivity violated: eigenvalue {eigs.min():.3g}")
        if int(null.sum()) != k:
            ok = False
            report.degenerate_matches_plane = False
            report.messages.append(
                f"degenerate subspace has dim {int(null.sum())}, expected {k}")
        elif k:
            degenerate = basis @ vecs[:, null]
            report.degenerate_matches_plane = spans_equal(degenerate, L.basis.astype(complex))
            if not report.degenerate_matches_plane:
                ok = False
                report.messages.append("degenerate subspace differs from L^C")
        else:
            report.degenerate_matches_plane = True
    report.passed = ok
    return report


@dataclass(frozen=True)
class LagrangianSplit:
    """r_perp(A), r_-(A), the map P_- on the plane basis and its Jacobian."""

    r_perp: np.ndarray
    r_minus: np.ndarray
    P_minus: np.ndarray
    delta: float
    gram: np.ndarray


def conjugate_component(A, X) -> np.ndarray:
    """r(A)-component of X in the split C^{2n} = r(A) + r(A)^*.

    X = (A Q, Q) + (conj(A) Q_w, Q_w) with Q_w = (i/2) Im A^{-1} (P_X - A Q_X).
    """
    A = np.asarray(A)
    n = A.shape[0]
    X = np.asarray(X, dtype=complex)
    P, Q = X[:n], X[n:]
    Qw = 0.5j * np.linalg.solve(A.imag, P - A @ Q)
    Qr = Q - Qw
    return np.concatenate([A @ Qr, Qr], axis=0)


def r_perp_and_r_minus(A, L: ConstraintPlane) -> LagrangianSplit:
    """Subspaces of r(A): r_perp (dim n-k) and r_- (dim k), with P_-: L^C -> r_-.

    r_- is the complement of r_perp in r(A) orthogonal for the Hermitian form
    (1/i) omega(Y, Y'^*), which is where the split X = X_- + X_-^* lands.
    """
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    n = A.shape[0]
    k = L.dim
    X = L.basis
    if k == 0:
        Qp = np.eye(n, dtype=complex)
    else:
        # omega((A Q, Q), X) = Q^T (A Q_X - P_X)
        rows = (A @ X[n:] - X[:n]).T
        Qp = null_space(rows, rcond=1e-12)
    if Qp.shape[1] != n - k:
        raise GermError(f"dim r_perp = {Qp.shape[1]}, expected {n - k}")
    r_perp = np.vstack([A @ Qp, Qp])
    if k == 0:
        return LagrangianSplit(r_perp, np.zeros((2 * n, 0), complex),
                               np.zeros((2 * n, 0), complex), 1.0, np.zeros((0, 0)))
    if n - k:
        Qm = null_space((A.imag @ Qp.conj()).T, rcond=1e-12)
    else:
        Qm = np.eye(n, dtype=complex)
    if Qm.shape[1] != k:
        raise GermError(f"dim r_- = {Qm.shape[1]}, expected {k}")
    r_minus = np.vstack([A @ Qm, Qm])
    Pm = conjugate_component(A, X)
    gram = (-1j * omega_matrix(Pm, Pm.conj()))
    gram = 0.5 * (gram + gram.conj().T).real
    sign, logdet = np.linalg.slogdet(gram)
    if sign <= 0:
        raise GermError("P_- image is degenerate for the positivity form")
    delta = float(np.exp(0.5 * logdet) / L.measure_scale)
    return LagrangianSplit(r_perp, r_minus, Pm, delta, gram)


def h_germ(A, L: ConstraintPlane) -> ComplexGerm:
    """H-germ r_perp(A) + L^C."""
    split = r_perp_and_r_minus(A, L)
    return ComplexGerm(np.hstack([split.r_perp, L.basis.astype(complex)]), "H", L)


def h_germ_to_matrix(rc: ComplexGerm, L: ConstraintPlane, G: GaugeSurface | None = None,
                     tol: float = 1e-9):
    """One matrix A with h_germ(A, L) = rc.

    The H-germ fixes A only up to Gaussian equivalence.  Construction: move the
    complement of L^C in rc into V = (L + G)^{perp omega} (its G-components vanish by
    isotropy, L-components are dropped), then adjoin X^(a) - i Y^(a), which are
    isotropic, positive and omega-orthogonal to V; A = B C^{-1} of that S-germ.
    """
    n = rc.n
    k = L.dim
    basis = rc.basis
    if rc.dim != n or numerical_rank(basis) != n:
        raise GermError("H-germ must be n-dimensional")
    if k and not spans_equal(basis, np.hstack([basis, L.basis])):
        raise GermError("H-germ does not contain L^C")
    if k == 0:
        return germ_to_matrix(ComplexGerm(basis, "S"), tol)[0]
    G = find_gauge_surface(L) if G is None else G
    V = transverse_basis(G)
    frame = np.hstack([L.basis, G.basis, V]).astype(complex)
    coords = np.linalg.solve(frame, basis)
    g_part = coords[k:2 * k]
    if np.abs(g_part).max() > 1e3 * tol * max(1.0, np.abs(coords).max()):
        raise GermError("H-germ is not omega-orthogonal to L^C")
    W = V @ coords[2 * k:]
    U, s, _ = np.linalg.svd(W, full_matrices=False)
    rank = int(np.sum(s > 1e-10 * max(s.max(), 1e-300)))
    if rank != n - k:
        raise GermError(f"H-germ modulo L^C has dim {rank}, expected {n - k}")
    W = U[:, :rank]
    Ginv = np.linalg.inv(omega_matrix(L.basis, G.basis))
    Ydual = G.basis @ Ginv
    Z = L.basis - 1j * Ydual
    r = ComplexGerm(np.hstack([W, Z]), "S")
    report = check_germ(r, tol)
    if not report.passed:
        raise GermError("H-germ violates positivity: " + "; ".join(report.messages))
    return germ_to_matrix(r, tol)[0]


def germ_of_state(psi) -> ComplexGerm:
    A = psi.A if isinstance(psi, GaussianState) else psi.gaussian.A
    return s_germ(A)
