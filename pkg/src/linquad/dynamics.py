"""Quadratic Hamiltonians Omega_2(Gamma) + epsilon under linear constraints.

Omega_2(Gamma) = 1/2 sum_ij Gamma_ij Omega(Z_i) Omega(Z_j) with Z_i the standard
(P, Q) basis.  Quotient coordinates use a fixed basis V of (L + G)^{perp omega},
which is a complement of L inside L^{perp omega}.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .polynomial import Polynomial
from .states import (
    GaussianState,
    QuasiGaussianState,
    omega_product_apply,
    weyl_apply,
)
from .symplectic import (
    ConstraintPlane,
    GaugeSurface,
    find_gauge_surface,
    omega_matrix,
    standard_form,
    transverse_basis,
)

COMPAT_TOL = 1e-9


class IncompatibleHamiltonian(ValueError):
    """Gamma has components outside Sym L^perp (x) L^perp + Sym L (x) M."""


class BranchTrackingError(ArithmeticError):
    pass


@dataclass(frozen=True)
class QuadraticHamiltonian:
    gamma: np.ndarray
    epsilon: complex = 0.0

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        if g.shape[0] != g.shape[1] or g.shape[0] % 2:
            raise ValueError(f"Gamma must be 2n x 2n, got {g.shape}")
        if np.abs(g - g.T).max() > 1e-12 * max(1.0, np.abs(g).max()):
            raise ValueError("Gamma is not symmetric")
        object.__setattr__(self, "gamma", 0.5 * (g + g.T))

    @property
    def n(self) -> int:
        return self.gamma.shape[0] // 2


def oscillator(n: int, freqs=None, epsilon=0.0) -> QuadraticHamiltonian:
    """sum_j w_j/2 (p_j^2 + q_j^2)."""
    w = np.ones(n) if freqs is None else np.asarray(freqs, dtype=float)
    return QuadraticHamiltonian(np.diag(np.concatenate([w, w])), epsilon)


@dataclass(frozen=True)
class ReducedSpace:
    """R = L^{perp omega} / L in the coordinates of ``basis`` (columns in L^{perp omega})."""

    plane: ConstraintPlane
    gauge: GaugeSurface
    basis: np.ndarray

    @classmethod
    def of(cls, L: ConstraintPlane, G: GaugeSurface | None = None) -> "ReducedSpace":
        G = find_gauge_surface(L) if G is None else G
        return cls(L, G, transverse_basis(G))

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def omega(self) -> np.ndarray:
        """omega restricted to the quotient basis; nondegenerate."""
        return omega_matrix(self.basis, self.basis)

    def frame(self) -> np.ndarray:
        return np.hstack([self.plane.basis, self.gauge.basis, self.basis])

    def coordinates(self, Y, tol: float = 1e-9) -> np.ndarray:
        """Quotient coordinates of vectors in L^{perp omega} (columns)."""
        Y = np.asarray(Y)
        single = Y.ndim == 1
        Y = Y[:, None] if single else Y
        k = self.plane.dim
        c = np.linalg.solve(self.frame().astype(Y.dtype), Y)
        if k and np.abs(c[k:2 * k]).max() > tol * max(1.0, np.abs(c).max()):
            raise ValueError("vector is not in the skew complement of L")
        out = c[2 * k:]
        return out[:, 0] if single else out

    def lift(self, y) -> np.ndarray:
        """Fixed representative V y in L^{perp omega}."""
        return self.basis @ np.asarray(y)


@dataclass(frozen=True)
class FlowMap:
    t: float
    matrix: np.ndarray
    space: ReducedSpace | None = None

    def symplectic_residual(self, omega) -> float:
        U = self.matrix
        return float(np.abs(U.T @ omega @ U - omega).max())


@dataclass
class CompatibilityReport:
    compatible: bool
    gg_residual: float
    gv_residual: float
    blocks: dict


def _adapted_coefficients(H: QuadraticHamiltonian, R: ReducedSpace) -> np.ndarray:
    """Gamma in the frame [X, Y, V]: Gamma = B Gt B^T."""
    B = R.frame()
    Binv = np.linalg.inv(B)
    return Binv @ H.gamma @ Binv.T


def compatibility_report(H: QuadraticHamiltonian, L: ConstraintPlane,
                         G: GaugeSurface | None = None, tol: float = COMPAT_TOL) -> CompatibilityReport:
    """Membership of Gamma in Sym L^perp (x) L^perp + Sym L (x) M.

    In the frame [X, Y, V] that subspace is exactly the matrices whose YY and YV
    blocks vanish.
    """
    R = ReducedSpace.of(L, G)
    k = L.dim
    Gt = _adapted_coefficients(H, R)
    scale = max(1.0, float(np.abs(H.gamma).max()))
    gg = Gt[k:2 * k, k:2 * k]
    gv = Gt[k:2 * k, 2 * k:]
    rg = float(np.abs(gg).max()) / scale if gg.size else 0.0
    rv = float(np.abs(gv).max()) / scale if gv.size else 0.0
    blocks = {"GG": gg, "GV": gv}
    return CompatibilityReport(rg <= tol and rv <= tol, rg, rv, blocks)


def check_compatibility(H: QuadraticHamiltonian, L: ConstraintPlane, tol: float = COMPAT_TOL) -> bool:
    if H.n != L.n:
        raise ValueError("Hamiltonian and plane have different n")
    return compatibility_report(H, L, tol=tol).compatible


@dataclass(frozen=True)
class Reduction:
    gamma_bar: np.ndarray
    gamma_full: np.ndarray
    epsilon: complex
    space: ReducedSpace


def reduce_hamiltonian(H: QuadraticHamiltonian, L: ConstraintPlane,
                       G: GaugeSurface | None = None, tol: float = COMPAT_TOL) -> Reduction:
    """(Gamma', epsilon') with H f ~ (Omega_2(Gamma') + epsilon') f.

    X-X and X-V terms are null; each symmetrized X_a-Y_b term contributes the
    constant (i/2) omega(X_a, Y_b) times its coefficient.
    """
    R = ReducedSpace.of(L, G)
    report = compatibility_report(H, L, R.gauge, tol)
    if not report.compatible:
        raise IncompatibleHamiltonian(
            f"Gamma leaves the compatible subspace: GG block {report.gg_residual:.3g}, "
            f"GV block {report.gv_residual:.3g}")
    k = L.dim
    Gt = _adapted_coefficients(H, R)
    gbar = Gt[2 * k:, 2 * k:]
    gbar = 0.5 * (gbar + gbar.T)
    W = omega_matrix(L.basis, R.gauge.basis)
    shift = 0.5j * np.sum(Gt[:k, k:2 * k] * W) if k else 0.0
    eps = complex(H.epsilon) + shift
    if abs(eps.imag) <= 1e-14 * max(1.0, abs(eps)):
        eps = eps.real
    full = R.basis @ gbar @ R.basis.T
    return Reduction(gbar, 0.5 * (full + full.T), eps, R)


def circ_generator(gamma_bar, omega_bar) -> np.ndarray:
    """Matrix of y -> y o Gamma_bar in quotient coordinates."""
    return np.asarray(gamma_bar) @ np.asarray(omega_bar).T


def circ_product(y, gamma_bar, R: ReducedSpace | np.ndarray) -> np.ndarray:
    """Y o Gamma = sum_ij Gamma_ij omega(Y, Z_i) Z_j in quotient coordinates."""
    omega_bar = R.omega if isinstance(R, ReducedSpace) else np.asarray(R)
    gamma_bar = np.asarray(gamma_bar)
    y = np.asarray(y)
    if gamma_bar.shape[0] != omega_bar.shape[0] or y.shape[0] != omega_bar.shape[0]:
        raise ValueError("basis mismatch between vector, form and reduced space")
    return circ_generator(gamma_bar, omega_bar) @ y


def classical_flow(gamma_bar, t: float, R: ReducedSpace | np.ndarray | None = None) -> FlowMap:
    """u_t = exp(t G) solving dY/dt = Y o Gamma_bar."""
    gamma_bar = np.asarray(gamma_bar, dtype=float)
    if R is None:
        omega_bar = standard_form(gamma_bar.shape[0] // 2)
    else:
        omega_bar = R.omega if isinstance(R, ReducedSpace) else np.asarray(R)
    return FlowMap(t, expm(t * circ_generator(gamma_bar, omega_bar)),
                   R if isinstance(R, ReducedSpace) else None)


def _full_generator(gamma_full) -> np.ndarray:
    n = gamma_full.shape[0] // 2
    return gamma_full @ standard_form(n).T


def _tracked_sqrt_det(C_of_t, t: float, steps: int, max_halvings: int = 12):
    """sqrt(det C(t)) continued from sqrt(det C(0)) = 1 along [0, t]."""
    if t == 0:
        return 1.0 + 0j
    times = np.linspace(0.0, t, max(1, steps) + 1)
    arg = 0.0
    prev = complex(np.linalg.det(C_of_t(0.0)))
    arg = cmath.phase(prev)
    for a, b in zip(times[:-1], times[1:]):
        sub = [a, b]
        depth = 0
        i = 0
        while i < len(sub) - 1:
            d = complex(np.linalg.det(C_of_t(sub[i + 1])))
            jump = cmath.phase(d / prev)
            if abs(jump) >= math.pi / 2:
                if depth >= max_halvings:
                    raise BranchTrackingError(
                        "det C(t) winds faster than the sub-steps resolve; increase steps")
                sub.insert(i + 1, 0.5 * (sub[i] + sub[i + 1]))
                depth += 1
                continue
            arg += jump
            prev = d
            i += 1
    return math.sqrt(abs(prev)) * cmath.exp(0.5j * arg)


def _split_linear_term(psi: GaussianState):
    """(X0, core) with psi = W(X0) core and core = c' exp(i/2 xi A xi)."""
    A, b = psi.A, psi.b
    Q0 = -np.linalg.solve(A.imag, b.imag)
    P0 = b.real + A.real @ Q0
    X0 = np.concatenate([P0, Q0])
    probe = weyl_apply(GaussianState(A, None, 1.0), X0).gaussian
    core = GaussianState(A, None, psi.c / probe.c)
    return X0, core


def evolve_gaussian(psi: GaussianState, H: QuadraticHamiltonian, L: ConstraintPlane,
                    t: float, steps: int = 64) -> GaussianState:
    """exp(-i t H) psi on the Gaussian class, up to null states.

    The germ r(A) is carried by the full-space flow of Gamma'; the amplitude follows
    c(t) = c(0) e^{-i eps' t} / sqrt(det C(t)) with a continuously tracked root.
    """
    if t == 0:
        return psi
    red = reduce_hamiltonian(H, L)
    U = lambda s: expm(s * _full_generator(red.gamma_full))
    n = psi.n
    X0, core = _split_linear_term(psi)
    start = np.vstack([core.A, np.eye(n)])

    def C_of(s):
        return (U(s) @ start)[n:]
    Ut = U(t)
    BC = Ut @ start
    A_t = np.linalg.solve(BC[n:].T, BC[:n].T).T
    A_t = 0.5 * (A_t + A_t.T)
    root = _tracked_sqrt_det(C_of, t, steps)
    c_t = core.c * cmath.exp(-1j * red.epsilon * t) / root
    out = GaussianState(A_t, None, c_t)
    if np.any(X0):
        out = weyl_apply(out, Ut @ X0).gaussian
    return out


def raising_vectors(A) -> np.ndarray:
    """Columns R_j = (conj(A) Q_j, Q_j), Q_j = (i/2) Im A^{-1} e_j.

    Omega(R_j) multiplies by xi_j up to lower-order terms and the R_j commute.
    """
    A = np.asarray(A)
    Q = 0.5j * np.linalg.inv(A.imag)
    return np.vstack([A.conj() @ Q, Q])


def ladder_decomposition(psi: QuasiGaussianState) -> list:
    """[(coefficient, multi-index)] with psi = sum c prod_j Omega(R_j)^{a_j} gaussian."""
    psi = QuasiGaussianState.of(psi)
    g = psi.gaussian
    n = g.n
    Rv = raising_vectors(g.A)
    rest = psi.poly.chop(0.0)
    out = []
    guard = 0
    while not rest.is_zero(1e-300):
        guard += 1
        if guard > 10000:
            raise ArithmeticError("ladder decomposition did not terminate")
        deg = rest.degree
        alpha, coef = max(((a, c) for a, c in rest.terms.items() if sum(a) == deg),
                          key=lambda ac: abs(ac[1]))
        vecs = [Rv[:, j] for j in range(n) for _ in range(alpha[j])]
        image = omega_product_apply(QuasiGaussianState(GaussianState(g.A, g.b, 1.0)), vecs)
        lead = image.poly.terms.get(alpha, 0)
        if abs(lead - 1) > 1e-9:
            raise ArithmeticError("raising vectors do not produce a unit leading term")
        rest = (rest - image.poly * coef)
        rest = Polynomial(n, {a: c for a, c in rest.terms.items()
                              if not (sum(a) > deg or (a == alpha))})
        out.append((coef, alpha))
    return out


def evolve_quasi_gaussian(psi, H: QuadraticHamiltonian, L: ConstraintPlane, t: float,
                          steps: int = 64) -> QuasiGaussianState:
    """Exact evolution on the quasi-Gaussian class by transporting raising vectors."""
    psi = QuasiGaussianState.of(psi)
    g = psi.gaussian
    n = g.n
    core_t = evolve_gaussian(GaussianState(g.A, g.b, g.c), H, L, t, steps)
    if psi.poly.degree == 0:
        return QuasiGaussianState(core_t, psi.poly * 1.0)
    red = reduce_hamiltonian(H, L)
    Ut = expm(t * _full_generator(red.gamma_full))
    Rt = Ut @ raising_vectors(g.A)
    base = QuasiGaussianState(core_t)
    total = Polynomial(n, {})
    for coef, alpha in ladder_decomposition(psi):
        vecs = [Rt[:, j] for j in range(n) for _ in range(alpha[j])]
        total = total + omega_product_apply(base, vecs).poly * coef
    return QuasiGaussianState(core_t, total)
