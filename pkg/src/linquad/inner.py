"""Constrained inner product, Gaussian equivalence and Dirac wave functions.

<f, g> = int_L dmu(X) (f, e^{i Omega(X)} g).  For quasi-Gaussians the integrand is a
polynomial times a Gaussian in the joint variables (xi, s), X = sum_a s_a X^(a), so the
whole expression is one closed-form Gaussian integral.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussint import gaussian_integral, sqrt_det
from .germs import h_germ, r_perp_and_r_minus, s_germ
from .polynomial import Polynomial
from .states import GaussianState, QuasiGaussianState
from .symplectic import (
    ConstraintPlane,
    GaugeSurface,
    find_gauge_surface,
    omega_matrix,
    pairing_constant,
)


class ClosedFormMismatch(ArithmeticError):
    pass


def _joint_form(f: QuasiGaussianState, g: QuasiGaussianState, Xp, Xq):
    """Quadratic data of conj f(xi) [e^{i Omega(X_s)} g](xi) in z = (xi, s)."""
    Af, bf = f.gaussian.A, f.gaussian.b
    Ag, bg = g.gaussian.A, g.gaussian.b
    n = Af.shape[0]
    k = Xp.shape[1]
    M = np.zeros((n + k, n + k), dtype=complex)
    M[:n, :n] = 1j * (Af.conj() - Ag)
    cross = 1j * Ag @ Xq - 1j * Xp
    M[:n, n:] = cross
    M[n:, :n] = cross.T
    M[n:, n:] = -1j * Xq.T @ Ag @ Xq + 0.5j * (Xp.T @ Xq + Xq.T @ Xp)
    v = np.concatenate([-1j * bf.conj() + 1j * bg, -1j * Xq.T @ bg])
    # conj(p_f)(xi) * p_g(xi - Xq s)
    T_f = np.hstack([np.eye(n), np.zeros((n, k))])
    T_g = np.hstack([np.eye(n), -Xq])
    poly = f.poly.conj().compose_affine(T_f) * g.poly.compose_affine(T_g)
    return M, v, poly


def gaussian_inner_product(f, g, L: ConstraintPlane) -> complex:
    """Closed-form <f, g> (antilinear in f) for quasi-Gaussian states."""
    f = QuasiGaussianState.of(f)
    g = QuasiGaussianState.of(g)
    if f.n != g.n or L.n != f.n:
        raise ValueError("states and constraint plane have different n")
    n = f.n
    Xp, Xq = L.basis[:n], L.basis[n:]
    M, v, poly = _joint_form(f, g, Xp, Xq)
    pref = np.conj(f.gaussian.c) * g.gaussian.c * L.measure_scale
    return complex(pref * gaussian_integral(M, v, 0.0, poly))


def constrained_norm(psi, L) -> float:
    return float(gaussian_inner_product(psi, psi, L).real)


def delta_coordinate_projector(A) -> float:
    """Delta(C) for C: r(A) -> C^n, with r(A) measured by the form (1/i) omega(Y, Y^*).

    In the graph basis C is the identity and the form's Gram matrix is 2 Im A.
    """
    A = np.atleast_2d(A)
    sign, logdet = np.linalg.slogdet(2 * A.imag)
    return float(np.exp(-0.5 * logdet))


def gaussian_norm_closed_form(psi: GaussianState, L: ConstraintPlane, rtol: float = 1e-8,
                              check: bool = True) -> float:
    """(2 pi)^{(n+k)/2} |c|^2 Delta(C) / Delta(P_-) for a centered Gaussian.

    Follows from int dmu(X) e^{(i/2) omega(P_- X, (P_- X)^*)} (psi, psi): the exponent is
    -1/2 s^T K s with K the P_- Gram matrix, and (psi, psi) = (2 pi)^{n/2} |c|^2 Delta(C).
    With ``check`` the value is compared with :func:`gaussian_inner_product`.
    """
    if np.abs(psi.b).max(initial=0.0) > 0:
        raise ValueError("closed-form norm applies to centered states (b = 0)")
    n, k = psi.n, L.dim
    split = r_perp_and_r_minus(psi.A, L)
    value = (2 * np.pi) ** ((n + k) / 2) * abs(psi.c) ** 2 * \
        delta_coordinate_projector(psi.A) / split.delta
    if check:
        direct = gaussian_inner_product(psi, psi, L)
        if abs(direct - value) > rtol * abs(value):
            raise ClosedFormMismatch(
                f"norm formula {value:.12g} differs from direct integral {direct:.12g}")
    return float(value)


def equivalence_residual(f, g, c, L) -> float:
    """<f - c g, f - c g> by sesquilinear expansion."""
    ff = gaussian_inner_product(f, f, L)
    fg = gaussian_inner_product(f, g, L)
    gf = np.conj(fg)
    gg = gaussian_inner_product(g, g, L)
    return float((ff - c * fg - np.conj(c) * gf + abs(c) ** 2 * gg).real)


def gaussian_equivalent(f: GaussianState, g: GaussianState, L: ConstraintPlane,
                        rtol: float = 1e-9):
    """c with f ~ c g when the H-germs agree, else None."""
    if not h_germ(f.A, L).same_span(h_germ(g.A, L)):
        return None
    gg = gaussian_inner_product(g, g, L)
    gf = gaussian_inner_product(g, f, L)
    c = gf / gg
    ff = gaussian_inner_product(f, f, L)
    resid = (ff - abs(gf) ** 2 / gg).real
    if abs(resid) > rtol * abs(ff):
        raise ClosedFormMismatch(f"equal H-germs but residual norm {resid:.3g}")
    return complex(c)


@dataclass(frozen=True)
class DiracGaussian:
    """c * delta^{k0}(D xi) * exp(i/2 xi^T A xi + i b^T xi).

    ``delta_directions`` D has shape (k0, n); it is empty when the plane projects
    injectively to the P = 0 plane.  Only the restriction of the exponential to
    D xi = 0 is meaningful when k0 > 0.
    """

    A: np.ndarray
    b: np.ndarray
    c: complex
    delta_directions: np.ndarray
    plane: ConstraintPlane

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def regular(self) -> bool:
        return self.delta_directions.shape[0] == 0

    def __call__(self, xi):
        if not self.regular:
            raise ValueError("pointwise values undefined for a delta-supported state")
        xi = np.asarray(xi)
        return self.c * np.exp(0.5j * np.einsum("...i,ij,...j->...", xi, self.A, xi)
                               + 1j * xi @ self.b)

    def annihilation_residual(self) -> float:
        """max over X in L of the coefficient norm of Omega(X) psi_D.

        Regular part: ((P - A Q) . xi - Q . b) must vanish.  Delta part: the
        multiplier P . xi is zero on the support when P lies in the row space of D,
        and the derivative of the delta is absent when Q = 0.
        """
        n = self.n
        worst = 0.0
        D = self.delta_directions
        proj = D.T @ np.linalg.pinv(D.T) if D.size else np.zeros((n, n))
        for X in self.plane.basis.T:
            P, Q = X[:n], X[n:]
            if D.size and np.abs(D @ Q).max() > 1e-12:
                worst = max(worst, float(np.abs(D @ Q).max()))
                continue
            lin = P - self.A @ Q
            lin = lin - proj @ lin
            worst = max(worst, float(np.abs(lin).max()), abs(Q @ self.b))
        return worst


def _kernel_split(U, rtol=1e-10):
    """Orthonormal bases of complement and kernel of U (columns in s-space)."""
    k = U.shape[1]
    if k == 0:
        return np.zeros((0, 0)), np.zeros((0, 0))
    _, s, Vh = np.linalg.svd(U)
    s_full = np.zeros(k)
    s_full[:s.size] = s
    keep = s_full > rtol * max(s_full.max(), 1.0)
    V = Vh.conj().T
    return V[:, keep], V[:, ~keep]


def dirac_project(psi: GaussianState, L: ConstraintPlane, G: GaugeSurface | None = None) -> DiracGaussian:
    """psi_D = int dmu(X) e^{i Omega(X)} psi as an explicit (delta-)Gaussian.

    Shift directions with zero Q-part act by e^{i P.xi}; integrating them gives
    (2 pi)^{k0} delta(P^T xi).  The remaining directions give a Gaussian integral
    with Re part U^T Im A U > 0.
    """
    n = psi.n
    Xp, Xq = L.basis[:n], L.basis[n:]
    Rs, Ns = _kernel_split(Xq)
    k0 = Ns.shape[1]
    D = (Xp @ Ns).T if k0 else np.zeros((0, n))
    Ur, Vr = Xq @ Rs, Xp @ Rs
    A, b = psi.A, psi.b
    kr = Ur.shape[1]
    amp = psi.c * L.measure_scale * (2 * np.pi) ** k0
    if kr == 0:
        return DiracGaussian(A.copy(), b.copy(), complex(amp), D, L)
    M = -1j * Ur.T @ A @ Ur + 0.5j * (Vr.T @ Ur + Ur.T @ Vr)
    Lm = 1j * (Vr.T - Ur.T @ A)
    Minv = np.linalg.inv(M)
    A_d = A - 1j * Lm.T @ Minv @ Lm
    A_d = 0.5 * (A_d + A_d.T)
    b_d = b - Lm.T @ Minv @ Ur.T @ b
    amp = amp * (2 * np.pi) ** (kr / 2) / sqrt_det(M) * np.exp(-0.5 * b @ Ur @ Minv @ Ur.T @ b)
    return DiracGaussian(A_d, b_d, complex(amp), D, L)


def dirac_from_germ(psi: GaussianState, L: ConstraintPlane):
    """(A_check, c_check) from the H-germ projectors.

    A_check = B_check C_check^{-1};  c_check = c (2 pi)^{k/2} sqrt(det(Pi C_check^{-1} C P_-)) / Delta(P_-)
    with the determinant taken on L^C.  Requires b = 0 and an invertible C_check.
    """
    n, k = psi.n, L.dim
    A = psi.A
    split = r_perp_and_r_minus(A, L)
    rc = np.hstack([split.r_perp, L.basis.astype(complex)])
    Bc, Cc = rc[:n], rc[n:]
    if np.linalg.matrix_rank(Cc, tol=1e-10) < n:
        raise ValueError("plane does not project injectively to the P = 0 plane")
    A_check = Bc @ np.linalg.inv(Cc)
    A_check = 0.5 * (A_check + A_check.T)
    if k == 0:
        return A_check, complex(psi.c)
    # C P_- X in C^n, pulled back to rc coordinates; Pi keeps the L^C coordinates
    CPm = split.P_minus[n:]
    coords = np.linalg.solve(Cc, CPm)
    T = coords[n - k:]
    lam = np.linalg.eigvals(T)
    root = np.prod(np.sqrt(lam.astype(complex)))
    c_check = psi.c * (2 * np.pi) ** (k / 2) * root / split.delta
    return A_check, complex(c_check)


def default_weight(L: ConstraintPlane, G: GaugeSurface):
    """(rho0, S): rho(t) = rho0 exp(-1/2 t^T S t) with unit covariance, rho(0) = 1/Delta."""
    return 1.0 / pairing_constant(L, G), np.eye(G.dim)


def dirac_inner_product(phi: DiracGaussian, psi: DiracGaussian, L: ConstraintPlane,
                        G: GaugeSurface | None = None, rho=None, rtol: float = 1e-12) -> complex:
    """<phi_D, psi_D>_D = int_G dsigma(Y) rho(Y) (phi_D, e^{i Omega(Y)} psi_D).

    Deltas are written as (2 pi)^{-k0} int d lambda e^{i lambda . D xi} so that the whole
    expression is one Gaussian integral over (xi, t, lambda, lambda').
    ``rho`` is (rho0, S); rho0 must equal 1/Delta.
    """
    G = find_gauge_surface(L) if G is None else G
    if rho is None:
        rho = default_weight(L, G)
    rho0, S = rho
    Delta = pairing_constant(L, G)
    if abs(rho0 * Delta - 1.0) > 1e-9:
        raise ValueError(f"weight not normalized: rho(0) * Delta = {rho0 * Delta:.6g}, expected 1")
    n, k = psi.n, G.dim
    Yp, Yq = G.basis[:n], G.basis[n:]
    D, Dp = psi.delta_directions, phi.delta_directions
    k0, k0p = D.shape[0], Dp.shape[0]
    m = n + k + k0 + k0p
    M = np.zeros((m, m), dtype=complex)
    ix = slice(0, n)
    it = slice(n, n + k)
    il = slice(n + k, n + k + k0)
    ilp = slice(n + k + k0, m)
    Ad, Ap = psi.A, phi.A
    M[ix, ix] = 1j * (Ap.conj() - Ad)
    cross = 1j * Ad @ Yq - 1j * Yp
    M[ix, it] = cross
    M[it, ix] = cross.T
    M[it, it] = -1j * Yq.T @ Ad @ Yq + 0.5j * (Yp.T @ Yq + Yq.T @ Yp) + S
    if k0:
        M[ix, il] = -1j * D.T
        M[il, ix] = -1j * D
        M[it, il] = 1j * Yq.T @ D.T
        M[il, it] = 1j * D @ Yq
    if k0p:
        M[ix, ilp] = 1j * Dp.T
        M[ilp, ix] = 1j * Dp
    v = np.zeros(m, dtype=complex)
    v[ix] = -1j * phi.b.conj() + 1j * psi.b
    v[it] = -1j * Yq.T @ psi.b
    pref = np.conj(phi.c) * psi.c * rho0 * G.measure_scale * (2 * np.pi) ** (-(k0 + k0p))
    return complex(pref * gaussian_integral(M, v))


def null_reduce(psi, L: ConstraintPlane) -> QuasiGaussianState:
    """Representative of psi modulo span{Omega(X) h : X in L} without L-directions.

    In coordinates y = T xi whose first k rows are P_a - A Q_a, Omega(X_a) acts as
    (y_a - Q_a . b) + i (T Q_a) . grad_y, so every monomial containing y_a is the
    leading term of an Omega(X_a)-image of lower-degree data and can be removed
    exactly.  The remainder depends only on the last n - k coordinates.
    """
    from scipy.linalg import null_space

    psi = QuasiGaussianState.of(psi)
    g = psi.gaussian
    n, k = g.n, L.dim
    if k == 0:
        return psi
    Xp, Xq = L.basis[:n], L.basis[n:]
    rows = (Xp - g.A @ Xq).T
    comp = null_space(rows.conj()).conj().T
    T = np.vstack([rows, comp])
    q = psi.poly.compose_affine(np.linalg.inv(T))
    shifts = [complex(Xq[:, a] @ g.b) for a in range(k)]
    grads = [T @ Xq[:, a] for a in range(k)]
    terms = dict(q.terms)
    while True:
        pending = [m for m, c in terms.items() if c != 0 and any(m[a] for a in range(k))]
        if not pending:
            break
        mono = max(pending, key=sum)
        c = terms.pop(mono)
        a = next(j for j in range(k) if mono[j])
        base = list(mono)
        base[a] -= 1
        base = tuple(base)
        # subtract c * Omega(X_a) y^base; its leading term cancels mono
        terms[base] = terms.get(base, 0) + c * shifts[a]
        for j in range(n):
            if base[j] and grads[a][j] != 0:
                lower = list(base)
                lower[j] -= 1
                lower = tuple(lower)
                terms[lower] = terms.get(lower, 0) - 1j * c * grads[a][j] * base[j]
    rem = Polynomial(n, {m: c for m, c in terms.items() if c != 0})
    return QuasiGaussianState(g, rem.compose_affine(T))


def residual_norm(psi, L: ConstraintPlane) -> float:
    """<psi, psi>^{1/2} evaluated after removing null components symbolically."""
    red = null_reduce(psi, L)
    if red.poly.is_zero():
        return 0.0
    return float(np.sqrt(max(gaussian_inner_product(red, red, L).real, 0.0)))
