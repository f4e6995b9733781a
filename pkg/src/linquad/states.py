"""Gaussian and quasi-Gaussian wave functions and the operators Omega(Y), e^{i Omega(X)}.

A Gaussian state is  c exp(i/2 xi^T A xi + i b^T xi)  and a quasi-Gaussian state
multiplies it by a polynomial P(xi).  Omega(P, Q) = sum_j (P_j xi_j - Q_j (1/i) d/dxi_j).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .polynomial import Polynomial

SYM_TOL = 1e-10


class InvalidStateError(ValueError):
    pass


@dataclass(frozen=True)
class GaussianState:
    A: np.ndarray
    b: np.ndarray
    c: complex = 1.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=complex))
        n = A.shape[0]
        if A.shape != (n, n):
            raise InvalidStateError(f"A must be square, got {A.shape}")
        scale = max(1.0, np.abs(A).max())
        if np.abs(A - A.T).max() > SYM_TOL * scale:
            raise InvalidStateError("A is not symmetric")
        A = 0.5 * (A + A.T)
        im_eigs = np.linalg.eigvalsh(A.imag) if n else np.zeros(0)
        if n and im_eigs.min() <= SYM_TOL * scale:
            raise InvalidStateError(
                f"Im A is not positive definite (smallest eigenvalue {im_eigs.min():.3g})")
        b = np.zeros(n, dtype=complex) if self.b is None else np.asarray(self.b, dtype=complex)
        if b.shape != (n,):
            raise InvalidStateError(f"b must have length {n}")
        if self.c == 0:
            raise InvalidStateError("amplitude c must be nonzero")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", complex(self.c))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def exponent(self, xi):
        xi = np.asarray(xi)
        return 0.5j * np.sum((xi @ self.A) * xi, axis=-1) + 1j * xi @ self.b

    def __call__(self, xi):
        return self.c * np.exp(self.exponent(xi))

    def with_amplitude(self, c) -> "GaussianState":
        return GaussianState(self.A, self.b, c)


def make_gaussian(A, b=None, c=1.0) -> GaussianState:
    """Validated Gaussian state c exp(i/2 xi^T A xi + i b^T xi)."""
    return GaussianState(A, b, c)


@dataclass(frozen=True)
class QuasiGaussianState:
    gaussian: GaussianState
    poly: Polynomial = field(default=None)

    def __post_init__(self):
        if self.poly is None:
            object.__setattr__(self, "poly", Polynomial.constant(self.gaussian.n))
        if self.poly.nvars != self.gaussian.n:
            raise InvalidStateError("polynomial variable count differs from n")

    @classmethod
    def of(cls, psi) -> "QuasiGaussianState":
        if isinstance(psi, QuasiGaussianState):
            return psi
        if isinstance(psi, GaussianState):
            return cls(psi)
        raise TypeError(f"not a (quasi-)Gaussian state: {type(psi).__name__}")

    @property
    def n(self) -> int:
        return self.gaussian.n

    def __call__(self, xi):
        return self.poly(np.asarray(xi, dtype=complex)) * self.gaussian(xi)

    def _same_core(self, other):
        g, h = self.gaussian, other.gaussian
        if not (np.allclose(g.A, h.A, rtol=0, atol=1e-14) and
                np.allclose(g.b, h.b, rtol=0, atol=1e-14)):
            raise ValueError("quasi-Gaussian sums need a common Gaussian factor")
        return h.c / g.c

    def __add__(self, other):
        other = QuasiGaussianState.of(other)
        ratio = self._same_core(other)
        return QuasiGaussianState(self.gaussian, self.poly + other.poly * ratio)

    def __sub__(self, other):
        return self + QuasiGaussianState.of(other) * -1

    def __mul__(self, scalar):
        return QuasiGaussianState(self.gaussian, self.poly * scalar)

    __rmul__ = __mul__

    def is_zero(self, tol: float = 1e-10) -> bool:
        return self.poly.is_zero(tol)


def _split(Y, n):
    Y = np.asarray(Y)
    if Y.shape != (2 * n,):
        raise ValueError(f"phase vector must have length {2 * n}, got {Y.shape}")
    return Y[:n], Y[n:]


def omega_op_apply(psi, Y) -> QuasiGaussianState:
    """Omega(Y) psi, exact on the quasi-Gaussian class.

    On P(xi) g(xi): [((P - A Q) . xi - Q . b) P + i Q . grad P] g.
    """
    psi = QuasiGaussianState.of(psi)
    g = psi.gaussian
    n = g.n
    P, Q = _split(Y, n)
    lin = Polynomial.linear(P - g.A @ Q, -(Q @ g.b))
    out = lin * psi.poly
    for j in range(n):
        if Q[j] != 0:
            out = out + psi.poly.derivative(j) * (1j * Q[j])
    return QuasiGaussianState(g, out)


def omega_product_apply(psi, vectors) -> QuasiGaussianState:
    """Omega(Y_1) ... Omega(Y_p) psi (rightmost applied first)."""
    out = QuasiGaussianState.of(psi)
    for Y in reversed(list(vectors)):
        out = omega_op_apply(out, Y)
    return out


def quadratic_op_apply(psi, gamma, epsilon=0.0) -> QuasiGaussianState:
    """[Omega_2(Gamma) + epsilon] psi with Omega_2 = 1/2 sum Gamma_ij Omega(Z_i) Omega(Z_j)."""
    psi = QuasiGaussianState.of(psi)
    gamma = np.asarray(gamma)
    dim = gamma.shape[0]
    basis = np.eye(dim)
    once = [omega_op_apply(psi, basis[j]) for j in range(dim)]
    total = psi.poly * epsilon
    for i in range(dim):
        for j in range(dim):
            if gamma[i, j] != 0:
                total = total + omega_op_apply(once[j], basis[i]).poly * (0.5 * gamma[i, j])
    return QuasiGaussianState(psi.gaussian, total)


def weyl_apply(psi, X) -> QuasiGaussianState:
    """e^{i Omega(P,Q)} psi(xi) = e^{i P.xi - i/2 P.Q} psi(xi - Q).

    Shifts the polynomial, moves b to b - A Q + P and rescales c; no truncation.
    """
    psi = QuasiGaussianState.of(psi)
    g = psi.gaussian
    P, Q = _split(X, g.n)
    new_b = g.b - g.A @ Q + P
    new_c = g.c * np.exp(0.5j * Q @ g.A @ Q - 1j * g.b @ Q - 0.5j * P @ Q)
    return QuasiGaussianState(GaussianState(g.A, new_b, new_c), psi.poly.shift(Q))
