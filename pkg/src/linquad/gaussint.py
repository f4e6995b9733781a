"""Closed-form (oscillatory) Gaussian integrals with polynomial weights.

Evaluates  int_{R^m} p(z) exp(-1/2 z^T M z + v^T z + c0) dz  for complex symmetric
M with Re M >= 0 and det M != 0.  For semidefinite Re M the integral is read as the
limit of the absolutely convergent regularized integral, which the analytic formula
continues to.
"""
from __future__ import annotations

import numpy as np

from .polynomial import Polynomial


class GaussianIntegralError(ValueError):
    pass


def sqrt_det(M) -> complex:
    """det(M)^{1/2} on the branch continuous from Re M > 0.

    Eigenvalues of M lie in the closed right half-plane, so the product of
    principal square roots is continuous along M + tau I, tau -> 0.
    """
    M = np.atleast_2d(M)
    if M.shape[0] == 0:
        return 1.0 + 0j
    lam = np.linalg.eigvals(M)
    scale = max(np.abs(lam).max(), 1e-300)
    if lam.real.min() < -1e-8 * scale:
        raise GaussianIntegralError(f"Re M not positive semidefinite (eigenvalue {lam.real.min():.3g})")
    if np.abs(lam).min() < 1e-13 * scale:
        raise GaussianIntegralError("quadratic form is singular")
    return complex(np.prod(np.sqrt(lam.astype(complex))))


def wick_moments(cov, alphas):
    """E[w^alpha] for w ~ N(0, cov) with formal complex covariance."""
    cov = np.asarray(cov)
    memo: dict[tuple[int, ...], complex] = {}

    def moment(alpha):
        if alpha in memo:
            return memo[alpha]
        total = sum(alpha)
        if total == 0:
            val = 1.0 + 0j
        elif total % 2:
            val = 0j
        else:
            i = next(j for j, a in enumerate(alpha) if a)
            beta = list(alpha)
            beta[i] -= 1
            val = 0j
            for j, bj in enumerate(beta):
                if bj:
                    gamma = list(beta)
                    gamma[j] -= 1
                    val += cov[i, j] * bj * moment(tuple(gamma))
        memo[alpha] = val
        return val

    return [moment(tuple(a)) for a in alphas]


def gaussian_integral(M, v, c0: complex = 0.0, poly: Polynomial | None = None) -> complex:
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    m = M.shape[0]
    v = np.asarray(v, dtype=complex).reshape(m)
    if poly is not None and poly.nvars != m:
        raise ValueError("polynomial variable count differs from integral dimension")
    if m == 0:
        base = np.exp(c0)
        return complex(base * (poly.terms.get((), 0) if poly is not None else 1.0))
    M = 0.5 * (M + M.T)
    sd = sqrt_det(M)
    mu = np.linalg.solve(M, v)
    Z = (2 * np.pi) ** (m / 2) / sd * np.exp(0.5 * v @ mu + c0)
    if poly is None:
        return complex(Z)
    cov = np.linalg.inv(M)
    shifted = poly.shift(-mu)
    alphas = list(shifted.terms)
    moments = wick_moments(cov, alphas)
    return complex(Z * sum(shifted.terms[a] * mom for a, mom in zip(alphas, moments)))
