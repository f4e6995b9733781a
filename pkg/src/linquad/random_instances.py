"""Seeded generators of well-conditioned random test instances."""
from __future__ import annotations

import numpy as np

from .polynomial import Polynomial
from .states import GaussianState, QuasiGaussianState
from .symplectic import ConstraintPlane


def random_A(rng, n: int, im_range=(0.5, 2.0), re_scale: float = 0.5) -> np.ndarray:
    """Symmetric A with Im A eigenvalues drawn from ``im_range``."""
    O, _ = np.linalg.qr(rng.normal(size=(n, n)))
    im = O @ np.diag(rng.uniform(*im_range, size=n)) @ O.T
    R = rng.normal(size=(n, n)) * re_scale
    return 0.5 * (R + R.T) + 1j * 0.5 * (im + im.T)


def random_gaussian(rng, n: int, shift: float = 0.3) -> GaussianState:
    b = shift * (rng.normal(size=n) + 1j * rng.normal(size=n))
    c = rng.normal() + 1j * rng.normal()
    return GaussianState(random_A(rng, n), b, c)


def random_polynomial(rng, n: int, degree: int = 2, terms: int = 3) -> Polynomial:
    out = {}
    for _ in range(terms):
        powers = np.zeros(n, dtype=int)
        for _ in range(int(rng.integers(0, degree + 1))):
            powers[rng.integers(n)] += 1
        out[tuple(int(p) for p in powers)] = rng.normal() + 1j * rng.normal()
    return Polynomial(n, out)


def random_quasi(rng, n: int, degree: int = 2) -> QuasiGaussianState:
    return QuasiGaussianState(random_gaussian(rng, n), random_polynomial(rng, n, degree))


def unitary_symplectic(rng, n: int) -> np.ndarray:
    """Orthogonal symplectic matrix from a Haar-ish random unitary."""
    U, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return np.block([[U.real, -U.imag], [U.imag, U.real]])


def random_plane(rng, n: int, k: int, scale_range=(0.5, 2.0)) -> ConstraintPlane:
    """Random isotropic k-plane: a Lagrangian graph slice turned by a unitary map."""
    if k == 0:
        return ConstraintPlane.empty(n)
    S = rng.normal(size=(n, n))
    S = S + S.T
    Q = rng.normal(size=(n, k))
    X = unitary_symplectic(rng, n) @ np.vstack([S @ Q, Q])
    vecs = ConstraintPlane.from_vectors(X.T, rng.uniform(*scale_range))
    return ConstraintPlane(vecs.basis, vecs.measure_scale)


def random_symplectic(rng, n: int, scale: float = 0.4) -> np.ndarray:
    """expm(J S) for a random symmetric S."""
    from scipy.linalg import expm

    from .symplectic import standard_form

    S = rng.normal(size=(2 * n, 2 * n)) * scale
    return expm(standard_form(n) @ (S + S.T))


def random_compatible_hamiltonian(rng, L: ConstraintPlane, coupling: float = 0.3,
                                  gauge_coupling: float = 0.0):
    """Compatible H whose reduced part is positive definite, with L x (L + V) couplings.

    Built in the adapted frame [L, G, V]: the GG and GV blocks stay zero.  A nonzero
    ``gauge_coupling`` also fills the L x G block, which makes the reduced constant
    complex, so constrained norms then scale by exp(2 Im(eps') t).
    """
    from .dynamics import QuadraticHamiltonian, ReducedSpace

    n, k = L.n, L.dim
    R = ReducedSpace.of(L)
    m = 2 * (n - k)
    S = rng.normal(size=(m, m)) * 0.4
    S = S @ S.T + 0.7 * np.eye(m)
    frame = np.hstack([L.basis, R.gauge.basis, R.basis])
    core = np.zeros((2 * n, 2 * n))
    core[2 * k:, 2 * k:] = S
    LG = rng.normal(size=(k, k)) * gauge_coupling if gauge_coupling else np.zeros((k, k))
    T = np.hstack([rng.normal(size=(k, k)) * coupling, LG,
                   rng.normal(size=(k, m)) * coupling])
    core[:k, :] += T
    core[:, :k] += T.T
    return QuadraticHamiltonian(frame @ core @ frame.T, float(rng.normal()))


def random_constrained_system(rng, n: int, k: int, kind: str = "stable"):
    """(H, L, beta) in symplectically rotated normal form.

    ``kind="stable"`` uses frequencies of random sign with |beta| in [0.5, 2.5], so
    indefinite Hamiltonians appear.  ``kind="unstable"`` makes the first reduced
    mode an inverted oscillator or a free particle (Jordan block); beta is None.
    """
    from .dynamics import QuadraticHamiltonian

    if kind not in ("stable", "unstable"):
        raise ValueError("kind must be 'stable' or 'unstable'")
    S = random_symplectic(rng, n)
    L = (ConstraintPlane.from_vectors(S[:, :k].T, rng.uniform(0.5, 2.0)) if k
         else ConstraintPlane.empty(n))
    L = ConstraintPlane(L.basis, L.measure_scale)
    m = n - k
    g = np.zeros((2 * n, 2 * n))
    beta = None
    if kind == "stable":
        beta = rng.uniform(0.5, 2.5, size=m) * rng.choice([1, -1], size=m)
    for I in range(m):
        j = k + I
        if kind == "stable":
            g[j, j] = g[n + j, n + j] = beta[I]
        elif I == 0 and rng.integers(2) == 0:
            g[j, j], g[n + j, n + j] = 1.0, -1.0
        elif I == 0:
            g[n + j, n + j] = 1.0
        else:
            g[j, j] = g[n + j, n + j] = 1.0
    for a in range(k):
        v = rng.normal(size=2 * n)
        v[n:n + k] = 0.0
        e = np.zeros(2 * n)
        e[a] = 1.0
        g += np.outer(e, v) + np.outer(v, e)
    return QuadraticHamiltonian(S @ g @ S.T, float(rng.normal())), L, beta
